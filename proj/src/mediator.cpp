#include "ferify/mediator.hpp"

#include <algorithm>
#include <array>

namespace ferify {

void OwnershipTable::on_fork(Pid pid, Uid uid, Gid gid, Seq seq) {
  if (!records_.try_emplace(pid, OwnershipRecord{pid, uid, gid, seq}).second)
    throw OwnershipError("pid " + std::to_string(pid) + " is already tracked");
}

void OwnershipTable::on_sudo(Pid pid, Uid new_uid, Gid new_gid) {
  auto it = records_.find(pid);
  if (it == records_.end()) throw OwnershipError("sudo for untracked pid " + std::to_string(pid));
  it->second.uid = new_uid;
  it->second.gid = new_gid;
}

void OwnershipTable::on_exit(Pid pid) { records_.erase(pid); }

ResolvedOwner OwnershipTable::resolve(Pid pid, Credentials claimed) const {
  auto it = records_.find(pid);
  if (it == records_.end()) return {claimed, false};
  Credentials recorded{it->second.uid, it->second.gid};
  return {recorded, recorded != claimed};
}

const OwnershipRecord* OwnershipTable::find(Pid pid) const {
  auto it = records_.find(pid);
  return it == records_.end() ? nullptr : &it->second;
}

std::string_view to_string(VerdictReason reason) {
  switch (reason) {
    case VerdictReason::Permit: return "Permit";
    case VerdictReason::SaclDeny: return "SaclDeny";
    case VerdictReason::HardDeniedCall: return "HardDeniedCall";
    case VerdictReason::Unauthenticated: return "Unauthenticated";
    case VerdictReason::WhitelistMiss: return "WhitelistMiss";
    case VerdictReason::OwnershipMismatchDeny: return "OwnershipMismatchDeny";
  }
  return "?";
}

std::set<SyscallId> PolicyOptions::default_hard_denied() {
  return {SyscallId::InitModule, SyscallId::FinitModule, SyscallId::KexecLoad, SyscallId::NameToHandleAt,
          SyscallId::OpenByHandleAt};
}

void PolicyOptions::validate() const {
  for (SyscallId id : default_hard_denied())
    if (!hard_denied_calls.contains(id))
      throw std::invalid_argument(std::string(to_string(id)) + " must stay hard-denied");
}

namespace {

// Up to four checks (rename: both paths and both parents); views point into the event.
struct RequestView {
  std::string_view path;
  AccessKind kind;
};

struct RequestList {
  std::array<RequestView, 4> items;
  std::size_t size = 0;

  void add(std::string_view path, AccessKind kind) {
    for (std::size_t i = 0; i < size; ++i)
      if (items[i].path == path && items[i].kind == kind) return;
    items[size++] = {path, kind};
  }
  void add_parent(std::optional<std::string_view> path) {
    if (!path || path->size() <= 1) return;
    std::size_t slash = path->rfind('/');
    if (slash == std::string_view::npos) return;
    add(path->substr(0, slash == 0 ? 1 : slash), AccessKind::Write);
  }
};

RequestList collect_checks(const SyscallEvent& event) {
  if (!is_file_operation(event.call))
    throw std::invalid_argument(std::string(to_string(event.call)) + " is not a file operation");

  RequestList out;
  switch (event.call) {
    case SyscallId::Open:
    case SyscallId::Openat: {
      auto path = event.path(0);
      if (!path) break;
      OpenFlags flags = event.open_flags().value_or(OpenFlags{});
      if (flags.wants_read()) out.add(*path, AccessKind::Read);
      if (flags.wants_write()) out.add(*path, AccessKind::Write);
      if (flags.create) out.add_parent(path);
      break;
    }
    case SyscallId::Rename:
    case SyscallId::Renameat:
    case SyscallId::Renameat2: {
      auto src = event.path(0);
      auto dst = event.path(1);
      if (src) out.add(*src, AccessKind::Write);
      if (dst) out.add(*dst, AccessKind::Write);
      out.add_parent(src);
      out.add_parent(dst);
      break;
    }
    case SyscallId::Unlink:
    case SyscallId::Unlinkat: {
      auto path = event.path(0);
      if (path) out.add(*path, AccessKind::Write);
      out.add_parent(path);
      break;
    }
    case SyscallId::Truncate:
      if (auto path = event.path(0)) out.add(*path, AccessKind::Write);
      break;
    case SyscallId::Link:
    case SyscallId::Linkat:
    case SyscallId::Symlink:
    case SyscallId::Symlinkat: {
      auto created = event.path(1);
      if (created) out.add(*created, AccessKind::Write);
      out.add_parent(created);
      break;
    }
    case SyscallId::Execve:
    case SyscallId::Execveat:
      if (auto path = event.path(0)) out.add(*path, AccessKind::Execute);
      break;
    default:
      break;
  }
  return out;
}

Verdict deny(Verdict v, VerdictReason reason) {
  v.decision = Decision::Deny;
  v.reason = reason;
  return v;
}

bool is_execve(SyscallId id) { return id == SyscallId::Execve || id == SyscallId::Execveat; }

}  // namespace

std::vector<AccessRequest> required_checks(const SyscallEvent& event) {
  RequestList list = collect_checks(event);
  std::vector<AccessRequest> out;
  out.reserve(list.size);
  for (std::size_t i = 0; i < list.size; ++i) out.push_back({std::string(list.items[i].path), list.items[i].kind});
  return out;
}

Verdict mediate(const SyscallEvent& event, Credentials claimed, const Sacl& sacl, MediationState& state,
                const PolicyOptions& options, const AuthConfig& auth, Seq now) {
  // Start loading the SACL slots for the event's paths so the misses overlap the work below.
  struct Pending {
    std::string_view path;
    std::uint64_t hash;
  };
  std::array<Pending, 2> pending{};
  std::size_t pending_count = 0;
  const bool file_op = is_file_operation(event.call);
  if (file_op)
    for (std::size_t i = 0; i < pending.size(); ++i)
      if (auto path = event.path(i)) pending[pending_count++] = {*path, sacl.prefetch(*path)};

  Verdict v;
  ResolvedOwner owner = state.owners.resolve(event.pid, claimed);
  v.resolved = owner.creds;
  v.mismatch = owner.mismatch;

  if (options.hard_denied_calls.contains(event.call)) return deny(std::move(v), VerdictReason::HardDeniedCall);

  if (event.call == SyscallId::Open || event.call == SyscallId::Openat) {
    if (auto path = event.path(0))
      v.token_handled = try_token_auth(*path, owner.creds.uid, auth, state.sessions, now);
  }

  if (owner.mismatch && options.deny_on_ownership_mismatch)
    return deny(std::move(v), VerdictReason::OwnershipMismatchDeny);

  if (!file_op) return v;
  const RequestList requests = collect_checks(event);
  const std::size_t n = requests.size;

  // One probe per distinct path; requests on the same path share it.
  std::array<std::optional<SaclRule>, 4> rules{};
  for (std::size_t i = 0; i < n; ++i) {
    const std::string_view path = requests.items[i].path;
    std::size_t same = 0;
    while (same < i && requests.items[same].path != path) ++same;
    if (same < i) {
      rules[i] = rules[same];
      continue;
    }
    auto hit = std::find_if(pending.begin(), pending.begin() + pending_count,
                            [path](const Pending& p) { return p.path == path; });
    rules[i] = sacl.rule(path, hit != pending.begin() + pending_count ? hit->hash : Sacl::hash_of(path));
    ++v.sacl_probes;
  }

  if (!state.sessions.is_authenticated(owner.creds.uid, now, auth)) {
    for (std::size_t i = 0; i < n; ++i)
      if (rules[i]) return deny(std::move(v), VerdictReason::Unauthenticated);
  }

  if (options.exec_whitelist && is_execve(event.call)) {
    for (std::size_t i = 0; i < n; ++i)
      if (requests.items[i].kind == AccessKind::Execute && !rules[i])
        return deny(std::move(v), VerdictReason::WhitelistMiss);
  }

  bool denied = false;
  v.checks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const RequestView& req = requests.items[i];
    Decision absent = options.exec_whitelist && req.kind == AccessKind::Execute ? Decision::Deny : Decision::Permit;
    Decision d = decide_access(rules[i], owner.creds.uid, owner.creds.gid, req.kind, absent);
    v.checks.push_back(AccessCheck{std::string(req.path), req.kind, d});
    denied = denied || d == Decision::Deny;
  }
  if (denied) return deny(std::move(v), VerdictReason::SaclDeny);
  return v;
}

SyscallEvent apply_verdict(const SyscallEvent& event, const Verdict& verdict) {
  SyscallEvent out = event;
  if (verdict.decision == Decision::Permit || out.args.empty()) return out;
  auto paths = out.path_slot_indices();
  std::size_t slot = paths.empty() ? 0 : paths.front();
  out.args[slot] = NullAddress{};
  return out;
}

std::string decision_log_header() { return "seq,pid,call,resolved_uid,resolved_gid,decision,reason,mismatch"; }

std::string decision_log_row(const SyscallEvent& event, const Verdict& verdict) {
  std::string row;
  row += std::to_string(event.seq);
  row += ',';
  row += std::to_string(event.pid);
  row += ',';
  row += to_string(event.call);
  row += ',';
  row += std::to_string(verdict.resolved.uid);
  row += ',';
  row += std::to_string(verdict.resolved.gid);
  row += ',';
  row += to_string(verdict.decision);
  row += ',';
  row += to_string(verdict.reason);
  row += ',';
  row += verdict.mismatch ? "1" : "0";
  return row;
}

}  // namespace ferify
