#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ferify/auth.hpp"
#include "ferify/guest.hpp"
#include "ferify/sacl.hpp"
#include "ferify/syscall.hpp"
#include "ferify/trap.hpp"

namespace ferify {

struct OwnershipRecord {
  Pid pid = 0;
  Uid uid = 0;
  Gid gid = 0;
  Seq recorded_at = 0;
};

class OwnershipError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ResolvedOwner {
  Credentials creds;
  bool mismatch = false;
};

/// Authoritative (uid, gid) of each process as captured at fork time.
class OwnershipTable {
 public:
  /// Throws OwnershipError if `pid` is already tracked.
  void on_fork(Pid pid, Uid uid, Gid gid, Seq seq);
  /// Legitimate credential change. Throws OwnershipError for an unknown pid.
  void on_sudo(Pid pid, Uid new_uid, Gid new_gid);
  void on_exit(Pid pid);

  /// Recorded creds win over claimed ones; untracked pids pass their claim through.
  ResolvedOwner resolve(Pid pid, Credentials claimed) const;

  const OwnershipRecord* find(Pid pid) const;
  std::size_t size() const { return records_.size(); }

 private:
  std::unordered_map<Pid, OwnershipRecord> records_;
};

enum class VerdictReason : std::uint8_t {
  Permit,
  SaclDeny,
  HardDeniedCall,
  Unauthenticated,
  WhitelistMiss,
  OwnershipMismatchDeny,
};

std::string_view to_string(VerdictReason reason);

struct PolicyOptions {
  bool exec_whitelist = false;
  TrapMode trap_mode = TrapMode::Classic4;
  std::set<SyscallId> hard_denied_calls = default_hard_denied();
  /// Deny instead of just logging when claimed creds differ from the recorded owner.
  bool deny_on_ownership_mismatch = false;

  static std::set<SyscallId> default_hard_denied();
  /// Throws std::invalid_argument if a mandatory hard-denied call is missing.
  void validate() const;
};

struct AccessRequest {
  std::string path;
  AccessKind kind = AccessKind::Read;
  friend bool operator==(const AccessRequest&, const AccessRequest&) = default;
};

struct AccessCheck {
  std::string path;
  AccessKind kind = AccessKind::Read;
  Decision decision = Decision::Permit;
};

struct Verdict {
  Decision decision = Decision::Permit;
  VerdictReason reason = VerdictReason::Permit;
  std::vector<AccessCheck> checks;
  Credentials resolved;
  bool mismatch = false;
  bool token_handled = false;
  std::size_t sacl_probes = 0;
};

/// (path, kind) pairs a file-operation call must pass. Throws std::invalid_argument for
/// non-file calls. Nulled path slots contribute nothing.
std::vector<AccessRequest> required_checks(const SyscallEvent& event);

/// Mutable mediation state, owned by the simulator loop.
struct MediationState {
  OwnershipTable owners;
  AuthSessions sessions;
};

/// The per-trap callback decision. `claimed` is the caller's credentials as the guest kernel holds them.
Verdict mediate(const SyscallEvent& event, Credentials claimed, const Sacl& sacl, MediationState& state,
                const PolicyOptions& options, const AuthConfig& auth, Seq now);

/// Deny nulls the first path slot (the first slot for calls without a path); Permit forwards unchanged.
SyscallEvent apply_verdict(const SyscallEvent& event, const Verdict& verdict);

/// CSV header for the decision log.
std::string decision_log_header();
std::string decision_log_row(const SyscallEvent& event, const Verdict& verdict);

}  // namespace ferify
