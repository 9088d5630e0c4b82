#include "ferify/guest.hpp"

#include <algorithm>

namespace ferify {

namespace {

constexpr std::string_view kErrorNames[] = {
    "BadAddress", "BadFileDescriptor", "NoSuchFile", "PermissionDenied", "FileExists", "IsDirectory", "NoSuchProcess",
};

bool under(std::string_view path, std::string_view dir) {
  return path.size() > dir.size() && path.starts_with(dir) && path[dir.size()] == '/';
}

}  // namespace

std::string_view to_string(ErrorCode code) { return kErrorNames[static_cast<std::size_t>(code)]; }

std::optional<ErrorCode> parse_error_code(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kErrorNames); ++i)
    if (kErrorNames[i] == name) return static_cast<ErrorCode>(i);
  return std::nullopt;
}

std::string outcome_name(const SyscallOutcome& outcome) {
  return outcome.ok() ? "success" : std::string(to_string(*outcome.error));
}

ErrorCode nulled_slot_error(const SyscallEvent& event) {
  switch (event.call) {
    case SyscallId::Open:
    case SyscallId::Openat: {
      // The shell's redirection reports the failed write on the bad descriptor; plain
      // readers see the faulting path pointer.
      auto flags = event.open_flags();
      return flags && flags->wants_write() ? ErrorCode::BadFileDescriptor : ErrorCode::BadAddress;
    }
    case SyscallId::InitModule:
    case SyscallId::FinitModule:
    case SyscallId::OpenByHandleAt:
      return ErrorCode::BadFileDescriptor;
    default:
      return ErrorCode::BadAddress;
  }
}

std::optional<std::string> parent_path(std::string_view path) {
  if (path.size() <= 1) return std::nullopt;
  std::size_t slash = path.rfind('/');
  if (slash == std::string_view::npos) return std::nullopt;
  if (slash == 0) return std::string("/");
  return std::string(path.substr(0, slash));
}

Guest::Guest() {
  files_.emplace("/", GuestFile{"/", 0, 0, PermissionOctets(7, 5, 5), true});
  processes_.emplace(1, Process{1, {0, 0}, 0, true});
  users_.emplace(0, UserAccount{0, 0, "root"});
}

void Guest::add_user(UserAccount user) {
  if (users_.contains(user.uid)) throw GuestError("duplicate uid " + std::to_string(user.uid));
  users_.emplace(user.uid, std::move(user));
}

const UserAccount* Guest::user(Uid uid) const {
  auto it = users_.find(uid);
  return it == users_.end() ? nullptr : &it->second;
}

void Guest::add_file(GuestFile file, bool create_parents) {
  if (file.path.empty() || file.path.front() != '/') throw GuestError("guest path must be absolute: '" + file.path + "'");
  if (file.path.size() > 1 && file.path.back() == '/') file.path.pop_back();
  if (files_.contains(file.path)) throw GuestError("duplicate guest path '" + file.path + "'");
  auto parent = parent_path(file.path);
  if (parent) {
    auto it = files_.find(*parent);
    if (it == files_.end()) {
      if (!create_parents) throw GuestError("missing parent directory '" + *parent + "'");
      add_file(GuestFile{*parent, 0, 0, PermissionOctets(7, 5, 5), true}, true);
    } else if (!it->second.is_directory) {
      throw GuestError("parent '" + *parent + "' is not a directory");
    }
  }
  std::string key = file.path;
  files_.emplace(std::move(key), std::move(file));
}

const GuestFile* Guest::file(std::string_view path) const {
  auto it = files_.find(path);
  return it == files_.end() ? nullptr : &it->second;
}

bool Guest::remove_file(std::string_view path) {
  auto it = files_.find(path);
  if (it == files_.end()) return false;
  files_.erase(it);
  return true;
}

Pid Guest::spawn_process(Pid parent, Credentials creds, std::optional<Pid> requested) {
  if (!is_alive(parent)) throw GuestError("spawn from unknown or dead parent pid " + std::to_string(parent));
  Pid pid = requested.value_or(next_pid_);
  if (pid <= 0) throw GuestError("pid must be positive");
  if (is_alive(pid)) throw GuestError("pid " + std::to_string(pid) + " is already live");
  processes_[pid] = Process{pid, creds, parent, true};
  next_pid_ = std::max(next_pid_, pid + 1);
  fork_notices_.push_back(ForkNotice{pid, parent, creds, clock_});
  return pid;
}

const Process* Guest::process(Pid pid) const {
  auto it = processes_.find(pid);
  return it == processes_.end() ? nullptr : &it->second;
}

bool Guest::is_alive(Pid pid) const {
  const Process* p = process(pid);
  return p != nullptr && p->alive;
}

std::vector<Pid> Guest::live_pids() const {
  std::vector<Pid> out;
  for (const auto& [pid, p] : processes_)
    if (p.alive) out.push_back(pid);
  return out;
}

void Guest::set_credentials(Pid pid, Credentials creds) {
  auto it = processes_.find(pid);
  if (it == processes_.end() || !it->second.alive) throw GuestError("no live process " + std::to_string(pid));
  it->second.claimed = creds;
}

std::vector<ForkNotice> Guest::drain_fork_notices() { return std::exchange(fork_notices_, {}); }

bool Guest::permits(const GuestFile& f, const Credentials& who, AccessKind kind) const {
  if (who.uid == 0) {
    if (kind != AccessKind::Execute) return true;
    return ((f.guest_perms.user() | f.guest_perms.group() | f.guest_perms.other()) & 1) != 0;
  }
  int octet = who.uid == f.owner_uid ? f.guest_perms.user()
              : who.gid == f.owner_gid ? f.guest_perms.group()
                                       : f.guest_perms.other();
  return (octet & access_bit(kind)) != 0;
}

bool Guest::can_modify_dir(std::string_view path, const Credentials& who, std::optional<ErrorCode>& err) const {
  auto parent = parent_path(path);
  if (!parent) {
    err = ErrorCode::PermissionDenied;
    return false;
  }
  const GuestFile* dir = file(*parent);
  if (dir == nullptr || !dir->is_directory) {
    err = ErrorCode::NoSuchFile;
    return false;
  }
  if (!permits(*dir, who, AccessKind::Write)) {
    err = ErrorCode::PermissionDenied;
    return false;
  }
  return true;
}

void Guest::move_tree(const std::string& from, const std::string& to) {
  std::vector<GuestFile> moved;
  auto it = files_.find(from);
  moved.push_back(it->second);
  files_.erase(it);
  for (auto sub = files_.lower_bound(from + "/"); sub != files_.end() && under(sub->first, from);) {
    moved.push_back(sub->second);
    sub = files_.erase(sub);
  }
  for (auto& f : moved) {
    f.path = to + f.path.substr(from.size());
    std::string key = f.path;
    files_.insert_or_assign(std::move(key), std::move(f));
  }
}

SyscallOutcome Guest::do_open(const Process& p, std::string_view path, const OpenFlags& flags) {
  if (const GuestFile* f = file(path)) {
    if (flags.create && flags.exclusive) return SyscallOutcome::failure(ErrorCode::FileExists);
    if (f->is_directory && flags.wants_write()) return SyscallOutcome::failure(ErrorCode::IsDirectory);
    if (flags.wants_read() && !permits(*f, p.claimed, AccessKind::Read))
      return SyscallOutcome::failure(ErrorCode::PermissionDenied);
    if (flags.wants_write() && !permits(*f, p.claimed, AccessKind::Write))
      return SyscallOutcome::failure(ErrorCode::PermissionDenied);
    return SyscallOutcome::success(3);
  }
  if (!flags.create) return SyscallOutcome::failure(ErrorCode::NoSuchFile);
  std::optional<ErrorCode> err;
  if (!can_modify_dir(path, p.claimed, err)) return SyscallOutcome::failure(*err);
  add_file(GuestFile{std::string(path), p.claimed.uid, p.claimed.gid, PermissionOctets(6, 4, 4), false});
  return SyscallOutcome::success(3);
}

SyscallOutcome Guest::do_rename(const Process& p, std::string_view from, std::string_view to) {
  const GuestFile* src = file(from);
  if (src == nullptr) return SyscallOutcome::failure(ErrorCode::NoSuchFile);
  if (from == to) return SyscallOutcome::success();
  std::optional<ErrorCode> err;
  if (!can_modify_dir(from, p.claimed, err) || !can_modify_dir(to, p.claimed, err))
    return SyscallOutcome::failure(*err);
  if (under(to, from)) return SyscallOutcome::failure(ErrorCode::PermissionDenied);
  if (const GuestFile* dst = file(to)) {
    if (dst->is_directory) return SyscallOutcome::failure(ErrorCode::IsDirectory);
    files_.erase(files_.find(to));
  }
  move_tree(std::string(from), std::string(to));
  return SyscallOutcome::success();
}

SyscallOutcome Guest::do_unlink(const Process& p, std::string_view path) {
  const GuestFile* f = file(path);
  if (f == nullptr) return SyscallOutcome::failure(ErrorCode::NoSuchFile);
  if (f->is_directory) return SyscallOutcome::failure(ErrorCode::IsDirectory);
  std::optional<ErrorCode> err;
  if (!can_modify_dir(path, p.claimed, err)) return SyscallOutcome::failure(*err);
  remove_file(path);
  return SyscallOutcome::success();
}

SyscallOutcome Guest::do_truncate(const Process& p, std::string_view path) {
  const GuestFile* f = file(path);
  if (f == nullptr) return SyscallOutcome::failure(ErrorCode::NoSuchFile);
  if (f->is_directory) return SyscallOutcome::failure(ErrorCode::IsDirectory);
  if (!permits(*f, p.claimed, AccessKind::Write)) return SyscallOutcome::failure(ErrorCode::PermissionDenied);
  return SyscallOutcome::success();
}

SyscallOutcome Guest::do_link(const Process& p, std::string_view target, std::string_view link, bool symbolic) {
  GuestFile created{std::string(link), p.claimed.uid, p.claimed.gid, PermissionOctets(7, 7, 7), false};
  if (!symbolic) {
    const GuestFile* t = file(target);
    if (t == nullptr) return SyscallOutcome::failure(ErrorCode::NoSuchFile);
    if (t->is_directory) return SyscallOutcome::failure(ErrorCode::PermissionDenied);
    created.owner_uid = t->owner_uid;
    created.owner_gid = t->owner_gid;
    created.guest_perms = t->guest_perms;
  }
  if (file(link) != nullptr) return SyscallOutcome::failure(ErrorCode::FileExists);
  std::optional<ErrorCode> err;
  if (!can_modify_dir(link, p.claimed, err)) return SyscallOutcome::failure(*err);
  add_file(std::move(created));
  return SyscallOutcome::success();
}

SyscallOutcome Guest::do_execve(const Process& p, std::string_view path) {
  const GuestFile* f = file(path);
  if (f == nullptr) return SyscallOutcome::failure(ErrorCode::NoSuchFile);
  if (f->is_directory || !permits(*f, p.claimed, AccessKind::Execute))
    return SyscallOutcome::failure(ErrorCode::PermissionDenied);
  return SyscallOutcome::success();
}

SyscallOutcome Guest::do_privileged(const Process& p) {
  return p.claimed.uid == 0 ? SyscallOutcome::success() : SyscallOutcome::failure(ErrorCode::PermissionDenied);
}

SyscallOutcome Guest::execute_syscall(const SyscallEvent& event) {
  auto it = processes_.find(event.pid);
  if (it == processes_.end() || !it->second.alive) return SyscallOutcome::failure(ErrorCode::NoSuchProcess);
  if (event.has_null_slot()) return SyscallOutcome::failure(nulled_slot_error(event));
  const Process proc = it->second;

  switch (event.call) {
    case SyscallId::Open:
    case SyscallId::Openat:
      return do_open(proc, *event.path(0), event.open_flags().value_or(OpenFlags{}));
    case SyscallId::Rename:
    case SyscallId::Renameat:
    case SyscallId::Renameat2:
      return do_rename(proc, *event.path(0), *event.path(1));
    case SyscallId::Unlink:
    case SyscallId::Unlinkat:
      return do_unlink(proc, *event.path(0));
    case SyscallId::Truncate:
      return do_truncate(proc, *event.path(0));
    case SyscallId::Link:
    case SyscallId::Linkat:
      return do_link(proc, *event.path(0), *event.path(1), false);
    case SyscallId::Symlink:
    case SyscallId::Symlinkat:
      return do_link(proc, *event.path(0), *event.path(1), true);
    case SyscallId::Execve:
    case SyscallId::Execveat:
      return do_execve(proc, *event.path(0));
    case SyscallId::NameToHandleAt:
      return file(*event.path(0)) ? SyscallOutcome::success() : SyscallOutcome::failure(ErrorCode::NoSuchFile);
    case SyscallId::OpenByHandleAt:
    case SyscallId::InitModule:
    case SyscallId::FinitModule:
    case SyscallId::KexecLoad:
      return do_privileged(proc);
    case SyscallId::Exit:
    case SyscallId::ExitGroup:
      it->second.alive = false;
      return SyscallOutcome::success();
    case SyscallId::Clone:
      return SyscallOutcome::success(spawn_process(proc.pid, proc.claimed));
  }
  return SyscallOutcome::failure(ErrorCode::BadAddress);
}

Sacl generate_full_sacl(const Guest& guest) {
  Sacl sacl;
  sacl.reserve(guest.files().size());
  for (const auto& [path, f] : guest.files()) {
    if (f.is_directory) continue;
    sacl.insert(SaclEntry{path, f.guest_perms, f.owner_uid, f.owner_gid});
  }
  return sacl;
}

std::string synthetic_file_path(std::size_t index) {
  return "/srv/data/d" + std::to_string(index / 1000) + "/f" + std::to_string(index);
}

Guest make_synthetic_guest(std::size_t file_count) {
  Guest g;
  g.add_file(GuestFile{"/srv", 0, 0, PermissionOctets(7, 5, 5), true});
  g.add_file(GuestFile{"/srv/data", 0, 0, PermissionOctets(7, 5, 5), true});
  for (std::size_t i = 0; i < file_count; ++i) {
    if (i % 1000 == 0)
      g.add_file(GuestFile{"/srv/data/d" + std::to_string(i / 1000), 0, 0, PermissionOctets(7, 5, 5), true});
    g.add_file(GuestFile{synthetic_file_path(i), 0, 0, PermissionOctets(6, 4, 4), false});
  }
  return g;
}

}  // namespace ferify
