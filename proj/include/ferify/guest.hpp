#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ferify/sacl.hpp"
#include "ferify/syscall.hpp"

namespace ferify {

struct Credentials {
  Uid uid = 0;
  Gid gid = 0;
  friend bool operator==(const Credentials&, const Credentials&) = default;
};

struct UserAccount {
  Uid uid = 0;
  Gid gid = 0;
  std::string name;
};

struct GuestFile {
  std::string path;
  Uid owner_uid = 0;
  Gid owner_gid = 0;
  PermissionOctets guest_perms;
  bool is_directory = false;
};

struct Process {
  Pid pid = 0;
  Credentials claimed;
  Pid parent_pid = 0;
  bool alive = true;
};

/// Sent to the hypervisor whenever a new task returns from fork.
struct ForkNotice {
  Pid child = 0;
  Pid parent = 0;
  Credentials creds;
  Seq seq = 0;
};

enum class ErrorCode : std::uint8_t {
  BadAddress,
  BadFileDescriptor,
  NoSuchFile,
  PermissionDenied,
  FileExists,
  IsDirectory,
  NoSuchProcess,
};

std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> parse_error_code(std::string_view name);

struct SyscallOutcome {
  std::optional<ErrorCode> error;  // nullopt means success
  std::int64_t value = 0;          // return value on success (child pid for clone)

  bool ok() const { return !error.has_value(); }
  static SyscallOutcome success(std::int64_t v = 0) { return {std::nullopt, v}; }
  static SyscallOutcome failure(ErrorCode c) { return {c, 0}; }
  friend bool operator==(const SyscallOutcome&, const SyscallOutcome&) = default;
};

/// "success" or the error-code name.
std::string outcome_name(const SyscallOutcome& outcome);

/// Error a call yields when a mediation denial nulled one of its slots.
ErrorCode nulled_slot_error(const SyscallEvent& event);

class GuestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parent directory of an absolute path ("/a/b" -> "/a", "/a" -> "/"). "/" has no parent.
std::optional<std::string> parent_path(std::string_view path);

/// Deterministic model of the protected VM. Starts with "/" (root, 755) and init (pid 1, uid 0).
class Guest {
 public:
  Guest();

  void add_user(UserAccount user);
  const UserAccount* user(Uid uid) const;

  /// Throws GuestError on a duplicate path or, unless `create_parents`, a missing parent directory.
  void add_file(GuestFile file, bool create_parents = false);
  const GuestFile* file(std::string_view path) const;
  bool remove_file(std::string_view path);
  const std::map<std::string, GuestFile, std::less<>>& files() const { return files_; }

  /// Throws GuestError when the parent is unknown or dead, or `requested` is already live.
  Pid spawn_process(Pid parent, Credentials creds, std::optional<Pid> requested = std::nullopt);
  const Process* process(Pid pid) const;
  bool is_alive(Pid pid) const;
  std::vector<Pid> live_pids() const;

  /// Overwrites a process's task credentials. Used for both sudo and in-kernel tampering.
  void set_credentials(Pid pid, Credentials creds);

  /// Applies the (already mediated) call. Errors are returned, never thrown.
  SyscallOutcome execute_syscall(const SyscallEvent& event);

  /// Fork notices accumulated since the last drain.
  std::vector<ForkNotice> drain_fork_notices();

  Seq next_seq() { return ++clock_; }
  Seq now() const { return clock_; }
  void advance_clock(Seq ticks) { clock_ += ticks; }

 private:
  bool permits(const GuestFile& f, const Credentials& who, AccessKind kind) const;
  bool can_modify_dir(std::string_view path, const Credentials& who, std::optional<ErrorCode>& err) const;
  void move_tree(const std::string& from, const std::string& to);

  SyscallOutcome do_open(const Process& p, std::string_view path, const OpenFlags& flags);
  SyscallOutcome do_rename(const Process& p, std::string_view from, std::string_view to);
  SyscallOutcome do_unlink(const Process& p, std::string_view path);
  SyscallOutcome do_truncate(const Process& p, std::string_view path);
  SyscallOutcome do_link(const Process& p, std::string_view target, std::string_view link, bool symbolic);
  SyscallOutcome do_execve(const Process& p, std::string_view path);
  SyscallOutcome do_privileged(const Process& p);

  std::map<Uid, UserAccount> users_;
  std::map<std::string, GuestFile, std::less<>> files_;
  std::map<Pid, Process> processes_;
  std::vector<ForkNotice> fork_notices_;
  Pid next_pid_ = 2;
  Seq clock_ = 0;
};

/// One permit-style entry per regular file, copying the guest's own permissions and ownership.
Sacl generate_full_sacl(const Guest& guest);

/// Guest with `file_count` regular files (root-owned, 644) spread over directories of at most
/// 1000 files under /srv/data.
Guest make_synthetic_guest(std::size_t file_count);

/// Path of the i-th file created by make_synthetic_guest.
std::string synthetic_file_path(std::size_t index);

}  // namespace ferify
