#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ferify {

using Pid = std::int32_t;
using Seq = std::uint64_t;

/// The trapped calls: everything in the ferify trap table plus clone().
enum class SyscallId : std::uint8_t {
  Open,
  Openat,
  NameToHandleAt,
  OpenByHandleAt,
  Rename,
  Renameat,
  Renameat2,
  Unlink,
  Unlinkat,
  Truncate,
  Link,
  Linkat,
  Symlink,
  Symlinkat,
  Execve,
  Execveat,
  Exit,
  ExitGroup,
  InitModule,
  FinitModule,
  KexecLoad,
  Clone,
};

inline constexpr std::size_t kSyscallCount = 22;

/// Every identifier, in declaration order.
std::span<const SyscallId> all_syscalls();

std::string_view to_string(SyscallId id);
std::optional<SyscallId> parse_syscall(std::string_view name);

/// Calls that create, remove, rename, open, or run a file by path.
bool is_file_operation(SyscallId id);

enum class AccessMode : std::uint8_t { ReadOnly, WriteOnly, ReadWrite };

struct OpenFlags {
  AccessMode mode = AccessMode::ReadOnly;
  bool create = false;
  bool truncate = false;
  bool append = false;
  bool exclusive = false;

  bool wants_read() const { return mode != AccessMode::WriteOnly; }
  bool wants_write() const { return mode != AccessMode::ReadOnly || create || truncate || append; }

  /// Accepts O_RDONLY, O_WRONLY, O_RDWR, O_CREAT, O_TRUNC, O_APPEND, O_EXCL.
  static OpenFlags parse(std::span<const std::string> names);
  std::vector<std::string> names() const;

  friend bool operator==(const OpenFlags&, const OpenFlags&) = default;
};

/// A pointer register the mediation layer overwrote with NULL.
struct NullAddress {
  friend bool operator==(NullAddress, NullAddress) { return true; }
};

/// One register-order argument slot.
using ArgSlot = std::variant<NullAddress, std::string, OpenFlags, std::int64_t>;

enum class SlotKind : std::uint8_t { Path, Flags, DirFd, Int };

/// Register-order slot layout of a call under the x86-64 Linux convention.
std::span<const SlotKind> slot_layout(SyscallId id);

inline constexpr std::int64_t kAtFdCwd = -100;

struct SyscallEvent {
  Seq seq = 0;
  Pid pid = 0;
  SyscallId call = SyscallId::Open;
  std::vector<ArgSlot> args;

  /// Indices of the slots the layout marks as Path.
  std::vector<std::size_t> path_slot_indices() const;
  /// The i-th path argument, or nullopt if that slot holds NullAddress.
  std::optional<std::string_view> path(std::size_t i) const;
  std::size_t path_count() const;
  bool has_null_slot() const;
  /// The open-flags slot for open/openat; nullopt for other calls.
  std::optional<OpenFlags> open_flags() const;

  friend bool operator==(const SyscallEvent&, const SyscallEvent&) = default;
};

/// Builds an event with slots laid out per slot_layout(call). `paths` fill Path slots in order,
/// `flags` fills the Flags slot, DirFd slots get AT_FDCWD, and `ints` fill Int slots (missing ones are 0).
/// Throws std::invalid_argument if the number of paths does not match the layout or a path is relative.
SyscallEvent make_event(SyscallId call, Pid pid, std::vector<std::string> paths, OpenFlags flags = {},
                        std::vector<std::int64_t> ints = {});

}  // namespace ferify
