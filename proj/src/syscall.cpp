#include "ferify/syscall.hpp"

#include <algorithm>
#include <stdexcept>

namespace ferify {

namespace {

struct CallInfo {
  SyscallId id;
  std::string_view name;
  std::vector<SlotKind> layout;
};

using K = SlotKind;

const std::vector<CallInfo>& call_table() {
  static const std::vector<CallInfo> table = {
      {SyscallId::Open, "open", {K::Path, K::Flags, K::Int}},
      {SyscallId::Openat, "openat", {K::DirFd, K::Path, K::Flags, K::Int}},
      {SyscallId::NameToHandleAt, "name_to_handle_at", {K::DirFd, K::Path, K::Int, K::Int, K::Int}},
      {SyscallId::OpenByHandleAt, "open_by_handle_at", {K::Int, K::Int, K::Int}},
      {SyscallId::Rename, "rename", {K::Path, K::Path}},
      {SyscallId::Renameat, "renameat", {K::DirFd, K::Path, K::DirFd, K::Path}},
      {SyscallId::Renameat2, "renameat2", {K::DirFd, K::Path, K::DirFd, K::Path, K::Int}},
      {SyscallId::Unlink, "unlink", {K::Path}},
      {SyscallId::Unlinkat, "unlinkat", {K::DirFd, K::Path, K::Int}},
      {SyscallId::Truncate, "truncate", {K::Path, K::Int}},
      {SyscallId::Link, "link", {K::Path, K::Path}},
      {SyscallId::Linkat, "linkat", {K::DirFd, K::Path, K::DirFd, K::Path, K::Int}},
      {SyscallId::Symlink, "symlink", {K::Path, K::Path}},
      {SyscallId::Symlinkat, "symlinkat", {K::Path, K::DirFd, K::Path}},
      {SyscallId::Execve, "execve", {K::Path, K::Int, K::Int}},
      {SyscallId::Execveat, "execveat", {K::DirFd, K::Path, K::Int, K::Int, K::Int}},
      {SyscallId::Exit, "exit", {K::Int}},
      {SyscallId::ExitGroup, "exit_group", {K::Int}},
      {SyscallId::InitModule, "init_module", {K::Int, K::Int, K::Int}},
      {SyscallId::FinitModule, "finit_module", {K::Int, K::Int, K::Int}},
      {SyscallId::KexecLoad, "kexec_load", {K::Int, K::Int, K::Int, K::Int}},
      {SyscallId::Clone, "clone", {K::Int, K::Int, K::Int, K::Int, K::Int}},
  };
  return table;
}

const CallInfo& info(SyscallId id) { return call_table()[static_cast<std::size_t>(id)]; }

constexpr std::array<SyscallId, kSyscallCount> kAll = {
    SyscallId::Open,      SyscallId::Openat,     SyscallId::NameToHandleAt, SyscallId::OpenByHandleAt,
    SyscallId::Rename,    SyscallId::Renameat,   SyscallId::Renameat2,      SyscallId::Unlink,
    SyscallId::Unlinkat,  SyscallId::Truncate,   SyscallId::Link,           SyscallId::Linkat,
    SyscallId::Symlink,   SyscallId::Symlinkat,  SyscallId::Execve,         SyscallId::Execveat,
    SyscallId::Exit,      SyscallId::ExitGroup,  SyscallId::InitModule,     SyscallId::FinitModule,
    SyscallId::KexecLoad, SyscallId::Clone,
};

}  // namespace

std::span<const SyscallId> all_syscalls() { return kAll; }

std::string_view to_string(SyscallId id) { return info(id).name; }

std::optional<SyscallId> parse_syscall(std::string_view name) {
  for (const auto& c : call_table())
    if (c.name == name) return c.id;
  return std::nullopt;
}

bool is_file_operation(SyscallId id) {
  switch (id) {
    case SyscallId::Open:
    case SyscallId::Openat:
    case SyscallId::Rename:
    case SyscallId::Renameat:
    case SyscallId::Renameat2:
    case SyscallId::Unlink:
    case SyscallId::Unlinkat:
    case SyscallId::Truncate:
    case SyscallId::Link:
    case SyscallId::Linkat:
    case SyscallId::Symlink:
    case SyscallId::Symlinkat:
    case SyscallId::Execve:
    case SyscallId::Execveat:
      return true;
    default:
      return false;
  }
}

std::span<const SlotKind> slot_layout(SyscallId id) { return info(id).layout; }

OpenFlags OpenFlags::parse(std::span<const std::string> names) {
  OpenFlags f;
  for (const auto& n : names) {
    if (n == "O_RDONLY") f.mode = AccessMode::ReadOnly;
    else if (n == "O_WRONLY") f.mode = AccessMode::WriteOnly;
    else if (n == "O_RDWR") f.mode = AccessMode::ReadWrite;
    else if (n == "O_CREAT") f.create = true;
    else if (n == "O_TRUNC") f.truncate = true;
    else if (n == "O_APPEND") f.append = true;
    else if (n == "O_EXCL") f.exclusive = true;
    else throw std::invalid_argument("unknown open flag '" + n + "'");
  }
  return f;
}

std::vector<std::string> OpenFlags::names() const {
  std::vector<std::string> out;
  switch (mode) {
    case AccessMode::ReadOnly: out.emplace_back("O_RDONLY"); break;
    case AccessMode::WriteOnly: out.emplace_back("O_WRONLY"); break;
    case AccessMode::ReadWrite: out.emplace_back("O_RDWR"); break;
  }
  if (create) out.emplace_back("O_CREAT");
  if (truncate) out.emplace_back("O_TRUNC");
  if (append) out.emplace_back("O_APPEND");
  if (exclusive) out.emplace_back("O_EXCL");
  return out;
}

std::vector<std::size_t> SyscallEvent::path_slot_indices() const {
  std::vector<std::size_t> out;
  auto layout = slot_layout(call);
  for (std::size_t i = 0; i < layout.size(); ++i)
    if (layout[i] == SlotKind::Path) out.push_back(i);
  return out;
}

std::size_t SyscallEvent::path_count() const {
  auto layout = slot_layout(call);
  return static_cast<std::size_t>(std::count(layout.begin(), layout.end(), SlotKind::Path));
}

std::optional<std::string_view> SyscallEvent::path(std::size_t i) const {
  auto layout = slot_layout(call);
  for (std::size_t slot = 0; slot < layout.size() && slot < args.size(); ++slot) {
    if (layout[slot] != SlotKind::Path) continue;
    if (i-- != 0) continue;
    if (const auto* s = std::get_if<std::string>(&args[slot])) return std::string_view(*s);
    return std::nullopt;
  }
  return std::nullopt;
}

bool SyscallEvent::has_null_slot() const {
  return std::any_of(args.begin(), args.end(),
                     [](const ArgSlot& a) { return std::holds_alternative<NullAddress>(a); });
}

std::optional<OpenFlags> SyscallEvent::open_flags() const {
  for (const auto& a : args)
    if (const auto* f = std::get_if<OpenFlags>(&a)) return *f;
  return std::nullopt;
}

SyscallEvent make_event(SyscallId call, Pid pid, std::vector<std::string> paths, OpenFlags flags,
                        std::vector<std::int64_t> ints) {
  SyscallEvent ev;
  ev.pid = pid;
  ev.call = call;
  auto layout = slot_layout(call);
  std::size_t next_path = 0;
  std::size_t next_int = 0;
  for (SlotKind kind : layout) {
    switch (kind) {
      case SlotKind::Path: {
        if (next_path >= paths.size())
          throw std::invalid_argument(std::string(to_string(call)) + ": missing path argument");
        std::string& p = paths[next_path++];
        if (p.empty() || p.front() != '/')
          throw std::invalid_argument(std::string(to_string(call)) + ": path must be absolute: '" + p + "'");
        ev.args.emplace_back(std::move(p));
        break;
      }
      case SlotKind::Flags: ev.args.emplace_back(flags); break;
      case SlotKind::DirFd: ev.args.emplace_back(kAtFdCwd); break;
      case SlotKind::Int:
        ev.args.emplace_back(next_int < ints.size() ? ints[next_int] : std::int64_t{0});
        ++next_int;
        break;
    }
  }
  if (next_path != paths.size())
    throw std::invalid_argument(std::string(to_string(call)) + ": too many path arguments");
  return ev;
}

}  // namespace ferify
