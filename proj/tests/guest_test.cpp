#include "ferify/guest.hpp"

#include <gtest/gtest.h>

#include <algorithm>

namespace ferify {
namespace {

const OpenFlags kRead{AccessMode::ReadOnly};
const OpenFlags kCreateWrite{AccessMode::WriteOnly, true, true};

class GuestTest : public ::testing::Test {
 protected:
  void SetUp() override {
    guest.add_user({1000, 1000, "user"});
    guest.add_file({"/home/user", 1000, 1000, PermissionOctets::parse("755"), true}, true);
    guest.add_file({"/home/user/notes.txt", 1000, 1000, PermissionOctets::parse("644"), false});
    guest.add_file({"/etc/shadow", 0, 42, PermissionOctets::parse("640"), false}, true);
    guest.add_file({"/usr/bin/tool", 0, 0, PermissionOctets::parse("755"), false}, true);
    user = guest.spawn_process(1, {1000, 1000});
    root = guest.spawn_process(1, {0, 0});
    guest.drain_fork_notices();
  }

  SyscallOutcome run(SyscallId call, Pid pid, std::vector<std::string> paths, OpenFlags flags = {}) {
    return guest.execute_syscall(make_event(call, pid, std::move(paths), flags));
  }

  Guest guest;
  Pid user = 0;
  Pid root = 0;
};

TEST_F(GuestTest, SpawnAssignsDistinctPidsAndEmitsForkNotice) {
  Pid a = guest.spawn_process(user, {1000, 1000});
  Pid b = guest.spawn_process(user, {1000, 1000});
  EXPECT_NE(a, b);
  auto notices = guest.drain_fork_notices();
  ASSERT_EQ(notices.size(), 2u);
  EXPECT_EQ(notices[0].child, a);
  EXPECT_EQ(notices[0].parent, user);
  EXPECT_EQ(notices[0].creds, (Credentials{1000, 1000}));
  EXPECT_TRUE(guest.drain_fork_notices().empty());
}

TEST_F(GuestTest, SpawnFromDeadOrUnknownParentFails) {
  EXPECT_THROW(guest.spawn_process(999, {0, 0}), GuestError);
  EXPECT_TRUE(run(SyscallId::Exit, user, {}).ok());
  EXPECT_THROW(guest.spawn_process(user, {1000, 1000}), GuestError);
  EXPECT_THROW(guest.spawn_process(1, {0, 0}, root), GuestError);
}

TEST_F(GuestTest, OpenMissingFileWithoutCreate) {
  auto out = run(SyscallId::Open, user, {"/tokens/abc"}, kRead);
  EXPECT_EQ(out.error, ErrorCode::NoSuchFile);
  // Creating under a missing directory fails the same way.
  EXPECT_EQ(run(SyscallId::Open, user, {"/tokens/abc"}, kCreateWrite).error, ErrorCode::NoSuchFile);
}

TEST_F(GuestTest, OpenCreatesOwnedFile) {
  EXPECT_TRUE(run(SyscallId::Open, user, {"/home/user/test1.txt"}, kCreateWrite).ok());
  const GuestFile* f = guest.file("/home/user/test1.txt");
  ASSERT_NE(f, nullptr);
  EXPECT_EQ(f->owner_uid, 1000u);
  EXPECT_EQ(f->guest_perms.to_string(), "644");
}

TEST_F(GuestTest, GuestPermissionsStillApply) {
  EXPECT_EQ(run(SyscallId::Open, user, {"/etc/shadow"}, kRead).error, ErrorCode::PermissionDenied);
  EXPECT_TRUE(run(SyscallId::Open, root, {"/etc/shadow"}, kRead).ok());
  EXPECT_EQ(run(SyscallId::Open, user, {"/etc/newfile"}, kCreateWrite).error, ErrorCode::PermissionDenied);
  EXPECT_EQ(run(SyscallId::Unlink, user, {"/etc/shadow"}).error, ErrorCode::PermissionDenied);
  EXPECT_EQ(run(SyscallId::Execve, user, {"/home/user/notes.txt"}).error, ErrorCode::PermissionDenied);
  EXPECT_EQ(run(SyscallId::Execve, root, {"/home/user/notes.txt"}).error, ErrorCode::PermissionDenied);
  EXPECT_TRUE(run(SyscallId::Execve, user, {"/usr/bin/tool"}).ok());
}

TEST_F(GuestTest, RenameMovesFileAndSubtree) {
  EXPECT_TRUE(run(SyscallId::Rename, user, {"/home/user/notes.txt", "/home/user/moved.txt"}).ok());
  EXPECT_EQ(guest.file("/home/user/notes.txt"), nullptr);
  ASSERT_NE(guest.file("/home/user/moved.txt"), nullptr);

  guest.add_file({"/home/user/dir", 1000, 1000, PermissionOctets::parse("755"), true});
  guest.add_file({"/home/user/dir/a", 1000, 1000, PermissionOctets::parse("644"), false});
  EXPECT_TRUE(run(SyscallId::Renameat, user, {"/home/user/dir", "/home/user/dir2"}).ok());
  EXPECT_NE(guest.file("/home/user/dir2/a"), nullptr);
  EXPECT_EQ(guest.file("/home/user/dir/a"), nullptr);
  EXPECT_EQ(run(SyscallId::Rename, user, {"/home/user/none", "/home/user/x"}).error, ErrorCode::NoSuchFile);
}

TEST_F(GuestTest, UnlinkTruncateLinkSymlink) {
  EXPECT_EQ(run(SyscallId::Unlink, user, {"/home/user"}).error, ErrorCode::IsDirectory);
  EXPECT_TRUE(run(SyscallId::Truncate, user, {"/home/user/notes.txt"}).ok());
  EXPECT_TRUE(run(SyscallId::Link, user, {"/home/user/notes.txt", "/home/user/hard"}).ok());
  EXPECT_EQ(run(SyscallId::Link, user, {"/home/user/notes.txt", "/home/user/hard"}).error, ErrorCode::FileExists);
  EXPECT_TRUE(run(SyscallId::Symlink, user, {"/nonexistent", "/home/user/soft"}).ok());
  EXPECT_TRUE(run(SyscallId::Unlinkat, user, {"/home/user/notes.txt"}).ok());
  EXPECT_EQ(guest.file("/home/user/notes.txt"), nullptr);
  EXPECT_EQ(run(SyscallId::Unlink, user, {"/home/user/notes.txt"}).error, ErrorCode::NoSuchFile);
}

TEST_F(GuestTest, NulledSlotErrorTable) {
  // Expected codes written out by hand rather than derived from nulled_slot_error().
  auto nulled = [&](SyscallId id, OpenFlags flags = {}) {
    std::vector<std::string> paths(SyscallEvent{0, root, id, {}}.path_count(), "/home/user/notes.txt");
    SyscallEvent ev = make_event(id, root, paths, flags);
    ev.args[ev.path_slot_indices().empty() ? 0 : ev.path_slot_indices().front()] = NullAddress{};
    return guest.execute_syscall(ev).error;
  };
  EXPECT_EQ(nulled(SyscallId::Open, kCreateWrite), ErrorCode::BadFileDescriptor);
  EXPECT_EQ(nulled(SyscallId::Openat, OpenFlags{AccessMode::WriteOnly}), ErrorCode::BadFileDescriptor);
  EXPECT_EQ(nulled(SyscallId::Open, kRead), ErrorCode::BadAddress);
  EXPECT_EQ(nulled(SyscallId::Execve), ErrorCode::BadAddress);
  EXPECT_EQ(nulled(SyscallId::Rename), ErrorCode::BadAddress);
  EXPECT_EQ(nulled(SyscallId::InitModule), ErrorCode::BadFileDescriptor);
  EXPECT_EQ(nulled(SyscallId::FinitModule), ErrorCode::BadFileDescriptor);
  EXPECT_EQ(nulled(SyscallId::KexecLoad), ErrorCode::BadAddress);
  // A nulled call has no side effect.
  EXPECT_NE(guest.file("/home/user/notes.txt"), nullptr);
  EXPECT_TRUE(guest.is_alive(root));
}

TEST_F(GuestTest, ExitMakesPidDeadEverywhere) {
  EXPECT_TRUE(run(SyscallId::ExitGroup, user, {}).ok());
  EXPECT_FALSE(guest.is_alive(user));
  auto live = guest.live_pids();
  EXPECT_EQ(std::count(live.begin(), live.end(), user), 0);
  // No operation on a dead process succeeds.
  for (SyscallId id : all_syscalls()) {
    std::vector<std::string> paths(SyscallEvent{0, user, id, {}}.path_count(), "/home/user/notes.txt");
    EXPECT_EQ(guest.execute_syscall(make_event(id, user, paths)).error, ErrorCode::NoSuchProcess) << to_string(id);
  }
}

TEST_F(GuestTest, CloneSpawnsChildWithCallerCreds) {
  auto out = run(SyscallId::Clone, user, {});
  ASSERT_TRUE(out.ok());
  const Process* child = guest.process(static_cast<Pid>(out.value));
  ASSERT_NE(child, nullptr);
  EXPECT_EQ(child->claimed, (Credentials{1000, 1000}));
  EXPECT_EQ(child->parent_pid, user);
  EXPECT_EQ(guest.drain_fork_notices().size(), 1u);
}

TEST_F(GuestTest, ModuleCallsNeedRoot) {
  EXPECT_EQ(run(SyscallId::FinitModule, user, {}).error, ErrorCode::PermissionDenied);
  EXPECT_TRUE(run(SyscallId::FinitModule, root, {}).ok());
}

TEST(Guest, ReplayIsDeterministic) {
  auto replay = [] {
    Guest g;
    g.add_file({"/w", 0, 0, PermissionOctets::parse("777"), true});
    Pid p = g.spawn_process(1, {7, 7});
    std::vector<std::string> log;
    for (int i = 0; i < 50; ++i) {
      std::string path = "/w/f" + std::to_string(i % 7);
      SyscallId call = i % 3 == 0 ? SyscallId::Open : i % 3 == 1 ? SyscallId::Unlink : SyscallId::Truncate;
      auto ev = make_event(call, p, {path}, OpenFlags{AccessMode::WriteOnly, true});
      ev.seq = g.next_seq();
      log.push_back(std::to_string(ev.seq) + outcome_name(g.execute_syscall(ev)));
    }
    return log;
  };
  auto a = replay();
  EXPECT_EQ(a, replay());
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_LT(std::stoul(a[i - 1]), std::stoul(a[i]));
}

TEST(Guest, AddFileChecksTree) {
  Guest g;
  EXPECT_THROW(g.add_file({"/a/b", 0, 0, {}, false}), GuestError);
  g.add_file({"/a/b", 0, 0, {}, false}, true);
  EXPECT_TRUE(g.file("/a")->is_directory);
  EXPECT_THROW(g.add_file({"/a/b", 0, 0, {}, false}), GuestError);
  EXPECT_THROW(g.add_file({"/a/b/c", 0, 0, {}, false}), GuestError);
  EXPECT_EQ(parent_path("/a/b"), "/a");
  EXPECT_EQ(parent_path("/a"), "/");
  EXPECT_FALSE(parent_path("/").has_value());
}

}  // namespace
}  // namespace ferify
