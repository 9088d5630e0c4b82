#include "ferify/mediator.hpp"

#include <gtest/gtest.h>

#include <random>

namespace ferify {
namespace {

const OpenFlags kRead{AccessMode::ReadOnly};
const OpenFlags kWriteTrunc{AccessMode::WriteOnly, false, true};
const OpenFlags kCreate{AccessMode::WriteOnly, true, true};

std::vector<std::string> paths_for(SyscallId id) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < SyscallEvent{0, 1, id, {}}.path_count(); ++i) out.push_back("/d/p" + std::to_string(i));
  return out;
}

TEST(RequiredChecks, OpenFollowsIntent) {
  EXPECT_EQ(required_checks(make_event(SyscallId::Open, 2, {"/etc/shadow"}, kRead)),
            (std::vector<AccessRequest>{{"/etc/shadow", AccessKind::Read}}));
  EXPECT_EQ(required_checks(make_event(SyscallId::Openat, 2, {"/etc/shadow"}, kWriteTrunc)),
            (std::vector<AccessRequest>{{"/etc/shadow", AccessKind::Write}}));
  EXPECT_EQ(required_checks(make_event(SyscallId::Open, 2, {"/etc/nshadow"}, kCreate)),
            (std::vector<AccessRequest>{{"/etc/nshadow", AccessKind::Write}, {"/etc", AccessKind::Write}}));
}

TEST(RequiredChecks, RenameTouchesBothEndsAndParents) {
  auto checks = required_checks(make_event(SyscallId::Rename, 2, {"/etc/nshadow", "/etc/shadow"}));
  EXPECT_EQ(checks, (std::vector<AccessRequest>{{"/etc/nshadow", AccessKind::Write},
                                                {"/etc/shadow", AccessKind::Write},
                                                {"/etc", AccessKind::Write}}));
}

TEST(RequiredChecks, OtherFileCalls) {
  EXPECT_EQ(required_checks(make_event(SyscallId::Execve, 2, {"/bin/sh"})),
            (std::vector<AccessRequest>{{"/bin/sh", AccessKind::Execute}}));
  EXPECT_EQ(required_checks(make_event(SyscallId::Truncate, 2, {"/a/b"})),
            (std::vector<AccessRequest>{{"/a/b", AccessKind::Write}}));
  EXPECT_EQ(required_checks(make_event(SyscallId::Unlinkat, 2, {"/a/b"})),
            (std::vector<AccessRequest>{{"/a/b", AccessKind::Write}, {"/a", AccessKind::Write}}));
  EXPECT_EQ(required_checks(make_event(SyscallId::Symlink, 2, {"/etc/shadow", "/tmp/s"})),
            (std::vector<AccessRequest>{{"/tmp/s", AccessKind::Write}, {"/tmp", AccessKind::Write}}));
  EXPECT_THROW(required_checks(make_event(SyscallId::Clone, 2, {})), std::invalid_argument);
  EXPECT_THROW(required_checks(make_event(SyscallId::KexecLoad, 2, {})), std::invalid_argument);
}

TEST(OwnershipTable, Lifecycle) {
  OwnershipTable t;
  t.on_fork(2, 1000, 1000, 1);
  EXPECT_THROW(t.on_fork(2, 0, 0, 2), OwnershipError);
  EXPECT_THROW(t.on_sudo(9, 0, 0), OwnershipError);

  auto r = t.resolve(2, {0, 0});
  EXPECT_EQ(r.creds, (Credentials{1000, 1000}));
  EXPECT_TRUE(r.mismatch);
  EXPECT_FALSE(t.resolve(2, {1000, 1000}).mismatch);

  t.on_sudo(2, 0, 0);
  EXPECT_EQ(t.resolve(2, {0, 0}).creds, (Credentials{0, 0}));
  EXPECT_FALSE(t.resolve(2, {0, 0}).mismatch);

  t.on_exit(2);
  EXPECT_EQ(t.find(2), nullptr);
  EXPECT_EQ(t.resolve(2, {5, 5}).creds, (Credentials{5, 5}));
}

class MediateTest : public ::testing::Test {
 protected:
  void SetUp() override {
    sacl = parse_sacl("/etc/shadow 400 0 0\n/etc/pam.d/su 000 0 0\n/etc/passwd 444 0 0\n/home/user/test 755 1000 1000\n");
    state.owners.on_fork(2, 1000, 1000, 0);
    state.owners.on_fork(3, 0, 0, 0);
  }

  Verdict run(const SyscallEvent& ev, Credentials claimed) {
    return mediate(ev, claimed, sacl, state, options, auth, 1);
  }

  Sacl sacl;
  MediationState state;
  PolicyOptions options;
  AuthConfig auth;
};

TEST_F(MediateTest, ShadowRules) {
  EXPECT_EQ(run(make_event(SyscallId::Open, 3, {"/etc/shadow"}, kRead), {0, 0}).decision, Decision::Permit);
  auto w = run(make_event(SyscallId::Open, 3, {"/etc/shadow"}, kWriteTrunc), {0, 0});
  EXPECT_EQ(w.decision, Decision::Deny);
  EXPECT_EQ(w.reason, VerdictReason::SaclDeny);
  EXPECT_EQ(run(make_event(SyscallId::Rename, 3, {"/etc/nshadow", "/etc/shadow"}), {0, 0}).decision, Decision::Deny);
  EXPECT_EQ(run(make_event(SyscallId::Open, 3, {"/etc/pam.d/su"}, kRead), {0, 0}).decision, Decision::Deny);
  EXPECT_EQ(run(make_event(SyscallId::Open, 3, {"/etc/nshadow"}, kCreate), {0, 0}).decision, Decision::Permit);
}

TEST_F(MediateTest, RecordedOwnerWinsOverClaim) {
  // pid 2 was recorded as uid 1000; claiming root does not unlock the root-only file.
  auto v = run(make_event(SyscallId::Open, 2, {"/etc/shadow"}, kRead), {0, 0});
  EXPECT_EQ(v.decision, Decision::Deny);
  EXPECT_EQ(v.resolved, (Credentials{1000, 1000}));
  EXPECT_TRUE(v.mismatch);
}

TEST_F(MediateTest, MismatchDenyOption) {
  options.deny_on_ownership_mismatch = true;
  auto v = run(make_event(SyscallId::Open, 2, {"/tmp/x"}, kRead), {0, 0});
  EXPECT_EQ(v.reason, VerdictReason::OwnershipMismatchDeny);
  EXPECT_EQ(run(make_event(SyscallId::Open, 2, {"/tmp/x"}, kRead), {1000, 1000}).decision, Decision::Permit);
}

TEST_F(MediateTest, HardDeniedAcrossEveryInput) {
  for (SyscallId id : PolicyOptions::default_hard_denied())
    for (Credentials c : {Credentials{0, 0}, Credentials{1000, 1000}})
      for (bool wl : {false, true}) {
        options.exec_whitelist = wl;
        auto v = run(make_event(id, 3, paths_for(id)), c);
        EXPECT_EQ(v.decision, Decision::Deny);
        EXPECT_EQ(v.reason, VerdictReason::HardDeniedCall);
      }
  PolicyOptions weak;
  weak.hard_denied_calls.erase(SyscallId::KexecLoad);
  EXPECT_THROW(weak.validate(), std::invalid_argument);
}

TEST_F(MediateTest, ExecWhitelist) {
  options.exec_whitelist = true;
  EXPECT_EQ(run(make_event(SyscallId::Execve, 2, {"/home/user/test"}), {1000, 1000}).decision, Decision::Permit);
  auto miss = run(make_event(SyscallId::Execve, 2, {"/home/user/newfile"}), {1000, 1000});
  EXPECT_EQ(miss.reason, VerdictReason::WhitelistMiss);
  options.exec_whitelist = false;
  EXPECT_EQ(run(make_event(SyscallId::Execve, 2, {"/home/user/newfile"}), {1000, 1000}).decision, Decision::Permit);
}

TEST_F(MediateTest, UnauthenticatedDeniesListedPathsOnly) {
  auth = parse_secrets("1000 pw\n");
  EXPECT_EQ(run(make_event(SyscallId::Execve, 2, {"/home/user/test"}), {1000, 1000}).reason,
            VerdictReason::Unauthenticated);
  EXPECT_EQ(run(make_event(SyscallId::Open, 2, {"/home/user/other"}, kRead), {1000, 1000}).decision,
            Decision::Permit);
  auto tok = run(make_event(SyscallId::Open, 2, {make_token_path("c", "pw")}, kCreate), {1000, 1000});
  EXPECT_TRUE(tok.token_handled);
  EXPECT_EQ(tok.decision, Decision::Permit);
  EXPECT_EQ(run(make_event(SyscallId::Execve, 2, {"/home/user/test"}), {1000, 1000}).decision, Decision::Permit);
}

TEST_F(MediateTest, ReturnValueDependsOnlyOnRecordedOwner) {
  // Tampering with the claim never changes the decision while the pid is tracked.
  std::mt19937_64 rng(11);
  const std::vector<std::string> pool = {"/etc/shadow", "/etc/passwd", "/etc/pam.d/su", "/home/user/test", "/tmp/x"};
  const std::vector<OpenFlags> flags = {kRead, kWriteTrunc, kCreate};
  std::vector<SyscallId> file_calls;
  for (SyscallId id : all_syscalls())
    if (is_file_operation(id)) file_calls.push_back(id);
  for (int i = 0; i < 2000; ++i) {
    SyscallId id = file_calls[rng() % file_calls.size()];
    std::vector<std::string> paths;
    for (std::size_t k = 0; k < SyscallEvent{0, 2, id, {}}.path_count(); ++k) paths.push_back(pool[rng() % pool.size()]);
    SyscallEvent ev = make_event(id, 2, paths, flags[rng() % flags.size()]);
    Credentials forged{static_cast<Uid>(rng() % 3 == 0 ? 0 : rng() % 5000), static_cast<Gid>(rng() % 5000)};
    Verdict honest = run(ev, {1000, 1000});
    Verdict tampered = run(ev, forged);
    ASSERT_EQ(honest.decision, tampered.decision) << to_string(id);
    ASSERT_EQ(honest.reason, tampered.reason);
  }
}

TEST(ApplyVerdict, NullsFirstPathOrFirstSlot) {
  Verdict deny;
  deny.decision = Decision::Deny;
  for (SyscallId id : all_syscalls()) {
    SyscallEvent ev = make_event(id, 2, paths_for(id));
    EXPECT_EQ(apply_verdict(ev, Verdict{}), ev);
    SyscallEvent out = apply_verdict(ev, deny);
    auto idx = ev.path_slot_indices();
    std::size_t slot = idx.empty() ? 0 : idx.front();
    ASSERT_LT(slot, out.args.size()) << to_string(id);
    EXPECT_TRUE(std::holds_alternative<NullAddress>(out.args[slot])) << to_string(id);
    for (std::size_t k = 0; k < out.args.size(); ++k)
      if (k != slot) EXPECT_EQ(out.args[k], ev.args[k]);
  }
}

TEST(DecisionLog, Row) {
  SyscallEvent ev = make_event(SyscallId::Unlink, 4, {"/x"});
  ev.seq = 9;
  Verdict v;
  v.decision = Decision::Deny;
  v.reason = VerdictReason::SaclDeny;
  v.resolved = {1000, 100};
  v.mismatch = true;
  EXPECT_EQ(decision_log_header(), "seq,pid,call,resolved_uid,resolved_gid,decision,reason,mismatch");
  EXPECT_EQ(decision_log_row(ev, v), "9,4,unlink,1000,100,deny,SaclDeny,1");
}

}  // namespace
}  // namespace ferify
