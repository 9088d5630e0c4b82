#pragma once

#include <optional>

#include "ferify/auth.hpp"
#include "ferify/guest.hpp"
#include "ferify/mediator.hpp"
#include "ferify/sacl.hpp"
#include "ferify/trap.hpp"

namespace ferify {

struct StepResult {
  SyscallEvent event;      // as issued, with its sequence number
  Verdict verdict;
  TrapSequenceRecord record;
  SyscallEvent forwarded;  // as executed by the guest
  SyscallOutcome outcome;
  std::int64_t mediation_ns = 0;  // wall-clock time spent inside mediate()
};

/// Guest + trap layer + mediation plugin wired together. Events are applied one at a time.
class Simulator {
 public:
  Simulator(Sacl sacl, PolicyOptions options = {}, AuthConfig auth = {}, CostModel cost = {});
  /// Starts from an existing guest. Its live processes are recorded with their current creds.
  Simulator(Guest guest, Sacl sacl, PolicyOptions options = {}, AuthConfig auth = {}, CostModel cost = {});

  Guest& guest() { return guest_; }
  const Guest& guest() const { return guest_; }
  const Sacl& sacl() const { return sacl_; }
  const MediationState& state() const { return state_; }
  const TrapEngine& traps() const { return traps_; }
  const PolicyOptions& options() const { return options_; }

  /// A login or service start: the process's own creds are recorded as authoritative.
  Pid spawn(Pid parent, Credentials creds, std::optional<Pid> requested = std::nullopt);
  /// Legitimate privilege change; updates both the guest task and the recorded owner.
  void sudo(Pid pid, Credentials creds);
  /// Credential change made behind the hypervisor's back (e.g. by a kernel module).
  void tamper_credentials(Pid pid, Credentials creds);
  void advance_clock(Seq ticks) { guest_.advance_clock(ticks); }

  /// Traps, mediates, and executes one syscall. Throws GuestError if the pid is not a live process.
  StepResult syscall(SyscallEvent event);

 private:
  Guest guest_;
  Sacl sacl_;
  PolicyOptions options_;
  AuthConfig auth_;
  MediationState state_;
  TrapEngine traps_;
};

}  // namespace ferify
