#include "ferify/simulator.hpp"

#include <chrono>

namespace ferify {

Simulator::Simulator(Sacl sacl, PolicyOptions options, AuthConfig auth, CostModel cost)
    : Simulator(Guest{}, std::move(sacl), std::move(options), std::move(auth), cost) {}

Simulator::Simulator(Guest guest, Sacl sacl, PolicyOptions options, AuthConfig auth, CostModel cost)
    : guest_(std::move(guest)), sacl_(std::move(sacl)), options_(std::move(options)), auth_(std::move(auth)),
      traps_(cost) {
  options_.validate();
  auth_.validate();
  traps_.install_all(options_.trap_mode);
  guest_.drain_fork_notices();
  for (Pid pid : guest_.live_pids()) {
    const Process* p = guest_.process(pid);
    state_.owners.on_fork(pid, p->claimed.uid, p->claimed.gid, guest_.now());
  }
}

Pid Simulator::spawn(Pid parent, Credentials creds, std::optional<Pid> requested) {
  Pid pid = guest_.spawn_process(parent, creds, requested);
  for (const ForkNotice& n : guest_.drain_fork_notices()) state_.owners.on_fork(n.child, n.creds.uid, n.creds.gid, n.seq);
  return pid;
}

void Simulator::sudo(Pid pid, Credentials creds) {
  guest_.set_credentials(pid, creds);
  if (state_.owners.find(pid) == nullptr) {
    state_.owners.on_fork(pid, creds.uid, creds.gid, guest_.now());
  } else {
    state_.owners.on_sudo(pid, creds.uid, creds.gid);
  }
}

void Simulator::tamper_credentials(Pid pid, Credentials creds) { guest_.set_credentials(pid, creds); }

StepResult Simulator::syscall(SyscallEvent event) {
  const Process* proc = guest_.process(event.pid);
  if (proc == nullptr || !proc->alive) throw GuestError("syscall from unknown or dead pid " + std::to_string(event.pid));
  event.seq = guest_.next_seq();

  StepResult result;
  const Credentials claimed = proc->claimed;
  const Seq now = guest_.now();
  auto callback = [&](const SyscallEvent& ev) {
    auto start = std::chrono::steady_clock::now();
    result.verdict = mediate(ev, claimed, sacl_, state_, options_, auth_, now);
    result.mediation_ns =
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
    return CallbackResult{apply_verdict(ev, result.verdict), result.verdict.sacl_probes};
  };
  TrapOutcome trapped = traps_.handle(event, callback);
  result.record = std::move(trapped.record);
  result.forwarded = std::move(trapped.forwarded);
  result.outcome = guest_.execute_syscall(result.forwarded);

  // Children of a traced clone inherit the parent's authoritative owner, not its claimed creds.
  for (const ForkNotice& n : guest_.drain_fork_notices()) {
    Credentials owner = state_.owners.resolve(n.parent, n.creds).creds;
    state_.owners.on_fork(n.child, owner.uid, owner.gid, now);
  }
  if ((event.call == SyscallId::Exit || event.call == SyscallId::ExitGroup) && result.outcome.ok())
    state_.owners.on_exit(event.pid);

  result.event = std::move(event);
  return result;
}

}  // namespace ferify
