#include "ferify/bench.hpp"

#include <array>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ferify/guest.hpp"
#include "ferify/simulator.hpp"

namespace ferify {

namespace {

constexpr std::array<SyscallId, 3> kBenchCalls = {SyscallId::Open, SyscallId::Rename, SyscallId::Unlink};

constexpr Pid kBenchPid = 2;

SyscallEvent workload_event(SyscallId call, const std::string& path) {
  switch (call) {
    case SyscallId::Open: return make_event(call, kBenchPid, {path}, OpenFlags{AccessMode::ReadWrite});
    case SyscallId::Rename: return make_event(call, kBenchPid, {path, path + ".mv"});
    default: return make_event(call, kBenchPid, {path});
  }
}

// Puts the guest back the way it was before `event`, without going through the trap layer.
void restore(Guest& guest, const SyscallEvent& event, const GuestFile& before) {
  if (event.call == SyscallId::Rename) {
    SyscallEvent back = make_event(SyscallId::Rename, kBenchPid, {std::string(*event.path(1)), before.path});
    if (!guest.execute_syscall(back).ok()) throw std::logic_error("bench: rename restore failed");
  } else if (event.call == SyscallId::Unlink) {
    guest.add_file(before);
  }
}

}  // namespace

std::string_view to_string(BenchKind kind) {
  switch (kind) {
    case BenchKind::S1_NoTrap: return "S1";
    case BenchKind::S2_EmptySacl: return "S2";
    case BenchKind::S3_FullSacl: return "S3";
  }
  return "?";
}

std::span<const SyscallId> bench_calls() { return kBenchCalls; }

namespace {

void validate(SyscallId call, std::size_t n, const BenchScenario& scenario) {
  if (n == 0) throw std::invalid_argument("bench: repetitions must be >= 1");
  if (call != SyscallId::Open && call != SyscallId::Rename && call != SyscallId::Unlink)
    throw std::invalid_argument("bench: unsupported call " + std::string(to_string(call)));
  if (scenario.guest_files == 0) throw std::invalid_argument("bench: synthetic guest needs at least one file");
  scenario.cost_model.validate();
  if (scenario.cost_model.native_cost <= 0) throw std::invalid_argument("bench: native cost must be positive");
}

// One scenario's guest and accumulators, advanced one call at a time.
class Workload {
 public:
  Workload(SyscallId call, const BenchScenario& scenario)
      : call_(call), scenario_(scenario), rng_(scenario.seed), pick_(0, scenario.guest_files - 1) {
    Guest guest = make_synthetic_guest(scenario.guest_files);
    guest.spawn_process(1, {0, 0}, kBenchPid);
    Sacl sacl = scenario.kind == BenchKind::S3_FullSacl ? generate_full_sacl(guest) : Sacl{};
    sacl_size_ = sacl.size();
    if (scenario.kind == BenchKind::S1_NoTrap) {
      bare_ = std::move(guest);
      return;
    }
    PolicyOptions options;
    options.trap_mode = scenario.trap_mode;
    sim_.emplace(std::move(guest), std::move(sacl), options, AuthConfig{}, scenario.cost_model);
  }

  void step() {
    SyscallEvent ev = workload_event(call_, synthetic_file_path(pick_(rng_)));
    if (!sim_) {
      GuestFile before = *bare_.file(*ev.path(0));
      if (!bare_.execute_syscall(ev).ok()) throw std::logic_error("bench: untrapped call failed");
      restore(bare_, ev, before);
      return;
    }
    GuestFile before = *sim_->guest().file(*ev.path(0));
    StepResult step = sim_->syscall(ev);
    if (step.verdict.decision != Decision::Permit || !step.outcome.ok())
      throw std::logic_error("bench: workload call was not permitted");
    model_total_ += cost_of(step.record, scenario_.cost_model);
    wall_total_ += static_cast<double>(step.mediation_ns);
    restore(sim_->guest(), ev, before);
  }

  BenchResult finish(std::size_t n) const {
    BenchResult result;
    result.call = call_;
    result.kind = scenario_.kind;
    result.trap_mode = scenario_.trap_mode;
    result.sacl_size = sacl_size_;
    result.repetitions = n;
    if (!sim_) return result;
    const double reps = static_cast<double>(n);
    result.mean_model_cost = model_total_ / reps;
    result.mean_wall_ns = wall_total_ / reps;
    result.ratio_vs_S1 =
        (scenario_.cost_model.native_cost + result.mean_model_cost) / scenario_.cost_model.native_cost;
    result.total_switches = sim_->traps().total_switches();
    return result;
  }

 private:
  SyscallId call_;
  BenchScenario scenario_;
  std::mt19937_64 rng_;
  std::uniform_int_distribution<std::size_t> pick_;
  std::size_t sacl_size_ = 0;
  Guest bare_;
  std::optional<Simulator> sim_;
  double model_total_ = 0.0;
  double wall_total_ = 0.0;
};

}  // namespace

BenchResult run_workload(SyscallId call, std::size_t n, const BenchScenario& scenario) {
  validate(call, n, scenario);
  Workload w(call, scenario);
  for (std::size_t i = 0; i < n; ++i) w.step();
  return w.finish(n);
}

std::vector<BenchResult> run_interleaved(SyscallId call, std::size_t n, std::span<const BenchScenario> scenarios) {
  for (const auto& s : scenarios) validate(call, n, s);
  std::vector<std::unique_ptr<Workload>> workloads;
  for (const auto& s : scenarios) workloads.push_back(std::make_unique<Workload>(call, s));
  for (std::size_t i = 0; i < n; ++i)
    for (auto& w : workloads) w->step();
  std::vector<BenchResult> out;
  for (const auto& w : workloads) out.push_back(w->finish(n));
  return out;
}

std::vector<BenchResult> sacl_scaling(SyscallId call, std::span<const std::size_t> sizes, std::size_t n,
                                      BenchScenario base) {
  for (std::size_t i = 1; i < sizes.size(); ++i)
    if (sizes[i] <= sizes[i - 1]) throw std::invalid_argument("bench: sizes must be strictly ascending");
  std::vector<BenchScenario> scenarios;
  base.kind = BenchKind::S3_FullSacl;
  for (std::size_t size : sizes) {
    base.guest_files = size;
    scenarios.push_back(base);
  }
  return run_interleaved(call, n, scenarios);
}

std::string bench_csv_header() {
  return "call,scenario,trap_mode,sacl_size,n,mean_model_cost,mean_wall_ns,ratio_vs_S1,total_switches";
}

std::string bench_csv_row(const BenchResult& r) {
  std::ostringstream os;
  os << to_string(r.call) << ',' << to_string(r.kind) << ',' << to_string(r.trap_mode) << ',' << r.sacl_size << ','
     << r.repetitions << ',' << r.mean_model_cost << ',' << r.mean_wall_ns << ',' << r.ratio_vs_S1 << ','
     << r.total_switches;
  return os.str();
}

}  // namespace ferify
