#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ferify/syscall.hpp"
#include "ferify/trap.hpp"

namespace ferify {

enum class BenchKind : std::uint8_t {
  S1_NoTrap,     // ferify not deployed
  S2_EmptySacl,  // deployed with an empty SACL
  S3_FullSacl,   // deployed with an entry for every guest file
};

std::string_view to_string(BenchKind kind);

struct BenchScenario {
  BenchKind kind = BenchKind::S1_NoTrap;
  TrapMode trap_mode = TrapMode::Classic4;
  CostModel cost_model;
  std::size_t guest_files = 1000;  // synthetic guest size; the S3 SACL has this many entries
  std::uint64_t seed = 1;
};

struct BenchResult {
  SyscallId call = SyscallId::Open;
  BenchKind kind = BenchKind::S1_NoTrap;
  TrapMode trap_mode = TrapMode::Classic4;
  std::size_t sacl_size = 0;
  std::size_t repetitions = 0;
  double mean_model_cost = 0.0;  // modeled trap overhead per call
  double mean_wall_ns = 0.0;     // measured mediation time per call
  double ratio_vs_S1 = 1.0;      // (native + overhead) / native
  long total_switches = 0;
};

/// The three benchmarked calls.
std::span<const SyscallId> bench_calls();

/// Issues `n` independent calls of `call` (open, rename, or unlink) against a synthetic guest.
/// Throws std::invalid_argument for n == 0, another call, or a non-positive native cost.
BenchResult run_workload(SyscallId call, std::size_t n, const BenchScenario& scenario);

/// Runs every scenario with the same call, alternating one call per scenario so that machine
/// drift during the run affects all of them alike. One result per scenario, in order.
std::vector<BenchResult> run_interleaved(SyscallId call, std::size_t n, std::span<const BenchScenario> scenarios);

/// S3 results for each size in `sizes` (must be strictly ascending), measured interleaved.
std::vector<BenchResult> sacl_scaling(SyscallId call, std::span<const std::size_t> sizes, std::size_t n,
                                      BenchScenario base);

std::string bench_csv_header();
std::string bench_csv_row(const BenchResult& result);

}  // namespace ferify
