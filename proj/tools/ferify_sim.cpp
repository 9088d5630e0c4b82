#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ferify/bench.hpp"
#include "ferify/scenario.hpp"

namespace {

constexpr int kExitMismatch = 1;
constexpr int kExitUsage = 2;

int run_bench_mode(const ferify::RunConfig& config, const std::vector<std::size_t>& sizes, std::size_t reps,
                   std::size_t guest_files) {
  using namespace ferify;
  if (reps == 0) {
    std::cerr << "error: --reps must be at least 1\n";
    return kExitUsage;
  }
  BenchScenario base;
  base.trap_mode = config.trap_mode;
  base.cost_model.switch_cost = config.switch_cost;
  base.guest_files = guest_files;

  std::vector<BenchResult> rows;
  try {
    for (SyscallId call : bench_calls()) {
      if (!sizes.empty()) {
        auto scaled = sacl_scaling(call, sizes, reps, base);
        rows.insert(rows.end(), scaled.begin(), scaled.end());
        continue;
      }
      std::vector<BenchScenario> table;
      for (BenchKind kind : {BenchKind::S1_NoTrap, BenchKind::S2_EmptySacl, BenchKind::S3_FullSacl}) {
        table.push_back(base);
        table.back().kind = kind;
      }
      auto measured = run_interleaved(call, reps, table);
      rows.insert(rows.end(), measured.begin(), measured.end());
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  if (!config.out_path.empty()) {
    std::ofstream out(config.out_path, std::ios::binary);
    if (!out) {
      std::cerr << "error: cannot write '" << config.out_path << "'\n";
      return kExitUsage;
    }
    out << bench_csv_header() << '\n';
    for (const auto& r : rows) out << bench_csv_row(r) << '\n';
  }

  std::printf("%-8s %-4s %-8s %10s %8s %14s %14s %10s %10s\n", "call", "scen", "mode", "sacl_size", "n",
              "model_cost", "wall_ns", "ratio_S1", "switches");
  for (const auto& r : rows) {
    std::printf("%-8s %-4s %-8s %10zu %8zu %14.1f %14.1f %10.3f %10ld\n", std::string(to_string(r.call)).c_str(),
                std::string(to_string(r.kind)).c_str(), std::string(to_string(r.trap_mode)).c_str(), r.sacl_size,
                r.repetitions, r.mean_model_cost, r.mean_wall_ns, r.ratio_vs_S1, r.total_switches);
  }
  return 0;
}

int run_scenario_mode(const ferify::RunConfig& config) {
  using namespace ferify;
  if (config.sacl_path.empty() || config.scenario_path.empty()) {
    std::cerr << "error: --sacl and --scenario are required (or use --bench)\n";
    return kExitUsage;
  }
  ScenarioReport report;
  try {
    report = run_scenario(config);
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (config.out_path.empty()) {
    std::cout << decision_log_header() << '\n';
    for (const auto& row : report.decision_log) std::cout << row << '\n';
  }
  for (const auto& m : report.mismatch_messages) std::cerr << "MISMATCH " << m << '\n';
  std::cerr << report.decision_log.size() << " syscalls, " << report.expectations << " expectations, "
            << report.mismatches << " mismatches, " << report.total_switches << " context switches\n";
  return report.mismatches == 0 ? 0 : kExitMismatch;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shadow-ACL file protection simulator: scenario replay and overhead benchmark"};

  ferify::RunConfig config;
  std::string trap_mode = "classic";
  bool bench = false;
  std::vector<std::size_t> sizes;
  std::size_t reps = 20;
  std::size_t guest_files = 100000;

  app.add_option("--sacl", config.sacl_path, "SACL file (<path> <ooo> <uid> <gid> per line)");
  app.add_option("--scenario", config.scenario_path, "JSON-lines scenario file");
  app.add_flag("--whitelist-exec", config.exec_whitelist, "Only SACL-listed programs may execute");
  app.add_option("--auth-secrets", config.auth_secrets_path, "2-step auth secrets (<uid> <secret> per line)");
  app.add_option("--auth-window", config.auth_window, "Ticks a successful token stays valid")
      ->check(CLI::PositiveNumber);
  app.add_option("--trap-mode", trap_mode, "Trap handling: classic (4 switches) or nop (2 switches)")
      ->check(CLI::IsMember({"classic", "classic4", "nop", "nop2"}));
  app.add_option("--switch-cost", config.switch_cost, "Modeled cost of one VM-exit or VM-entry")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--bench", bench, "Run the open/rename/unlink overhead benchmark");
  app.add_option("--sizes", sizes, "SACL sizes for the scaling run, e.g. 100,1000,10000,100000")->delimiter(',');
  app.add_option("--reps", reps, "Repetitions per benchmark cell");
  app.add_option("--guest-files", guest_files, "Synthetic guest size for the S1/S2/S3 benchmark")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", config.out_path, "Output CSV (decision log or benchmark table)");
  app.add_option("--trap-log", config.trap_log_path, "Per-trap CSV for scenario runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  config.trap_mode = ferify::parse_trap_mode(trap_mode);

  return bench ? run_bench_mode(config, sizes, reps, guest_files) : run_scenario_mode(config);
}
