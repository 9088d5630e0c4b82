#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ferify/simulator.hpp"

namespace ferify {

/// Malformed scenario, SACL, or secrets input, or a scenario event the guest rejects.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string sacl_path;
  std::string scenario_path;
  bool exec_whitelist = false;
  std::string auth_secrets_path;  // empty: 2-step auth disabled
  Seq auth_window = kDefaultAuthWindow;
  TrapMode trap_mode = TrapMode::Classic4;
  double switch_cost = CostModel{}.switch_cost;
  std::string out_path;       // decision log CSV; empty: not written
  std::string trap_log_path;  // per-trap CSV; empty: not written
};

struct ScenarioReport {
  std::vector<std::string> decision_log;  // one row per sys event, no header
  std::vector<TrapSequenceRecord> trap_records;
  std::size_t expectations = 0;
  std::size_t mismatches = 0;
  std::vector<std::string> mismatch_messages;
  long total_switches = 0;
  double total_cost = 0.0;

  int exit_code() const { return mismatches == 0 ? 0 : 1; }
};

/// Replays JSON-lines scenario events against `sim`. Throws ScenarioError naming the line.
ScenarioReport run_scenario_text(std::string_view scenario, Simulator& sim);

/// Loads every file named by `config`, runs the scenario, and writes the requested logs.
/// Throws ScenarioError on any configuration or parse problem.
ScenarioReport run_scenario(const RunConfig& config);

}  // namespace ferify
