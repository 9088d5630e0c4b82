#include "ferify/scenario.hpp"

#include <fstream>
#include <optional>
#include <sstream>

#include <json.hpp>

namespace ferify {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(std::string("cannot open ") + what + " '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

template <typename T>
T field(const json& ev, const char* key) {
  if (!ev.contains(key)) throw ScenarioError(std::string("missing field '") + key + "'");
  try {
    return ev.at(key).get<T>();
  } catch (const json::exception&) {
    throw ScenarioError(std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const json& ev, const char* key) {
  if (!ev.contains(key)) return std::nullopt;
  return field<T>(ev, key);
}

Credentials creds_of(const json& ev) { return {field<Uid>(ev, "uid"), field<Gid>(ev, "gid")}; }

SyscallEvent build_event(const json& ev) {
  auto name = field<std::string>(ev, "call");
  auto call = parse_syscall(name);
  if (!call) throw ScenarioError("unknown call '" + name + "'");
  Pid pid = field<Pid>(ev, "pid");

  std::vector<std::string> paths;
  if (auto p = optional_field<std::string>(ev, "path")) paths.push_back(*p);
  if (auto p = optional_field<std::string>(ev, "path2")) paths.push_back(*p);
  OpenFlags flags;
  if (auto names = optional_field<std::vector<std::string>>(ev, "flags")) flags = OpenFlags::parse(*names);
  std::vector<std::int64_t> ints = optional_field<std::vector<std::int64_t>>(ev, "ints").value_or(std::vector<std::int64_t>{});
  return make_event(*call, pid, std::move(paths), flags, std::move(ints));
}

class Runner {
 public:
  explicit Runner(Simulator& sim) : sim_(sim) {}

  void apply(const json& ev, std::size_t line_no) {
    const auto kind = field<std::string>(ev, "ev");
    if (kind == "user") {
      sim_.guest().add_user(UserAccount{field<Uid>(ev, "uid"), field<Gid>(ev, "gid"),
                                        optional_field<std::string>(ev, "name").value_or("")});
    } else if (kind == "file") {
      GuestFile f;
      f.path = field<std::string>(ev, "path");
      f.owner_uid = field<Uid>(ev, "uid");
      f.owner_gid = field<Gid>(ev, "gid");
      f.is_directory = optional_field<bool>(ev, "dir").value_or(false);
      f.guest_perms = PermissionOctets::parse(optional_field<std::string>(ev, "perm").value_or(f.is_directory ? "755" : "644"));
      sim_.guest().add_file(std::move(f), true);
    } else if (kind == "spawn") {
      sim_.spawn(field<Pid>(ev, "parent"), creds_of(ev), optional_field<Pid>(ev, "pid"));
    } else if (kind == "sudo") {
      sim_.sudo(field<Pid>(ev, "pid"), creds_of(ev));
    } else if (kind == "setcred") {
      sim_.tamper_credentials(field<Pid>(ev, "pid"), creds_of(ev));
    } else if (kind == "tick") {
      sim_.advance_clock(field<Seq>(ev, "n"));
    } else if (kind == "sys") {
      StepResult step = sim_.syscall(build_event(ev));
      report_.decision_log.push_back(decision_log_row(step.event, step.verdict));
      report_.trap_records.push_back(step.record);
      last_ = std::move(step);
    } else if (kind == "expect") {
      check(ev, line_no);
    } else {
      throw ScenarioError("unknown event kind '" + kind + "'");
    }
  }

  ScenarioReport finish() {
    report_.total_switches = sim_.traps().total_switches();
    report_.total_cost = sim_.traps().total_cost();
    return std::move(report_);
  }

 private:
  void check(const json& ev, std::size_t line_no) {
    if (!last_) throw ScenarioError("expect without a preceding sys event");
    ++report_.expectations;
    const std::string where = "line " + std::to_string(line_no) + " (seq " + std::to_string(last_->event.seq) + ", " +
                              std::string(to_string(last_->event.call)) + "): ";
    if (auto d = optional_field<std::string>(ev, "decision")) {
      if (*d != "permit" && *d != "deny") throw ScenarioError("decision must be 'permit' or 'deny'");
      if (*d != to_string(last_->verdict.decision))
        fail(where + "expected " + *d + ", got " + std::string(to_string(last_->verdict.decision)) + " (" +
             std::string(to_string(last_->verdict.reason)) + ")");
    }
    if (auto r = optional_field<std::string>(ev, "reason")) {
      if (*r != to_string(last_->verdict.reason))
        fail(where + "expected reason " + *r + ", got " + std::string(to_string(last_->verdict.reason)));
    }
    if (auto o = optional_field<std::string>(ev, "outcome")) {
      if (*o != "success" && !parse_error_code(*o)) throw ScenarioError("unknown outcome '" + *o + "'");
      if (*o != outcome_name(last_->outcome))
        fail(where + "expected outcome " + *o + ", got " + outcome_name(last_->outcome));
    }
  }

  void fail(std::string message) {
    ++report_.mismatches;
    report_.mismatch_messages.push_back(std::move(message));
  }

  Simulator& sim_;
  ScenarioReport report_;
  std::optional<StepResult> last_;
};

}  // namespace

ScenarioReport run_scenario_text(std::string_view scenario, Simulator& sim) {
  Runner runner(sim);
  std::istringstream in{std::string(scenario)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      json ev = json::parse(line);
      if (!ev.is_object()) throw ScenarioError("event must be a JSON object");
      runner.apply(ev, line_no);
    } catch (const std::exception& e) {
      // Guest, ownership, JSON, and argument errors all make the scenario itself invalid.
      throw ScenarioError("scenario line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return runner.finish();
}

ScenarioReport run_scenario(const RunConfig& config) {
  Sacl sacl;
  AuthConfig auth;
  try {
    sacl = parse_sacl(read_file(config.sacl_path, "SACL file"));
    if (!config.auth_secrets_path.empty())
      auth = parse_secrets(read_file(config.auth_secrets_path, "secrets file"), config.auth_window);
    auth.window = config.auth_window;
    auth.validate();
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::exception& e) {
    throw ScenarioError(e.what());
  }

  PolicyOptions options;
  options.exec_whitelist = config.exec_whitelist;
  options.trap_mode = config.trap_mode;
  CostModel cost;
  cost.switch_cost = config.switch_cost;
  if (cost.switch_cost < 0) throw ScenarioError("switch cost must be non-negative");

  Simulator sim(std::move(sacl), options, auth, cost);
  ScenarioReport report = run_scenario_text(read_file(config.scenario_path, "scenario file"), sim);

  if (!config.out_path.empty()) {
    std::ofstream out(config.out_path, std::ios::binary);
    if (!out) throw ScenarioError("cannot write '" + config.out_path + "'");
    out << decision_log_header() << '\n';
    for (const auto& row : report.decision_log) out << row << '\n';
  }
  if (!config.trap_log_path.empty()) {
    std::ofstream out(config.trap_log_path, std::ios::binary);
    if (!out) throw ScenarioError("cannot write '" + config.trap_log_path + "'");
    out << trap_csv_header() << '\n';
    for (const auto& rec : report.trap_records) out << trap_csv_row(rec, cost) << '\n';
  }
  return report;
}

}  // namespace ferify
