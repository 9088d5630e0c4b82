#include "ferify/trap.hpp"

#include <sstream>

namespace ferify {

std::string_view to_string(TrapMode mode) { return mode == TrapMode::Classic4 ? "classic" : "nop"; }

TrapMode parse_trap_mode(std::string_view text) {
  if (text == "classic" || text == "classic4") return TrapMode::Classic4;
  if (text == "nop" || text == "nop2") return TrapMode::Nop2;
  throw std::invalid_argument("unknown trap mode '" + std::string(text) + "' (expected classic or nop)");
}

std::string_view to_string(TrapStep step) {
  switch (step) {
    case TrapStep::VmExit: return "vm-exit";
    case TrapStep::Callback: return "callback";
    case TrapStep::RestoreOriginal: return "restore-original";
    case TrapStep::SetSingleStep: return "set-single-step";
    case TrapStep::VmEntry: return "vm-entry";
    case TrapStep::ExecuteOneInstruction: return "execute-1-instruction";
    case TrapStep::SingleStepException: return "single-step-exception";
    case TrapStep::ReinjectBreakpoint: return "re-inject-0xCC";
    case TrapStep::ClearSingleStep: return "clear-single-step";
    case TrapStep::AdvanceInstructionPointer: return "advance-instruction-pointer";
  }
  return "?";
}

TrapSite::TrapSite(SyscallId symbol, bool nop_prologue)
    : symbol_(symbol),
      original_(nop_prologue ? kNopOpcode : kDefaultPrologueOpcode),
      code_(original_) {}

void TrapSite::arm() {
  if (armed_) throw TrapError("trap site for " + std::string(to_string(symbol_)) + " is already armed");
  code_ = kBreakpointOpcode;
  armed_ = true;
}

void CostModel::validate() const {
  if (switch_cost < 0 || callback_base_cost < 0 || lookup_cost < 0 || native_cost < 0)
    throw std::invalid_argument("cost model values must be non-negative");
}

double cost_of(const TrapSequenceRecord& record, const CostModel& model) {
  return static_cast<double>(record.vm_exits + record.vm_entries) * model.switch_cost + record.callback_cost;
}

namespace {

class Sequencer {
 public:
  Sequencer(TrapSequenceRecord& rec, const std::uint8_t& code) : rec_(rec), code_(code) {}

  void step(TrapStep s) {
    switch (s) {
      case TrapStep::VmExit: ++rec_.vm_exits; break;
      case TrapStep::VmEntry: ++rec_.vm_entries; break;
      case TrapStep::SingleStepException: ++rec_.single_steps; break;
      default: break;
    }
    rec_.steps.push_back(s);
    rec_.code_bytes.push_back(code_);
  }

 private:
  TrapSequenceRecord& rec_;
  const std::uint8_t& code_;
};

}  // namespace

struct TrapSiteAccess {
  static TrapOutcome run(TrapSite& site, const SyscallEvent& event, const TrapCallback& callback, TrapMode mode,
                         const CostModel& model);
};

TrapOutcome TrapSiteAccess::run(TrapSite& site, const SyscallEvent& event, const TrapCallback& callback,
                                TrapMode mode, const CostModel& model) {
  std::uint8_t& code = site.code_;
  bool& armed = site.armed_;
  const std::uint8_t original = site.original_;
  if (!armed || code != kBreakpointOpcode)
    throw TrapError("trap site for " + std::string(to_string(site.symbol())) + " is not armed");
  if (event.call != site.symbol())
    throw TrapError("event " + std::string(to_string(event.call)) + " does not match site " +
                    std::string(to_string(site.symbol())));

  TrapOutcome out;
  TrapSequenceRecord& rec = out.record;
  rec.call = event.call;
  rec.mode = mode;
  Sequencer seq(rec, code);
  int ip = 0;

  // Guest executes the 0xCC at the entry point.
  ip = 1;
  seq.step(TrapStep::VmExit);
  CallbackResult verdict = callback(event);
  rec.callback_cost = model.callback_base_cost + model.lookup_cost * static_cast<double>(verdict.sacl_probes);
  seq.step(TrapStep::Callback);

  if (mode == TrapMode::Classic4) {
    code = original;
    armed = false;
    ip = 0;
    seq.step(TrapStep::RestoreOriginal);
    seq.step(TrapStep::SetSingleStep);
    seq.step(TrapStep::VmEntry);
    ip = 1;
    seq.step(TrapStep::ExecuteOneInstruction);
    seq.step(TrapStep::SingleStepException);
    seq.step(TrapStep::VmExit);
    code = kBreakpointOpcode;
    armed = true;
    seq.step(TrapStep::ReinjectBreakpoint);
    seq.step(TrapStep::ClearSingleStep);
    seq.step(TrapStep::VmEntry);
  } else {
    // The breakpoint stands in for a NOP, so skipping it executes nothing the syscall needs.
    ip = 1;
    seq.step(TrapStep::AdvanceInstructionPointer);
    seq.step(TrapStep::VmEntry);
  }
  rec.resume_offset = ip;
  out.forwarded = std::move(verdict.forwarded);
  return out;
}

TrapOutcome handle_trap(TrapSite& site, const SyscallEvent& event, const TrapCallback& callback, TrapMode mode,
                        const CostModel& model) {
  if (mode != site.mode())
    throw TrapError(std::string("site for ") + std::string(to_string(site.symbol())) + " cannot run in " +
                    std::string(to_string(mode)) + " mode");
  return TrapSiteAccess::run(site, event, callback, mode, model);
}

TrapEngine::TrapEngine(CostModel model) : model_(model) { model_.validate(); }

void TrapEngine::install(SyscallId call, bool nop_prologue) {
  if (sites_.contains(call)) throw TrapError("duplicate trap site for " + std::string(to_string(call)));
  TrapSite site(call, nop_prologue);
  site.arm();
  sites_.emplace(call, site);
}

void TrapEngine::install_all(TrapMode mode) {
  for (SyscallId id : all_syscalls()) install(id, mode == TrapMode::Nop2);
}

const TrapSite& TrapEngine::site(SyscallId call) const {
  auto it = sites_.find(call);
  if (it == sites_.end()) throw TrapError("no trap site for " + std::string(to_string(call)));
  return it->second;
}

TrapOutcome TrapEngine::handle(const SyscallEvent& event, const TrapCallback& callback) {
  auto it = sites_.find(event.call);
  if (it == sites_.end()) throw TrapError("no trap site for " + std::string(to_string(event.call)));
  TrapSite& site = it->second;
  TrapOutcome out = handle_trap(site, event, callback, site.mode(), model_);
  ++traps_;
  switches_ += out.record.context_switches();
  total_cost_ += cost_of(out.record, model_);
  return out;
}

std::string trap_csv_header() { return "call,mode,vm_exits,vm_entries,single_steps,callback_cost,cost"; }

std::string trap_csv_row(const TrapSequenceRecord& r, const CostModel& model) {
  std::ostringstream os;
  os << to_string(r.call) << ',' << to_string(r.mode) << ',' << r.vm_exits << ',' << r.vm_entries << ','
     << r.single_steps << ',' << r.callback_cost << ',' << cost_of(r, model);
  return os.str();
}

}  // namespace ferify
