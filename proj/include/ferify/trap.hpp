#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ferify/syscall.hpp"

namespace ferify {

inline constexpr std::uint8_t kBreakpointOpcode = 0xCC;  // INT 3
inline constexpr std::uint8_t kNopOpcode = 0x90;
/// First byte of a syscall entry compiled without a NOP prologue (push %rbp).
inline constexpr std::uint8_t kDefaultPrologueOpcode = 0x55;

enum class TrapMode : std::uint8_t { Classic4, Nop2 };

std::string_view to_string(TrapMode mode);
/// Accepts "classic"/"classic4" and "nop"/"nop2".
TrapMode parse_trap_mode(std::string_view text);

enum class TrapStep : std::uint8_t {
  VmExit,
  Callback,
  RestoreOriginal,
  SetSingleStep,
  VmEntry,
  ExecuteOneInstruction,
  SingleStepException,
  ReinjectBreakpoint,
  ClearSingleStep,
  AdvanceInstructionPointer,
};

std::string_view to_string(TrapStep step);

class TrapError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Simulated entry point of one trapped call: its first code byte and the instruction pointer.
class TrapSite {
 public:
  /// A site compiled with a NOP prologue starts with 0x90 and is handled with two switches.
  explicit TrapSite(SyscallId symbol, bool nop_prologue = false);

  SyscallId symbol() const { return symbol_; }
  std::uint8_t original_opcode() const { return original_; }
  std::uint8_t code_byte() const { return code_; }
  bool armed() const { return armed_; }
  bool nop_prologue() const { return original_ == kNopOpcode; }
  TrapMode mode() const { return nop_prologue() ? TrapMode::Nop2 : TrapMode::Classic4; }

  /// Writes 0xCC over the first byte. Throws TrapError if already armed.
  void arm();

 private:
  friend struct TrapSiteAccess;

  SyscallId symbol_;
  std::uint8_t original_;
  std::uint8_t code_;
  bool armed_ = false;
};

struct CostModel {
  double switch_cost = 1000.0;        // per VM-exit or VM-entry
  double callback_base_cost = 200.0;  // fixed mediation work per trap
  double lookup_cost = 20.0;          // per SACL probe
  double native_cost = 100.0;         // the untrapped syscall itself

  /// Throws std::invalid_argument if any cost is negative.
  void validate() const;
};

struct TrapSequenceRecord {
  SyscallId call = SyscallId::Open;
  TrapMode mode = TrapMode::Classic4;
  int vm_exits = 0;
  int vm_entries = 0;
  int single_steps = 0;
  double callback_cost = 0.0;
  std::vector<TrapStep> steps;
  /// First code byte of the site observed after each step.
  std::vector<std::uint8_t> code_bytes;
  /// Offset of the guest instruction pointer from the site start once the guest resumes.
  int resume_offset = 0;

  int context_switches() const { return vm_exits + vm_entries; }
};

/// (vm_exits + vm_entries) * switch_cost + callback_cost.
double cost_of(const TrapSequenceRecord& record, const CostModel& model);

/// What the mediation callback hands back to the trap layer.
struct CallbackResult {
  SyscallEvent forwarded;  // the event the guest will execute, possibly with a nulled slot
  std::size_t sacl_probes = 0;
};

using TrapCallback = std::function<CallbackResult(const SyscallEvent&)>;

struct TrapOutcome {
  TrapSequenceRecord record;
  SyscallEvent forwarded;
};

/// Breakpoint state machine for a set of trap sites, one trap in flight at a time.
class TrapEngine {
 public:
  explicit TrapEngine(CostModel model = {});

  /// Adds and arms a site. Throws TrapError if the call already has a site.
  void install(SyscallId call, bool nop_prologue);
  /// Installs and arms every trapped call with the given default mode.
  void install_all(TrapMode mode);

  bool has_site(SyscallId call) const { return sites_.contains(call); }
  const TrapSite& site(SyscallId call) const;

  /// Runs the handling sequence for `event`. Throws TrapError if the site is missing or not armed.
  TrapOutcome handle(const SyscallEvent& event, const TrapCallback& callback);

  const CostModel& model() const { return model_; }
  std::size_t traps_handled() const { return traps_; }
  long total_switches() const { return switches_; }
  double total_cost() const { return total_cost_; }

 private:
  CostModel model_;
  std::map<SyscallId, TrapSite> sites_;
  std::size_t traps_ = 0;
  long switches_ = 0;
  double total_cost_ = 0.0;
};

/// Handles one trap on a standalone site. `mode` must match the site's prologue.
TrapOutcome handle_trap(TrapSite& site, const SyscallEvent& event, const TrapCallback& callback, TrapMode mode,
                        const CostModel& model = {});

/// CSV header and one row per record: call,mode,vm_exits,vm_entries,single_steps,callback_cost,cost.
std::string trap_csv_header();
std::string trap_csv_row(const TrapSequenceRecord& record, const CostModel& model);

}  // namespace ferify
