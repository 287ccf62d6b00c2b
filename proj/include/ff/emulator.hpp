#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ff/program.hpp"

namespace ff {

// Memory map (word addresses):
//   [0, code_len)        program code, also where execution fetches from
//   [0x8000, 0x8010)     input region, preloaded with the run's input words
//   [0xF000, 0xFFF0)     stack slots; sp starts at 0xFFF0 and grows down
constexpr uint32_t kMemWords = 65536;
constexpr uint32_t kInputBase = 0x8000;
constexpr uint32_t kInputCapacity = 16;
constexpr uint32_t kStackLow = 0xF000;
constexpr uint32_t kStackTop = 0xFFF0;
constexpr uint32_t kDefaultMaxSteps = 100000;

// HALT code reserved for the countermeasures; campaign classification treats
// it as "a check fired", never as a successful attack.
constexpr uint32_t kTrapHaltCode = 0xFD;

enum class CrashReason {
  InvalidOpcode,
  MemOutOfRange,
  StackOutOfRange,
  PcOutOfRange,
  StepLimit,
};

const char* crash_reason_name(CrashReason r);

enum class FaultModel { InstructionSkip, SingleBitFlip };

const char* fault_model_name(FaultModel m);

// A single transient fault, located by *trace offset*: the ordinal of the
// dynamic instruction (0-based) at which it strikes.
//   InstructionSkip: that instruction's side effects are suppressed entirely;
//     the pc advances by one and the skipped slot is not counted as a step.
//   SingleBitFlip: bit `bit` of the code word about to execute is inverted in
//     memory and stays inverted for the rest of the run.
struct FaultSpec {
  FaultModel model = FaultModel::InstructionSkip;
  uint32_t trace_offset = 0;
  uint8_t bit = 0;  // meaningful for SingleBitFlip only

  bool operator==(const FaultSpec&) const = default;
};

struct TraceEntry {
  uint32_t offset = 0;
  uint32_t pc = 0;
  word_t word = 0;

  bool operator==(const TraceEntry&) const = default;
};

struct Limits {
  uint32_t max_steps = kDefaultMaxSteps;
};

struct RunResult {
  enum class Kind { Halted, Crashed };

  Kind kind = Kind::Halted;
  uint32_t halt_code = 0;           // valid when Halted
  CrashReason reason = CrashReason::InvalidOpcode;  // valid when Crashed
  uint64_t steps = 0;
  std::vector<TraceEntry> trace;    // populated by run(), empty for fault runs

  bool halted() const { return kind == Kind::Halted; }
  bool halted_with(uint32_t code) const { return halted() && halt_code == code; }

  bool operator==(const RunResult&) const = default;
};

struct MachineState {
  std::array<uint32_t, 16> regs{};
  bool flag_z = false;
  bool flag_n = false;
  uint32_t pc = 0;
  std::vector<word_t> mem;  // kMemWords words
};

// Reset state for an image + input: zeroed registers and memory, code copied
// to address 0, data-init applied, input words at 0x8000, sp = 0xFFF0.
// Throws InputTooLong if the input exceeds the 16-word input region.
MachineState initial_state(const ProgramImage& img, std::span<const uint32_t> input);

// Fault-free execution with a full trace.
RunResult run(const ProgramImage& img, std::span<const uint32_t> input, const Limits& limits = {});

// Execution trace of the fault-free run (same as run(...).trace).
std::vector<TraceEntry> trace(const ProgramImage& img, std::span<const uint32_t> input,
                              const Limits& limits = {});

// Execution with one injected fault. Throws OffsetUnreached if the run ends
// before the fault's trace offset is reached (equivalently: the fault-free
// trace is shorter than the offset requires).
RunResult run_with_fault(const ProgramImage& img, std::span<const uint32_t> input,
                         const FaultSpec& fault, const Limits& limits = {});

// Test hook for multi-fault experiments (the campaign machinery itself is
// strictly single-fault). Each fault fires when the count of instructions
// executed so far in *this* run equals its trace offset.
RunResult run_with_faults(const ProgramImage& img, std::span<const uint32_t> input,
                          std::span<const FaultSpec> faults, const Limits& limits = {});

}  // namespace ff
