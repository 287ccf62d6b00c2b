#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ff/emulator.hpp"
#include "ff/program.hpp"

namespace ff {

// The attacker's view of a run is the halt code alone. A program under test
// declares one accepted ("good") input and one rejected ("bad") input whose
// halt codes must differ.
struct Observables {
  uint32_t good = 0;
  uint32_t bad = 0;
};

// Effect of one injected fault on the bad-input run:
//   Success   halted with the good observable (the attack worked)
//   NoEffect  halted with the bad observable (nothing gained)
//   Crash     abnormal termination
//   Other     halted with any other code; includes the reserved trap code
enum class FaultClass { Success, NoEffect, Crash, Other };

const char* fault_class_name(FaultClass c);

struct FaultOutcome {
  FaultSpec spec;
  FaultClass cls = FaultClass::NoEffect;
  CrashReason reason = CrashReason::InvalidOpcode;  // valid when cls == Crash
  uint32_t code = 0;                                // valid when cls == Other
  uint32_t pc = 0;          // address of the faulted instruction
  std::string disasm;       // its unfaulted text
};

struct VulnerabilityReport {
  FaultModel model = FaultModel::InstructionSkip;
  Observables observables;
  uint32_t trace_length = 0;
  uint64_t campaign_runs = 0;
  std::vector<FaultOutcome> outcomes;   // enumeration order
  std::vector<FaultOutcome> successes;  // the Success subset, same order
};

// Halt codes for both declared inputs. Throws BaselineCrash if either
// fault-free run does not halt, IndistinguishableInputs if the codes match.
Observables observables(const ProgramImage& img, std::span<const uint32_t> good_input,
                        std::span<const uint32_t> bad_input, const Limits& limits = {});

// Pure enumeration core: all single-fault specs for a trace of the given
// length. Skip: one per offset, in offset order. Bit flip: 32 per offset,
// offset-major then bit 0..31.
std::vector<FaultSpec> enumerate_faults(uint32_t trace_length, FaultModel model);

// Enumeration against an image: runs the bad input fault-free and enumerates
// over its trace. Same errors as observables().
std::vector<FaultSpec> enumerate_faults(const ProgramImage& img, std::span<const uint32_t> bad_input,
                                        FaultModel model, const Limits& limits = {});

FaultClass classify(const RunResult& result, const Observables& obs);

// Exhaustive single-fault campaign over the bad-input trace. Workers run
// independent simulations on private machine states; results are keyed by
// spec index, so the report is byte-identical no matter the worker count
// (0 = one worker per available hardware thread).
VulnerabilityReport campaign(const ProgramImage& img, std::span<const uint32_t> good_input,
                             std::span<const uint32_t> bad_input, FaultModel model,
                             const Limits& limits = {}, unsigned workers = 0);

}  // namespace ff
