#include <doctest.h>

#include <string>
#include <vector>

#include "ff/corpus.hpp"
#include "ff/error.hpp"
#include "ff/faulter.hpp"
#include "ff/pipeline.hpp"

using namespace ff;

namespace {

// Tiny guarded-accept program used across the campaign tests: accepts input
// word 7, rejects everything else.
const char* const kGate =
    "MOVI r1, 0x8000\n"  // 0
    "LD r2, [r1+0]\n"    // 1
    "MOVI r3, 7\n"       // 2
    "CMP r2, r3\n"       // 3
    "BNE no\n"           // 4
    "HALT 1\n"           // 5
    "no: HALT 0\n";      // 6

}  // namespace

TEST_CASE("observables come from the two declared runs") {
  ProgramImage img = assemble_text(kGate);
  Observables obs = observables(img, std::vector<uint32_t>{7}, std::vector<uint32_t>{9});
  CHECK(obs.good == 1);
  CHECK(obs.bad == 0);
}

TEST_CASE("observables validation errors") {
  ProgramImage img = assemble_text(kGate);
  // Same halt code for both inputs: the attacker could not tell them apart.
  CHECK_THROWS_WITH_AS(
      observables(img, std::vector<uint32_t>{9}, std::vector<uint32_t>{8}),
      doctest::Contains("IndistinguishableInputs"), Error);

  // A crashing baseline is not a usable program under test.
  ProgramImage crash = assemble_text("NOP\n");
  CHECK_THROWS_WITH_AS(
      observables(crash, std::vector<uint32_t>{1}, std::vector<uint32_t>{2}),
      doctest::Contains("BaselineCrash"), Error);

  ProgramImage spin = assemble_text("x: JMP x\n");
  CHECK_THROWS_WITH_AS(
      observables(spin, std::vector<uint32_t>{1}, std::vector<uint32_t>{2}, Limits{100}),
      doctest::Contains("BaselineCrash"), Error);
}

TEST_CASE("fault enumeration is exhaustive and ordered") {
  std::vector<FaultSpec> skips = enumerate_faults(10, FaultModel::InstructionSkip);
  REQUIRE(skips.size() == 10);
  for (uint32_t k = 0; k < 10; ++k) {
    CHECK(skips[k].model == FaultModel::InstructionSkip);
    CHECK(skips[k].trace_offset == k);
    CHECK(skips[k].bit == 0);
  }

  std::vector<FaultSpec> flips = enumerate_faults(10, FaultModel::SingleBitFlip);
  REQUIRE(flips.size() == 320);
  for (uint32_t k = 0; k < 320; ++k) {
    CHECK(flips[k].model == FaultModel::SingleBitFlip);
    CHECK(flips[k].trace_offset == k / 32);  // offset-major
    CHECK(flips[k].bit == k % 32);           // then bit order
  }

  CHECK(enumerate_faults(0, FaultModel::InstructionSkip).empty());
  CHECK(enumerate_faults(0, FaultModel::SingleBitFlip).empty());
}

TEST_CASE("image-based enumeration measures the bad-input trace") {
  ProgramImage img = assemble_text(kGate);
  // Bad run: pcs 0,1,2,3,4,6 -> 6 executed instructions.
  std::vector<FaultSpec> skips =
      enumerate_faults(img, std::vector<uint32_t>{9}, FaultModel::InstructionSkip);
  CHECK(skips.size() == 6);
  std::vector<FaultSpec> flips =
      enumerate_faults(img, std::vector<uint32_t>{9}, FaultModel::SingleBitFlip);
  CHECK(flips.size() == 6 * 32);
}

TEST_CASE("classification maps halt codes against the observables") {
  Observables obs{1, 0};

  RunResult good;
  good.kind = RunResult::Kind::Halted;
  good.halt_code = 1;
  CHECK(classify(good, obs) == FaultClass::Success);

  RunResult bad = good;
  bad.halt_code = 0;
  CHECK(classify(bad, obs) == FaultClass::NoEffect);

  RunResult other = good;
  other.halt_code = 42;
  CHECK(classify(other, obs) == FaultClass::Other);

  // The reserved trap code matches neither declared observable, so a fired
  // countermeasure files under Other.
  RunResult trap = good;
  trap.halt_code = kTrapHaltCode;
  CHECK(classify(trap, obs) == FaultClass::Other);

  RunResult crash;
  crash.kind = RunResult::Kind::Crashed;
  crash.reason = CrashReason::PcOutOfRange;
  CHECK(classify(crash, obs) == FaultClass::Crash);

  CHECK(std::string(fault_class_name(FaultClass::Success)) == "success");
  CHECK(std::string(fault_class_name(FaultClass::NoEffect)) == "no_effect");
  CHECK(std::string(fault_class_name(FaultClass::Crash)) == "crash");
  CHECK(std::string(fault_class_name(FaultClass::Other)) == "other");
}

TEST_CASE("skip campaign on the gate program") {
  ProgramImage img = assemble_text(kGate);
  VulnerabilityReport rep = campaign(img, std::vector<uint32_t>{7}, std::vector<uint32_t>{9},
                                     FaultModel::InstructionSkip);
  CHECK(rep.model == FaultModel::InstructionSkip);
  CHECK(rep.observables.good == 1);
  CHECK(rep.observables.bad == 0);
  CHECK(rep.trace_length == 6);
  CHECK(rep.campaign_runs == 6);
  REQUIRE(rep.outcomes.size() == 6);

  // Outcomes arrive in enumeration order and carry the faulted pc + text.
  for (uint32_t k = 0; k < 6; ++k) CHECK(rep.outcomes[k].spec.trace_offset == k);
  CHECK(rep.outcomes[1].pc == 1);
  CHECK(rep.outcomes[1].disasm == "LD r2, [r1+0]");

  // The one-and-only success: skipping the BNE falls through into HALT 1.
  REQUIRE(rep.successes.size() == 1);
  CHECK(rep.successes[0].spec.trace_offset == 4);
  CHECK(rep.successes[0].pc == 4);
  CHECK(rep.successes[0].disasm == "BNE 1");

  // Skipping the final HALT runs off the end: a crash, not a success.
  CHECK(rep.outcomes[5].cls == FaultClass::Crash);
  CHECK(rep.outcomes[5].reason == CrashReason::PcOutOfRange);

  // Skipping the CMP leaves stale flags (Z=0 at reset... Z=false) -> BNE
  // taken -> HALT 0: no effect.
  CHECK(rep.outcomes[3].cls == FaultClass::NoEffect);
}

TEST_CASE("bitflip campaign classifies every mutation of the gate") {
  ProgramImage img = assemble_text(kGate);
  VulnerabilityReport rep = campaign(img, std::vector<uint32_t>{7}, std::vector<uint32_t>{9},
                                     FaultModel::SingleBitFlip);
  CHECK(rep.trace_length == 6);
  CHECK(rep.campaign_runs == 6 * 32);
  CHECK(rep.outcomes.size() == 6 * 32);
  CHECK(rep.successes.size() >= 1);

  // Flipping bit 0 of "no: HALT 0" turns the reject into the accept code.
  bool found_halt_flip = false;
  for (const FaultOutcome& o : rep.successes) {
    if (o.pc == 6 && o.spec.bit == 0) found_halt_flip = true;
    CHECK(o.cls == FaultClass::Success);
  }
  CHECK(found_halt_flip);

  // Every success in the list really is classified Success and the subset
  // matches the full outcome list filtered by class.
  uint64_t n = 0;
  for (const FaultOutcome& o : rep.outcomes)
    if (o.cls == FaultClass::Success) ++n;
  CHECK(n == rep.successes.size());
}

TEST_CASE("trap-coded halts classify as Other in a real campaign") {
  // Skipping the branch lands on TRAP; the campaign must file that under
  // Other with the reserved code, not under Success or NoEffect.
  ProgramImage img = assemble_text(
      "MOVI r1, 0x8000\n"
      "LD r2, [r1+0]\n"
      "MOVI r3, 7\n"
      "CMP r2, r3\n"
      "BNE no\n"
      "HALT 1\n"
      "no: TRAP\n");
  // bad input halts via TRAP = 0xFD, good via HALT 1: distinguishable.
  VulnerabilityReport rep = campaign(img, std::vector<uint32_t>{7}, std::vector<uint32_t>{9},
                                     FaultModel::InstructionSkip);
  CHECK(rep.observables.bad == kTrapHaltCode);
  // Skip of CMP (offset 3): stale Z=false -> BNE taken -> TRAP -> bad code
  // -> NoEffect (it equals the declared bad observable).
  CHECK(rep.outcomes[3].cls == FaultClass::NoEffect);

  // Now a variant whose bad path is HALT 0 but contains a TRAP landing pad.
  ProgramImage img2 = assemble_text(
      "MOVI r1, 0x8000\n"  // 0
      "LD r2, [r1+0]\n"    // 1
      "MOVI r3, 7\n"       // 2
      "CMP r2, r3\n"       // 3
      "BEQ yes\n"          // 4
      "JMP no\n"           // 5
      "yes: HALT 1\n"      // 6
      "no: TRAP\n");       // 7  (bad observable 0xFD? no: declared bad is TRAP)
  VulnerabilityReport rep2 = campaign(img2, std::vector<uint32_t>{7}, std::vector<uint32_t>{9},
                                      FaultModel::InstructionSkip);
  // Bad trace: 0,1,2,3,4,5,7 -> skipping the JMP at offset 5 falls into
  // "yes: HALT 1" -> Success.
  bool jmp_skip_success = false;
  for (const FaultOutcome& o : rep2.successes)
    if (o.pc == 5) jmp_skip_success = true;
  CHECK(jmp_skip_success);
}

TEST_CASE("serial and parallel campaigns produce identical reports") {
  ProgramImage img = corpus_image(corpus_entry("pincheck"));
  const CorpusEntry& e = corpus_entry("pincheck");

  VulnerabilityReport serial =
      campaign(img, e.good_input, e.bad_input, FaultModel::SingleBitFlip, Limits{}, 1);
  VulnerabilityReport par =
      campaign(img, e.good_input, e.bad_input, FaultModel::SingleBitFlip, Limits{}, 8);

  // Byte-level determinism: the serialized reports match exactly.
  CHECK(campaign_to_json(serial).dump() == campaign_to_json(par).dump());
  CHECK(serial.outcomes.size() == par.outcomes.size());
  CHECK(serial.successes.size() == par.successes.size());

  // And a repeated run is stable against itself.
  VulnerabilityReport again =
      campaign(img, e.good_input, e.bad_input, FaultModel::SingleBitFlip, Limits{}, 8);
  CHECK(campaign_to_json(par).dump() == campaign_to_json(again).dump());
}

TEST_CASE("campaign propagates baseline errors") {
  ProgramImage img = assemble_text(kGate);
  CHECK_THROWS_WITH_AS(campaign(img, std::vector<uint32_t>{9}, std::vector<uint32_t>{8},
                                FaultModel::InstructionSkip),
                       doctest::Contains("IndistinguishableInputs"), Error);
}
