// Overhead accounting, report serialization, and the hybrid pipeline.
#include "ff/pipeline.hpp"

#include <set>
#include <string>

#include <doctest.h>

#include "ff/corpus.hpp"
#include "ff/emulator.hpp"

using namespace ff;

namespace {

ProgramImage sized_image(uint32_t words) {
  ProgramImage img;
  img.code.assign(words, 0);
  return img;
}

}  // namespace

TEST_CASE("overhead is the relative code growth in percent") {
  const OverheadReport ov = overhead(sized_image(100), sized_image(118), Method::FaulterPatcher);
  CHECK(ov.method == Method::FaulterPatcher);
  CHECK(ov.original_size == 100);
  CHECK(ov.hardened_size == 118);
  CHECK(ov.overhead_pct == 18.0);

  CHECK(overhead(sized_image(23), sized_image(30), Method::Hybrid).overhead_pct ==
        100.0 * 7.0 / 23.0);
  CHECK(overhead(sized_image(55), sized_image(55), Method::Hybrid).overhead_pct == 0.0);
  CHECK(overhead(sized_image(0), sized_image(10), Method::Hybrid).overhead_pct == 0.0);

  CHECK(std::string(method_name(Method::FaulterPatcher)) == "faulter_patcher");
  CHECK(std::string(method_name(Method::Hybrid)) == "hybrid");
}

TEST_CASE("run reports serialize the halt or the crash") {
  const CorpusEntry& e = corpus_entry("pincheck");
  const ProgramImage img = corpus_image(e);

  CHECK(run_to_json(run(img, e.good_input)).dump() ==
        R"({"kind":"halted","halt_code":1,"steps":22})");
  CHECK(run_to_json(run(img, e.bad_input)).dump() ==
        R"({"kind":"halted","halt_code":0,"steps":22})");

  const RunResult limited = run(img, e.good_input, Limits{3});
  REQUIRE_FALSE(limited.halted());
  CHECK(run_to_json(limited).dump() == R"({"kind":"crashed","reason":"StepLimit","steps":3})");
}

TEST_CASE("fault outcomes serialize their model-specific fields") {
  FaultOutcome o;
  o.spec = {FaultModel::InstructionSkip, 20, 0};
  o.cls = FaultClass::Success;
  o.pc = 20;
  o.disasm = "BNE 1";
  CHECK(outcome_to_json(o).dump() ==
        R"({"model":"skip","trace_offset":20,"pc":20,"disasm":"BNE 1",)"
        R"("classification":"success"})");

  o.spec = {FaultModel::SingleBitFlip, 3, 27};
  o.cls = FaultClass::Crash;
  o.reason = CrashReason::InvalidOpcode;
  o.pc = 4;
  o.disasm = "MOVI r2, 1";
  CHECK(outcome_to_json(o).dump() ==
        R"({"model":"bitflip","trace_offset":3,"bit":27,"pc":4,"disasm":"MOVI r2, 1",)"
        R"("classification":"crash","reason":"InvalidOpcode"})");

  o.cls = FaultClass::Other;
  o.code = 0xFD;
  CHECK(outcome_to_json(o).dump() ==
        R"({"model":"bitflip","trace_offset":3,"bit":27,"pc":4,"disasm":"MOVI r2, 1",)"
        R"("classification":"other","code":253})");
}

TEST_CASE("campaign reports serialize counts, observables and all outcomes") {
  const CorpusEntry& e = corpus_entry("pincheck");
  const ProgramImage img = corpus_image(e);
  const VulnerabilityReport rep =
      campaign(img, e.good_input, e.bad_input, FaultModel::InstructionSkip);

  const ordered_json j = campaign_to_json(rep);
  CHECK(j["model"] == "skip");
  CHECK(j["good_observable"] == 1);
  CHECK(j["bad_observable"] == 0);
  CHECK(j["trace_length"] == 22);
  CHECK(j["campaign_runs"] == 22);
  CHECK(j["success_count"] == 1);
  REQUIRE(j["outcomes"].size() == 22);
  CHECK(j["outcomes"][20].dump() ==
        R"({"model":"skip","trace_offset":20,"pc":20,"disasm":"BNE 1",)"
        R"("classification":"success"})");
  for (const auto& out : j["outcomes"]) {
    CHECK(out["model"] == "skip");
    CHECK_FALSE(out.contains("bit"));
  }
}

TEST_CASE("overhead reports serialize byte-stably") {
  const OverheadReport ov = overhead(sized_image(23), sized_image(30), Method::FaulterPatcher);
  CHECK(overhead_to_json(ov).dump() ==
        R"({"method":"faulter_patcher","original_size":23,"hardened_size":30,)"
        R"("overhead_pct":30.434782608695652})");
}

TEST_CASE("iterative hardening reports serialize the full history") {
  const CorpusEntry& e = corpus_entry("pincheck");
  const ProgramImage img = corpus_image(e);

  SUBCASE("skip model converges in two campaigns") {
    const HardenResult hr =
        harden_iterate(img, e.good_input, e.bad_input, FaultModel::InstructionSkip);
    const ordered_json j =
        harden_to_json(hr, overhead(img, hr.final_image, Method::FaulterPatcher));
    CHECK(j["model"] == "skip");
    CHECK(j["good_observable"] == 1);
    CHECK(j["bad_observable"] == 0);
    CHECK(j["iterations"] == 2);
    CHECK(j["converged"] == true);
    CHECK(j["initial_successes"] == 1);
    CHECK(j["final_successes"] == 0);
    REQUIRE(j["per_iteration"].size() == 2);
    CHECK(j["per_iteration"][0].dump() == R"({"successes":1,"patches":1,"patch_sites":[20]})");
    CHECK(j["per_iteration"][1].dump() == R"({"successes":0,"patches":0,"patch_sites":[]})");
    CHECK(j["residual"].empty());
    CHECK(j["overhead"]["original_size"] == 23);
    CHECK(j["overhead"]["hardened_size"] == 30);
  }

  SUBCASE("bit-flip model stops at unpatchable control words") {
    const HardenResult hr =
        harden_iterate(img, e.good_input, e.bad_input, FaultModel::SingleBitFlip);
    const ordered_json j =
        harden_to_json(hr, overhead(img, hr.final_image, Method::FaulterPatcher));
    CHECK(j["iterations"] == 2);
    CHECK(j["converged"] == false);
    CHECK(j["initial_successes"] == 5);
    CHECK(j["final_successes"] == 2);
    CHECK(j["per_iteration"][0]["patch_sites"].dump() == "[19,20]");
    CHECK(j["per_iteration"][1]["patches"] == 0);
    REQUIRE(j["residual"].size() == 2);
    CHECK(j["residual"][0]["pc"] == 40);
    CHECK(j["residual"][0]["disasm"] == "JMP 3");
    CHECK(j["residual"][0]["bit"] == 0);
    CHECK(j["residual"][1]["pc"] == 44);
    CHECK(j["residual"][1]["disasm"] == "HALT 0");
    CHECK(j["overhead"]["original_size"] == 23);
    CHECK(j["overhead"]["hardened_size"] == 45);
  }
}

TEST_CASE("the hybrid pipeline rewrites, verifies and reports both programs") {
  SUBCASE("pin comparison") {
    const CorpusEntry& e = corpus_entry("pincheck");
    const HybridResult hy = run_hybrid_pipeline(parse_asm(e.source), e.good_input, e.bad_input,
                                                FaultModel::InstructionSkip);
    CHECK(hy.overhead.original_size == 23);
    CHECK(hy.overhead.hardened_size == 64);
    CHECK(hy.protected_branch_successes == 0);
    REQUIRE(hy.lowered.fragments.size() == 1);
    CHECK(hy.verification.trace_length == 49);
    CHECK(hy.verification.successes.empty());
    CHECK(run(hy.image, e.good_input).halted_with(1));
    CHECK(run(hy.image, e.bad_input).halted_with(0));

    const ordered_json j = hybrid_to_json(hy);
    CHECK(j["method"] == "hybrid");
    CHECK(j["model"] == "skip");
    CHECK(j["good_observable"] == 1);
    CHECK(j["bad_observable"] == 0);
    CHECK(j["overhead"].dump() ==
          R"({"method":"hybrid","original_size":23,"hardened_size":64,)"
          R"("overhead_pct":178.2608695652174})");
    CHECK(j["protected_branch_successes"] == 0);
    REQUIRE(j["fragments"].size() == 1);
    CHECK(j["fragments"][0]["compare_addrs"].dump() == "[19,42]");
    CHECK(j["fragments"][0]["validation_branch_addrs"].dump() == "[46,49,53,56]");
    CHECK(j["protected_addrs"] == j["fragments"][0]["addrs"]);
    CHECK(j["verification"]["success_count"] == 0);
  }

  SUBCASE("boot image check") {
    const CorpusEntry& e = corpus_entry("bootloader");
    const HybridResult hy = run_hybrid_pipeline(parse_asm(e.source), e.good_input, e.bad_input,
                                                FaultModel::InstructionSkip);
    CHECK(hy.overhead.original_size == 85);
    CHECK(hy.overhead.hardened_size == 208);
    CHECK(hy.protected_branch_successes == 0);
    REQUIRE(hy.lowered.fragments.size() == 3);
    CHECK(hy.verification.successes.empty());
    CHECK(run(hy.image, e.good_input).halted_with(1));
    CHECK(run(hy.image, e.bad_input).halted_with(0));

    // Every rewritten branch carries two operand compares and at least four
    // validation branches.
    std::set<uint32_t> uni;
    for (const HardenedFragment& f : hy.lowered.fragments) {
      CHECK(f.compare_addrs.size() == 2);
      CHECK(f.validation_branch_addrs.size() >= 4);
      uni.insert(f.addrs.begin(), f.addrs.end());
    }
    CHECK(hy.lowered.protected_addrs == std::vector<uint32_t>(uni.begin(), uni.end()));
  }
}

TEST_CASE("errors serialize as a name and a message") {
  const Error e(Errc::BadImageFile, "truncated header");
  CHECK(error_to_json(e).dump() == R"({"error":"BadImageFile","message":"truncated header"})");
}

TEST_CASE("reports are byte-identical across repeats and worker counts") {
  const CorpusEntry& e = corpus_entry("pincheck");
  const ProgramImage img = corpus_image(e);

  SUBCASE("campaign") {
    const std::string serial =
        campaign_to_json(campaign(img, e.good_input, e.bad_input, FaultModel::SingleBitFlip,
                                  Limits{}, 1))
            .dump(2);
    const std::string parallel =
        campaign_to_json(campaign(img, e.good_input, e.bad_input, FaultModel::SingleBitFlip,
                                  Limits{}, 8))
            .dump(2);
    CHECK(serial == parallel);
  }

  SUBCASE("iterative hardening") {
    auto render = [&](unsigned workers) {
      const HardenResult hr = harden_iterate(img, e.good_input, e.bad_input,
                                             FaultModel::SingleBitFlip, kDefaultMaxIters,
                                             Limits{}, workers);
      return harden_to_json(hr, overhead(img, hr.final_image, Method::FaulterPatcher)).dump(2);
    };
    CHECK(render(1) == render(8));
  }

  SUBCASE("hybrid pipeline") {
    auto render = [&](unsigned workers) {
      return hybrid_to_json(run_hybrid_pipeline(parse_asm(e.source), e.good_input, e.bad_input,
                                                FaultModel::InstructionSkip, Limits{}, workers))
          .dump(2);
    };
    CHECK(render(1) == render(8));
  }
}
