#include "ff/pipeline.hpp"

#include <algorithm>

#include "ff/emulator.hpp"

namespace ff {

const char* method_name(Method m) {
  switch (m) {
    case Method::FaulterPatcher: return "faulter_patcher";
    case Method::Hybrid: return "hybrid";
  }
  return "?";
}

OverheadReport overhead(const ProgramImage& original, const ProgramImage& hardened,
                        Method method) {
  OverheadReport ov;
  ov.method = method;
  ov.original_size = uint32_t(original.code.size());
  ov.hardened_size = uint32_t(hardened.code.size());
  if (ov.original_size != 0) {
    ov.overhead_pct =
        100.0 * (double(ov.hardened_size) - double(ov.original_size)) / double(ov.original_size);
  }
  return ov;
}

HybridResult run_hybrid_pipeline(const AsmUnit& src, std::span<const uint32_t> good_input,
                                 std::span<const uint32_t> bad_input, FaultModel model,
                                 const Limits& limits, unsigned workers) {
  const ProgramImage original = assemble(src);
  const RunResult ref_good = run(original, good_input, limits);
  const RunResult ref_bad = run(original, bad_input, limits);

  HybridResult hy;
  hy.lowered = lower_full(harden_branches(assign_uids(lift(src))));
  hy.image = assemble(hy.lowered.unit);
  hy.overhead = overhead(original, hy.image, Method::Hybrid);

  const RunResult got_good = run(hy.image, good_input, limits);
  const RunResult got_bad = run(hy.image, bad_input, limits);
  if (got_good != ref_good || got_bad != ref_bad) {
    // compare halt codes only; steps and traces legitimately differ
    if (!(ref_good.halted() && got_good.halted_with(ref_good.halt_code) &&
          ref_bad.halted() && got_bad.halted_with(ref_bad.halt_code))) {
      throw Error(Errc::SemanticsBroken,
                  "hardened program disagrees with the original on a fault-free run");
    }
  }

  hy.verification = campaign(hy.image, good_input, bad_input, model, limits, workers);
  for (const FaultOutcome& s : hy.verification.successes) {
    if (std::binary_search(hy.lowered.protected_addrs.begin(), hy.lowered.protected_addrs.end(),
                           s.pc)) {
      ++hy.protected_branch_successes;
    }
  }
  return hy;
}

ordered_json run_to_json(const RunResult& r) {
  ordered_json j;
  if (r.halted()) {
    j["kind"] = "halted";
    j["halt_code"] = r.halt_code;
  } else {
    j["kind"] = "crashed";
    j["reason"] = crash_reason_name(r.reason);
  }
  j["steps"] = r.steps;
  return j;
}

ordered_json outcome_to_json(const FaultOutcome& o) {
  ordered_json j;
  j["model"] = fault_model_name(o.spec.model);
  j["trace_offset"] = o.spec.trace_offset;
  if (o.spec.model == FaultModel::SingleBitFlip) j["bit"] = o.spec.bit;
  j["pc"] = o.pc;
  j["disasm"] = o.disasm;
  j["classification"] = fault_class_name(o.cls);
  if (o.cls == FaultClass::Crash) j["reason"] = crash_reason_name(o.reason);
  if (o.cls == FaultClass::Other) j["code"] = o.code;
  return j;
}

ordered_json campaign_to_json(const VulnerabilityReport& rep) {
  ordered_json j;
  j["model"] = fault_model_name(rep.model);
  j["good_observable"] = rep.observables.good;
  j["bad_observable"] = rep.observables.bad;
  j["trace_length"] = rep.trace_length;
  j["campaign_runs"] = rep.campaign_runs;
  j["success_count"] = rep.successes.size();
  ordered_json outs = ordered_json::array();
  for (const FaultOutcome& o : rep.outcomes) outs.push_back(outcome_to_json(o));
  j["outcomes"] = std::move(outs);
  return j;
}

ordered_json overhead_to_json(const OverheadReport& ov) {
  ordered_json j;
  j["method"] = method_name(ov.method);
  j["original_size"] = ov.original_size;
  j["hardened_size"] = ov.hardened_size;
  j["overhead_pct"] = ov.overhead_pct;
  return j;
}

ordered_json harden_to_json(const HardenResult& hr, const OverheadReport& ov) {
  ordered_json j;
  j["model"] = fault_model_name(hr.model);
  j["good_observable"] = hr.observables.good;
  j["bad_observable"] = hr.observables.bad;
  j["iterations"] = hr.iterations;
  j["converged"] = hr.converged;
  j["initial_successes"] = hr.initial_successes;
  j["final_successes"] = hr.final_successes;
  ordered_json iters = ordered_json::array();
  for (const IterationStat& st : hr.per_iteration) {
    ordered_json ji;
    ji["successes"] = st.successes;
    ji["patches"] = st.patches;
    ji["patch_sites"] = st.patch_sites;
    iters.push_back(std::move(ji));
  }
  j["per_iteration"] = std::move(iters);
  ordered_json res = ordered_json::array();
  for (const FaultOutcome& o : hr.residual) res.push_back(outcome_to_json(o));
  j["residual"] = std::move(res);
  j["overhead"] = overhead_to_json(ov);
  return j;
}

ordered_json hybrid_to_json(const HybridResult& hy) {
  ordered_json j;
  j["method"] = "hybrid";
  j["model"] = fault_model_name(hy.verification.model);
  j["good_observable"] = hy.verification.observables.good;
  j["bad_observable"] = hy.verification.observables.bad;
  j["overhead"] = overhead_to_json(hy.overhead);
  j["protected_branch_successes"] = hy.protected_branch_successes;
  j["protected_addrs"] = hy.lowered.protected_addrs;
  ordered_json frags = ordered_json::array();
  for (const HardenedFragment& f : hy.lowered.fragments) {
    ordered_json jf;
    jf["compare_addrs"] = f.compare_addrs;
    jf["validation_branch_addrs"] = f.validation_branch_addrs;
    jf["addrs"] = f.addrs;
    frags.push_back(std::move(jf));
  }
  j["fragments"] = std::move(frags);
  j["verification"] = campaign_to_json(hy.verification);
  return j;
}

ordered_json error_to_json(const Error& e) {
  ordered_json j;
  j["error"] = errc_name(e.code());
  j["message"] = e.detail();
  return j;
}

}  // namespace ff
