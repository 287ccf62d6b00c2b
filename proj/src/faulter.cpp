#include "ff/faulter.hpp"

#include <thread>

#include "ff/error.hpp"

namespace ff {

const char* fault_class_name(FaultClass c) {
  switch (c) {
    case FaultClass::Success: return "success";
    case FaultClass::NoEffect: return "no_effect";
    case FaultClass::Crash: return "crash";
    case FaultClass::Other: return "other";
  }
  return "?";
}

Observables observables(const ProgramImage& img, std::span<const uint32_t> good_input,
                        std::span<const uint32_t> bad_input, const Limits& limits) {
  RunResult g = run(img, good_input, limits);
  if (!g.halted())
    throw Error(Errc::BaselineCrash,
                std::string("good input crashed: ") + crash_reason_name(g.reason));
  RunResult b = run(img, bad_input, limits);
  if (!b.halted())
    throw Error(Errc::BaselineCrash,
                std::string("bad input crashed: ") + crash_reason_name(b.reason));
  if (g.halt_code == b.halt_code)
    throw Error(Errc::IndistinguishableInputs,
                "both inputs halt with code " + std::to_string(g.halt_code));
  return {g.halt_code, b.halt_code};
}

std::vector<FaultSpec> enumerate_faults(uint32_t trace_length, FaultModel model) {
  std::vector<FaultSpec> specs;
  if (model == FaultModel::InstructionSkip) {
    specs.reserve(trace_length);
    for (uint32_t k = 0; k < trace_length; ++k)
      specs.push_back({FaultModel::InstructionSkip, k, 0});
  } else {
    specs.reserve((size_t)trace_length * 32);
    for (uint32_t k = 0; k < trace_length; ++k)
      for (uint8_t b = 0; b < 32; ++b)
        specs.push_back({FaultModel::SingleBitFlip, k, b});
  }
  return specs;
}

std::vector<FaultSpec> enumerate_faults(const ProgramImage& img, std::span<const uint32_t> bad_input,
                                        FaultModel model, const Limits& limits) {
  RunResult b = run(img, bad_input, limits);
  if (!b.halted())
    throw Error(Errc::BaselineCrash,
                std::string("bad input crashed: ") + crash_reason_name(b.reason));
  return enumerate_faults((uint32_t)b.trace.size(), model);
}

FaultClass classify(const RunResult& result, const Observables& obs) {
  if (!result.halted()) return FaultClass::Crash;
  if (result.halt_code == obs.good) return FaultClass::Success;
  if (result.halt_code == obs.bad) return FaultClass::NoEffect;
  return FaultClass::Other;
}

VulnerabilityReport campaign(const ProgramImage& img, std::span<const uint32_t> good_input,
                             std::span<const uint32_t> bad_input, FaultModel model,
                             const Limits& limits, unsigned workers) {
  VulnerabilityReport rep;
  rep.model = model;
  rep.observables = observables(img, good_input, bad_input, limits);

  RunResult base = run(img, bad_input, limits);
  rep.trace_length = (uint32_t)base.trace.size();
  std::vector<FaultSpec> specs = enumerate_faults(rep.trace_length, model);
  rep.campaign_runs = specs.size();
  rep.outcomes.resize(specs.size());

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, specs.size() ? (unsigned)specs.size() : 1);

  auto simulate = [&](size_t idx) {
    const FaultSpec& spec = specs[idx];
    FaultOutcome& out = rep.outcomes[idx];
    out.spec = spec;
    const TraceEntry& at = base.trace[spec.trace_offset];
    out.pc = at.pc;
    out.disasm = instr_to_string(*decode(at.word));
    RunResult r = run_with_fault(img, bad_input, spec, limits);
    out.cls = classify(r, rep.observables);
    if (out.cls == FaultClass::Crash) out.reason = r.reason;
    if (out.cls == FaultClass::Other) out.code = r.halt_code;
  };

  if (workers <= 1) {
    for (size_t i = 0; i < specs.size(); ++i) simulate(i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (size_t i = w; i < specs.size(); i += workers) simulate(i);
      });
    for (auto& t : pool) t.join();
  }

  for (const auto& o : rep.outcomes)
    if (o.cls == FaultClass::Success) rep.successes.push_back(o);
  return rep;
}

}  // namespace ff
