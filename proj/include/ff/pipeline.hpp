#pragma once

#include <cstdint>
#include <span>
#include <string>

#include <json.hpp>

#include "ff/error.hpp"
#include "ff/faulter.hpp"
#include "ff/ir.hpp"
#include "ff/patcher.hpp"
#include "ff/program.hpp"

namespace ff {

using ordered_json = nlohmann::ordered_json;

enum class Method { FaulterPatcher, Hybrid };

const char* method_name(Method m);

// Code-size cost of a hardening method, in words of the fixed-width ISA.
struct OverheadReport {
  Method method = Method::FaulterPatcher;
  uint32_t original_size = 0;
  uint32_t hardened_size = 0;
  double overhead_pct = 0.0;  // 100 * (hardened - original) / original
};

OverheadReport overhead(const ProgramImage& original, const ProgramImage& hardened,
                        Method method);

struct HybridResult {
  ProgramImage image;            // hardened program
  LoweredProgram lowered;        // its assembly plus fragment bookkeeping
  VulnerabilityReport verification;
  OverheadReport overhead;
  uint64_t protected_branch_successes = 0;  // successes inside protected addresses
};

// lift -> assign_uids -> harden_branches -> lower -> assemble, followed by a
// fault-free equivalence check on both inputs (SemanticsBroken otherwise) and
// a verification campaign under the given fault model.
HybridResult run_hybrid_pipeline(const AsmUnit& src, std::span<const uint32_t> good_input,
                                 std::span<const uint32_t> bad_input, FaultModel model,
                                 const Limits& limits = {}, unsigned workers = 0);

// JSON shapes (stable key order, byte-identical across reruns):
ordered_json run_to_json(const RunResult& r);
ordered_json outcome_to_json(const FaultOutcome& o);
ordered_json campaign_to_json(const VulnerabilityReport& rep);
ordered_json overhead_to_json(const OverheadReport& ov);
ordered_json harden_to_json(const HardenResult& hr, const OverheadReport& ov);
ordered_json hybrid_to_json(const HybridResult& hy);
ordered_json error_to_json(const Error& e);

}  // namespace ff
