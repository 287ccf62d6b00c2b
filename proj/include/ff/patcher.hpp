#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ff/faulter.hpp"
#include "ff/program.hpp"

namespace ff {

// Local countermeasure applied at one instruction address:
//   DupMove        MOVI/MOV executed twice, so one corrupted execution is
//                  overwritten by the clean copy
//   VerifiedLoad   LD re-executed into a scratch register and compared; a
//                  mismatch traps
//   DoubleCompare  CMP executed twice with both flag words captured and
//                  compared; re-executed twice afterwards so a single skip
//                  cannot leave the checker's flags live
//   GuardedBranch  conditional branch re-checked on both outgoing paths; an
//                  inconsistent re-check traps
enum class PatternKind { DupMove, VerifiedLoad, DoubleCompare, GuardedBranch };

const char* pattern_kind_name(PatternKind k);

struct PatchPattern {
  PatternKind kind;
  uint32_t site = 0;                  // word address of the patched instruction
  std::vector<AsmLine> replacement;   // fragment that replaces the one line
};

struct IterationStat {
  uint32_t successes = 0;
  uint32_t patches = 0;
  std::vector<uint32_t> patch_sites;
};

struct HardenResult {
  ProgramImage final_image;
  bool converged = false;             // last campaign found zero successes
  uint32_t iterations = 0;            // campaigns run
  std::vector<IterationStat> per_iteration;
  std::vector<FaultOutcome> residual; // successes with no applicable pattern
  uint64_t initial_successes = 0;
  uint64_t final_successes = 0;
  FaultModel model = FaultModel::InstructionSkip;
  Observables observables;
};

constexpr uint32_t kDefaultMaxIters = 10;

// Choose a countermeasure for the instruction a successful fault hit. The
// unit must be in disassembled form (line k holds code address k). Returns
// nullopt when no pattern applies to that opcode or operand combination.
std::optional<PatchPattern> select_pattern(const FaultOutcome& vuln, const AsmUnit& unit);

// Replace each patched line with its fragment. Patterns must name distinct
// sites (OverlappingPatches) and fragment labels must not collide with
// existing ones (LabelCollision). The result does not depend on the order of
// `patterns`.
AsmUnit apply_patches(const AsmUnit& unit, std::span<const PatchPattern> patterns);

// Campaign / patch / reassemble until a campaign reports no successes, every
// remaining success is unpatchable, or max_iters campaigns have run. Each
// rewrite is checked to preserve fault-free behavior on both inputs
// (SemanticsBroken otherwise).
HardenResult harden_iterate(const ProgramImage& img, std::span<const uint32_t> good_input,
                            std::span<const uint32_t> bad_input, FaultModel model,
                            uint32_t max_iters = kDefaultMaxIters, const Limits& limits = {},
                            unsigned workers = 0);

}  // namespace ff
