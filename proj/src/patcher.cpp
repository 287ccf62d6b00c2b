#include "ff/patcher.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "ff/emulator.hpp"
#include "ff/error.hpp"

namespace ff {

namespace {

Opcode inverse_branch(Opcode op) {
  switch (op) {
    case Opcode::Beq: return Opcode::Bne;
    case Opcode::Bne: return Opcode::Beq;
    case Opcode::Blt: return Opcode::Bge;
    case Opcode::Bge: return Opcode::Blt;
    default: return op;
  }
}

// Lowest register outside `used`, never sp. Callers exclude at most two
// registers, so the scan stays well below r15.
uint8_t pick_scratch(std::initializer_list<uint8_t> used) {
  for (uint8_t r = 0; r < kSp; ++r) {
    if (std::find(used.begin(), used.end(), r) == used.end()) return r;
  }
  return 0;  // unreachable for <15 exclusions
}

std::string describe(const RunResult& r) {
  if (r.halted()) return "halted with code " + std::to_string(r.halt_code);
  return std::string("crashed: ") + crash_reason_name(r.reason);
}

}  // namespace

const char* pattern_kind_name(PatternKind k) {
  switch (k) {
    case PatternKind::DupMove: return "dup_move";
    case PatternKind::VerifiedLoad: return "verified_load";
    case PatternKind::DoubleCompare: return "double_compare";
    case PatternKind::GuardedBranch: return "guarded_branch";
  }
  return "?";
}

std::optional<PatchPattern> select_pattern(const FaultOutcome& vuln, const AsmUnit& unit) {
  const uint32_t site = vuln.pc;
  if (site >= unit.lines.size()) return std::nullopt;
  const AsmLine& line = unit.lines[site];
  if (line.kind != AsmLine::Kind::Instruction) return std::nullopt;
  const Instruction& ins = line.instr;

  PatchPattern p;
  p.site = site;

  switch (ins.op) {
    case Opcode::Movi:
    case Opcode::Mov: {
      // Executing a register move twice is idempotent; a fault in one
      // execution is masked by the other.
      p.kind = PatternKind::DupMove;
      AsmLine copy = line;
      copy.label.clear();
      copy.src_line = 0;
      p.replacement = {copy, copy};
      return p;
    }

    case Opcode::Ld: {
      // Load the value twice (scratch copy first, destination second) and
      // trap on disagreement. Flags are saved around the comparison. The
      // mismatch hop uses BNE: of the conditional opcodes only BEQ sits one
      // bit from HALT, so a corrupted hop degrades to a trap, not an exit.
      if (ins.rd == kSp) return std::nullopt;  // can't re-derive an address through a clobbered sp
      const uint8_t rx = pick_scratch({ins.rd, ins.rs});
      // The two stack pushes move sp before either load runs.
      const int64_t off = int64_t(ins.imm) + (ins.rs == kSp ? 2 : 0);
      if (off > 4095) return std::nullopt;
      const std::string ok = "__v" + std::to_string(site) + "_ok";
      const std::string trap = "__v" + std::to_string(site) + "_trap";
      p.kind = PatternKind::VerifiedLoad;
      p.replacement = {
          AsmLine::ins(Instruction::push(rx)),
          AsmLine::ins(Instruction::pushf()),
          AsmLine::ins(Instruction::ld(rx, ins.rs, uint32_t(off))),
          AsmLine::ins(Instruction::ld(ins.rd, ins.rs, uint32_t(off))),
          AsmLine::ins(Instruction::cmp(ins.rd, rx)),
          AsmLine::ins(Instruction::branch(Opcode::Bne, 0), trap),
          AsmLine::ins(Instruction::jmp(0), ok),
          AsmLine::ins(Instruction::trap(), "", trap),
          AsmLine::ins(Instruction::popf(), "", ok),
          AsmLine::ins(Instruction::pop(rx)),
      };
      return p;
    }

    case Opcode::Cmp: {
      // Run the comparison twice, capture both flag words, and trap if they
      // differ. The comparison is re-executed twice at the end so that no
      // single dropped instruction can leave the checker's flags live.
      if (ins.rs == kSp || ins.rt == kSp) return std::nullopt;  // pushes below would skew the operand
      const uint8_t rx = pick_scratch({ins.rs, ins.rt});
      const uint8_t ry = pick_scratch({ins.rs, ins.rt, rx});
      const std::string ok = "__c" + std::to_string(site) + "_ok";
      const std::string trap = "__c" + std::to_string(site) + "_trap";
      const Instruction cmp = Instruction::cmp(ins.rs, ins.rt);
      p.kind = PatternKind::DoubleCompare;
      p.replacement = {
          AsmLine::ins(Instruction::push(rx)),
          AsmLine::ins(Instruction::push(ry)),
          AsmLine::ins(cmp),
          AsmLine::ins(Instruction::pushf()),
          AsmLine::ins(cmp),
          AsmLine::ins(Instruction::pushf()),
          AsmLine::ins(Instruction::pop(rx)),
          AsmLine::ins(Instruction::pop(ry)),
          AsmLine::ins(Instruction::cmp(rx, ry)),
          AsmLine::ins(Instruction::branch(Opcode::Bne, 0), trap),
          AsmLine::ins(Instruction::jmp(0), ok),
          AsmLine::ins(Instruction::trap(), "", trap),
          AsmLine::ins(Instruction::pop(ry), "", ok),
          AsmLine::ins(Instruction::pop(rx)),
          AsmLine::ins(cmp),
          AsmLine::ins(cmp),
      };
      return p;
    }

    case Opcode::Beq:
    case Opcode::Bne:
    case Opcode::Blt:
    case Opcode::Bge: {
      // Re-check the condition on both outgoing paths; either path traps if
      // its re-check disagrees with the direction actually taken. When the
      // branch directly follows its compare, each re-check re-executes the
      // compare too, so corrupted flags are caught, not just a corrupted
      // branch word. Hops toward the trap avoid forward BEQ (one opcode bit
      // from HALT); a BNE-sense site routes its taken-path check through an
      // ok-hop instead.
      if (line.target.empty()) return std::nullopt;  // numeric displacement can't survive relayout
      const std::string prefix = "__g" + std::to_string(site);
      const std::string taken = prefix + "_taken";
      const std::string fall = prefix + "_fall";
      const std::string trap = prefix + "_trap";
      const std::string okl = prefix + "_ok";
      const Opcode inv = inverse_branch(ins.op);
      p.kind = PatternKind::GuardedBranch;

      std::optional<Instruction> recmp;
      if (site >= 1 && unit.lines[site - 1].kind == AsmLine::Kind::Instruction &&
          unit.lines[site - 1].instr.op == Opcode::Cmp) {
        const Instruction& c = unit.lines[site - 1].instr;
        recmp = Instruction::cmp(c.rs, c.rt);
      }

      if (ins.op == Opcode::Bne) {
        // BNE's own sense is safe as a forward hop, so the taken path is
        // reached through the original branch and re-checked via BNE/ok-hop.
        p.replacement.push_back(AsmLine::ins(Instruction::branch(ins.op, 0), taken));
        p.replacement.push_back(AsmLine::ins(Instruction::jmp(0), fall));
        if (recmp) p.replacement.push_back(AsmLine::ins(*recmp, "", taken));
        p.replacement.push_back(
            AsmLine::ins(Instruction::branch(Opcode::Bne, 0), okl, recmp ? "" : taken));
        p.replacement.push_back(AsmLine::ins(Instruction::trap(), "", trap));
        p.replacement.push_back(AsmLine::ins(Instruction::jmp(0), line.target, okl));
      } else {
        // Entering through the inverse sense keeps every forward hop off BEQ
        // (the one conditional a single opcode bit from HALT): condition true
        // falls into the taken path, whose re-check hops to the trap on the
        // inverse sense as well.
        p.replacement.push_back(AsmLine::ins(Instruction::branch(inv, 0), fall));
        if (recmp) p.replacement.push_back(AsmLine::ins(*recmp));
        p.replacement.push_back(AsmLine::ins(Instruction::branch(inv, 0), trap));
        p.replacement.push_back(AsmLine::ins(Instruction::jmp(0), line.target));
        p.replacement.push_back(AsmLine::ins(Instruction::trap(), "", trap));
      }
      // fallthrough check: the condition must still be false; trapping uses
      // the original sense toward a backward label, keeping imm16 large.
      if (recmp) p.replacement.push_back(AsmLine::ins(*recmp, "", fall));
      p.replacement.push_back(
          AsmLine::ins(Instruction::branch(ins.op, 0), trap, recmp ? "" : fall));
      return p;
    }

    default:
      return std::nullopt;
  }
}

AsmUnit apply_patches(const AsmUnit& unit, std::span<const PatchPattern> patterns) {
  std::vector<const PatchPattern*> order;
  order.reserve(patterns.size());
  for (const PatchPattern& p : patterns) order.push_back(&p);
  std::sort(order.begin(), order.end(),
            [](const PatchPattern* a, const PatchPattern* b) { return a->site > b->site; });
  for (size_t i = 1; i < order.size(); ++i) {
    if (order[i - 1]->site == order[i]->site) {
      throw Error(Errc::OverlappingPatches,
                  "two patches target address " + std::to_string(order[i]->site));
    }
  }

  std::set<std::string> labels;
  for (const AsmLine& l : unit.lines) {
    if (!l.label.empty()) labels.insert(l.label);
  }
  for (const PatchPattern* p : order) {
    for (const AsmLine& l : p->replacement) {
      if (!l.label.empty() && !labels.insert(l.label).second) {
        throw Error(Errc::LabelCollision, "label '" + l.label + "' already defined");
      }
    }
  }

  AsmUnit out = unit;
  for (const PatchPattern* p : order) {
    if (p->site >= out.lines.size() || out.lines[p->site].kind != AsmLine::Kind::Instruction) {
      throw Error(Errc::BadOperand,
                  "patch site " + std::to_string(p->site) + " is not an instruction line");
    }
    if (p->replacement.empty()) {
      throw Error(Errc::BadOperand,
                  "empty replacement for site " + std::to_string(p->site));
    }
    std::vector<AsmLine> frag(p->replacement.begin(), p->replacement.end());
    if (!out.lines[p->site].label.empty()) {
      if (!frag[0].label.empty()) {
        throw Error(Errc::LabelCollision,
                    "site " + std::to_string(p->site) + " label would be displaced");
      }
      frag[0].label = out.lines[p->site].label;  // incoming branches land on the fragment
    }
    out.lines.erase(out.lines.begin() + p->site);
    out.lines.insert(out.lines.begin() + p->site, frag.begin(), frag.end());
  }
  return out;
}

HardenResult harden_iterate(const ProgramImage& img, std::span<const uint32_t> good_input,
                            std::span<const uint32_t> bad_input, FaultModel model,
                            uint32_t max_iters, const Limits& limits, unsigned workers) {
  HardenResult hr;
  hr.model = model;
  ProgramImage cur = img;
  if (max_iters == 0) max_iters = 1;  // at least one campaign, so the report is meaningful

  for (uint32_t iter = 1; iter <= max_iters; ++iter) {
    VulnerabilityReport rep = campaign(cur, good_input, bad_input, model, limits, workers);
    hr.iterations = iter;
    hr.observables = rep.observables;
    hr.final_successes = rep.successes.size();
    if (iter == 1) hr.initial_successes = rep.successes.size();

    IterationStat stat;
    stat.successes = uint32_t(rep.successes.size());

    if (rep.successes.empty()) {
      hr.converged = true;
      hr.per_iteration.push_back(stat);
      break;
    }

    AsmUnit unit = disassemble(cur);
    std::vector<PatchPattern> patterns;
    std::vector<FaultOutcome> residual;
    std::set<uint32_t> sites;
    for (const FaultOutcome& s : rep.successes) {
      auto p = select_pattern(s, unit);
      if (!p) {
        residual.push_back(s);
      } else if (sites.insert(p->site).second) {
        patterns.push_back(std::move(*p));
      }
    }

    // Only rewrite when another campaign will run afterwards, so the reported
    // numbers always describe the image this function returns.
    if (patterns.empty() || iter == max_iters) {
      hr.residual = std::move(residual);
      hr.per_iteration.push_back(stat);
      break;
    }

    stat.patches = uint32_t(patterns.size());
    stat.patch_sites.assign(sites.begin(), sites.end());
    hr.per_iteration.push_back(stat);

    ProgramImage next = assemble(apply_patches(unit, patterns));
    RunResult g = run(next, good_input, limits);
    RunResult b = run(next, bad_input, limits);
    if (!g.halted_with(rep.observables.good) || !b.halted_with(rep.observables.bad)) {
      throw Error(Errc::SemanticsBroken, "rewrite changed fault-free behavior: good input " +
                                             describe(g) + ", bad input " + describe(b));
    }
    cur = std::move(next);
  }

  hr.final_image = std::move(cur);
  return hr;
}

}  // namespace ff
