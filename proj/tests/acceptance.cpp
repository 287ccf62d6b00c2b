// Acceptance gate: ten end-to-end criteria, one PASS/FAIL line each.
// Exit status is the number of failed criteria.
#include <chrono>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ff/corpus.hpp"
#include "ff/emulator.hpp"
#include "ff/faulter.hpp"
#include "ff/ir.hpp"
#include "ff/isa.hpp"
#include "ff/patcher.hpp"
#include "ff/pipeline.hpp"
#include "ff/program.hpp"

using namespace ff;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f%%", v);
  return buf;
}

// Hardened artifacts are produced once and shared between criteria.
struct ArtifactCache {
  std::map<std::string, HardenResult> skip_hardened;
  std::map<std::string, HardenResult> flip_hardened;
  std::map<std::string, HybridResult> hybrid_skip;

  const HardenResult& skipped(const CorpusEntry& e) {
    auto it = skip_hardened.find(e.name);
    if (it == skip_hardened.end()) {
      it = skip_hardened
               .emplace(e.name, harden_iterate(corpus_image(e), e.good_input, e.bad_input,
                                               FaultModel::InstructionSkip))
               .first;
    }
    return it->second;
  }

  const HardenResult& flipped(const CorpusEntry& e) {
    auto it = flip_hardened.find(e.name);
    if (it == flip_hardened.end()) {
      it = flip_hardened
               .emplace(e.name, harden_iterate(corpus_image(e), e.good_input, e.bad_input,
                                               FaultModel::SingleBitFlip))
               .first;
    }
    return it->second;
  }

  const HybridResult& hybrid(const CorpusEntry& e) {
    auto it = hybrid_skip.find(e.name);
    if (it == hybrid_skip.end()) {
      it = hybrid_skip
               .emplace(e.name, run_hybrid_pipeline(parse_asm(e.source), e.good_input,
                                                    e.bad_input, FaultModel::InstructionSkip))
               .first;
    }
    return it->second;
  }
};

Instruction random_canonical(std::mt19937& rng) {
  static const Opcode kOps[] = {
      Opcode::Nop,  Opcode::Halt, Opcode::Trap, Opcode::Movi, Opcode::Mov,  Opcode::Ld,
      Opcode::St,   Opcode::Push, Opcode::Pop,  Opcode::Pushf, Opcode::Popf, Opcode::Add,
      Opcode::Sub,  Opcode::Xor,  Opcode::And,  Opcode::Or,   Opcode::Not,  Opcode::Cmp,
      Opcode::Jmp,  Opcode::Beq,  Opcode::Bne,  Opcode::Blt,  Opcode::Bge,
  };
  std::uniform_int_distribution<size_t> pick(0, std::size(kOps) - 1);
  std::uniform_int_distribution<int> reg(0, 15);
  std::uniform_int_distribution<int> imm12(0, 0xFFF);
  std::uniform_int_distribution<int> imm16u(0, 0xFFFF);
  std::uniform_int_distribution<int> imm16s(-32768, 32767);

  const Opcode op = kOps[pick(rng)];
  Instruction i;
  i.op = op;
  switch (op) {
    case Opcode::Nop:
    case Opcode::Trap:
    case Opcode::Pushf:
    case Opcode::Popf: break;
    case Opcode::Halt: i.imm = imm12(rng); break;
    case Opcode::Movi: i.rd = uint8_t(reg(rng)); i.imm = imm16u(rng); break;
    case Opcode::Mov:
    case Opcode::Not: i.rd = uint8_t(reg(rng)); i.rs = uint8_t(reg(rng)); break;
    case Opcode::Ld:
      i.rd = uint8_t(reg(rng)); i.rs = uint8_t(reg(rng)); i.imm = imm12(rng); break;
    case Opcode::St:
      i.rs = uint8_t(reg(rng)); i.rt = uint8_t(reg(rng)); i.imm = imm12(rng); break;
    case Opcode::Push: i.rs = uint8_t(reg(rng)); break;
    case Opcode::Pop: i.rd = uint8_t(reg(rng)); break;
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Xor:
    case Opcode::And:
    case Opcode::Or:
      i.rd = uint8_t(reg(rng)); i.rs = uint8_t(reg(rng)); i.rt = uint8_t(reg(rng)); break;
    case Opcode::Cmp: i.rs = uint8_t(reg(rng)); i.rt = uint8_t(reg(rng)); break;
    case Opcode::Jmp:
    case Opcode::Beq:
    case Opcode::Bne:
    case Opcode::Blt:
    case Opcode::Bge: i.imm = imm16s(rng); break;
  }
  return i;
}

bool reassembles_identically(const ProgramImage& img) {
  const ProgramImage again = assemble(disassemble(img));
  return again.code == img.code && again.data_init == img.data_init;
}

}  // namespace

int main() {
  ArtifactCache cache;
  int failures = 0;

  const auto criterion = [&](int n, const char* title,
                             const std::function<bool(std::string&)>& body) {
    const auto t0 = Clock::now();
    bool ok = false;
    std::string detail;
    try {
      ok = body(detail);
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("unexpected error: ") + e.what();
    }
    std::printf("[%s] %2d. %s%s%s (%.2fs)\n", ok ? "PASS" : "FAIL", n, title,
                detail.empty() ? "" : " | ", detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    if (!ok) ++failures;
  };

  criterion(1, "single skips defeat both unprotected programs at data or decision sites",
            [&](std::string& detail) {
              std::ostringstream d;
              bool ok = true;
              for (const CorpusEntry& e : corpus_entries()) {
                const auto t0 = Clock::now();
                const ProgramImage img = corpus_image(e);
                const VulnerabilityReport rep =
                    campaign(img, e.good_input, e.bad_input, FaultModel::InstructionSkip);
                const double secs = seconds_since(t0);
                ok = ok && rep.successes.size() >= 1 && secs < 10.0;
                for (const FaultOutcome& s : rep.successes) {
                  const auto ins = decode(img.code[s.pc]);
                  const bool site_ok =
                      ins && (ins->op == Opcode::Cmp || ins->op == Opcode::Mov ||
                              ins->op == Opcode::Movi || ins->op == Opcode::Ld ||
                              is_branch(ins->op));
                  ok = ok && site_ok;
                }
                d << e.name << ": " << rep.successes.size() << " bypasses  ";
              }
              detail = d.str();
              return ok;
            });

  criterion(2, "iterative skip hardening reaches a fixpoint with nothing left unpatched",
            [&](std::string& detail) {
              const auto t0 = Clock::now();
              std::ostringstream d;
              bool ok = true;
              for (const CorpusEntry& e : corpus_entries()) {
                const HardenResult& hr = cache.skipped(e);
                const VulnerabilityReport final_rep =
                    campaign(hr.final_image, e.good_input, e.bad_input,
                             FaultModel::InstructionSkip);
                ok = ok && hr.converged && hr.residual.empty() && hr.iterations <= 10 &&
                     final_rep.successes.empty();
                d << e.name << ": " << hr.iterations << " iterations  ";
              }
              ok = ok && seconds_since(t0) < 60.0;
              detail = d.str();
              return ok;
            });

  criterion(3, "iterative hardening removes at least half of the bit-flip bypasses",
            [&](std::string& detail) {
              const auto t0 = Clock::now();
              std::ostringstream d;
              bool ok = true;
              for (const CorpusEntry& e : corpus_entries()) {
                const HardenResult& hr = cache.flipped(e);
                ok = ok && hr.initial_successes > 0 &&
                     hr.final_successes * 2 <= hr.initial_successes;
                const double removed = hr.initial_successes == 0
                                           ? 0.0
                                           : 100.0 *
                                                 double(hr.initial_successes -
                                                        hr.final_successes) /
                                                 double(hr.initial_successes);
                d << e.name << ": " << hr.initial_successes << " -> " << hr.final_successes
                  << " (" << pct(removed) << " removed)  ";
              }
              ok = ok && seconds_since(t0) < 300.0;
              detail = d.str();
              return ok;
            });

  criterion(4, "branch-checksum hardening turns every protected-region skip into a non-success",
            [&](std::string& detail) {
              const CorpusEntry& e = corpus_entry("pincheck");
              const HybridResult& hy = cache.hybrid(e);
              const std::set<uint32_t> protected_set(hy.lowered.protected_addrs.begin(),
                                                     hy.lowered.protected_addrs.end());
              bool ok = hy.protected_branch_successes == 0;
              uint32_t in_region = 0;
              for (const FaultOutcome& o : hy.verification.outcomes) {
                if (!protected_set.count(o.pc)) continue;
                ++in_region;
                const bool caught = o.cls == FaultClass::NoEffect ||
                                    o.cls == FaultClass::Crash ||
                                    (o.cls == FaultClass::Other && o.code == 0xFD);
                ok = ok && caught && o.cls != FaultClass::Success;
              }
              std::ostringstream d;
              d << in_region << " protected-site skips, "
                << hy.protected_branch_successes << " successes";
              detail = d.str();
              return ok && in_region > 0;
            });

  criterion(5, "code growth: selective patches cost less than branch checksums, under 300%",
            [&](std::string& detail) {
              std::ostringstream d;
              bool ok = true;
              for (const CorpusEntry& e : corpus_entries()) {
                const ProgramImage img = corpus_image(e);
                const double patched =
                    overhead(img, cache.skipped(e).final_image, Method::FaulterPatcher)
                        .overhead_pct;
                const double checksummed = cache.hybrid(e).overhead.overhead_pct;
                ok = ok && 0.0 < patched && patched < checksummed && checksummed < 300.0;
                d << e.name << ": " << pct(patched) << " < " << pct(checksummed) << "  ";
              }
              detail = d.str();
              return ok;
            });

  criterion(6, "the edge-checksum computation matches the two-case select oracle",
            [&](std::string& detail) {
              const auto t0 = Clock::now();
              const EdgeChecksums worked = edge_checksums(0x3, 0x5, 0x9);
              bool ok = compute_checksum(1, worked) == 0x6 && compute_checksum(0, worked) == 0xA;

              std::mt19937 rng(0xACCE97);
              std::uniform_int_distribution<uint32_t> any;
              std::uniform_int_distribution<uint32_t> coin(0, 1);
              for (int i = 0; i < 1000 && ok; ++i) {
                const uint32_t s = any(rng), t = any(rng), f = any(rng);
                const uint32_t r = coin(rng);
                ok = compute_checksum(r, edge_checksums(s, t, f)) == (r ? (s ^ t) : (s ^ f));
              }
              ok = ok && seconds_since(t0) < 1.0;
              detail = "worked example 0x6/0xA plus 1000 random tuples";
              return ok;
            });

  criterion(7, "every hardened artifact preserves fault-free behaviour on the declared inputs",
            [&](std::string& detail) {
              const auto t0 = Clock::now();
              uint32_t artifacts = 0;
              bool ok = true;
              for (const CorpusEntry& e : corpus_entries()) {
                const ProgramImage original = corpus_image(e);
                const RunResult good_ref = run(original, e.good_input);
                const RunResult bad_ref = run(original, e.bad_input);
                const ProgramImage* images[3] = {&cache.skipped(e).final_image,
                                                 &cache.flipped(e).final_image,
                                                 &cache.hybrid(e).image};
                for (const ProgramImage* img : images) {
                  ++artifacts;
                  ok = ok && run(*img, e.good_input).halted_with(good_ref.halt_code) &&
                       run(*img, e.bad_input).halted_with(bad_ref.halt_code);
                }
              }
              ok = ok && seconds_since(t0) < 5.0;
              std::ostringstream d;
              d << artifacts << " artifacts checked";
              detail = d.str();
              return ok;
            });

  criterion(8, "each hardened branch carries two operand compares and four validation branches",
            [&](std::string& detail) {
              std::ostringstream d;
              bool ok = true;
              for (const CorpusEntry& e : corpus_entries()) {
                const HybridResult& hy = cache.hybrid(e);
                ok = ok && !hy.lowered.fragments.empty();
                for (const HardenedFragment& f : hy.lowered.fragments) {
                  ok = ok && f.compare_addrs.size() == 2 &&
                       f.validation_branch_addrs.size() >= 4;
                  for (uint32_t a : f.compare_addrs) {
                    const auto ins = decode(hy.image.code[a]);
                    ok = ok && ins && ins->op == Opcode::Cmp;
                  }
                  for (uint32_t a : f.validation_branch_addrs) {
                    const auto ins = decode(hy.image.code[a]);
                    ok = ok && ins && is_branch(ins->op);
                  }
                }
                d << e.name << ": " << hy.lowered.fragments.size() << " branches  ";
              }
              detail = d.str();
              return ok;
            });

  criterion(9, "encode/decode and assemble/disassemble are identities on canonical forms",
            [&](std::string& detail) {
              std::mt19937 rng(0x150150);
              bool ok = true;
              for (int i = 0; i < 100000 && ok; ++i) {
                const Instruction ins = random_canonical(rng);
                const auto back = decode(encode(ins));
                ok = back.has_value() && *back == ins;
              }

              uint32_t images = 0;
              for (const CorpusEntry& e : corpus_entries()) {
                const ProgramImage originals[4] = {corpus_image(e),
                                                   cache.skipped(e).final_image,
                                                   cache.flipped(e).final_image,
                                                   cache.hybrid(e).image};
                for (const ProgramImage& img : originals) {
                  ++images;
                  ok = ok && reassembles_identically(img);
                }
              }
              std::ostringstream d;
              d << "100000 instruction round-trips, " << images << " image round-trips";
              detail = d.str();
              return ok;
            });

  criterion(10, "campaigns and hardening runs report byte-identically, serial and parallel",
            [&](std::string& detail) {
              const CorpusEntry& e = corpus_entry("pincheck");
              const ProgramImage img = corpus_image(e);

              auto campaign_dump = [&](unsigned workers) {
                return campaign_to_json(campaign(img, e.good_input, e.bad_input,
                                                 FaultModel::SingleBitFlip, Limits{}, workers))
                    .dump(2);
              };
              auto harden_dump = [&](unsigned workers) {
                const HardenResult hr =
                    harden_iterate(img, e.good_input, e.bad_input, FaultModel::InstructionSkip,
                                   kDefaultMaxIters, Limits{}, workers);
                return harden_to_json(hr,
                                      overhead(img, hr.final_image, Method::FaulterPatcher))
                    .dump(2);
              };
              auto hybrid_dump = [&](unsigned workers) {
                return hybrid_to_json(run_hybrid_pipeline(parse_asm(e.source), e.good_input,
                                                          e.bad_input,
                                                          FaultModel::InstructionSkip, Limits{},
                                                          workers))
                    .dump(2);
              };

              const bool ok = campaign_dump(1) == campaign_dump(8) &&
                              campaign_dump(8) == campaign_dump(8) &&
                              harden_dump(1) == harden_dump(8) &&
                              hybrid_dump(1) == hybrid_dump(8);
              detail = "campaign, iterative hardening and branch-checksum reports";
              return ok;
            });

  if (failures == 0) {
    std::printf("all criteria satisfied\n");
  } else {
    std::printf("%d criteria failed\n", failures);
  }
  return failures;
}
