#include "ff/ir.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "ff/error.hpp"
#include "ff/isa.hpp"

namespace ff {

namespace {

std::vector<uint32_t> op_uses(const Op& o) {
  switch (o.kind) {
    case Op::Kind::Const: return {};
    case Op::Kind::Copy:
    case Op::Kind::Not:
    case Op::Kind::Zext:
    case Op::Kind::Load: return {o.a};
    case Op::Kind::Store:
    case Op::Kind::Bin:
    case Op::Kind::Cmp: return {o.a, o.b};
  }
  return {};
}

bool op_defines(const Op& o) { return o.kind != Op::Kind::Store; }

CmpPred pred_of_branch(Opcode op) {
  switch (op) {
    case Opcode::Beq: return CmpPred::Eq;
    case Opcode::Bne: return CmpPred::Ne;
    case Opcode::Blt: return CmpPred::Lt;
    default: return CmpPred::Ge;
  }
}

Opcode branch_of_pred(CmpPred p) {
  switch (p) {
    case CmpPred::Eq: return Opcode::Beq;
    case CmpPred::Ne: return Opcode::Bne;
    case CmpPred::Lt: return Opcode::Blt;
    case CmpPred::Ge: return Opcode::Bge;
  }
  return Opcode::Beq;
}

CmpPred inverse_pred(CmpPred p) {
  switch (p) {
    case CmpPred::Eq: return CmpPred::Ne;
    case CmpPred::Ne: return CmpPred::Eq;
    case CmpPred::Lt: return CmpPred::Ge;
    case CmpPred::Ge: return CmpPred::Lt;
  }
  return CmpPred::Ne;
}

BinOp bin_of_opcode(Opcode op) {
  switch (op) {
    case Opcode::Add: return BinOp::Add;
    case Opcode::Sub: return BinOp::Sub;
    case Opcode::Xor: return BinOp::Xor;
    case Opcode::And: return BinOp::And;
    default: return BinOp::Or;
  }
}

Opcode opcode_of_bin(BinOp op) {
  switch (op) {
    case BinOp::Add: return Opcode::Add;
    case BinOp::Sub: return Opcode::Sub;
    case BinOp::Xor: return Opcode::Xor;
    case BinOp::And: return Opcode::And;
    case BinOp::Or: return Opcode::Or;
  }
  return Opcode::Add;
}

std::string vname(uint32_t v) { return "v" + std::to_string(v); }

}  // namespace

const char* bin_op_name(BinOp op) {
  switch (op) {
    case BinOp::Add: return "add";
    case BinOp::Sub: return "sub";
    case BinOp::Xor: return "xor";
    case BinOp::And: return "and";
    case BinOp::Or: return "or";
  }
  return "?";
}

const char* cmp_pred_name(CmpPred pred) {
  switch (pred) {
    case CmpPred::Eq: return "eq";
    case CmpPred::Ne: return "ne";
    case CmpPred::Lt: return "lt";
    case CmpPred::Ge: return "ge";
  }
  return "?";
}

IRModule lift(const AsmUnit& unit) {
  const auto& lines = unit.lines;
  const uint32_t n = uint32_t(lines.size());
  if (n == 0) throw Error(Errc::UnsupportedShape, "empty program");
  for (const AsmLine& l : lines) {
    if (l.kind != AsmLine::Kind::Instruction) {
      throw Error(Errc::UnsupportedShape, "data directives have no IR form");
    }
  }

  std::map<std::string, uint32_t> labels;
  for (uint32_t i = 0; i < n; ++i) {
    if (lines[i].label.empty()) continue;
    if (!labels.emplace(lines[i].label, i).second) {
      throw Error(Errc::DuplicateLabel, "label '" + lines[i].label + "' defined twice");
    }
  }

  auto target_of = [&](uint32_t i) -> uint32_t {
    const AsmLine& l = lines[i];
    int64_t t;
    if (!l.target.empty()) {
      auto it = labels.find(l.target);
      if (it == labels.end()) {
        throw Error(Errc::UndefinedLabel, "label '" + l.target + "' is not defined");
      }
      t = it->second;
    } else {
      t = int64_t(i) + 1 + l.instr.imm;
    }
    if (t < 0 || t >= int64_t(n)) {
      throw Error(Errc::DanglingBranch, "branch at address " + std::to_string(i) +
                                            " targets word " + std::to_string(t));
    }
    return uint32_t(t);
  };

  std::set<uint32_t> leaders{0};
  for (uint32_t i = 0; i < n; ++i) {
    const Opcode op = lines[i].instr.op;
    if (!lines[i].label.empty()) leaders.insert(i);
    if (is_control_rel(op)) {
      leaders.insert(target_of(i));
      if (i + 1 < n) leaders.insert(i + 1);
    } else if (op == Opcode::Halt || op == Opcode::Trap) {
      if (i + 1 < n) leaders.insert(i + 1);
    }
  }

  std::vector<uint32_t> starts(leaders.begin(), leaders.end());
  std::map<uint32_t, uint32_t> block_of;
  for (uint32_t k = 0; k < starts.size(); ++k) block_of[starts[k]] = k;
  auto block_at = [&](uint32_t addr) { return block_of.at(addr); };

  IRModule m;
  m.blocks.resize(starts.size());
  uint32_t nv = 16;

  for (uint32_t k = 0; k < starts.size(); ++k) {
    const uint32_t lo = starts[k];
    const uint32_t hi = (k + 1 < starts.size()) ? starts[k + 1] : n;
    BasicBlock& bb = m.blocks[k];
    bool terminated = false;

    for (uint32_t i = lo; i < hi && !terminated; ++i) {
      const AsmLine& l = lines[i];
      const Instruction& ins = l.instr;
      switch (ins.op) {
        case Opcode::Nop:
          break;
        case Opcode::Halt:
          bb.term = Terminator::halt(uint32_t(ins.imm));
          terminated = true;
          break;
        case Opcode::Trap:
          bb.term = Terminator::trap();
          terminated = true;
          break;
        case Opcode::Movi:
          if (!l.target.empty()) {
            throw Error(Errc::UnsupportedShape,
                        "address-valued immediate at address " + std::to_string(i));
          }
          bb.ops.push_back(Op::constant(ins.rd, uint32_t(ins.imm)));
          break;
        case Opcode::Mov:
          bb.ops.push_back(Op::copy(ins.rd, ins.rs));
          break;
        case Opcode::Ld:
          bb.ops.push_back(Op::load(ins.rd, ins.rs, uint32_t(ins.imm)));
          break;
        case Opcode::St:
          bb.ops.push_back(Op::store(ins.rs, uint32_t(ins.imm), ins.rt));
          break;
        case Opcode::Push:
        case Opcode::Pop:
        case Opcode::Pushf:
        case Opcode::Popf:
          throw Error(Errc::UnsupportedShape,
                      "stack instruction at address " + std::to_string(i) + " has no IR form");
        case Opcode::Add:
        case Opcode::Sub:
        case Opcode::Xor:
        case Opcode::And:
        case Opcode::Or:
          bb.ops.push_back(Op::bin_op(bin_of_opcode(ins.op), ins.rd, ins.rs, ins.rt));
          break;
        case Opcode::Not:
          bb.ops.push_back(Op::not_op(ins.rd, ins.rs));
          break;
        case Opcode::Cmp: {
          if (i + 1 >= hi || !is_branch(lines[i + 1].instr.op)) {
            throw Error(Errc::UnsupportedShape,
                        "compare at address " + std::to_string(i) +
                            " is not consumed by an adjacent conditional branch");
          }
          const uint32_t c = nv++;
          bb.ops.push_back(Op::cmp(pred_of_branch(lines[i + 1].instr.op), c, ins.rs, ins.rt));
          const uint32_t t_addr = target_of(i + 1);
          const uint32_t f_addr = i + 2;
          if (f_addr >= n) {
            throw Error(Errc::UnsupportedShape, "control reaches the end of the program");
          }
          bb.term = Terminator::condbr(c, block_at(t_addr), block_at(f_addr));
          terminated = true;
          ++i;
          break;
        }
        case Opcode::Jmp:
          bb.term = Terminator::br(block_at(target_of(i)));
          terminated = true;
          break;
        case Opcode::Beq:
        case Opcode::Bne:
        case Opcode::Blt:
        case Opcode::Bge:
          throw Error(Errc::UnsupportedShape, "conditional branch at address " +
                                                  std::to_string(i) + " has no adjacent compare");
      }
    }

    if (!terminated) {
      if (k + 1 < starts.size()) {
        bb.term = Terminator::br(k + 1);
      } else {
        throw Error(Errc::UnsupportedShape, "control reaches the end of the program");
      }
    }
  }

  m.next_vreg = nv;
  return m;
}

IRModule assign_uids(const IRModule& m) {
  IRModule out = m;
  for (uint32_t i = 0; i < out.blocks.size(); ++i) out.blocks[i].uid = i + 1;
  return out;
}

EdgeChecksums edge_checksums(uint32_t uid_src, uint32_t uid_Tdst, uint32_t uid_Fdst) {
  return {uid_Tdst ^ uid_src, uid_Fdst ^ uid_src, uid_src, uid_Tdst, uid_Fdst};
}

uint32_t compute_checksum(uint32_t cmp_res, const EdgeChecksums& ec) {
  const uint32_t mask = cmp_res - 1;  // 1 -> 0x00000000, 0 -> 0xFFFFFFFF
  return (~mask & ec.const_Tdst) | (mask & ec.const_Fdst);
}

IRModule harden_branches(const IRModule& m) {
  for (const BasicBlock& b : m.blocks) {
    if (b.uid == 0) {
      throw Error(Errc::MissingUid, "block without a uid; assign_uids must run first");
    }
  }

  const uint32_t n = uint32_t(m.blocks.size());
  std::vector<bool> hardenable(n, false);
  uint32_t count = 0;
  for (uint32_t i = 0; i < n; ++i) {
    hardenable[i] = m.blocks[i].term.kind == Terminator::Kind::CondBr;
    count += hardenable[i] ? 1 : 0;
  }
  if (count == 0) return m;

  std::vector<uint32_t> idx(n);
  for (uint32_t i = 0, add = 0; i < n; ++i) {
    idx[i] = i + add;
    if (hardenable[i]) add += 8;
  }

  uint32_t uid_counter = 0;
  for (const BasicBlock& b : m.blocks) uid_counter = std::max(uid_counter, b.uid);

  IRModule out;
  out.pinned = m.pinned;
  out.hardened = m.hardened;
  uint32_t nv = m.next_vreg;

  for (uint32_t i = 0; i < n; ++i) {
    BasicBlock b = m.blocks[i];
    const Terminator orig = b.term;

    if (!hardenable[i]) {
      if (orig.kind == Terminator::Kind::Br) b.term.t = idx[orig.t];
      out.blocks.push_back(std::move(b));
      continue;
    }

    const uint32_t cond = orig.cond;
    int c1_at = -1;
    for (int j = int(b.ops.size()) - 1; j >= 0; --j) {
      if (b.ops[j].kind == Op::Kind::Cmp && b.ops[j].dst == cond) {
        c1_at = j;
        break;
      }
    }
    if (c1_at < 0) {
      throw Error(Errc::UnsupportedShape, "branch condition of block uid " +
                                              std::to_string(b.uid) +
                                              " is not produced by a compare in that block");
    }
    const Op c1op = b.ops[size_t(c1_at)];
    for (size_t j = size_t(c1_at) + 1; j < b.ops.size(); ++j) {
      const Op& o = b.ops[j];
      if (op_defines(o) && (o.dst == c1op.a || o.dst == c1op.b || o.dst == cond)) {
        throw Error(Errc::UnsupportedShape,
                    "compare inputs of block uid " + std::to_string(b.uid) +
                        " are redefined before the branch");
      }
    }

    const EdgeChecksums ec =
        edge_checksums(b.uid, m.blocks[orig.t].uid, m.blocks[orig.f].uid);
    const uint32_t base = idx[i];
    const uint32_t newT = idx[orig.t];
    const uint32_t newF = idx[orig.f];

    HardenedBranchInfo info;
    info.src_block = base;
    info.c1 = c1op.dst;
    info.cmp_a = c1op.a;
    info.cmp_b = c1op.b;
    info.pred = c1op.pred;

    // Two structurally independent checksum computations from the first
    // compare's result; they share no intermediate values.
    auto emit_chain = [&](uint8_t pin_reg) -> uint32_t {
      const uint32_t z = nv++, one = nv++, mask = nv++, nmask = nv++;
      const uint32_t ct = nv++, ta = nv++, cf = nv++, fa = nv++, d = nv++;
      b.ops.push_back(Op::zext(z, info.c1));
      b.ops.push_back(Op::constant(one, 1));
      b.ops.push_back(Op::bin_op(BinOp::Sub, mask, z, one));
      b.ops.push_back(Op::not_op(nmask, mask));
      b.ops.push_back(Op::constant(ct, ec.const_Tdst));
      b.ops.push_back(Op::bin_op(BinOp::And, ta, nmask, ct));
      b.ops.push_back(Op::constant(cf, ec.const_Fdst));
      b.ops.push_back(Op::bin_op(BinOp::And, fa, mask, cf));
      b.ops.push_back(Op::bin_op(BinOp::Or, d, ta, fa));
      out.pinned[d] = pin_reg;
      return d;
    };
    info.d1 = emit_chain(kChecksumReg1);
    info.d2 = emit_chain(kChecksumReg2);

    info.c2 = nv++;
    b.ops.push_back(Op::cmp(c1op.pred, info.c2, c1op.a, c1op.b));
    b.term = Terminator::condbr(info.c2, base + 1, base + 3);
    out.blocks.push_back(std::move(b));

    auto val_block = [&](uint32_t d, uint32_t expected, uint32_t ok, uint32_t bad) {
      BasicBlock v;
      v.uid = ++uid_counter;
      const uint32_t kv = nv++, cv = nv++;
      v.ops.push_back(Op::constant(kv, expected));
      v.ops.push_back(Op::cmp(CmpPred::Eq, cv, d, kv));
      v.term = Terminator::condbr(cv, ok, bad);
      out.blocks.push_back(std::move(v));
    };
    val_block(info.d1, ec.const_Tdst, base + 2, base + 5);
    val_block(info.d2, ec.const_Tdst, newT, base + 6);
    val_block(info.d1, ec.const_Fdst, base + 4, base + 7);
    val_block(info.d2, ec.const_Fdst, newF, base + 8);
    for (int t = 0; t < 4; ++t) {
      BasicBlock tb;
      tb.uid = ++uid_counter;
      tb.term = Terminator::trap();
      out.blocks.push_back(std::move(tb));
    }

    info.val_blocks = {base + 1, base + 2, base + 3, base + 4};
    info.trap_blocks = {base + 5, base + 6, base + 7, base + 8};
    out.hardened.push_back(info);
  }

  out.next_vreg = nv;
  return out;
}

namespace {

struct Lowerer {
  const IRModule& m;
  LoweredProgram out;
  std::string pending_label;

  std::set<uint32_t> identity;                      // values 0..12 seen anywhere
  std::vector<uint8_t> pool;                        // allocatable registers
  std::vector<std::array<uint32_t, 2>> block_range;

  // (block, compare result value) -> address of its CMP instruction
  std::map<std::pair<uint32_t, uint32_t>, uint32_t> cmp_addr;
  // block -> addresses of its conditional branch instructions
  std::map<uint32_t, std::vector<uint32_t>> cond_branch_addrs;

  // per-block allocation state
  std::map<uint32_t, uint8_t> assigned;
  std::map<uint32_t, int> last_use;
  std::array<bool, 13> busy{};
  uint32_t cur_block = 0;

  explicit Lowerer(const IRModule& mod) : m(mod) {}

  uint32_t addr() const { return uint32_t(out.unit.lines.size()); }

  void emit(const Instruction& ins, std::string target = "") {
    out.unit.lines.push_back(AsmLine::ins(ins, std::move(target), pending_label));
    pending_label.clear();
  }

  bool is_pinned(uint32_t v) const { return m.pinned.count(v) != 0; }
  bool is_local(uint32_t v) const { return v >= 16 && !is_pinned(v); }

  void analyze() {
    std::map<uint32_t, std::set<uint32_t>> blocks_of;
    auto note = [&](uint32_t v, uint32_t blk) {
      if (is_pinned(v)) {
        const uint8_t r = m.pinned.at(v);
        if (r != kChecksumReg1 && r != kChecksumReg2) {
          throw Error(Errc::RegisterPressure,
                      vname(v) + " is pinned to r" + std::to_string(r) +
                          "; only the reserved checksum registers may be pinned");
        }
        return;
      }
      if (v < 16) {
        if (v >= kChecksumReg1) {
          throw Error(Errc::RegisterPressure,
                      vname(v) + " names a reserved register (r13/r14 hold checksums, r15 is sp)");
        }
        identity.insert(v);
        return;
      }
      blocks_of[v].insert(blk);
    };

    for (uint32_t bi = 0; bi < m.blocks.size(); ++bi) {
      const BasicBlock& b = m.blocks[bi];
      for (const Op& o : b.ops) {
        for (uint32_t u : op_uses(o)) note(u, bi);
        if (op_defines(o)) note(o.dst, bi);
      }
      if (b.term.kind == Terminator::Kind::CondBr) {
        note(b.term.cond, bi);
        if (b.term.t >= m.blocks.size() || b.term.f >= m.blocks.size()) {
          throw Error(Errc::DanglingBranch, "terminator of bb" + std::to_string(bi) +
                                                " targets a missing block");
        }
      } else if (b.term.kind == Terminator::Kind::Br) {
        if (b.term.t >= m.blocks.size()) {
          throw Error(Errc::DanglingBranch, "terminator of bb" + std::to_string(bi) +
                                                " targets a missing block");
        }
      }
    }

    for (const auto& [v, where] : blocks_of) {
      if (where.size() > 1) {
        throw Error(Errc::RegisterPressure,
                    vname(v) + " is live across blocks; only pinned values may be");
      }
    }

    for (uint8_t r = 0; r < kChecksumReg1; ++r) {
      if (!identity.count(r)) pool.push_back(r);
    }
  }

  uint8_t reg_use(uint32_t v) const {
    if (is_pinned(v)) return m.pinned.at(v);
    if (v < 16) return uint8_t(v);
    auto it = assigned.find(v);
    if (it == assigned.end()) {
      throw Error(Errc::UnsupportedShape, vname(v) + " is used before it is defined");
    }
    return it->second;
  }

  void release(uint32_t v, int at) {
    if (!is_local(v)) return;
    auto lu = last_use.find(v);
    if (lu != last_use.end() && lu->second == at) {
      auto it = assigned.find(v);
      if (it != assigned.end()) {
        busy[it->second] = false;
        assigned.erase(it);
      }
    }
  }

  uint8_t reg_def(uint32_t v) {
    if (is_pinned(v)) return m.pinned.at(v);
    if (v < 16) return uint8_t(v);
    auto it = assigned.find(v);
    if (it != assigned.end()) return it->second;
    for (uint8_t r : pool) {
      if (!busy[r]) {
        busy[r] = true;
        assigned.emplace(v, r);
        return r;
      }
    }
    throw Error(Errc::RegisterPressure, "no free register for " + vname(v) + " in bb" +
                                            std::to_string(cur_block) + " (" +
                                            std::to_string(assigned.size()) + " values live)");
  }

  uint8_t scratch_reg(uint8_t avoid) const {
    for (uint8_t r : pool) {
      if (!busy[r] && r != avoid) return r;
    }
    throw Error(Errc::RegisterPressure,
                "no free scratch register in bb" + std::to_string(cur_block));
  }

  // CMP + conditional branch, with the fall-through side elided when it is
  // the next block in layout order.
  void emit_branch(CmpPred pred, uint32_t t, uint32_t f, uint32_t next) {
    const auto label = [](uint32_t blk) { return "bb" + std::to_string(blk); };
    if (f == next) {
      cond_branch_addrs[cur_block].push_back(addr());
      emit(Instruction::branch(branch_of_pred(pred), 0), label(t));
    } else if (t == next) {
      cond_branch_addrs[cur_block].push_back(addr());
      emit(Instruction::branch(branch_of_pred(inverse_pred(pred)), 0), label(f));
    } else {
      cond_branch_addrs[cur_block].push_back(addr());
      emit(Instruction::branch(branch_of_pred(pred), 0), label(t));
      emit(Instruction::jmp(0), label(f));
    }
  }

  void lower_block(uint32_t bi) {
    const BasicBlock& b = m.blocks[bi];
    cur_block = bi;
    assigned.clear();
    last_use.clear();
    busy.fill(false);

    const int term_at = int(b.ops.size());
    for (int j = 0; j < term_at; ++j) {
      const Op& o = b.ops[size_t(j)];
      for (uint32_t u : op_uses(o)) {
        if (is_local(u)) last_use[u] = j;
      }
      if (op_defines(o) && is_local(o.dst)) last_use[o.dst] = j;
    }
    if (b.term.kind == Terminator::Kind::CondBr && is_local(b.term.cond)) {
      last_use[b.term.cond] = term_at;
    }

    // The final compare fuses with the conditional branch when its result is
    // consumed by that branch alone.
    bool fused = false;
    if (b.term.kind == Terminator::Kind::CondBr && !b.ops.empty()) {
      const Op& last = b.ops.back();
      if (last.kind == Op::Kind::Cmp && last.dst == b.term.cond && is_local(last.dst)) {
        uint32_t uses = 0;
        for (const Op& o : b.ops) {
          for (uint32_t u : op_uses(o)) {
            if (u == last.dst) ++uses;
          }
        }
        fused = uses == 0;
      }
    }

    if (!pending_label.empty()) {
      // stacked labels cannot happen: a pending label is flushed by the
      // first emitted line, and blocks only stay silent when unlabeled
      throw Error(Errc::UnsupportedShape, "internal: unflushed label " + pending_label);
    }
    pending_label = "bb" + std::to_string(bi);

    const int op_end = fused ? term_at - 1 : term_at;
    for (int j = 0; j < op_end; ++j) {
      const Op& o = b.ops[size_t(j)];
      switch (o.kind) {
        case Op::Kind::Const: {
          if (o.imm > 0xFFFF) {
            throw Error(Errc::ImmediateOverflow,
                        "constant 0x" + [&] {
                          std::ostringstream s;
                          s << std::hex << o.imm;
                          return s.str();
                        }() + " does not fit in a 16-bit immediate");
          }
          const uint8_t rd = reg_def(o.dst);
          emit(Instruction::movi(rd, o.imm));
          release(o.dst, j);
          break;
        }
        case Op::Kind::Copy: {
          const uint8_t rs = reg_use(o.a);
          release(o.a, j);
          const uint8_t rd = reg_def(o.dst);
          emit(Instruction::mov(rd, rs));
          release(o.dst, j);
          break;
        }
        case Op::Kind::Zext: {
          // the source is a materialized 0/1 word, so zero-extension is a move
          const uint8_t rs = reg_use(o.a);
          release(o.a, j);
          const uint8_t rd = reg_def(o.dst);
          emit(Instruction::mov(rd, rs));
          release(o.dst, j);
          break;
        }
        case Op::Kind::Load: {
          if (o.imm > 0xFFF) {
            throw Error(Errc::ImmediateOverflow, "load offset " + std::to_string(o.imm) +
                                                     " does not fit in 12 bits");
          }
          const uint8_t ra = reg_use(o.a);
          release(o.a, j);
          const uint8_t rd = reg_def(o.dst);
          emit(Instruction::ld(rd, ra, o.imm));
          release(o.dst, j);
          break;
        }
        case Op::Kind::Store: {
          if (o.imm > 0xFFF) {
            throw Error(Errc::ImmediateOverflow, "store offset " + std::to_string(o.imm) +
                                                     " does not fit in 12 bits");
          }
          const uint8_t ra = reg_use(o.a);
          const uint8_t rv = reg_use(o.b);
          emit(Instruction::st(ra, o.imm, rv));
          release(o.a, j);
          release(o.b, j);
          break;
        }
        case Op::Kind::Bin: {
          const uint8_t ra = reg_use(o.a);
          const uint8_t rb = reg_use(o.b);
          release(o.a, j);
          release(o.b, j);
          const uint8_t rd = reg_def(o.dst);
          emit(Instruction::alu(opcode_of_bin(o.bin), rd, ra, rb));
          release(o.dst, j);
          break;
        }
        case Op::Kind::Not: {
          const uint8_t rs = reg_use(o.a);
          release(o.a, j);
          const uint8_t rd = reg_def(o.dst);
          emit(Instruction::not_(rd, rs));
          release(o.dst, j);
          break;
        }
        case Op::Kind::Cmp: {
          // materialize the boolean: CMP, branch over "0", else "1"
          const uint8_t ra = reg_use(o.a);
          const uint8_t rb = reg_use(o.b);
          release(o.a, j);
          release(o.b, j);
          const uint8_t rd = reg_def(o.dst);
          cmp_addr[{bi, o.dst}] = addr();
          emit(Instruction::cmp(ra, rb));
          emit(Instruction::branch(branch_of_pred(o.pred), 2));
          emit(Instruction::movi(rd, 0));
          emit(Instruction::jmp(1));
          emit(Instruction::movi(rd, 1));
          release(o.dst, j);
          break;
        }
      }
    }

    const uint32_t next = bi + 1;
    switch (b.term.kind) {
      case Terminator::Kind::CondBr: {
        if (fused) {
          const Op& c = b.ops.back();
          const uint8_t ra = reg_use(c.a);
          const uint8_t rb = reg_use(c.b);
          cmp_addr[{bi, c.dst}] = addr();
          emit(Instruction::cmp(ra, rb));
          emit_branch(c.pred, b.term.t, b.term.f, next);
        } else {
          // branch on an already-materialized boolean
          const uint8_t rc = reg_use(b.term.cond);
          const uint8_t rz = scratch_reg(rc);
          emit(Instruction::movi(rz, 0));
          emit(Instruction::cmp(rc, rz));
          emit_branch(CmpPred::Ne, b.term.t, b.term.f, next);
        }
        break;
      }
      case Terminator::Kind::Br: {
        if (b.term.t != next || !pending_label.empty()) {
          emit(Instruction::jmp(0), "bb" + std::to_string(b.term.t));
        }
        break;
      }
      case Terminator::Kind::Halt: {
        if (b.term.halt_code > 0xFFF) {
          throw Error(Errc::ImmediateOverflow, "halt code " + std::to_string(b.term.halt_code) +
                                                   " does not fit in 12 bits");
        }
        emit(Instruction::halt(b.term.halt_code));
        break;
      }
      case Terminator::Kind::Trap: {
        emit(Instruction::trap());
        break;
      }
    }
  }
};

}  // namespace

LoweredProgram lower_full(const IRModule& m) {
  if (m.blocks.empty()) {
    throw Error(Errc::UnsupportedShape, "module has no blocks");
  }

  Lowerer lw(m);
  lw.analyze();
  lw.block_range.resize(m.blocks.size());
  for (uint32_t bi = 0; bi < m.blocks.size(); ++bi) {
    const uint32_t start = lw.addr();
    lw.lower_block(bi);
    lw.block_range[bi] = {start, lw.addr()};
  }

  for (const HardenedBranchInfo& hi : m.hardened) {
    HardenedFragment frag;
    auto c1 = lw.cmp_addr.find({hi.src_block, hi.c1});
    auto c2 = lw.cmp_addr.find({hi.src_block, hi.c2});
    if (c1 == lw.cmp_addr.end() || c2 == lw.cmp_addr.end()) {
      throw Error(Errc::UnsupportedShape,
                  "hardened-branch bookkeeping does not match the module");
    }
    frag.compare_addrs = {c1->second, c2->second};
    for (uint32_t vb : hi.val_blocks) {
      for (uint32_t a : lw.cond_branch_addrs[vb]) frag.validation_branch_addrs.push_back(a);
    }
    for (uint32_t a = c1->second; a < lw.block_range[hi.src_block][1]; ++a) {
      frag.addrs.push_back(a);
    }
    for (uint32_t blk : hi.val_blocks) {
      for (uint32_t a = lw.block_range[blk][0]; a < lw.block_range[blk][1]; ++a) {
        frag.addrs.push_back(a);
      }
    }
    for (uint32_t blk : hi.trap_blocks) {
      for (uint32_t a = lw.block_range[blk][0]; a < lw.block_range[blk][1]; ++a) {
        frag.addrs.push_back(a);
      }
    }
    std::sort(frag.addrs.begin(), frag.addrs.end());
    lw.out.fragments.push_back(std::move(frag));
  }

  std::set<uint32_t> all;
  for (const HardenedFragment& f : lw.out.fragments) all.insert(f.addrs.begin(), f.addrs.end());
  lw.out.protected_addrs.assign(all.begin(), all.end());
  return std::move(lw.out);
}

AsmUnit lower(const IRModule& m) { return lower_full(m).unit; }

std::string ir_dump(const IRModule& m) {
  std::ostringstream s;
  for (uint32_t bi = 0; bi < m.blocks.size(); ++bi) {
    const BasicBlock& b = m.blocks[bi];
    s << "block " << b.uid << ":\n";
    for (const Op& o : b.ops) {
      s << "  ";
      switch (o.kind) {
        case Op::Kind::Const:
          s << vname(o.dst) << " = const 0x" << std::hex << o.imm << std::dec;
          break;
        case Op::Kind::Copy:
          s << vname(o.dst) << " = copy " << vname(o.a);
          break;
        case Op::Kind::Load:
          s << vname(o.dst) << " = load [" << vname(o.a) << "+" << o.imm << "]";
          break;
        case Op::Kind::Store:
          s << "store [" << vname(o.a) << "+" << o.imm << "], " << vname(o.b);
          break;
        case Op::Kind::Bin:
          s << vname(o.dst) << " = " << bin_op_name(o.bin) << " " << vname(o.a) << ", "
            << vname(o.b);
          break;
        case Op::Kind::Not:
          s << vname(o.dst) << " = not " << vname(o.a);
          break;
        case Op::Kind::Zext:
          s << vname(o.dst) << " = zext " << vname(o.a);
          break;
        case Op::Kind::Cmp:
          s << vname(o.dst) << " = cmp " << cmp_pred_name(o.pred) << " " << vname(o.a) << ", "
            << vname(o.b);
          break;
      }
      s << "\n";
    }
    s << "  ";
    switch (b.term.kind) {
      case Terminator::Kind::CondBr:
        s << "condbr " << vname(b.term.cond) << ", bb" << b.term.t << ", bb" << b.term.f;
        break;
      case Terminator::Kind::Br:
        s << "br bb" << b.term.t;
        break;
      case Terminator::Kind::Halt:
        s << "halt " << b.term.halt_code;
        break;
      case Terminator::Kind::Trap:
        s << "trap";
        break;
    }
    s << "\n";
  }
  return s.str();
}

}  // namespace ff
