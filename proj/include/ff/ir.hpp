#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ff/program.hpp"

namespace ff {

// Registers the lowering keeps out of the allocator: the two checksum values
// of a hardened branch live in r13/r14 across the validation blocks, and r15
// is the stack pointer.
constexpr uint8_t kChecksumReg1 = 13;
constexpr uint8_t kChecksumReg2 = 14;

enum class BinOp { Add, Sub, Xor, And, Or };
enum class CmpPred { Eq, Ne, Lt, Ge };

const char* bin_op_name(BinOp op);
const char* cmp_pred_name(CmpPred pred);

// One IR operation on virtual registers. Values 0..15 mirror the machine
// registers at lift time; freshly created values are numbered from 16 up.
struct Op {
  enum class Kind { Const, Copy, Load, Store, Bin, Not, Zext, Cmp };

  Kind kind = Kind::Const;
  uint32_t dst = 0;  // defined value (unused for Store)
  uint32_t a = 0;    // operand / address base / copied source
  uint32_t b = 0;    // second operand / stored value
  uint32_t imm = 0;  // Const payload or Load/Store word offset
  BinOp bin = BinOp::Add;    // for Kind::Bin
  CmpPred pred = CmpPred::Eq;  // for Kind::Cmp

  bool operator==(const Op&) const = default;

  static Op constant(uint32_t dst, uint32_t value) { return {Kind::Const, dst, 0, 0, value}; }
  static Op copy(uint32_t dst, uint32_t src) { return {Kind::Copy, dst, src}; }
  static Op load(uint32_t dst, uint32_t addr, uint32_t off) { return {Kind::Load, dst, addr, 0, off}; }
  static Op store(uint32_t addr, uint32_t off, uint32_t src) { return {Kind::Store, 0, addr, src, off}; }
  static Op bin_op(BinOp op, uint32_t dst, uint32_t a, uint32_t b) {
    Op o{Kind::Bin, dst, a, b};
    o.bin = op;
    return o;
  }
  static Op not_op(uint32_t dst, uint32_t src) { return {Kind::Not, dst, src}; }
  static Op zext(uint32_t dst, uint32_t src) { return {Kind::Zext, dst, src}; }
  static Op cmp(CmpPred pred, uint32_t dst, uint32_t a, uint32_t b) {
    Op o{Kind::Cmp, dst, a, b};
    o.pred = pred;
    return o;
  }
};

// Every block ends in exactly one terminator. Branch targets are indices
// into IRModule::blocks.
struct Terminator {
  enum class Kind { CondBr, Br, Halt, Trap };

  Kind kind = Kind::Halt;
  uint32_t cond = 0;  // CondBr: boolean (0/1) value
  uint32_t t = 0;     // CondBr true target; Br target
  uint32_t f = 0;     // CondBr false target
  uint32_t halt_code = 0;

  bool operator==(const Terminator&) const = default;

  static Terminator condbr(uint32_t cond, uint32_t t, uint32_t f) {
    return {Kind::CondBr, cond, t, f, 0};
  }
  static Terminator br(uint32_t target) { return {Kind::Br, 0, target, 0, 0}; }
  static Terminator halt(uint32_t code) { return {Kind::Halt, 0, 0, 0, code}; }
  static Terminator trap() { return {Kind::Trap, 0, 0, 0, 0}; }
};

struct BasicBlock {
  uint32_t uid = 0;  // 0 until assign_uids runs
  std::vector<Op> ops;
  Terminator term;
};

// Bookkeeping for one hardened conditional branch, in block indices of the
// hardened module. val_blocks holds [true-side check of d1, true-side check
// of d2, false-side check of d1, false-side check of d2].
struct HardenedBranchInfo {
  uint32_t src_block = 0;
  std::array<uint32_t, 4> val_blocks{};
  std::array<uint32_t, 4> trap_blocks{};
  uint32_t c1 = 0, c2 = 0;  // first / second compare result values
  uint32_t d1 = 0, d2 = 0;  // checksum values, pinned to r13/r14
  uint32_t cmp_a = 0, cmp_b = 0;
  CmpPred pred = CmpPred::Eq;
};

struct IRModule {
  std::vector<BasicBlock> blocks;  // entry is blocks[0]
  uint32_t next_vreg = 16;
  std::map<uint32_t, uint8_t> pinned;  // value -> machine register it must occupy
  std::vector<HardenedBranchInfo> hardened;
};

// Per-edge constants of the branch checksum: const for a destination is its
// uid XOR the source uid, so checksum(taken) != checksum(not taken) whenever
// the two destination uids differ.
struct EdgeChecksums {
  uint32_t const_Tdst = 0;
  uint32_t const_Fdst = 0;
  uint32_t uid_src = 0;
  uint32_t uid_Tdst = 0;
  uint32_t uid_Fdst = 0;
};

EdgeChecksums edge_checksums(uint32_t uid_src, uint32_t uid_Tdst, uint32_t uid_Fdst);

// Branchless select of the edge constant: cmp_res must be 0 or 1; the mask
// cmp_res - 1 is all-zeros when taken and all-ones when not, and the result
// is (~mask & const_Tdst) | (mask & const_Fdst).
uint32_t compute_checksum(uint32_t cmp_res, const EdgeChecksums& ec);

// Build a CFG from labeled assembly. Blocks split at labels, at branch
// targets and after every control-transfer instruction; CMP must be directly
// followed by the conditional branch it feeds, and stack instructions or
// data directives have no IR form (UnsupportedShape).
IRModule lift(const AsmUnit& unit);

// Number blocks 1..n in block order. Idempotent.
IRModule assign_uids(const IRModule& m);

// Rewrite every conditional branch to the checksum scheme: re-run the
// compare (C2) for the actual branch, derive two structurally independent
// checksum values d1/d2 from the first compare (C1), and route both outgoing
// edges through two chained validation blocks each (d1 then d2 against the
// edge constant), trapping on any mismatch. Requires uids (MissingUid).
IRModule harden_branches(const IRModule& m);

// Where one hardened branch landed in the lowered code (word addresses):
// the two operand compares, the conditional branches of the four validation
// blocks, and the whole machinery region including the trap blocks.
struct HardenedFragment {
  std::array<uint32_t, 2> compare_addrs{};
  std::vector<uint32_t> validation_branch_addrs;
  std::vector<uint32_t> addrs;
};

struct LoweredProgram {
  AsmUnit unit;
  std::vector<HardenedFragment> fragments;
  std::vector<uint32_t> protected_addrs;  // sorted union of fragment addrs
};

// Deterministic code generation. Values 0..12 map to their machine register;
// pinned values use their reserved register; all other values must be
// block-local and are assigned from the free registers by a linear scan
// (RegisterPressure when they run out, when a value ignores the block-local
// rule, or when a value names a reserved register).
LoweredProgram lower_full(const IRModule& m);
AsmUnit lower(const IRModule& m);

// One stanza per block: `block <uid>:`, ops, then the terminator with bb<idx>
// targets.
std::string ir_dump(const IRModule& m);

}  // namespace ff
