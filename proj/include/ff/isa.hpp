#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace ff {

using word_t = uint32_t;

// Fixed-width 32-bit instruction word:
//   bits 31:24 opcode
//   bits 23:20 rd
//   bits 19:16 rs
//   bits 15:12 rt
//   bits 11:0  imm12
// MOVI, JMP and the conditional branches use bits 15:0 as imm16 instead of
// rt/imm12. imm12 is unsigned, imm16 is signed for control flow and unsigned
// for MOVI. Bits an instruction does not use are zero in canonical form.
enum class Opcode : uint8_t {
  Nop = 0x00,
  Halt = 0x01,
  Trap = 0x02,
  Movi = 0x10,
  Mov = 0x11,
  Ld = 0x12,
  St = 0x13,
  Push = 0x14,
  Pop = 0x15,
  Pushf = 0x16,
  Popf = 0x17,
  Add = 0x20,
  Sub = 0x21,
  Xor = 0x22,
  And = 0x23,
  Or = 0x24,
  Not = 0x25,
  Cmp = 0x30,
  Jmp = 0x40,
  Beq = 0x41,
  Bne = 0x42,
  Blt = 0x43,
  Bge = 0x44,
};

constexpr uint8_t kSp = 15;  // r15 doubles as the stack pointer

bool opcode_defined(uint8_t byte);
const char* opcode_name(Opcode op);
bool is_branch(Opcode op);       // Beq/Bne/Blt/Bge
bool is_control_rel(Opcode op);  // Jmp or conditional branch

struct Instruction {
  Opcode op = Opcode::Nop;
  uint8_t rd = 0;
  uint8_t rs = 0;
  uint8_t rt = 0;
  int32_t imm = 0;  // imm12 (unsigned) or imm16 (signedness per opcode)

  bool operator==(const Instruction&) const = default;

  static Instruction nop() { return {}; }
  static Instruction halt(uint32_t code) { return {Opcode::Halt, 0, 0, 0, (int32_t)code}; }
  static Instruction trap() { return {Opcode::Trap}; }
  static Instruction movi(uint8_t rd, uint32_t imm) { return {Opcode::Movi, rd, 0, 0, (int32_t)imm}; }
  static Instruction mov(uint8_t rd, uint8_t rs) { return {Opcode::Mov, rd, rs, 0, 0}; }
  static Instruction ld(uint8_t rd, uint8_t rs, uint32_t off) { return {Opcode::Ld, rd, rs, 0, (int32_t)off}; }
  static Instruction st(uint8_t rs, uint32_t off, uint8_t rt) { return {Opcode::St, 0, rs, rt, (int32_t)off}; }
  static Instruction push(uint8_t rs) { return {Opcode::Push, 0, rs, 0, 0}; }
  static Instruction pop(uint8_t rd) { return {Opcode::Pop, rd, 0, 0, 0}; }
  static Instruction pushf() { return {Opcode::Pushf}; }
  static Instruction popf() { return {Opcode::Popf}; }
  static Instruction alu(Opcode op, uint8_t rd, uint8_t rs, uint8_t rt) { return {op, rd, rs, rt, 0}; }
  static Instruction not_(uint8_t rd, uint8_t rs) { return {Opcode::Not, rd, rs, 0, 0}; }
  static Instruction cmp(uint8_t rs, uint8_t rt) { return {Opcode::Cmp, 0, rs, rt, 0}; }
  static Instruction jmp(int32_t disp) { return {Opcode::Jmp, 0, 0, 0, disp}; }
  static Instruction branch(Opcode op, int32_t disp) { return {op, 0, 0, 0, disp}; }
};

// encode expects a canonical Instruction (register indices < 16, immediate in
// range for the opcode class); fields the opcode does not use are emitted as
// zero regardless of their struct values.
word_t encode(const Instruction& i);

// decode accepts any word whose opcode byte is assigned. Bits outside the
// opcode's fields are ignored, so the result is always canonical; a word is
// only rejected (nullopt) when its opcode byte is unassigned.
std::optional<Instruction> decode(word_t w);

// Assembly text for one instruction. Relative operands are printed as signed
// word displacements ("BNE 3"); pass a target label to print it instead.
std::string instr_to_string(const Instruction& i);
std::string instr_to_string(const Instruction& i, const std::string& target_label);

}  // namespace ff
