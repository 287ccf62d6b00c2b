#include "ff/isa.hpp"

#include <array>

namespace ff {

namespace {

// Operand shape of each opcode, used by encode/decode/printing.
enum class Shape {
  None,     // NOP, TRAP, PUSHF, POPF
  Imm12,    // HALT
  RdImm16,  // MOVI
  RdRs,     // MOV, NOT
  RdRsOff,  // LD
  RsOffRt,  // ST
  Rs,       // PUSH
  Rd,       // POP
  RdRsRt,   // ADD..OR
  RsRt,     // CMP
  Rel16,    // JMP, Bcc
};

struct OpInfo {
  Opcode op;
  const char* name;
  Shape shape;
};

constexpr std::array<OpInfo, 23> kOps = {{
    {Opcode::Nop, "NOP", Shape::None},
    {Opcode::Halt, "HALT", Shape::Imm12},
    {Opcode::Trap, "TRAP", Shape::None},
    {Opcode::Movi, "MOVI", Shape::RdImm16},
    {Opcode::Mov, "MOV", Shape::RdRs},
    {Opcode::Ld, "LD", Shape::RdRsOff},
    {Opcode::St, "ST", Shape::RsOffRt},
    {Opcode::Push, "PUSH", Shape::Rs},
    {Opcode::Pop, "POP", Shape::Rd},
    {Opcode::Pushf, "PUSHF", Shape::None},
    {Opcode::Popf, "POPF", Shape::None},
    {Opcode::Add, "ADD", Shape::RdRsRt},
    {Opcode::Sub, "SUB", Shape::RdRsRt},
    {Opcode::Xor, "XOR", Shape::RdRsRt},
    {Opcode::And, "AND", Shape::RdRsRt},
    {Opcode::Or, "OR", Shape::RdRsRt},
    {Opcode::Not, "NOT", Shape::RdRs},
    {Opcode::Cmp, "CMP", Shape::RsRt},
    {Opcode::Jmp, "JMP", Shape::Rel16},
    {Opcode::Beq, "BEQ", Shape::Rel16},
    {Opcode::Bne, "BNE", Shape::Rel16},
    {Opcode::Blt, "BLT", Shape::Rel16},
    {Opcode::Bge, "BGE", Shape::Rel16},
}};

const OpInfo* find_op(uint8_t byte) {
  for (const auto& o : kOps)
    if ((uint8_t)o.op == byte) return &o;
  return nullptr;
}

Shape shape_of(Opcode op) { return find_op((uint8_t)op)->shape; }

constexpr uint32_t rd_bits(uint8_t r) { return (uint32_t)(r & 0xF) << 20; }
constexpr uint32_t rs_bits(uint8_t r) { return (uint32_t)(r & 0xF) << 16; }
constexpr uint32_t rt_bits(uint8_t r) { return (uint32_t)(r & 0xF) << 12; }

constexpr uint8_t rd_of(word_t w) { return (w >> 20) & 0xF; }
constexpr uint8_t rs_of(word_t w) { return (w >> 16) & 0xF; }
constexpr uint8_t rt_of(word_t w) { return (w >> 12) & 0xF; }
constexpr uint32_t imm12_of(word_t w) { return w & 0xFFF; }
constexpr int32_t imm16s_of(word_t w) { return (int32_t)(int16_t)(w & 0xFFFF); }
constexpr uint32_t imm16u_of(word_t w) { return w & 0xFFFF; }

std::string reg_name(uint8_t r) { return "r" + std::to_string(r); }

}  // namespace

bool opcode_defined(uint8_t byte) { return find_op(byte) != nullptr; }

const char* opcode_name(Opcode op) { return find_op((uint8_t)op)->name; }

bool is_branch(Opcode op) {
  return op == Opcode::Beq || op == Opcode::Bne || op == Opcode::Blt || op == Opcode::Bge;
}

bool is_control_rel(Opcode op) { return op == Opcode::Jmp || is_branch(op); }

word_t encode(const Instruction& i) {
  word_t w = (word_t)(uint8_t)i.op << 24;
  switch (shape_of(i.op)) {
    case Shape::None:
      break;
    case Shape::Imm12:
      w |= (uint32_t)i.imm & 0xFFF;
      break;
    case Shape::RdImm16:
      w |= rd_bits(i.rd) | ((uint32_t)i.imm & 0xFFFF);
      break;
    case Shape::RdRs:
      w |= rd_bits(i.rd) | rs_bits(i.rs);
      break;
    case Shape::RdRsOff:
      w |= rd_bits(i.rd) | rs_bits(i.rs) | ((uint32_t)i.imm & 0xFFF);
      break;
    case Shape::RsOffRt:
      w |= rs_bits(i.rs) | rt_bits(i.rt) | ((uint32_t)i.imm & 0xFFF);
      break;
    case Shape::Rs:
      w |= rs_bits(i.rs);
      break;
    case Shape::Rd:
      w |= rd_bits(i.rd);
      break;
    case Shape::RdRsRt:
      w |= rd_bits(i.rd) | rs_bits(i.rs) | rt_bits(i.rt);
      break;
    case Shape::RsRt:
      w |= rs_bits(i.rs) | rt_bits(i.rt);
      break;
    case Shape::Rel16:
      w |= (uint32_t)i.imm & 0xFFFF;
      break;
  }
  return w;
}

std::optional<Instruction> decode(word_t w) {
  const OpInfo* info = find_op((uint8_t)(w >> 24));
  if (!info) return std::nullopt;
  Instruction i;
  i.op = info->op;
  switch (info->shape) {
    case Shape::None:
      break;
    case Shape::Imm12:
      i.imm = (int32_t)imm12_of(w);
      break;
    case Shape::RdImm16:
      i.rd = rd_of(w);
      i.imm = (int32_t)imm16u_of(w);
      break;
    case Shape::RdRs:
      i.rd = rd_of(w);
      i.rs = rs_of(w);
      break;
    case Shape::RdRsOff:
      i.rd = rd_of(w);
      i.rs = rs_of(w);
      i.imm = (int32_t)imm12_of(w);
      break;
    case Shape::RsOffRt:
      i.rs = rs_of(w);
      i.rt = rt_of(w);
      i.imm = (int32_t)imm12_of(w);
      break;
    case Shape::Rs:
      i.rs = rs_of(w);
      break;
    case Shape::Rd:
      i.rd = rd_of(w);
      break;
    case Shape::RdRsRt:
      i.rd = rd_of(w);
      i.rs = rs_of(w);
      i.rt = rt_of(w);
      break;
    case Shape::RsRt:
      i.rs = rs_of(w);
      i.rt = rt_of(w);
      break;
    case Shape::Rel16:
      i.imm = imm16s_of(w);
      break;
  }
  return i;
}

std::string instr_to_string(const Instruction& i) { return instr_to_string(i, ""); }

std::string instr_to_string(const Instruction& i, const std::string& target_label) {
  const std::string name = opcode_name(i.op);
  switch (shape_of(i.op)) {
    case Shape::None:
      return name;
    case Shape::Imm12:
      return name + " " + std::to_string(i.imm);
    case Shape::RdImm16:
      if (!target_label.empty()) return name + " " + reg_name(i.rd) + ", " + target_label;
      return name + " " + reg_name(i.rd) + ", " + std::to_string(i.imm);
    case Shape::RdRs:
      return name + " " + reg_name(i.rd) + ", " + reg_name(i.rs);
    case Shape::RdRsOff:
      return name + " " + reg_name(i.rd) + ", [" + reg_name(i.rs) + "+" + std::to_string(i.imm) + "]";
    case Shape::RsOffRt:
      return name + " [" + reg_name(i.rs) + "+" + std::to_string(i.imm) + "], " + reg_name(i.rt);
    case Shape::Rs:
      return name + " " + reg_name(i.rs);
    case Shape::Rd:
      return name + " " + reg_name(i.rd);
    case Shape::RdRsRt:
      return name + " " + reg_name(i.rd) + ", " + reg_name(i.rs) + ", " + reg_name(i.rt);
    case Shape::RsRt:
      return name + " " + reg_name(i.rs) + ", " + reg_name(i.rt);
    case Shape::Rel16:
      if (!target_label.empty()) return name + " " + target_label;
      return name + " " + std::to_string(i.imm);
  }
  return name;
}

}  // namespace ff
