#include "ff/program.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <unordered_map>

#include "ff/error.hpp"

namespace ff {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string upper(std::string s) {
  for (char& c : s) c = (char)std::toupper((unsigned char)c);
  return s;
}

bool is_ident(const std::string& s) {
  if (s.empty()) return false;
  if (!std::isalpha((unsigned char)s[0]) && s[0] != '_') return false;
  for (char c : s)
    if (!std::isalnum((unsigned char)c) && c != '_') return false;
  return true;
}

[[noreturn]] void fail(Errc code, int line, const std::string& msg) {
  throw Error(code, "line " + std::to_string(line) + ": " + msg);
}

int64_t parse_number(const std::string& tok, int line) {
  std::string t = tok;
  bool neg = false;
  if (!t.empty() && (t[0] == '-' || t[0] == '+')) {
    neg = t[0] == '-';
    t = t.substr(1);
  }
  if (t.empty()) fail(Errc::BadOperand, line, "expected a number, got '" + tok + "'");
  int base = 10;
  if (t.size() > 2 && t[0] == '0' && (t[1] == 'x' || t[1] == 'X')) {
    base = 16;
    t = t.substr(2);
  }
  size_t pos = 0;
  int64_t v = 0;
  try {
    v = std::stoll(t, &pos, base);
  } catch (...) {
    fail(Errc::BadOperand, line, "bad number '" + tok + "'");
  }
  if (pos != t.size()) fail(Errc::BadOperand, line, "bad number '" + tok + "'");
  return neg ? -v : v;
}

uint8_t parse_reg(const std::string& tok, int line) {
  std::string t = upper(trim(tok));
  if (t == "SP") return kSp;
  if (t.size() >= 2 && t[0] == 'R') {
    int64_t v = 0;
    try {
      size_t pos = 0;
      v = std::stoll(t.substr(1), &pos, 10);
      if (pos != t.size() - 1) v = -1;
    } catch (...) {
      v = -1;
    }
    if (v >= 0 && v <= 15) return (uint8_t)v;
  }
  fail(Errc::BadOperand, line, "expected a register, got '" + trim(tok) + "'");
}

// "[rN+imm]" or "[rN]"
void parse_mem(const std::string& tok, int line, uint8_t& reg, int64_t& off) {
  std::string t = trim(tok);
  if (t.size() < 3 || t.front() != '[' || t.back() != ']')
    fail(Errc::BadOperand, line, "expected a memory operand, got '" + t + "'");
  t = t.substr(1, t.size() - 2);
  size_t plus = t.find('+');
  if (plus == std::string::npos) {
    reg = parse_reg(t, line);
    off = 0;
  } else {
    reg = parse_reg(t.substr(0, plus), line);
    off = parse_number(trim(t.substr(plus + 1)), line);
  }
}

std::vector<std::string> split_operands(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cur = trim(cur);
  if (!cur.empty() || !out.empty()) out.push_back(cur);
  return out;
}

struct MnemonicInfo {
  Opcode op;
  int operands;
};

const std::unordered_map<std::string, MnemonicInfo>& mnemonics() {
  static const std::unordered_map<std::string, MnemonicInfo> m = {
      {"NOP", {Opcode::Nop, 0}},   {"HALT", {Opcode::Halt, 1}}, {"TRAP", {Opcode::Trap, 0}},
      {"MOVI", {Opcode::Movi, 2}}, {"MOV", {Opcode::Mov, 2}},   {"LD", {Opcode::Ld, 2}},
      {"ST", {Opcode::St, 2}},     {"PUSH", {Opcode::Push, 1}}, {"POP", {Opcode::Pop, 1}},
      {"PUSHF", {Opcode::Pushf, 0}}, {"POPF", {Opcode::Popf, 0}}, {"ADD", {Opcode::Add, 3}},
      {"SUB", {Opcode::Sub, 3}},   {"XOR", {Opcode::Xor, 3}},   {"AND", {Opcode::And, 3}},
      {"OR", {Opcode::Or, 3}},     {"NOT", {Opcode::Not, 2}},   {"CMP", {Opcode::Cmp, 2}},
      {"JMP", {Opcode::Jmp, 1}},   {"BEQ", {Opcode::Beq, 1}},   {"BNE", {Opcode::Bne, 1}},
      {"BLT", {Opcode::Blt, 1}},   {"BGE", {Opcode::Bge, 1}},
  };
  return m;
}

AsmLine parse_statement(const std::string& stmt, int line_no) {
  AsmLine out;
  out.src_line = line_no;

  // directives
  if (stmt[0] == '.') {
    size_t sp = stmt.find_first_of(" \t");
    std::string dir = upper(sp == std::string::npos ? stmt : stmt.substr(0, sp));
    std::string rest = sp == std::string::npos ? "" : trim(stmt.substr(sp));
    int64_t v = parse_number(rest, line_no);
    if (dir == ".WORD") {
      if (v < 0 || v > 0xFFFFFFFFLL) fail(Errc::ImmediateOverflow, line_no, ".word value out of range");
      out.kind = AsmLine::Kind::Word;
      out.value = (uint32_t)v;
      return out;
    }
    if (dir == ".ORG") {
      if (v < 0 || v > 0xFFFF) fail(Errc::BadDirective, line_no, ".org address out of range");
      out.kind = AsmLine::Kind::Org;
      out.value = (uint32_t)v;
      return out;
    }
    fail(Errc::BadDirective, line_no, "unknown directive '" + dir + "'");
  }

  size_t sp = stmt.find_first_of(" \t");
  std::string mn = upper(sp == std::string::npos ? stmt : stmt.substr(0, sp));
  std::string rest = sp == std::string::npos ? "" : trim(stmt.substr(sp));
  auto it = mnemonics().find(mn);
  if (it == mnemonics().end()) fail(Errc::UnknownMnemonic, line_no, "'" + mn + "'");
  const auto [op, want] = it->second;

  std::vector<std::string> ops = split_operands(rest);
  if ((int)ops.size() != want)
    fail(Errc::BadOperand, line_no,
         mn + " takes " + std::to_string(want) + " operand(s), got " + std::to_string(ops.size()));

  Instruction& i = out.instr;
  i.op = op;
  switch (op) {
    case Opcode::Nop:
    case Opcode::Trap:
    case Opcode::Pushf:
    case Opcode::Popf:
      break;
    case Opcode::Halt:
      i.imm = (int32_t)parse_number(ops[0], line_no);
      break;
    case Opcode::Movi:
      i.rd = parse_reg(ops[0], line_no);
      if (is_ident(ops[1]))
        out.target = ops[1];
      else
        i.imm = (int32_t)parse_number(ops[1], line_no);
      break;
    case Opcode::Mov:
    case Opcode::Not:
      i.rd = parse_reg(ops[0], line_no);
      i.rs = parse_reg(ops[1], line_no);
      break;
    case Opcode::Ld: {
      i.rd = parse_reg(ops[0], line_no);
      int64_t off;
      parse_mem(ops[1], line_no, i.rs, off);
      i.imm = (int32_t)off;
      break;
    }
    case Opcode::St: {
      int64_t off;
      parse_mem(ops[0], line_no, i.rs, off);
      i.imm = (int32_t)off;
      i.rt = parse_reg(ops[1], line_no);
      break;
    }
    case Opcode::Push:
      i.rs = parse_reg(ops[0], line_no);
      break;
    case Opcode::Pop:
      i.rd = parse_reg(ops[0], line_no);
      break;
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Xor:
    case Opcode::And:
    case Opcode::Or:
      i.rd = parse_reg(ops[0], line_no);
      i.rs = parse_reg(ops[1], line_no);
      i.rt = parse_reg(ops[2], line_no);
      break;
    case Opcode::Cmp:
      i.rs = parse_reg(ops[0], line_no);
      i.rt = parse_reg(ops[1], line_no);
      break;
    case Opcode::Jmp:
    case Opcode::Beq:
    case Opcode::Bne:
    case Opcode::Blt:
    case Opcode::Bge:
      if (is_ident(ops[0]))
        out.target = ops[0];
      else
        i.imm = (int32_t)parse_number(ops[0], line_no);
      break;
  }
  return out;
}

// Immediate range checks, shared by assemble().
void check_imm(const AsmLine& l, int64_t v) {
  int line = l.src_line;
  switch (l.instr.op) {
    case Opcode::Halt:
    case Opcode::Ld:
    case Opcode::St:
      if (v < 0 || v > 0xFFF)
        fail(Errc::ImmediateOverflow, line, "imm12 out of range: " + std::to_string(v));
      break;
    case Opcode::Movi:
      if (v < 0 || v > 0xFFFF)
        fail(Errc::ImmediateOverflow, line, "imm16 out of range: " + std::to_string(v));
      break;
    case Opcode::Jmp:
    case Opcode::Beq:
    case Opcode::Bne:
    case Opcode::Blt:
    case Opcode::Bge:
      if (v < -0x8000 || v > 0x7FFF)
        fail(Errc::ImmediateOverflow, line, "displacement out of range: " + std::to_string(v));
      break;
    default:
      break;
  }
}

}  // namespace

AsmUnit parse_asm(const std::string& text) {
  AsmUnit unit;
  std::string pending_label;
  int pending_line = 0;

  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string raw = nl == std::string::npos ? text.substr(pos) : text.substr(pos, nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    size_t sc = raw.find(';');
    if (sc != std::string::npos) raw = raw.substr(0, sc);
    std::string s = trim(raw);
    if (s.empty()) continue;

    std::string label;
    size_t colon = s.find(':');
    if (colon != std::string::npos) {
      std::string head = trim(s.substr(0, colon));
      if (is_ident(head)) {
        label = head;
        s = trim(s.substr(colon + 1));
      }
    }
    if (!label.empty()) {
      if (!pending_label.empty())
        fail(Errc::BadDirective, line_no, "multiple labels for one address ('" + pending_label + "', '" + label + "')");
      if (s.empty()) {
        pending_label = label;
        pending_line = line_no;
        continue;
      }
    }

    AsmLine line = parse_statement(s, line_no);
    if (!pending_label.empty()) {
      line.label = pending_label;
      pending_label.clear();
    } else {
      line.label = label;
    }
    unit.lines.push_back(std::move(line));
  }
  if (!pending_label.empty())
    fail(Errc::UndefinedLabel, pending_line, "label '" + pending_label + "' is not attached to anything");
  return unit;
}

std::string render_asm(const AsmUnit& unit) {
  std::string out;
  char buf[32];
  for (const auto& l : unit.lines) {
    if (!l.label.empty()) out += l.label + ":\n";
    switch (l.kind) {
      case AsmLine::Kind::Instruction:
        out += "        " + instr_to_string(l.instr, l.target) + "\n";
        break;
      case AsmLine::Kind::Word:
        std::snprintf(buf, sizeof buf, "0x%08X", l.value);
        out += std::string("        .word ") + buf + "\n";
        break;
      case AsmLine::Kind::Org:
        std::snprintf(buf, sizeof buf, "0x%X", l.value);
        out += std::string("        .org ") + buf + "\n";
        break;
    }
  }
  return out;
}

ProgramImage assemble(const AsmUnit& unit) {
  // pass 1: lay out addresses, collect labels
  std::map<std::string, uint32_t> symbols;
  std::vector<uint32_t> addr(unit.lines.size(), 0);
  uint32_t lc = 0;
  uint32_t code_len = 0;  // length of the contiguous run from address 0
  bool contiguous = true;
  for (size_t k = 0; k < unit.lines.size(); ++k) {
    const AsmLine& l = unit.lines[k];
    if (!l.label.empty()) {
      if (l.kind == AsmLine::Kind::Org)
        fail(Errc::BadDirective, l.src_line, "a label may not be attached to .org");
      if (symbols.count(l.label))
        fail(Errc::DuplicateLabel, l.src_line, "'" + l.label + "'");
      symbols[l.label] = lc;
    }
    switch (l.kind) {
      case AsmLine::Kind::Org:
        if (l.value < lc)
          fail(Errc::BadDirective, l.src_line, ".org may not move backwards");
        if (l.value > lc) contiguous = false;
        lc = l.value;
        break;
      case AsmLine::Kind::Instruction:
        if (!contiguous)
          fail(Errc::BadDirective, l.src_line, "instructions are only allowed in the contiguous code region");
        [[fallthrough]];
      case AsmLine::Kind::Word:
        if (lc >= 0x10000) fail(Errc::BadDirective, l.src_line, "emission beyond the 65536-word address space");
        addr[k] = lc++;
        if (contiguous) code_len = lc;
        break;
    }
  }
  if (code_len > kMaxCodeWords)
    throw Error(Errc::ImageTooLarge, "code is " + std::to_string(code_len) + " words, limit " +
                                         std::to_string(kMaxCodeWords));

  // pass 2: resolve operands, encode
  ProgramImage img;
  img.code.assign(code_len, 0);
  img.symbols = symbols;
  for (size_t k = 0; k < unit.lines.size(); ++k) {
    const AsmLine& l = unit.lines[k];
    if (l.kind == AsmLine::Kind::Org) continue;
    word_t w = 0;
    if (l.kind == AsmLine::Kind::Word) {
      w = l.value;
    } else {
      Instruction i = l.instr;
      if (!l.target.empty()) {
        auto it = symbols.find(l.target);
        if (it == symbols.end())
          fail(Errc::UndefinedLabel, l.src_line, "'" + l.target + "'");
        if (is_control_rel(i.op))
          i.imm = (int32_t)it->second - (int32_t)(addr[k] + 1);
        else
          i.imm = (int32_t)it->second;  // MOVI label: absolute address
      }
      check_imm(l, i.imm);
      w = encode(i);
    }
    if (addr[k] < code_len)
      img.code[addr[k]] = w;
    else
      img.data_init[addr[k]] = w;
  }
  return img;
}

ProgramImage assemble_text(const std::string& text) { return assemble(parse_asm(text)); }

AsmUnit disassemble(const ProgramImage& img) {
  const uint32_t len = (uint32_t)img.code.size();

  // Which words print as instructions (canonical encodings only, so the
  // round trip through assemble() is bit-exact) and where labels are needed.
  std::vector<std::optional<Instruction>> decoded(len);
  std::set<uint32_t> targets;
  for (uint32_t a = 0; a < len; ++a) {
    auto i = decode(img.code[a]);
    if (i && encode(*i) == img.code[a]) {
      decoded[a] = i;
      if (is_control_rel(i->op)) {
        int64_t t = (int64_t)a + 1 + i->imm;
        if (t < 0 || t >= (int64_t)len)
          throw Error(Errc::DanglingBranch, "branch at address " + std::to_string(a) +
                                                " targets word " + std::to_string(t) +
                                                ", outside the code region");
        targets.insert((uint32_t)t);
      }
    }
  }

  AsmUnit unit;
  for (uint32_t a = 0; a < len; ++a) {
    AsmLine l;
    l.label = targets.count(a) ? "L_" + std::to_string(a) : "";
    if (decoded[a]) {
      l.kind = AsmLine::Kind::Instruction;
      l.instr = *decoded[a];
      if (is_control_rel(l.instr.op))
        l.target = "L_" + std::to_string((uint32_t)((int64_t)a + 1 + l.instr.imm));
    } else {
      l.kind = AsmLine::Kind::Word;
      l.value = img.code[a];
    }
    unit.lines.push_back(std::move(l));
  }

  uint32_t prev = len == 0 ? 0 : len - 1;
  bool first = true;
  for (const auto& [a, v] : img.data_init) {
    if (first || a != prev + 1) {
      AsmLine org;
      org.kind = AsmLine::Kind::Org;
      org.value = a;
      unit.lines.push_back(org);
    }
    AsmLine w;
    w.kind = AsmLine::Kind::Word;
    w.value = v;
    unit.lines.push_back(w);
    prev = a;
    first = false;
  }
  return unit;
}

namespace {

void put_u32(std::vector<uint8_t>& b, uint32_t v) {
  b.push_back(v & 0xFF);
  b.push_back((v >> 8) & 0xFF);
  b.push_back((v >> 16) & 0xFF);
  b.push_back((v >> 24) & 0xFF);
}

void put_u16(std::vector<uint8_t>& b, uint16_t v) {
  b.push_back(v & 0xFF);
  b.push_back((v >> 8) & 0xFF);
}

struct Reader {
  const std::vector<uint8_t>& b;
  size_t p = 0;

  uint8_t u8() {
    if (p + 1 > b.size()) throw Error(Errc::BadImageFile, "truncated image");
    return b[p++];
  }
  uint16_t u16() {
    uint16_t lo = u8(), hi = u8();
    return (uint16_t)(lo | (hi << 8));
  }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= (uint32_t)u8() << (8 * i);
    return v;
  }
};

}  // namespace

std::vector<uint8_t> image_to_bytes(const ProgramImage& img) {
  std::vector<uint8_t> b;
  b.push_back('F');
  b.push_back('I');
  b.push_back('3');
  b.push_back('2');
  b.push_back(1);  // format version
  put_u32(b, img.entry);
  put_u32(b, (uint32_t)img.code.size());
  for (word_t w : img.code) put_u32(b, w);
  put_u32(b, (uint32_t)img.data_init.size());
  for (const auto& [a, v] : img.data_init) {
    put_u32(b, a);
    put_u32(b, v);
  }
  put_u32(b, (uint32_t)img.symbols.size());
  for (const auto& [name, a] : img.symbols) {
    put_u16(b, (uint16_t)name.size());
    b.insert(b.end(), name.begin(), name.end());
    put_u32(b, a);
  }
  return b;
}

ProgramImage image_from_bytes(const std::vector<uint8_t>& bytes) {
  Reader r{bytes};
  if (bytes.size() < 5 || bytes[0] != 'F' || bytes[1] != 'I' || bytes[2] != '3' || bytes[3] != '2')
    throw Error(Errc::BadImageFile, "missing FI32 magic");
  r.p = 4;
  uint8_t ver = r.u8();
  if (ver != 1) throw Error(Errc::BadImageFile, "unsupported format version " + std::to_string(ver));
  ProgramImage img;
  img.entry = r.u32();
  uint32_t n = r.u32();
  if (n > kMaxCodeWords) throw Error(Errc::BadImageFile, "code length out of range");
  img.code.resize(n);
  for (uint32_t i = 0; i < n; ++i) img.code[i] = r.u32();
  uint32_t nd = r.u32();
  for (uint32_t i = 0; i < nd; ++i) {
    uint32_t a = r.u32();
    uint32_t v = r.u32();
    img.data_init[a] = v;
  }
  uint32_t ns = r.u32();
  for (uint32_t i = 0; i < ns; ++i) {
    uint16_t len = r.u16();
    if (r.p + len > bytes.size()) throw Error(Errc::BadImageFile, "truncated symbol table");
    std::string name((const char*)bytes.data() + r.p, len);
    r.p += len;
    img.symbols[name] = r.u32();
  }
  return img;
}

void save_image(const ProgramImage& img, const std::string& path) {
  auto bytes = image_to_bytes(img);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::BadImageFile, "cannot open '" + path + "' for writing");
  f.write((const char*)bytes.data(), (std::streamsize)bytes.size());
}

ProgramImage load_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::BadImageFile, "cannot open '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return image_from_bytes(bytes);
}

}  // namespace ff
