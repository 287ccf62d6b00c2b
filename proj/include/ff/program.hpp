#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ff/isa.hpp"

namespace ff {

constexpr uint32_t kMaxCodeWords = 16384;

// Loadable program: code words at addresses 0..code.size()-1, optional
// initialized data words outside the code range, and the label table.
struct ProgramImage {
  std::vector<word_t> code;
  std::map<uint32_t, word_t> data_init;
  uint32_t entry = 0;
  std::map<std::string, uint32_t> symbols;

  bool operator==(const ProgramImage&) const = default;
};

// One line of assembly: an optional label plus an instruction or directive.
// Instruction operands that name a label keep it in `target` until assembly
// resolves it (branches/JMP to a displacement, MOVI to an absolute address).
struct AsmLine {
  enum class Kind { Instruction, Word, Org };

  std::string label;
  Kind kind = Kind::Instruction;
  Instruction instr;
  std::string target;  // label operand, empty if numeric
  uint32_t value = 0;  // payload of .word / .org
  int src_line = 0;    // 1-based text line, 0 for generated lines

  static AsmLine ins(const Instruction& i, std::string target = "", std::string label = "") {
    AsmLine l;
    l.kind = Kind::Instruction;
    l.instr = i;
    l.target = std::move(target);
    l.label = std::move(label);
    return l;
  }
};

struct AsmUnit {
  std::vector<AsmLine> lines;
};

// Text <-> AsmUnit. parse_asm understands `label:` prefixes (inline or on
// their own line), `;` comments, r0-r15 with `sp` as an alias for r15, and
// the `.word` / `.org` directives.
AsmUnit parse_asm(const std::string& text);
std::string render_asm(const AsmUnit& unit);

// Two-pass assembly: assign addresses, resolve labels, encode. Throws Error
// with UnknownMnemonic / UndefinedLabel / ImmediateOverflow (and friends),
// naming the offending source line.
ProgramImage assemble(const AsmUnit& unit);

// Convenience: parse + assemble.
ProgramImage assemble_text(const std::string& text);

// Reassembleable disassembly: one line per code word in address order, with
// synthetic labels `L_<addr>` at branch targets. Words that are not canonical
// encodings round-trip as `.word` lines; initialized data round-trips as
// `.org` + `.word`. assemble(disassemble(img)) reproduces img's words
// bit-exactly. Throws DanglingBranch if a displacement exits the code region.
AsmUnit disassemble(const ProgramImage& img);

// Binary container: magic "FI32", version byte, entry, code length, code
// words (little-endian), data-init pairs, symbol table.
std::vector<uint8_t> image_to_bytes(const ProgramImage& img);
ProgramImage image_from_bytes(const std::vector<uint8_t>& bytes);
void save_image(const ProgramImage& img, const std::string& path);
ProgramImage load_image(const std::string& path);

}  // namespace ff
