#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ff/program.hpp"

namespace ff {

// A reference program with its declared accepted/rejected inputs. The
// fault-free halt codes are fixed: good_code on good_input, bad_code on
// bad_input.
struct CorpusEntry {
  std::string name;
  std::string source;  // assembly text, identical to the shipped .asm file
  std::vector<uint32_t> good_input;
  std::vector<uint32_t> bad_input;
  uint32_t good_code = 1;
  uint32_t bad_code = 0;
};

// pincheck: accepts exactly the pin [1, 2, 3, 4] read from the input region.
// bootloader: XOR-folds a 16-word payload, compares against the genuine
// payload's digest, and copies the payload to the boot area only on a match.
const std::vector<CorpusEntry>& corpus_entries();
const CorpusEntry& corpus_entry(const std::string& name);

ProgramImage corpus_image(const CorpusEntry& entry);

}  // namespace ff
