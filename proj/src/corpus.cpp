#include "ff/corpus.hpp"

#include "ff/error.hpp"

namespace ff {

namespace {

// Mismatches are XOR-accumulated into r5 so that the accept/reject decision
// rests on one final compare-and-branch, mirroring a real pin check's single
// accept path.
const char* const kPincheckSrc = R"(; pincheck: accept exactly the pin [1, 2, 3, 4] from the input region
        MOVI r1, 0x8000      ; input region base
        MOVI r5, 0           ; mismatch accumulator
        MOVI r2, 1
        LD r3, [r1+0]
        XOR r4, r3, r2
        OR r5, r5, r4
        MOVI r2, 2
        LD r3, [r1+1]
        XOR r4, r3, r2
        OR r5, r5, r4
        MOVI r2, 3
        LD r3, [r1+2]
        XOR r4, r3, r2
        OR r5, r5, r4
        MOVI r2, 4
        LD r3, [r1+3]
        XOR r4, r3, r2
        OR r5, r5, r4
        MOVI r2, 0
        CMP r5, r2
        BNE fail
        HALT 1               ; accept
fail:   HALT 0               ; reject
)";

// The genuine payload is [0xA1..0xB0]; its XOR-fold digest is 16. The copy
// and the integrity refold are deliberately unrolled and branch-free so the
// only conditional control flow is the fold loop and the two digest checks.
// The refold compares the installed image against the candidate's own fold
// (not the expected constant), so it is a copy-integrity check rather than a
// second authentication.
const char* const kBootloaderSrc = R"(; bootloader: fold the 16-word payload, verify its digest, install, re-check
        MOVI r1, 0x8000      ; payload cursor
        MOVI r2, 0           ; word counter
        MOVI r3, 0           ; running digest
        MOVI r4, 16          ; payload length
fold:   LD r5, [r1+0]
        XOR r3, r3, r5
        MOVI r6, 1
        ADD r1, r1, r6
        ADD r2, r2, r6
        CMP r2, r4
        BNE fold
        MOVI r6, 16          ; expected digest of the genuine payload
        CMP r3, r6
        BNE reject
        MOVI r1, 0x8000      ; verified: copy the payload to the boot area
        MOVI r2, 0x4000
        LD r5, [r1+0]
        ST [r2+0], r5
        LD r5, [r1+1]
        ST [r2+1], r5
        LD r5, [r1+2]
        ST [r2+2], r5
        LD r5, [r1+3]
        ST [r2+3], r5
        LD r5, [r1+4]
        ST [r2+4], r5
        LD r5, [r1+5]
        ST [r2+5], r5
        LD r5, [r1+6]
        ST [r2+6], r5
        LD r5, [r1+7]
        ST [r2+7], r5
        LD r5, [r1+8]
        ST [r2+8], r5
        LD r5, [r1+9]
        ST [r2+9], r5
        LD r5, [r1+10]
        ST [r2+10], r5
        LD r5, [r1+11]
        ST [r2+11], r5
        LD r5, [r1+12]
        ST [r2+12], r5
        LD r5, [r1+13]
        ST [r2+13], r5
        LD r5, [r1+14]
        ST [r2+14], r5
        LD r5, [r1+15]
        ST [r2+15], r5
        MOVI r4, 0           ; integrity pass: refold the installed image
        LD r5, [r2+0]
        XOR r4, r4, r5
        LD r5, [r2+1]
        XOR r4, r4, r5
        LD r5, [r2+2]
        XOR r4, r4, r5
        LD r5, [r2+3]
        XOR r4, r4, r5
        LD r5, [r2+4]
        XOR r4, r4, r5
        LD r5, [r2+5]
        XOR r4, r4, r5
        LD r5, [r2+6]
        XOR r4, r4, r5
        LD r5, [r2+7]
        XOR r4, r4, r5
        LD r5, [r2+8]
        XOR r4, r4, r5
        LD r5, [r2+9]
        XOR r4, r4, r5
        LD r5, [r2+10]
        XOR r4, r4, r5
        LD r5, [r2+11]
        XOR r4, r4, r5
        LD r5, [r2+12]
        XOR r4, r4, r5
        LD r5, [r2+13]
        XOR r4, r4, r5
        LD r5, [r2+14]
        XOR r4, r4, r5
        LD r5, [r2+15]
        XOR r4, r4, r5
        CMP r4, r3           ; installed image must fold to the verified digest
        BNE reject
        HALT 1               ; boot
reject: HALT 0
)";

std::vector<CorpusEntry> make_entries() {
  std::vector<CorpusEntry> v;

  CorpusEntry pin;
  pin.name = "pincheck";
  pin.source = kPincheckSrc;
  pin.good_input = {1, 2, 3, 4};
  pin.bad_input = {9, 9, 9, 9};
  v.push_back(std::move(pin));

  CorpusEntry boot;
  boot.name = "bootloader";
  boot.source = kBootloaderSrc;
  for (uint32_t w = 0xA1; w <= 0xB0; ++w) boot.good_input.push_back(w);
  boot.bad_input = boot.good_input;
  boot.bad_input[7] = 0x99;  // tampered word; fold becomes 0x21, not 16
  v.push_back(std::move(boot));

  return v;
}

}  // namespace

const std::vector<CorpusEntry>& corpus_entries() {
  static const std::vector<CorpusEntry> entries = make_entries();
  return entries;
}

const CorpusEntry& corpus_entry(const std::string& name) {
  for (const CorpusEntry& e : corpus_entries()) {
    if (e.name == name) return e;
  }
  throw Error(Errc::BadOperand, "unknown corpus entry '" + name + "'");
}

ProgramImage corpus_image(const CorpusEntry& entry) { return assemble_text(entry.source); }

}  // namespace ff
