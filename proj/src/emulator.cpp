#include "ff/emulator.hpp"

#include "ff/error.hpp"

namespace ff {

const char* crash_reason_name(CrashReason r) {
  switch (r) {
    case CrashReason::InvalidOpcode: return "InvalidOpcode";
    case CrashReason::MemOutOfRange: return "MemOutOfRange";
    case CrashReason::StackOutOfRange: return "StackOutOfRange";
    case CrashReason::PcOutOfRange: return "PcOutOfRange";
    case CrashReason::StepLimit: return "StepLimit";
  }
  return "?";
}

const char* fault_model_name(FaultModel m) {
  return m == FaultModel::InstructionSkip ? "skip" : "bitflip";
}

MachineState initial_state(const ProgramImage& img, std::span<const uint32_t> input) {
  if (input.size() > kInputCapacity)
    throw Error(Errc::InputTooLong,
                std::to_string(input.size()) + " input words, capacity " + std::to_string(kInputCapacity));
  MachineState st;
  st.mem.assign(kMemWords, 0);
  for (size_t i = 0; i < img.code.size(); ++i) st.mem[i] = img.code[i];
  for (const auto& [a, v] : img.data_init)
    if (a < kMemWords) st.mem[a] = v;
  for (size_t i = 0; i < input.size(); ++i) st.mem[kInputBase + i] = input[i];
  st.regs[kSp] = kStackTop;
  st.pc = img.entry;
  return st;
}

namespace {

struct Engine {
  MachineState st;
  uint32_t code_len;
  const Limits& limits;
  bool record;

  RunResult res;

  Engine(MachineState s, uint32_t len, const Limits& lim, bool rec)
      : st(std::move(s)), code_len(len), limits(lim), record(rec) {}

  RunResult crash(CrashReason r, uint64_t steps) {
    res.kind = RunResult::Kind::Crashed;
    res.reason = r;
    res.steps = steps;
    return std::move(res);
  }

  RunResult halt(uint32_t code, uint64_t steps) {
    res.kind = RunResult::Kind::Halted;
    res.halt_code = code;
    res.steps = steps;
    return std::move(res);
  }

  bool push(uint32_t v) {
    uint32_t nsp = st.regs[kSp] - 1;
    if (nsp < kStackLow || nsp >= kStackTop) return false;
    st.regs[kSp] = nsp;
    st.mem[nsp] = v;
    return true;
  }

  bool pop(uint32_t& out) {
    uint32_t sp = st.regs[kSp];
    if (sp < kStackLow || sp >= kStackTop) return false;
    out = st.mem[sp];
    st.regs[kSp] = sp + 1;
    return true;
  }

  RunResult exec(std::span<const FaultSpec> faults) {
    std::vector<bool> applied(faults.size(), false);
    uint64_t steps = 0;
    while (true) {
      // Faults strike just before the fetch of the instruction whose dynamic
      // ordinal matches their trace offset.
      for (size_t f = 0; f < faults.size(); ++f) {
        if (applied[f] || faults[f].trace_offset != steps) continue;
        applied[f] = true;
        if (faults[f].model == FaultModel::InstructionSkip) {
          st.pc += 1;  // suppressed instruction: not executed, not counted
        } else {
          if (st.pc < kMemWords) st.mem[st.pc] ^= (word_t)1 << faults[f].bit;
        }
      }

      if (steps >= limits.max_steps) {
        check_unapplied(applied, faults);
        return crash(CrashReason::StepLimit, steps);
      }
      if (st.pc >= code_len) {
        check_unapplied(applied, faults);
        return crash(CrashReason::PcOutOfRange, steps);
      }

      const word_t w = st.mem[st.pc];
      const auto di = decode(w);
      if (!di) {
        check_unapplied(applied, faults);
        return crash(CrashReason::InvalidOpcode, steps);
      }
      const Instruction& i = *di;
      if (record) res.trace.push_back({(uint32_t)steps, st.pc, w});

      uint32_t next_pc = st.pc + 1;
      bool ok = true;
      CrashReason why = CrashReason::InvalidOpcode;
      switch (i.op) {
        case Opcode::Nop:
          break;
        case Opcode::Halt:
          ++steps;
          check_unapplied(applied, faults);
          return halt((uint32_t)i.imm, steps);
        case Opcode::Trap:
          ++steps;
          check_unapplied(applied, faults);
          return halt(kTrapHaltCode, steps);
        case Opcode::Movi:
          st.regs[i.rd] = (uint32_t)i.imm;
          break;
        case Opcode::Mov:
          st.regs[i.rd] = st.regs[i.rs];
          break;
        case Opcode::Ld: {
          uint64_t a = (uint64_t)st.regs[i.rs] + (uint32_t)i.imm;
          if (a >= kMemWords) {
            ok = false;
            why = CrashReason::MemOutOfRange;
          } else {
            st.regs[i.rd] = st.mem[a];
          }
          break;
        }
        case Opcode::St: {
          uint64_t a = (uint64_t)st.regs[i.rs] + (uint32_t)i.imm;
          if (a >= kMemWords) {
            ok = false;
            why = CrashReason::MemOutOfRange;
          } else {
            st.mem[a] = st.regs[i.rt];
          }
          break;
        }
        case Opcode::Push:
          if (!push(st.regs[i.rs])) {
            ok = false;
            why = CrashReason::StackOutOfRange;
          }
          break;
        case Opcode::Pop: {
          uint32_t v;
          if (!pop(v)) {
            ok = false;
            why = CrashReason::StackOutOfRange;
          } else {
            st.regs[i.rd] = v;
          }
          break;
        }
        case Opcode::Pushf:
          if (!push((st.flag_z ? 1u : 0u) | (st.flag_n ? 2u : 0u))) {
            ok = false;
            why = CrashReason::StackOutOfRange;
          }
          break;
        case Opcode::Popf: {
          uint32_t v;
          if (!pop(v)) {
            ok = false;
            why = CrashReason::StackOutOfRange;
          } else {
            st.flag_z = v & 1;
            st.flag_n = v & 2;
          }
          break;
        }
        case Opcode::Add:
          st.regs[i.rd] = st.regs[i.rs] + st.regs[i.rt];
          break;
        case Opcode::Sub:
          st.regs[i.rd] = st.regs[i.rs] - st.regs[i.rt];
          break;
        case Opcode::Xor:
          st.regs[i.rd] = st.regs[i.rs] ^ st.regs[i.rt];
          break;
        case Opcode::And:
          st.regs[i.rd] = st.regs[i.rs] & st.regs[i.rt];
          break;
        case Opcode::Or:
          st.regs[i.rd] = st.regs[i.rs] | st.regs[i.rt];
          break;
        case Opcode::Not:
          st.regs[i.rd] = ~st.regs[i.rs];
          break;
        case Opcode::Cmp:
          st.flag_z = st.regs[i.rs] == st.regs[i.rt];
          st.flag_n = (int32_t)st.regs[i.rs] < (int32_t)st.regs[i.rt];
          break;
        case Opcode::Jmp:
          next_pc = (uint32_t)((int64_t)st.pc + 1 + i.imm);
          break;
        case Opcode::Beq:
          if (st.flag_z) next_pc = (uint32_t)((int64_t)st.pc + 1 + i.imm);
          break;
        case Opcode::Bne:
          if (!st.flag_z) next_pc = (uint32_t)((int64_t)st.pc + 1 + i.imm);
          break;
        case Opcode::Blt:
          if (st.flag_n) next_pc = (uint32_t)((int64_t)st.pc + 1 + i.imm);
          break;
        case Opcode::Bge:
          if (!st.flag_n) next_pc = (uint32_t)((int64_t)st.pc + 1 + i.imm);
          break;
      }
      ++steps;
      if (!ok) {
        check_unapplied(applied, faults);
        return crash(why, steps);
      }
      st.pc = next_pc;
    }
  }

  // A fault whose offset was never reached means the fault-free trace is too
  // short for the requested spec; surface that instead of a silent no-op.
  static void check_unapplied(const std::vector<bool>& applied, std::span<const FaultSpec> faults) {
    for (size_t f = 0; f < faults.size(); ++f)
      if (!applied[f])
        throw Error(Errc::OffsetUnreached,
                    "trace offset " + std::to_string(faults[f].trace_offset) +
                        " was never reached");
  }
};

}  // namespace

RunResult run(const ProgramImage& img, std::span<const uint32_t> input, const Limits& limits) {
  Engine e(initial_state(img, input), (uint32_t)img.code.size(), limits, /*rec=*/true);
  return e.exec({});
}

std::vector<TraceEntry> trace(const ProgramImage& img, std::span<const uint32_t> input,
                              const Limits& limits) {
  return run(img, input, limits).trace;
}

RunResult run_with_fault(const ProgramImage& img, std::span<const uint32_t> input,
                         const FaultSpec& fault, const Limits& limits) {
  Engine e(initial_state(img, input), (uint32_t)img.code.size(), limits, /*rec=*/false);
  return e.exec({&fault, 1});
}

RunResult run_with_faults(const ProgramImage& img, std::span<const uint32_t> input,
                          std::span<const FaultSpec> faults, const Limits& limits) {
  Engine e(initial_state(img, input), (uint32_t)img.code.size(), limits, /*rec=*/false);
  return e.exec(faults);
}

}  // namespace ff
