#include "drndalo/machine.hpp"

#include <sstream>

namespace drndalo {

namespace {

std::string hexaddr(u32 v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

}  // namespace

MachineState MachineState::boot(const Program& p) {
  MachineState st;
  st.pc = p.entry;
  st.mem_base = p.data_base;
  st.mem = p.data;
  return st;
}

u32 MachineState::load(u32 addr, u32 bytes) const {
  u32 v = 0;
  for (u32 b = 0; b < bytes; ++b)
    v |= static_cast<u32>(mem[addr - mem_base + b]) << (8 * b);
  return v;
}

void MachineState::store(u32 addr, u32 bytes, u32 value) {
  for (u32 b = 0; b < bytes; ++b)
    mem[addr - mem_base + b] = static_cast<u8>((value >> (8 * b)) & 0xff);
}

StepStatus step(MachineState& st, const Program& p, StepInfo* info,
                BranchBitProvider* provider) {
  if (st.halted) return StepStatus::Halted;
  if (st.trap) return StepStatus::Trapped;

  auto trap = [&](const std::string& msg) {
    st.trap = Trap{st.pc, msg + " at pc " + hexaddr(st.pc)};
    return StepStatus::Trapped;
  };

  const Instruction* ip = p.at(st.pc);
  if (!ip) return trap("fetch outside text segment");
  const Instruction& ins = *ip;

  StepInfo local;
  StepInfo& fi = info ? *info : local;
  fi = StepInfo{};
  fi.pc = st.pc;
  fi.opcode = ins.opcode;

  u32 next = st.pc + 4;
  bool write_rd = false;
  u32 rd_val = 0;
  u32 a = st.regs[ins.rs1];
  u32 b = st.regs[ins.rs2];
  u32 imm = static_cast<u32>(ins.imm);

  switch (ins.opcode) {
    case Opcode::Add: write_rd = true; rd_val = a + b; break;
    case Opcode::Sub: write_rd = true; rd_val = a - b; break;
    case Opcode::And: write_rd = true; rd_val = a & b; break;
    case Opcode::Or: write_rd = true; rd_val = a | b; break;
    case Opcode::Xor: write_rd = true; rd_val = a ^ b; break;
    case Opcode::Slt:
      write_rd = true;
      rd_val = static_cast<i32>(a) < static_cast<i32>(b) ? 1 : 0;
      break;
    case Opcode::Sltu: write_rd = true; rd_val = a < b ? 1 : 0; break;
    case Opcode::Slli: write_rd = true; rd_val = a << (imm & 31); break;
    case Opcode::Srli: write_rd = true; rd_val = a >> (imm & 31); break;
    case Opcode::Srai:
      write_rd = true;
      rd_val = static_cast<u32>(static_cast<i32>(a) >> (imm & 31));
      break;
    case Opcode::Addi: write_rd = true; rd_val = a + imm; break;
    case Opcode::Andi: write_rd = true; rd_val = a & imm; break;
    case Opcode::Ori: write_rd = true; rd_val = a | imm; break;
    case Opcode::Xori: write_rd = true; rd_val = a ^ imm; break;
    case Opcode::Slti:
      write_rd = true;
      rd_val = static_cast<i32>(a) < ins.imm ? 1 : 0;
      break;
    case Opcode::Sltiu: write_rd = true; rd_val = a < imm ? 1 : 0; break;
    case Opcode::Lw:
    case Opcode::Lb:
    case Opcode::Lbu: {
      u32 addr = a + imm;
      u32 bytes = ins.opcode == Opcode::Lw ? 4 : 1;
      if (!st.mem_ok(addr, bytes)) return trap("load outside mapped data");
      if (bytes == 4 && addr % 4 != 0) return trap("misaligned word load");
      u32 v = st.load(addr, bytes);
      if (ins.opcode == Opcode::Lb) v = static_cast<u32>(static_cast<i32>(v << 24) >> 24);
      write_rd = true;
      rd_val = v;
      break;
    }
    case Opcode::Sw:
    case Opcode::Sb: {
      u32 addr = a + imm;
      u32 bytes = ins.opcode == Opcode::Sw ? 4 : 1;
      if (!st.mem_ok(addr, bytes)) return trap("store outside mapped data");
      if (bytes == 4 && addr % 4 != 0) return trap("misaligned word store");
      st.store(addr, bytes, b);
      break;
    }
    case Opcode::Lui: write_rd = true; rd_val = imm << 12; break;
    case Opcode::Auipc: write_rd = true; rd_val = st.pc + (imm << 12); break;
    case Opcode::Jal:
      write_rd = true;
      rd_val = st.pc + 4;
      next = ins.target();
      break;
    case Opcode::Jalr:
      write_rd = true;
      rd_val = st.pc + 4;
      next = (a + imm) & ~1u;
      break;
    case Opcode::Beq:
    case Opcode::Bne:
    case Opcode::Blt:
    case Opcode::Bge:
    case Opcode::Bltu:
    case Opcode::Bgeu: {
      bool pred = branch_predicate(ins.opcode, a, b);
      int flip = provider ? (provider->bit(st.pc) & 1) : 0;
      bool taken = pred != (flip != 0);
      fi.cond_branch = true;
      fi.branch_taken = taken;
      if (taken) next = ins.target();
      break;
    }
    case Opcode::Ecall: {
      u32 a7 = st.regs[17];
      if (a7 == kEcallExit) {
        st.halted = true;
        st.exit_code = st.regs[10];
        return StepStatus::Halted;
      }
      if (a7 == kEcallPutchar) {
        st.output.push_back(static_cast<u8>(st.regs[10] & 0xff));
        break;
      }
      return trap("unsupported ecall (a7=" + std::to_string(a7) + ")");
    }
  }

  if (write_rd && ins.rd != 0) {
    st.regs[ins.rd] = rd_val;
    fi.wrote_reg = true;
    fi.rd = ins.rd;
    fi.rd_value = rd_val;
  }
  st.pc = next;
  return StepStatus::Ok;
}

}  // namespace drndalo
