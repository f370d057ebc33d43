#include "drndalo/obfuscate.hpp"

#include <algorithm>
#include <sstream>

namespace drndalo {

ObfResult obfuscate(const Program& p, const HashScheme& scheme, const ObfKey& key) {
  ObfResult r{p, {}};
  for (Instruction& ins : r.program.text) {
    if (!is_cond_branch(ins.opcode)) continue;
    int bit = decide(scheme, key, ins.address);
    if (bit) ins.opcode = invert_branch(ins.opcode);
    r.mask.entries[ins.address] = static_cast<u8>(bit);
  }
  return r;
}

Program deobfuscate(const Program& p, const HashScheme& scheme, const ObfKey& key) {
  return obfuscate(p, scheme, key).program;
}

Program apply_mask(const Program& p, const InversionMask& mask) {
  Program out = p;
  for (Instruction& ins : out.text) {
    if (!is_cond_branch(ins.opcode)) continue;
    if (mask.bit(ins.address)) ins.opcode = invert_branch(ins.opcode);
  }
  return out;
}

namespace {

int rewrite_length(Opcode op) {
  switch (op) {
    case Opcode::Blt:
    case Opcode::Bltu:
      return 5;  // lui, lbu, slt/sltu, xor, bne
    case Opcode::Bge:
    case Opcode::Bgeu:
    case Opcode::Beq:
    case Opcode::Bne:
      return 6;  // two-instruction predicate
    default:
      throw std::logic_error("rewrite_length: not a conditional branch");
  }
}

constexpr u8 kScratchBit = 30;   // t5
constexpr u8 kScratchPred = 31;  // t6

Instruction make(Opcode op, u32 addr, u8 rd, u8 rs1, u8 rs2, i32 imm) {
  Instruction ins;
  ins.opcode = op;
  ins.address = addr;
  ins.rd = rd;
  ins.rs1 = rs1;
  ins.rs2 = rs2;
  ins.imm = imm;
  return ins;
}

}  // namespace

// Note: the rewrite changes code layout, so programs that derive text
// addresses arithmetically (auipc-relative tricks) are outside its contract.
RuntimeDeobfResult emit_runtime_deobf(const Program& p, const InversionMask& mask) {
  if (!mask.covers(p)) throw Error("mask does not cover the program's branches");
  for (const Instruction& ins : p.text) {
    const OpcodeInfo& info = opcode_info(ins.opcode);
    bool uses = (info.has_rd && (ins.rd == kScratchBit || ins.rd == kScratchPred)) ||
                (info.has_rs1 && (ins.rs1 == kScratchBit || ins.rs1 == kScratchPred)) ||
                (info.has_rs2 && (ins.rs2 == kScratchBit || ins.rs2 == kScratchPred));
    if (uses) {
      std::ostringstream os;
      os << "program uses reserved scratch register t5/t6 at 0x" << std::hex << ins.address;
      throw Error(os.str());
    }
  }

  RuntimeDeobfResult r;
  std::vector<u32> branches = p.branch_addresses();
  std::map<u32, size_t> branch_index;
  for (size_t i = 0; i < branches.size(); ++i) branch_index[branches[i]] = i;

  // new address of every original instruction (a rewritten branch maps to
  // the first instruction of its replacement sequence)
  std::map<u32, u32> addr_map;
  u32 cursor = p.text_base;
  for (const Instruction& ins : p.text) {
    addr_map[ins.address] = cursor;
    cursor += 4 * (is_cond_branch(ins.opcode) ? static_cast<u32>(rewrite_length(ins.opcode)) : 1);
  }
  u32 new_text_end = cursor;
  addr_map[p.text_end()] = new_text_end;

  u32 table_base;
  if (p.data.empty()) {
    table_base = std::max<u32>(0x1000, (new_text_end + 3) & ~3u);
    r.program.data_base = table_base;
  } else {
    if (p.data_base < new_text_end)
      throw Error("rewritten text would overlap the data segment");
    r.program.data_base = p.data_base;
    r.program.data = p.data;
    u32 end = p.data_base + static_cast<u32>(p.data.size());
    table_base = (end + 3) & ~3u;
    r.program.data.resize(table_base - p.data_base, 0);
  }
  r.mask_table_base = table_base;
  for (u32 b : branches) r.program.data.push_back(static_cast<u8>(mask.bit(b)));

  r.program.text_base = p.text_base;
  r.program.entry = addr_map.at(p.entry);
  for (const auto& [name, addr] : p.labels) {
    auto it = addr_map.find(addr);
    r.program.labels[name] = it != addr_map.end() ? it->second : addr;
  }

  for (const Instruction& ins : p.text) {
    u32 at = addr_map.at(ins.address);
    if (!is_cond_branch(ins.opcode)) {
      Instruction copy = ins;
      copy.address = at;
      if (ins.kind() == InstrKind::Jal || ins.kind() == InstrKind::Branch)
        copy.imm = static_cast<i32>(addr_map.at(ins.target()) - at);
      r.program.text.push_back(copy);
      continue;
    }

    u32 byte_addr = table_base + static_cast<u32>(branch_index.at(ins.address));
    i32 hi20 = static_cast<i32>((byte_addr + 0x800u) >> 12);
    i32 lo12 = static_cast<i32>(byte_addr) - (hi20 << 12);
    u32 a = at;
    r.program.text.push_back(make(Opcode::Lui, a, kScratchPred, 0, 0, hi20));
    a += 4;
    r.program.text.push_back(make(Opcode::Lbu, a, kScratchBit, kScratchPred, 0, lo12));
    a += 4;
    switch (ins.opcode) {
      case Opcode::Blt:
        r.program.text.push_back(make(Opcode::Slt, a, kScratchPred, ins.rs1, ins.rs2, 0));
        a += 4;
        break;
      case Opcode::Bltu:
        r.program.text.push_back(make(Opcode::Sltu, a, kScratchPred, ins.rs1, ins.rs2, 0));
        a += 4;
        break;
      case Opcode::Bge:
        r.program.text.push_back(make(Opcode::Slt, a, kScratchPred, ins.rs1, ins.rs2, 0));
        a += 4;
        r.program.text.push_back(make(Opcode::Xori, a, kScratchPred, kScratchPred, 0, 1));
        a += 4;
        break;
      case Opcode::Bgeu:
        r.program.text.push_back(make(Opcode::Sltu, a, kScratchPred, ins.rs1, ins.rs2, 0));
        a += 4;
        r.program.text.push_back(make(Opcode::Xori, a, kScratchPred, kScratchPred, 0, 1));
        a += 4;
        break;
      case Opcode::Beq:
        r.program.text.push_back(make(Opcode::Xor, a, kScratchPred, ins.rs1, ins.rs2, 0));
        a += 4;
        r.program.text.push_back(make(Opcode::Sltiu, a, kScratchPred, kScratchPred, 0, 1));
        a += 4;
        break;
      case Opcode::Bne:
        r.program.text.push_back(make(Opcode::Xor, a, kScratchPred, ins.rs1, ins.rs2, 0));
        a += 4;
        r.program.text.push_back(make(Opcode::Sltu, a, kScratchPred, 0, kScratchPred, 0));
        a += 4;
        break;
      default:
        break;
    }
    r.program.text.push_back(
        make(Opcode::Xor, a, kScratchPred, kScratchPred, kScratchBit, 0));
    a += 4;
    u32 target_new = addr_map.at(ins.target());
    Instruction br = make(Opcode::Bne, a, 0, kScratchPred, 0, static_cast<i32>(target_new - a));
    br.target_label = ins.target_label;
    r.program.text.push_back(br);

    r.expansion[ins.opcode] = rewrite_length(ins.opcode);
    r.added_instructions += static_cast<size_t>(rewrite_length(ins.opcode)) - 1;
  }
  return r;
}

}  // namespace drndalo
