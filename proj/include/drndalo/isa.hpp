#ifndef DRNDALO_ISA_HPP
#define DRNDALO_ISA_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace drndalo {

using u8 = std::uint8_t;
using u32 = std::uint32_t;
using u64 = std::uint64_t;
using i32 = std::int32_t;
using i64 = std::int64_t;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ParseError : public Error {
 public:
  ParseError(int line, const std::string& msg)
      : Error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

enum class Opcode : u8 {
  Add, Sub, And, Or, Xor, Slt, Sltu,
  Slli, Srli, Srai,
  Addi, Andi, Ori, Xori, Slti, Sltiu,
  Lw, Lb, Lbu, Sw, Sb,
  Lui, Auipc,
  Jal, Jalr,
  Beq, Bne, Blt, Bge, Bltu, Bgeu,
  Ecall,
};

inline constexpr int kOpcodeCount = static_cast<int>(Opcode::Ecall) + 1;

enum class InstrKind : u8 {
  ArithReg,   // add rd, rs1, rs2
  ArithImm,   // addi rd, rs1, imm (shifts use shamt in imm)
  Load,       // lw rd, imm(rs1)
  Store,      // sw rs2, imm(rs1)
  Lui,        // lui rd, imm20
  Auipc,      // auipc rd, imm20
  Jal,        // jal rd, target
  Jalr,       // jalr rd, imm(rs1)
  Branch,     // beq rs1, rs2, target
  Ecall,
};

struct OpcodeInfo {
  const char* name;
  InstrKind kind;
  bool has_rd;
  bool has_rs1;
  bool has_rs2;
  bool has_imm;
};

const OpcodeInfo& opcode_info(Opcode op);
const char* opcode_name(Opcode op);
InstrKind opcode_kind(Opcode op);
std::optional<Opcode> opcode_from_name(const std::string& name);

bool is_cond_branch(Opcode op);

// beq<->bne, blt<->bge, bltu<->bgeu; throws on non-branch input
Opcode invert_branch(Opcode op);

// architectural outcome of a conditional branch given its operand values
bool branch_predicate(Opcode op, u32 lhs, u32 rhs);

// x0..x31 or ABI alias; returns nullopt for unknown names
std::optional<int> reg_from_name(const std::string& name);
const char* reg_name(int reg);  // ABI alias

struct Instruction {
  u32 address = 0;
  Opcode opcode = Opcode::Ecall;
  u8 rd = 0;
  u8 rs1 = 0;
  u8 rs2 = 0;
  // ArithImm/Load/Store/Jalr: 12-bit signed immediate (shift ops: shamt).
  // Lui/Auipc: 20-bit upper immediate. Branch/Jal: pc-relative offset.
  i32 imm = 0;
  // label the source referred to, kept for printing only
  std::string target_label;

  InstrKind kind() const { return opcode_kind(opcode); }
  u32 target() const { return address + static_cast<u32>(imm); }

  // semantic equality: label spelling is not compared
  friend bool operator==(const Instruction& a, const Instruction& b);
  friend bool operator!=(const Instruction& a, const Instruction& b) { return !(a == b); }
};

struct Program {
  u32 text_base = 0;
  u32 entry = 0;
  std::vector<Instruction> text;
  std::map<std::string, u32> labels;
  u32 data_base = 0;
  std::vector<u8> data;

  u32 text_end() const { return text_base + static_cast<u32>(text.size()) * 4; }
  bool in_text(u32 addr) const { return addr >= text_base && addr < text_end(); }
  const Instruction* at(u32 addr) const {
    if (!in_text(addr) || (addr - text_base) % 4 != 0) return nullptr;
    return &text[(addr - text_base) / 4];
  }
  std::vector<u32> branch_addresses() const;

  friend bool operator==(const Program& a, const Program& b);
  friend bool operator!=(const Program& a, const Program& b) { return !(a == b); }
};

// Assembles the dialect: '#' comments, 'label:' definitions, directives
// .entry <label|addr>, .data <addr>, .byte v[,v...], .word v[,v...].
// Instructions are placed at base, base+4, ... in source order.
Program parse_asm(const std::string& source, u32 base = 0);

// Prints a listing that parse_asm maps back to a structurally equal Program.
std::string print_asm(const Program& p);

}  // namespace drndalo

#endif  // DRNDALO_ISA_HPP
