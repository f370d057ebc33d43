#include "drndalo/isa.hpp"

#include <array>
#include <cctype>
#include <cstdlib>
#include <sstream>

namespace drndalo {

namespace {

constexpr std::array<OpcodeInfo, kOpcodeCount> kOpcodes = {{
    {"add", InstrKind::ArithReg, true, true, true, false},
    {"sub", InstrKind::ArithReg, true, true, true, false},
    {"and", InstrKind::ArithReg, true, true, true, false},
    {"or", InstrKind::ArithReg, true, true, true, false},
    {"xor", InstrKind::ArithReg, true, true, true, false},
    {"slt", InstrKind::ArithReg, true, true, true, false},
    {"sltu", InstrKind::ArithReg, true, true, true, false},
    {"slli", InstrKind::ArithImm, true, true, false, true},
    {"srli", InstrKind::ArithImm, true, true, false, true},
    {"srai", InstrKind::ArithImm, true, true, false, true},
    {"addi", InstrKind::ArithImm, true, true, false, true},
    {"andi", InstrKind::ArithImm, true, true, false, true},
    {"ori", InstrKind::ArithImm, true, true, false, true},
    {"xori", InstrKind::ArithImm, true, true, false, true},
    {"slti", InstrKind::ArithImm, true, true, false, true},
    {"sltiu", InstrKind::ArithImm, true, true, false, true},
    {"lw", InstrKind::Load, true, true, false, true},
    {"lb", InstrKind::Load, true, true, false, true},
    {"lbu", InstrKind::Load, true, true, false, true},
    {"sw", InstrKind::Store, false, true, true, true},
    {"sb", InstrKind::Store, false, true, true, true},
    {"lui", InstrKind::Lui, true, false, false, true},
    {"auipc", InstrKind::Auipc, true, false, false, true},
    {"jal", InstrKind::Jal, true, false, false, true},
    {"jalr", InstrKind::Jalr, true, true, false, true},
    {"beq", InstrKind::Branch, false, true, true, true},
    {"bne", InstrKind::Branch, false, true, true, true},
    {"blt", InstrKind::Branch, false, true, true, true},
    {"bge", InstrKind::Branch, false, true, true, true},
    {"bltu", InstrKind::Branch, false, true, true, true},
    {"bgeu", InstrKind::Branch, false, true, true, true},
    {"ecall", InstrKind::Ecall, false, false, false, false},
}};

const char* kRegNames[32] = {
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2",
    "s0", "s1", "a0", "a1", "a2", "a3", "a4", "a5",
    "a6", "a7", "s2", "s3", "s4", "s5", "s6", "s7",
    "s8", "s9", "s10", "s11", "t3", "t4", "t5", "t6"};

}  // namespace

const OpcodeInfo& opcode_info(Opcode op) { return kOpcodes[static_cast<size_t>(op)]; }
const char* opcode_name(Opcode op) { return opcode_info(op).name; }
InstrKind opcode_kind(Opcode op) { return opcode_info(op).kind; }

std::optional<Opcode> opcode_from_name(const std::string& name) {
  for (int i = 0; i < kOpcodeCount; ++i)
    if (name == kOpcodes[i].name) return static_cast<Opcode>(i);
  return std::nullopt;
}

bool is_cond_branch(Opcode op) { return opcode_kind(op) == InstrKind::Branch; }

Opcode invert_branch(Opcode op) {
  switch (op) {
    case Opcode::Beq: return Opcode::Bne;
    case Opcode::Bne: return Opcode::Beq;
    case Opcode::Blt: return Opcode::Bge;
    case Opcode::Bge: return Opcode::Blt;
    case Opcode::Bltu: return Opcode::Bgeu;
    case Opcode::Bgeu: return Opcode::Bltu;
    default:
      throw std::logic_error(std::string("invert_branch: not a conditional branch: ") +
                             opcode_name(op));
  }
}

bool branch_predicate(Opcode op, u32 lhs, u32 rhs) {
  switch (op) {
    case Opcode::Beq: return lhs == rhs;
    case Opcode::Bne: return lhs != rhs;
    case Opcode::Blt: return static_cast<i32>(lhs) < static_cast<i32>(rhs);
    case Opcode::Bge: return static_cast<i32>(lhs) >= static_cast<i32>(rhs);
    case Opcode::Bltu: return lhs < rhs;
    case Opcode::Bgeu: return lhs >= rhs;
    default:
      throw std::logic_error(std::string("branch_predicate: not a conditional branch: ") +
                             opcode_name(op));
  }
}

std::optional<int> reg_from_name(const std::string& name) {
  if (name.size() >= 2 && name[0] == 'x') {
    bool digits = true;
    for (size_t i = 1; i < name.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(name[i]))) digits = false;
    if (digits) {
      int v = std::atoi(name.c_str() + 1);
      if (v >= 0 && v < 32 && !(name.size() > 2 && name[1] == '0')) return v;
    }
  }
  for (int i = 0; i < 32; ++i)
    if (name == kRegNames[i]) return i;
  if (name == "fp") return 8;
  return std::nullopt;
}

const char* reg_name(int reg) { return kRegNames[reg & 31]; }

bool operator==(const Instruction& a, const Instruction& b) {
  if (a.address != b.address || a.opcode != b.opcode) return false;
  const OpcodeInfo& info = opcode_info(a.opcode);
  if (info.has_rd && a.rd != b.rd) return false;
  if (info.has_rs1 && a.rs1 != b.rs1) return false;
  if (info.has_rs2 && a.rs2 != b.rs2) return false;
  if (info.has_imm && a.imm != b.imm) return false;
  return true;
}

bool operator==(const Program& a, const Program& b) {
  return a.text_base == b.text_base && a.entry == b.entry && a.text == b.text &&
         a.labels == b.labels && a.data_base == b.data_base && a.data == b.data;
}

std::vector<u32> Program::branch_addresses() const {
  std::vector<u32> out;
  for (const Instruction& ins : text)
    if (is_cond_branch(ins.opcode)) out.push_back(ins.address);
  return out;
}

namespace {

struct Token {
  std::string s;
};

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> toks;
  std::string cur;
  for (char c : line) {
    if (c == '#') break;
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      if (!cur.empty()) toks.push_back(cur), cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) toks.push_back(cur);
  return toks;
}

bool parse_number(const std::string& tok, i64* out) {
  if (tok.empty()) return false;
  size_t pos = 0;
  bool neg = false;
  if (tok[0] == '-' || tok[0] == '+') {
    neg = tok[0] == '-';
    pos = 1;
  }
  if (pos >= tok.size()) return false;
  int base = 10;
  if (tok.size() - pos > 2 && tok[pos] == '0' && (tok[pos + 1] == 'x' || tok[pos + 1] == 'X')) {
    base = 16;
    pos += 2;
  }
  i64 v = 0;
  for (; pos < tok.size(); ++pos) {
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(tok[pos])));
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (base == 16 && c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else return false;
    if (d >= base) return false;
    v = v * base + d;
    if (v > (i64(1) << 40)) return false;  // clearly out of range for this ISA
  }
  *out = neg ? -v : v;
  return true;
}

bool valid_label_name(const std::string& s) {
  if (s.empty()) return false;
  char c0 = s[0];
  if (!(std::isalpha(static_cast<unsigned char>(c0)) || c0 == '_' || c0 == '.')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
  static const char* dirs[] = {".entry", ".data", ".byte", ".word"};
  for (const char* d : dirs)
    if (s == d) return false;
  return true;
}

// branch/jal target before label resolution
struct PendingTarget {
  int instr_index;
  std::string label;  // empty -> numeric
  i64 value = 0;
  int line;
};

int expect_reg(const std::vector<std::string>& toks, size_t i, int line) {
  if (i >= toks.size()) throw ParseError(line, "missing register operand");
  auto r = reg_from_name(toks[i]);
  if (!r) throw ParseError(line, "unknown register '" + toks[i] + "'");
  return *r;
}

i64 expect_num(const std::vector<std::string>& toks, size_t i, int line) {
  if (i >= toks.size()) throw ParseError(line, "missing immediate operand");
  i64 v;
  if (!parse_number(toks[i], &v)) throw ParseError(line, "bad immediate '" + toks[i] + "'");
  return v;
}

void check_range(i64 v, i64 lo, i64 hi, const char* what, int line) {
  if (v < lo || v > hi)
    throw ParseError(line, std::string(what) + " out of range: " + std::to_string(v));
}

// splits "imm(reg)" into the immediate text and register index
void parse_mem_operand(const std::string& tok, int line, i64* imm, int* reg) {
  size_t open = tok.find('(');
  size_t close = tok.find(')');
  if (open == std::string::npos || close == std::string::npos || close < open ||
      close != tok.size() - 1)
    throw ParseError(line, "expected imm(reg) operand, got '" + tok + "'");
  std::string imm_s = tok.substr(0, open);
  if (imm_s.empty()) imm_s = "0";
  if (!parse_number(imm_s, imm)) throw ParseError(line, "bad offset '" + imm_s + "'");
  auto r = reg_from_name(tok.substr(open + 1, close - open - 1));
  if (!r) throw ParseError(line, "unknown register in '" + tok + "'");
  *reg = *r;
}

}  // namespace

Program parse_asm(const std::string& source, u32 base) {
  if (base % 4 != 0) throw Error("text base must be 4-byte aligned");
  Program p;
  p.text_base = base;
  p.entry = base;
  bool entry_set = false;
  std::string entry_ref;     // label or numeric, resolved at the end
  int entry_line = 0;
  bool data_seen = false;
  std::vector<std::string> pending_labels;
  std::vector<PendingTarget> pending_targets;

  std::istringstream in(source);
  std::string line;
  int lineno = 0;

  auto bind_pending = [&](u32 addr) {
    for (const std::string& l : pending_labels) {
      if (p.labels.count(l)) throw ParseError(lineno, "duplicate label '" + l + "'");
      p.labels[l] = addr;
    }
    pending_labels.clear();
  };

  while (std::getline(in, line)) {
    ++lineno;
    std::vector<std::string> toks = tokenize(line);
    size_t i = 0;
    while (i < toks.size() && toks[i].back() == ':') {
      std::string name = toks[i].substr(0, toks[i].size() - 1);
      if (!valid_label_name(name)) throw ParseError(lineno, "bad label name '" + name + "'");
      pending_labels.push_back(name);
      ++i;
    }
    if (i >= toks.size()) continue;
    const std::string& head = toks[i];

    if (head[0] == '.') {
      if (head == ".entry") {
        if (i + 1 >= toks.size()) throw ParseError(lineno, ".entry needs a label or address");
        entry_ref = toks[i + 1];
        entry_line = lineno;
        entry_set = true;
      } else if (head == ".data") {
        i64 addr = expect_num(toks, i + 1, lineno);
        check_range(addr, 0, 0xffffffffLL, ".data address", lineno);
        if (addr % 4 != 0) throw ParseError(lineno, "misaligned address directive");
        if (!data_seen) {
          p.data_base = static_cast<u32>(addr);
          data_seen = true;
        } else {
          u32 end = p.data_base + static_cast<u32>(p.data.size());
          if (static_cast<u32>(addr) < end)
            throw ParseError(lineno, ".data address overlaps earlier data");
          p.data.resize(static_cast<u32>(addr) - p.data_base, 0);
        }
      } else if (head == ".byte" || head == ".word") {
        if (!data_seen) throw ParseError(lineno, head + " before any .data directive");
        bind_pending(p.data_base + static_cast<u32>(p.data.size()));
        if (i + 1 >= toks.size()) throw ParseError(lineno, head + " needs at least one value");
        for (size_t j = i + 1; j < toks.size(); ++j) {
          i64 v;
          if (!parse_number(toks[j], &v))
            throw ParseError(lineno, "bad data value '" + toks[j] + "'");
          if (head == ".byte") {
            check_range(v, -128, 255, ".byte value", lineno);
            p.data.push_back(static_cast<u8>(v & 0xff));
          } else {
            check_range(v, -(i64(1) << 31), (i64(1) << 32) - 1, ".word value", lineno);
            u32 w = static_cast<u32>(v);
            for (int b = 0; b < 4; ++b) p.data.push_back(static_cast<u8>((w >> (8 * b)) & 0xff));
          }
        }
      } else {
        throw ParseError(lineno, "unknown directive '" + head + "'");
      }
      continue;
    }

    auto op = opcode_from_name(head);
    if (!op) throw ParseError(lineno, "unknown mnemonic '" + head + "'");

    Instruction ins;
    ins.opcode = *op;
    ins.address = p.text_base + static_cast<u32>(p.text.size()) * 4;
    bind_pending(ins.address);
    size_t a = i + 1;

    switch (ins.kind()) {
      case InstrKind::ArithReg:
        ins.rd = static_cast<u8>(expect_reg(toks, a, lineno));
        ins.rs1 = static_cast<u8>(expect_reg(toks, a + 1, lineno));
        ins.rs2 = static_cast<u8>(expect_reg(toks, a + 2, lineno));
        if (a + 3 != toks.size()) throw ParseError(lineno, "trailing operands");
        break;
      case InstrKind::ArithImm: {
        ins.rd = static_cast<u8>(expect_reg(toks, a, lineno));
        ins.rs1 = static_cast<u8>(expect_reg(toks, a + 1, lineno));
        i64 v = expect_num(toks, a + 2, lineno);
        if (ins.opcode == Opcode::Slli || ins.opcode == Opcode::Srli ||
            ins.opcode == Opcode::Srai)
          check_range(v, 0, 31, "shift amount", lineno);
        else
          check_range(v, -2048, 2047, "immediate", lineno);
        ins.imm = static_cast<i32>(v);
        if (a + 3 != toks.size()) throw ParseError(lineno, "trailing operands");
        break;
      }
      case InstrKind::Load: {
        ins.rd = static_cast<u8>(expect_reg(toks, a, lineno));
        if (a + 1 >= toks.size()) throw ParseError(lineno, "missing memory operand");
        i64 off;
        int reg;
        parse_mem_operand(toks[a + 1], lineno, &off, &reg);
        check_range(off, -2048, 2047, "load offset", lineno);
        ins.imm = static_cast<i32>(off);
        ins.rs1 = static_cast<u8>(reg);
        if (a + 2 != toks.size()) throw ParseError(lineno, "trailing operands");
        break;
      }
      case InstrKind::Store: {
        ins.rs2 = static_cast<u8>(expect_reg(toks, a, lineno));
        if (a + 1 >= toks.size()) throw ParseError(lineno, "missing memory operand");
        i64 off;
        int reg;
        parse_mem_operand(toks[a + 1], lineno, &off, &reg);
        check_range(off, -2048, 2047, "store offset", lineno);
        ins.imm = static_cast<i32>(off);
        ins.rs1 = static_cast<u8>(reg);
        if (a + 2 != toks.size()) throw ParseError(lineno, "trailing operands");
        break;
      }
      case InstrKind::Lui:
      case InstrKind::Auipc: {
        ins.rd = static_cast<u8>(expect_reg(toks, a, lineno));
        i64 v = expect_num(toks, a + 1, lineno);
        check_range(v, 0, 0xfffff, "upper immediate", lineno);
        ins.imm = static_cast<i32>(v);
        if (a + 2 != toks.size()) throw ParseError(lineno, "trailing operands");
        break;
      }
      case InstrKind::Jal: {
        if (a >= toks.size()) throw ParseError(lineno, "jal needs rd and target");
        ins.rd = static_cast<u8>(expect_reg(toks, a, lineno));
        if (a + 1 >= toks.size()) throw ParseError(lineno, "jal needs a target");
        PendingTarget t{static_cast<int>(p.text.size()), "", 0, lineno};
        i64 v;
        if (parse_number(toks[a + 1], &v)) t.value = v;
        else t.label = toks[a + 1];
        pending_targets.push_back(t);
        if (a + 2 != toks.size()) throw ParseError(lineno, "trailing operands");
        break;
      }
      case InstrKind::Jalr: {
        ins.rd = static_cast<u8>(expect_reg(toks, a, lineno));
        if (a + 1 >= toks.size()) throw ParseError(lineno, "missing memory operand");
        i64 off;
        int reg;
        parse_mem_operand(toks[a + 1], lineno, &off, &reg);
        check_range(off, -2048, 2047, "jalr offset", lineno);
        ins.imm = static_cast<i32>(off);
        ins.rs1 = static_cast<u8>(reg);
        if (a + 2 != toks.size()) throw ParseError(lineno, "trailing operands");
        break;
      }
      case InstrKind::Branch: {
        ins.rs1 = static_cast<u8>(expect_reg(toks, a, lineno));
        ins.rs2 = static_cast<u8>(expect_reg(toks, a + 1, lineno));
        if (a + 2 >= toks.size()) throw ParseError(lineno, "branch needs a target");
        PendingTarget t{static_cast<int>(p.text.size()), "", 0, lineno};
        i64 v;
        if (parse_number(toks[a + 2], &v)) t.value = v;
        else t.label = toks[a + 2];
        pending_targets.push_back(t);
        if (a + 3 != toks.size()) throw ParseError(lineno, "trailing operands");
        break;
      }
      case InstrKind::Ecall:
        if (a != toks.size()) throw ParseError(lineno, "ecall takes no operands");
        break;
    }
    p.text.push_back(ins);
  }

  // labels with nothing after them bind to the end of text
  lineno = lineno ? lineno : 1;
  bind_pending(p.text_end());

  for (const PendingTarget& t : pending_targets) {
    Instruction& ins = p.text[static_cast<size_t>(t.instr_index)];
    i64 target;
    if (!t.label.empty()) {
      auto it = p.labels.find(t.label);
      if (it == p.labels.end())
        throw ParseError(t.line, "unresolved target label '" + t.label + "'");
      target = it->second;
      ins.target_label = t.label;
    } else {
      target = t.value;
    }
    if (target % 4 != 0 || !p.in_text(static_cast<u32>(target)))
      throw ParseError(t.line, "branch/jump target 0x" + [&] {
        std::ostringstream os;
        os << std::hex << target;
        return os.str();
      }() + " is not a text address");
    ins.imm = static_cast<i32>(static_cast<u32>(target) - ins.address);
  }

  if (entry_set) {
    i64 v;
    if (parse_number(entry_ref, &v)) {
      p.entry = static_cast<u32>(v);
    } else {
      auto it = p.labels.find(entry_ref);
      if (it == p.labels.end())
        throw ParseError(entry_line, "unresolved entry label '" + entry_ref + "'");
      p.entry = it->second;
    }
    if (!p.in_text(p.entry) || p.entry % 4 != 0)
      throw ParseError(entry_line, "entry is not a text address");
  }
  if (!p.text.empty() && !p.data.empty() && p.data_base < p.text_end() &&
      p.data_base + p.data.size() > p.text_base)
    throw Error("data segment overlaps text segment");
  return p;
}

namespace {

std::string hex32(u32 v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%x", v);
  return buf;
}

}  // namespace

std::string print_asm(const Program& p) {
  std::ostringstream out;
  std::multimap<u32, std::string> by_addr;
  for (const auto& [name, addr] : p.labels) by_addr.emplace(addr, name);
  std::map<std::string, bool> emitted;

  auto label_for = [&](u32 addr) -> std::optional<std::string> {
    auto it = by_addr.find(addr);
    if (it == by_addr.end()) return std::nullopt;
    return it->second;
  };

  if (p.entry != p.text_base) {
    auto l = label_for(p.entry);
    out << "        .entry " << (l ? *l : hex32(p.entry)) << "\n";
  }

  auto emit_labels_at = [&](u32 addr) {
    auto [lo, hi] = by_addr.equal_range(addr);
    for (auto it = lo; it != hi; ++it) {
      if (emitted[it->second]) continue;
      emitted[it->second] = true;
      out << it->second << ":\n";
    }
  };

  for (const Instruction& ins : p.text) {
    emit_labels_at(ins.address);
    const OpcodeInfo& info = opcode_info(ins.opcode);
    out << "        " << info.name;
    if (ins.kind() != InstrKind::Ecall)
      for (size_t pad = std::string(info.name).size(); pad < 6; ++pad) out << ' ';
    switch (ins.kind()) {
      case InstrKind::ArithReg:
        out << ' ' << reg_name(ins.rd) << ", " << reg_name(ins.rs1) << ", "
            << reg_name(ins.rs2);
        break;
      case InstrKind::ArithImm:
        out << ' ' << reg_name(ins.rd) << ", " << reg_name(ins.rs1) << ", " << ins.imm;
        break;
      case InstrKind::Load:
        out << ' ' << reg_name(ins.rd) << ", " << ins.imm << '(' << reg_name(ins.rs1) << ')';
        break;
      case InstrKind::Store:
        out << ' ' << reg_name(ins.rs2) << ", " << ins.imm << '(' << reg_name(ins.rs1) << ')';
        break;
      case InstrKind::Lui:
      case InstrKind::Auipc:
        out << ' ' << reg_name(ins.rd) << ", " << ins.imm;
        break;
      case InstrKind::Jal: {
        auto l = label_for(ins.target());
        out << ' ' << reg_name(ins.rd) << ", " << (l ? *l : hex32(ins.target()));
        break;
      }
      case InstrKind::Jalr:
        out << ' ' << reg_name(ins.rd) << ", " << ins.imm << '(' << reg_name(ins.rs1) << ')';
        break;
      case InstrKind::Branch: {
        auto l = label_for(ins.target());
        out << ' ' << reg_name(ins.rs1) << ", " << reg_name(ins.rs2) << ", "
            << (l ? *l : hex32(ins.target()));
        break;
      }
      case InstrKind::Ecall:
        break;
    }
    out << '\n';
  }
  emit_labels_at(p.text_end());

  if (!p.data.empty()) {
    out << "        .data  " << hex32(p.data_base) << "\n";
    u32 addr = p.data_base;
    u32 end = p.data_base + static_cast<u32>(p.data.size());
    auto label_inside = [&](u32 from, u32 to) {
      for (u32 a = from; a < to; ++a)
        if (by_addr.count(a)) return true;
      return false;
    };
    while (addr < end) {
      emit_labels_at(addr);
      if (end - addr >= 4 && !label_inside(addr + 1, addr + 4)) {
        u32 w = 0;
        for (int b = 0; b < 4; ++b)
          w |= static_cast<u32>(p.data[addr - p.data_base + static_cast<u32>(b)]) << (8 * b);
        out << "        .word  " << hex32(w) << "\n";
        addr += 4;
      } else {
        out << "        .byte  " << static_cast<int>(p.data[addr - p.data_base]) << "\n";
        addr += 1;
      }
    }
    emit_labels_at(end);
  }
  return out.str();
}

}  // namespace drndalo
