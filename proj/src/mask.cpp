#include "drndalo/mask.hpp"

#include <cstdio>
#include <sstream>

namespace drndalo {

int InversionMask::bit(u32 addr) const {
  auto it = entries.find(addr);
  if (it == entries.end()) {
    std::ostringstream os;
    os << "mask has no entry for branch address 0x" << std::hex << addr;
    throw Error(os.str());
  }
  return it->second & 1;
}

bool InversionMask::covers(const Program& p) const {
  std::vector<u32> branches = p.branch_addresses();
  if (branches.size() != entries.size()) return false;
  for (u32 a : branches)
    if (!entries.count(a)) return false;
  return true;
}

std::string format_mask(const InversionMask& m) {
  std::ostringstream os;
  os << "# n=" << m.entries.size() << "\n";
  for (const auto& [addr, bit] : m.entries) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%08x %d\n", addr, bit & 1);
    os << buf;
  }
  return os.str();
}

InversionMask parse_mask(const std::string& text) {
  InversionMask m;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  long declared = -1;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok == "#") {
      std::string rest;
      if (ls >> rest && rest.rfind("n=", 0) == 0) declared = std::stol(rest.substr(2));
      continue;
    }
    if (tok[0] == '#') continue;
    if (tok.rfind("0x", 0) != 0 && tok.rfind("0X", 0) != 0)
      throw ParseError(lineno, "mask entry must start with a 0x address");
    u32 addr = static_cast<u32>(std::stoul(tok, nullptr, 16));
    int bit;
    if (!(ls >> bit) || (bit != 0 && bit != 1))
      throw ParseError(lineno, "mask bit must be 0 or 1");
    if (m.entries.count(addr)) throw ParseError(lineno, "duplicate mask address");
    m.entries[addr] = static_cast<u8>(bit);
  }
  if (declared >= 0 && static_cast<size_t>(declared) != m.entries.size())
    throw Error("mask header count does not match entry count");
  return m;
}

}  // namespace drndalo
