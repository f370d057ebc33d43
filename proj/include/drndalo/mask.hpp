#ifndef DRNDALO_MASK_HPP
#define DRNDALO_MASK_HPP

#include <map>
#include <string>

#include "drndalo/isa.hpp"

namespace drndalo {

// One bit per conditional branch, keyed by branch address: 1 means the
// branch opcode was inverted relative to the plain program.
struct InversionMask {
  std::map<u32, u8> entries;

  size_t branch_count() const { return entries.size(); }
  int bit(u32 addr) const;  // throws if addr has no entry

  // true iff the mask keys are exactly p's conditional branch addresses
  bool covers(const Program& p) const;

  friend bool operator==(const InversionMask& a, const InversionMask& b) {
    return a.entries == b.entries;
  }
};

// File format: optional comment lines, a "# n=<count>" header, then one
// "0x<addr> <0|1>" line per branch.
std::string format_mask(const InversionMask& m);
InversionMask parse_mask(const std::string& text);

}  // namespace drndalo

#endif  // DRNDALO_MASK_HPP
