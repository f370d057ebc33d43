#ifndef DRNDALO_OBFUSCATE_HPP
#define DRNDALO_OBFUSCATE_HPP

#include <map>

#include "drndalo/hash.hpp"
#include "drndalo/isa.hpp"
#include "drndalo/mask.hpp"

namespace drndalo {

struct ObfResult {
  Program program;
  InversionMask mask;
};

// Inverts every conditional branch whose decide(address) bit is 1 and
// records those bits. Applying the same key twice is the identity.
ObfResult obfuscate(const Program& p, const HashScheme& scheme, const ObfKey& key);

// The inverse transform; identical to obfuscate because inversion is an
// involution. Restores the original only under the obfuscation key.
Program deobfuscate(const Program& p, const HashScheme& scheme, const ObfKey& key);

// Inverts exactly the branches whose mask bit is 1 (no key involved).
Program apply_mask(const Program& p, const InversionMask& mask);

struct RuntimeDeobfResult {
  Program program;
  u32 mask_table_base = 0;
  // executed instructions of a rewritten branch, per original branch opcode
  std::map<Opcode, int> expansion;
  size_t added_instructions = 0;
};

// Rewrites each conditional branch of p into a sequence that loads the
// branch's mask byte, materializes the branch predicate, XORs the two and
// branches on the result. Running the rewritten program on the plain
// machine reproduces the behavior of apply_mask(p, mask).
// t5/t6 are claimed as scratch; programs already using them are rejected.
RuntimeDeobfResult emit_runtime_deobf(const Program& p, const InversionMask& mask);

}  // namespace drndalo

#endif  // DRNDALO_OBFUSCATE_HPP
