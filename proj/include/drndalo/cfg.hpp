#ifndef DRNDALO_CFG_HPP
#define DRNDALO_CFG_HPP

#include <vector>

#include "drndalo/isa.hpp"

namespace drndalo {

struct BasicBlock {
  size_t first = 0;  // index into Program::text
  size_t last = 0;   // inclusive
};

// Leaders: the entry point, every branch/jal target, and the instruction
// after any control transfer (conditional branch, jal, jalr).
std::vector<BasicBlock> basic_blocks(const Program& p);

// Indices of the window of at most `window` instructions ending at the
// conditional branch at text index `branch_idx`, clipped at the start of
// the branch's basic block. The branch itself is always the last element.
std::vector<size_t> branch_window(const Program& p, const std::vector<BasicBlock>& blocks,
                                  size_t branch_idx, int window);

}  // namespace drndalo

#endif  // DRNDALO_CFG_HPP
