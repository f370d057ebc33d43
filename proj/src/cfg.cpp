#include "drndalo/cfg.hpp"

#include <algorithm>
#include <set>

namespace drndalo {

std::vector<BasicBlock> basic_blocks(const Program& p) {
  std::vector<BasicBlock> blocks;
  if (p.text.empty()) return blocks;

  std::set<size_t> leaders;
  leaders.insert((p.entry - p.text_base) / 4);
  leaders.insert(0);
  for (size_t i = 0; i < p.text.size(); ++i) {
    const Instruction& ins = p.text[i];
    InstrKind k = ins.kind();
    if (k == InstrKind::Branch || k == InstrKind::Jal) {
      u32 t = ins.target();
      if (p.in_text(t)) leaders.insert((t - p.text_base) / 4);
    }
    if (k == InstrKind::Branch || k == InstrKind::Jal || k == InstrKind::Jalr)
      if (i + 1 < p.text.size()) leaders.insert(i + 1);
  }

  std::vector<size_t> sorted(leaders.begin(), leaders.end());
  for (size_t b = 0; b < sorted.size(); ++b) {
    BasicBlock block;
    block.first = sorted[b];
    block.last = (b + 1 < sorted.size() ? sorted[b + 1] : p.text.size()) - 1;
    blocks.push_back(block);
  }
  return blocks;
}

std::vector<size_t> branch_window(const Program& p, const std::vector<BasicBlock>& blocks,
                                  size_t branch_idx, int window) {
  if (branch_idx >= p.text.size() || !is_cond_branch(p.text[branch_idx].opcode))
    throw Error("branch_window: index is not a conditional branch");
  if (window < 1) throw Error("branch_window: window must be at least 1");

  size_t block_first = 0;
  for (const BasicBlock& b : blocks)
    if (b.first <= branch_idx && branch_idx <= b.last) {
      block_first = b.first;
      break;
    }
  size_t lo = std::max(block_first, branch_idx + 1 >= static_cast<size_t>(window)
                                        ? branch_idx + 1 - static_cast<size_t>(window)
                                        : 0);
  std::vector<size_t> out;
  for (size_t i = lo; i <= branch_idx; ++i) out.push_back(i);
  return out;
}

}  // namespace drndalo
