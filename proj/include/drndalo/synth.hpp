#ifndef DRNDALO_SYNTH_HPP
#define DRNDALO_SYNTH_HPP

#include <map>
#include <string>
#include <vector>

#include "drndalo/isa.hpp"
#include "drndalo/stealth.hpp"

namespace drndalo {

// Parameterized generator of structurally valid programs for the stealth
// experiments: straight-line arithmetic blocks, each ended by a conditional
// branch whose kind is drawn from a configurable distribution.
struct SynthConfig {
  u64 seed = 1;
  int programs = 8;
  int branches_per_program = 64;
  int min_block = 1;  // non-branch instructions per block
  int max_block = 5;
  // weights over Beq/Bne/Blt/Bge/Bltu/Bgeu; empty means uniform
  std::map<Opcode, double> branch_weights;

  static SynthConfig uniform(u64 seed, int programs, int branches);
  static SynthConfig skewed(u64 seed, int programs, int branches, Opcode heavy,
                            Opcode light, double heavy_weight);
};

std::vector<NamedProgram> synth_corpus(const SynthConfig& cfg);

}  // namespace drndalo

#endif  // DRNDALO_SYNTH_HPP
