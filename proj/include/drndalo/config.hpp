#pragma once

#include <optional>
#include <string>

#include "drndalo/hash.hpp"
#include "drndalo/pipeline.hpp"
#include "drndalo/soft_deobf.hpp"
#include "drndalo/stealth.hpp"

namespace drndalo {

// Every tunable the command-line tool understands, with its default value.
// A config file is line-oriented: one `key = value` pair per line, `#`
// comments, blank lines ignored.  Unknown keys are rejected so typos fail
// loudly instead of silently falling back to a default.
struct ToolConfig {
  std::optional<ObfKey> key;           // key        (16 hex digits)
  std::string scheme = "lfsr";         // scheme     (lfsr | mix64)
  int lfsr_n = 15;                     // lfsr.n
  int lfsr_k = 16;                     // lfsr.k
  u64 lfsr_taps = 0x2d;                // lfsr.taps
  std::string sim_design = "baseline"; // sim.design (baseline|stall|cache|mask)
  u64 sim_hash_cycles = 16;            // sim.hash_cycles
  u64 sim_cache_lines = 256;           // sim.cache_lines
  u64 sim_branch_penalty = 2;          // sim.branch_penalty
  u64 sim_overlap = 1;                 // sim.overlap
  u64 sim_max_cycles = 10'000'000;     // sim.max_cycles
  std::string soft_mode = "jit-cached";// soft.mode
  u64 soft_per_branch_cost = 10;       // soft.per_branch_cost
  u64 soft_mask_lookup_cost = 3;       // soft.mask_lookup_cost
  int stealth_window = 4;              // stealth.window
  std::string stealth_model = "logreg";// stealth.model (logreg | tree)
  u64 stealth_split_seed = 1;          // stealth.split_seed
  u64 attack_trials = 100000;          // attack.trials
  u64 attack_seed = 1;                 // attack.seed
  u64 attack_inputs = 16;              // attack.inputs
  int jobs = 0;                        // jobs (0 = all cores)

  // Assemble the pieces other modules consume.  Each getter validates the
  // relevant fields and throws Error with a precise message on bad values.
  HashScheme hash_scheme() const;
  SimConfig sim_config() const;  // scheme/key/mask attached by the caller
  SoftDeobfModel soft_model() const;
  ObfKey require_key() const;
};

// Parse one config file.  Throws Error naming the offending line on
// malformed syntax, unknown keys, or unparsable values.
ToolConfig load_config_file(const std::string& path, ToolConfig base = {});

// Apply a single `key = value` assignment (shared by the file loader and
// tests).  `where` prefixes error messages, e.g. "tool.conf:3".
void apply_config_pair(ToolConfig& cfg, const std::string& key, const std::string& value,
                       const std::string& where);

}  // namespace drndalo
