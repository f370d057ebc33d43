#ifndef DRNDALO_SOFT_DEOBF_HPP
#define DRNDALO_SOFT_DEOBF_HPP

#include <string>

#include "drndalo/isa.hpp"
#include "drndalo/pipeline.hpp"

namespace drndalo {

enum class SoftDeobfMode : u8 {
  JitCached,    // one charge per distinct executed branch address
  JitUncached,  // one charge per dynamic branch
  Runtime,      // measured delta of the actually rewritten program
};

const char* soft_deobf_mode_name(SoftDeobfMode m);
std::optional<SoftDeobfMode> soft_deobf_mode_from_name(const std::string& name);

struct SoftDeobfModel {
  SoftDeobfMode mode = SoftDeobfMode::JitCached;
  u32 per_branch_cost = 10;   // instructions charged per deobfuscation event
  u32 mask_lookup_cost = 3;   // instructions per mask load+compare (reported
                              // as an analytic floor, never charged)
};

struct SoftDeobfReport {
  SoftDeobfMode mode = SoftDeobfMode::JitCached;
  u64 baseline_instructions = 0;
  u64 dynamic_branches = 0;
  u64 distinct_branches = 0;
  u64 extra_instructions = 0;   // charged (JIT modes) or measured (Runtime)
  double overhead = 0.0;        // extra_instructions / baseline_instructions
  double analytic_floor = 0.0;  // Runtime only: mask_lookup_cost * dynamic / baseline

  std::string to_json() const;
};

// `baseline` must be the Baseline-design report of running p itself.
// Runtime mode rewrites p with an all-zero mask (the rewrite's instruction
// counts do not depend on the mask bits) and measures the real delta.
SoftDeobfReport estimate_overhead(const Program& p, const SoftDeobfModel& model,
                                  const SimReport& baseline);

}  // namespace drndalo

#endif  // DRNDALO_SOFT_DEOBF_HPP
