#ifndef DRNDALO_PIPELINE_HPP
#define DRNDALO_PIPELINE_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "drndalo/hash.hpp"
#include "drndalo/isa.hpp"
#include "drndalo/machine.hpp"
#include "drndalo/mask.hpp"

namespace drndalo {

enum class Design : u8 {
  Baseline,     // no branch-signal XOR, no hash hardware
  StalledHash,  // waits for the hash result on every conditional branch
  CachedHash,   // direct-mapped decision cache, stalls only on a miss
  MaskBased,    // precomputed decision bits, never stalls
};

const char* design_name(Design d);
std::optional<Design> design_from_name(const std::string& name);

struct SimConfig {
  Design design = Design::Baseline;
  std::optional<HashScheme> scheme;    // StalledHash/CachedHash
  std::optional<ObfKey> key;           // StalledHash/CachedHash
  std::optional<InversionMask> mask;   // MaskBased
  int hash_cycles = 16;
  int cache_lines = 256;               // power of two
  int branch_penalty = 2;              // cycles per taken branch
  int decode_to_execute_overlap = 1;   // hash latency hidden by the pipeline
  u64 max_cycles = 10'000'000;

  void validate() const;  // throws Error on inconsistent settings
};

// Direct-mapped, one decision bit per line, tagged with the rest of the
// word-aligned address.
class HashCache {
 public:
  explicit HashCache(int lines);
  std::optional<int> lookup(u32 addr) const;
  void fill(u32 addr, int bit);

 private:
  struct Line {
    bool valid = false;
    u32 tag = 0;
    u8 bit = 0;
  };
  std::vector<Line> lines_;
};

enum class SimStatus : u8 { Ok, Trapped, TimedOut };

struct SimReport {
  u64 cycles = 0;
  u64 instructions = 0;
  u64 branches = 0;        // dynamic conditional branches
  u64 taken_branches = 0;
  u64 distinct_branches = 0;  // distinct conditional branch addresses executed
  u64 stall_cycles = 0;
  u64 cache_hits = 0;
  u64 cache_misses = 0;
  u64 trace_digest = 0;    // rolling hash over (pc, rd, written value)
  u32 exit_code = 0;
  std::vector<u8> output_bytes;
  SimStatus status = SimStatus::Ok;
  std::string trap_message;

  std::string to_json() const;
};

// Called once per dynamic conditional branch, after it resolves.
struct BranchEvent {
  u32 address = 0;
  bool taken = false;
  u64 stall = 0;
  bool cache_hit = false;
};
using BranchObserver = std::function<void(const BranchEvent&)>;

SimReport simulate(const Program& p, const SimConfig& cfg,
                   const BranchObserver& observer = nullptr);

// extra cycles of `keyed` relative to `baseline`, as a fraction of baseline
// cycles; throws if the two runs architecturally diverged
double overhead(const SimReport& keyed, const SimReport& baseline);

}  // namespace drndalo

#endif  // DRNDALO_PIPELINE_HPP
