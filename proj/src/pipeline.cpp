#include "drndalo/pipeline.hpp"

#include <unordered_set>

#include <nlohmann/json.hpp>

namespace drndalo {

const char* design_name(Design d) {
  switch (d) {
    case Design::Baseline: return "baseline";
    case Design::StalledHash: return "stall";
    case Design::CachedHash: return "cache";
    case Design::MaskBased: return "mask";
  }
  return "?";
}

std::optional<Design> design_from_name(const std::string& name) {
  if (name == "baseline") return Design::Baseline;
  if (name == "stall" || name == "stalled-hash") return Design::StalledHash;
  if (name == "cache" || name == "cached-hash") return Design::CachedHash;
  if (name == "mask" || name == "mask-based") return Design::MaskBased;
  return std::nullopt;
}

void SimConfig::validate() const {
  if (cache_lines <= 0 || (cache_lines & (cache_lines - 1)) != 0)
    throw Error("cache_lines must be a power of two");
  if (hash_cycles < 0 || branch_penalty < 0 || decode_to_execute_overlap < 0)
    throw Error("cycle parameters must be non-negative");
  if (design == Design::StalledHash || design == Design::CachedHash) {
    if (!scheme) throw Error(std::string(design_name(design)) + " design needs a hash scheme");
    if (!key) throw Error(std::string(design_name(design)) + " design needs a key");
  }
  if (design == Design::MaskBased && !mask)
    throw Error("mask design needs an inversion mask");
}

HashCache::HashCache(int lines) : lines_(static_cast<size_t>(lines)) {}

std::optional<int> HashCache::lookup(u32 addr) const {
  u32 word = addr >> 2;
  const Line& l = lines_[word % lines_.size()];
  if (!l.valid || l.tag != word / lines_.size()) return std::nullopt;
  return l.bit;
}

void HashCache::fill(u32 addr, int bit) {
  u32 word = addr >> 2;
  Line& l = lines_[word % lines_.size()];
  l.valid = true;
  l.tag = word / static_cast<u32>(lines_.size());
  l.bit = static_cast<u8>(bit & 1);
}

namespace {

struct DesignProvider : BranchBitProvider {
  const SimConfig& cfg;
  HashCache cache;
  u64 last_stall = 0;
  bool last_hit = false;

  explicit DesignProvider(const SimConfig& c) : cfg(c), cache(c.cache_lines) {}

  int bit(u32 addr) override {
    last_stall = 0;
    last_hit = false;
    u64 charge = static_cast<u64>(
        std::max(0, cfg.hash_cycles - cfg.decode_to_execute_overlap));
    switch (cfg.design) {
      case Design::Baseline:
        return 0;
      case Design::StalledHash:
        last_stall = charge;
        return decide(*cfg.scheme, *cfg.key, addr);
      case Design::CachedHash: {
        if (auto hit = cache.lookup(addr)) {
          last_hit = true;
          return *hit;
        }
        last_stall = charge;
        int b = decide(*cfg.scheme, *cfg.key, addr);
        cache.fill(addr, b);
        return b;
      }
      case Design::MaskBased:
        return cfg.mask->bit(addr);
    }
    return 0;
  }
};

u64 digest_update(u64 h, u32 pc, u8 rd, u32 value) {
  h = mix64(h ^ pc);
  h = mix64(h ^ ((static_cast<u64>(rd) << 32) | value));
  return h;
}

}  // namespace

SimReport simulate(const Program& p, const SimConfig& cfg, const BranchObserver& observer) {
  cfg.validate();
  SimReport r;
  MachineState st = MachineState::boot(p);
  DesignProvider provider(cfg);
  std::unordered_set<u32> seen_branches;

  u64 cycles = 0;
  for (;;) {
    StepInfo info;
    StepStatus s = step(st, p, &info, &provider);
    if (s == StepStatus::Halted) break;
    if (s == StepStatus::Trapped) {
      r.status = SimStatus::Trapped;
      r.trap_message = st.trap->message;
      break;
    }
    r.instructions += 1;
    cycles += 1;
    if (info.cond_branch) {
      r.branches += 1;
      seen_branches.insert(info.pc);
      if (info.branch_taken) {
        r.taken_branches += 1;
        cycles += static_cast<u64>(cfg.branch_penalty);
      }
      r.stall_cycles += provider.last_stall;
      cycles += provider.last_stall;
      if (cfg.design == Design::CachedHash) {
        if (provider.last_hit) r.cache_hits += 1;
        else r.cache_misses += 1;
      }
      if (observer)
        observer(BranchEvent{info.pc, info.branch_taken, provider.last_stall,
                             provider.last_hit});
    }
    r.trace_digest = digest_update(r.trace_digest, info.pc,
                                   info.wrote_reg ? info.rd : 0,
                                   info.wrote_reg ? info.rd_value : 0);
    if (cycles > cfg.max_cycles) {
      r.status = SimStatus::TimedOut;
      break;
    }
  }
  r.cycles = cycles;
  r.distinct_branches = seen_branches.size();
  r.exit_code = st.exit_code;
  r.output_bytes = st.output;
  return r;
}

double overhead(const SimReport& keyed, const SimReport& baseline) {
  if (keyed.status != SimStatus::Ok || baseline.status != SimStatus::Ok)
    throw Error("overhead: runs did not both complete");
  if (keyed.trace_digest != baseline.trace_digest ||
      keyed.exit_code != baseline.exit_code)
    throw Error("overhead: keyed run diverged from the baseline run");
  if (baseline.cycles == 0) throw Error("overhead: baseline ran zero cycles");
  return (static_cast<double>(keyed.cycles) - static_cast<double>(baseline.cycles)) /
         static_cast<double>(baseline.cycles);
}

std::string SimReport::to_json() const {
  nlohmann::json j;
  j["cycles"] = cycles;
  j["instructions"] = instructions;
  j["branches"] = branches;
  j["taken_branches"] = taken_branches;
  j["distinct_branches"] = distinct_branches;
  j["stall_cycles"] = stall_cycles;
  j["cache_hits"] = cache_hits;
  j["cache_misses"] = cache_misses;
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(trace_digest));
  j["trace_digest"] = buf;
  j["exit_code"] = exit_code;
  j["output_bytes"] = output_bytes;
  j["status"] = status == SimStatus::Ok       ? "ok"
                : status == SimStatus::Trapped ? "trap"
                                               : "timeout";
  j["trap_message"] = trap_message;
  return j.dump(2);
}

}  // namespace drndalo
