#include "drndalo/attack.hpp"

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "drndalo/obfuscate.hpp"
#include "drndalo/pipeline.hpp"

namespace drndalo {

namespace {

InversionMask mask_from_bits(const std::vector<u32>& branches, u64 bits) {
  InversionMask m;
  for (size_t i = 0; i < branches.size(); ++i)
    m.entries[branches[i]] = static_cast<u8>((bits >> i) & 1);
  return m;
}

}  // namespace

AttackReport brute_force(const Program& p_obf, const Program& p_plain, AttackMode mode,
                         u64 trials, u64 seed) {
  std::vector<u32> branches = p_obf.branch_addresses();
  AttackReport r;
  r.n = branches.size();
  r.mode = mode;
  r.theoretical_p = std::exp2(-static_cast<double>(r.n));

  if (mode == AttackMode::Exhaustive) {
    if (r.n > 20) throw Error("exhaustive attack is capped at 20 branches");
    r.trials = 1ull << r.n;
    for (u64 bits = 0; bits < r.trials; ++bits)
      if (apply_mask(p_obf, mask_from_bits(branches, bits)) == p_plain) r.successes += 1;
  } else {
    if (trials == 0) throw Error("sampled attack needs a trial count");
    r.trials = trials;
    std::mt19937_64 rng(seed);
    for (u64 t = 0; t < trials; ++t) {
      u64 bits = rng();
      if (r.n < 64) bits &= (1ull << r.n) - 1;
      if (apply_mask(p_obf, mask_from_bits(branches, bits)) == p_plain) r.successes += 1;
    }
  }
  r.empirical_p = static_cast<double>(r.successes) / static_cast<double>(r.trials);
  return r;
}

namespace {

struct RunOutcome {
  SimStatus status;
  u32 exit_code;
  std::vector<u8> output;

  friend bool operator==(const RunOutcome& a, const RunOutcome& b) {
    return a.status == b.status && a.exit_code == b.exit_code && a.output == b.output;
  }
};

RunOutcome run_with_input(const Program& p, u32 input, u64 max_cycles) {
  Program copy = p;
  if (copy.data.size() >= 4) {
    for (int b = 0; b < 4; ++b)
      copy.data[static_cast<size_t>(b)] = static_cast<u8>((input >> (8 * b)) & 0xff);
  }
  SimConfig cfg;
  cfg.max_cycles = max_cycles;
  SimReport rep = simulate(copy, cfg);
  return RunOutcome{rep.status, rep.exit_code, rep.output_bytes};
}

}  // namespace

DivergenceReport measure_divergence(const Program& p_plain, const Program& p_obf,
                                    const std::vector<u32>& inputs, u64 max_cycles) {
  DivergenceReport r;
  r.inputs = inputs.size();
  if (inputs.empty()) return r;
  for (u32 in : inputs) {
    RunOutcome a = run_with_input(p_plain, in, max_cycles);
    RunOutcome b = run_with_input(p_obf, in, max_cycles);
    if (b.status == SimStatus::TimedOut) r.timeouts += 1;
    if (!(a == b)) r.differing += 1;
  }
  r.divergence = static_cast<double>(r.differing) / static_cast<double>(r.inputs);
  return r;
}

std::string AttackReport::to_json() const {
  nlohmann::json j;
  j["n"] = n;
  j["mode"] = mode == AttackMode::Exhaustive ? "exhaustive" : "sampled";
  j["trials"] = trials;
  j["successes"] = successes;
  j["empirical_p"] = empirical_p;
  j["theoretical_p"] = theoretical_p;
  return j.dump(2);
}

std::string DivergenceReport::to_json() const {
  nlohmann::json j;
  j["inputs"] = inputs;
  j["differing"] = differing;
  j["timeouts"] = timeouts;
  j["divergence"] = divergence;
  return j.dump(2);
}

}  // namespace drndalo
