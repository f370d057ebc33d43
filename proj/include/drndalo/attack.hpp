#ifndef DRNDALO_ATTACK_HPP
#define DRNDALO_ATTACK_HPP

#include <string>
#include <vector>

#include "drndalo/isa.hpp"
#include "drndalo/mask.hpp"

namespace drndalo {

// Attacker model: holds the obfuscated and plain binaries, never the key,
// and cannot observe execution of the victim. Nothing in this module takes
// an ObfKey.

enum class AttackMode : u8 {
  Exhaustive,  // enumerate all 2^n masks (n <= 20)
  Sampled,     // Monte Carlo over uniformly random masks
};

struct AttackReport {
  size_t n = 0;  // conditional branch count of the obfuscated program
  AttackMode mode = AttackMode::Exhaustive;
  u64 trials = 0;
  u64 successes = 0;
  double empirical_p = 0.0;
  double theoretical_p = 1.0;  // 2^(-n)

  std::string to_json() const;
};

// Tries candidate masks against p_obf and counts how many reconstruct
// p_plain exactly. In exhaustive mode trials/seed are ignored.
AttackReport brute_force(const Program& p_obf, const Program& p_plain, AttackMode mode,
                         u64 trials = 0, u64 seed = 0);

struct DivergenceReport {
  u64 inputs = 0;
  u64 differing = 0;
  u64 timeouts = 0;  // runs of the obfuscated program that hit the cycle guard
  double divergence = 0.0;

  std::string to_json() const;
};

// Runs both programs on the plain machine per input and reports the
// fraction of inputs whose observable behavior (exit code, output stream,
// completion status) differs. When a program declares a data segment the
// input word overwrites its first word; programs without data ignore input.
DivergenceReport measure_divergence(const Program& p_plain, const Program& p_obf,
                                    const std::vector<u32>& inputs,
                                    u64 max_cycles = 10'000'000);

}  // namespace drndalo

#endif  // DRNDALO_ATTACK_HPP
