#ifndef DRNDALO_HASH_HPP
#define DRNDALO_HASH_HPP

#include <optional>
#include <string>
#include <variant>

#include "drndalo/isa.hpp"
#include "drndalo/mask.hpp"

namespace drndalo {

struct ObfKey {
  u64 bits = 0;

  // exactly 16 hex digits (an optional 0x prefix is tolerated)
  static ObfKey from_hex(const std::string& s);
  std::string to_hex() const;

  friend bool operator==(const ObfKey& a, const ObfKey& b) { return a.bits == b.bits; }
};

// SplitMix64 finalizer (Stafford mix 13): full-avalanche 64-bit mixer
inline u64 mix64(u64 x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

struct LfsrConfig {
  int n = 15;          // register count, 4..64
  int k = 16;          // cycles per decision, must exceed n
  u64 taps = 0x2d;     // feedback polynomial x^15+x^5+x^3+x^2+1

  // throws std::invalid_argument on n outside 4..64, k <= n, or zero taps
  static LfsrConfig make(int n, int k, u64 taps);
  static LfsrConfig cycles16() { return make(15, 16, 0x2d); }
  static LfsrConfig cycles8() { return make(7, 8, 0x1d); }  // x^7+x^4+x^3+x^2+1
};

// One Fibonacci step: feedback = parity(state & taps) shifted into the top bit.
u64 lfsr_step(const LfsrConfig& cfg, u64 state);
// Runs k steps from an explicit seed and returns the final state.
u64 lfsr_run(const LfsrConfig& cfg, u64 seed, int steps);

// seed = low n bits of (address ^ key ^ (key >> 32)); an all-zero seed is
// replaced with all-ones; output is the low bit of the state after k steps.
int lfsr_bit(const LfsrConfig& cfg, const ObfKey& key, u32 address);

// Keyed single-bit decision with full avalanche in both inputs.
int mix64_bit(const ObfKey& key, u32 address);

// Exhaustive period check; nullopt when n > 24 (too costly to verify).
std::optional<bool> lfsr_taps_maximal(const LfsrConfig& cfg);

struct LfsrScheme {
  LfsrConfig cfg;
};
struct Mix64Scheme {};
struct MaskScheme {
  InversionMask mask;
};

using HashScheme = std::variant<LfsrScheme, Mix64Scheme, MaskScheme>;

// Pure in (address, key) for LfsrScheme and Mix64Scheme; MaskScheme ignores
// the key and replays stored bits (throws on an uncovered address).
int decide(const HashScheme& scheme, const ObfKey& key, u32 address);

const char* scheme_name(const HashScheme& scheme);

}  // namespace drndalo

#endif  // DRNDALO_HASH_HPP
