#include "drndalo/hash.hpp"

#include <bit>
#include <cctype>
#include <cstdio>

namespace drndalo {

ObfKey ObfKey::from_hex(const std::string& s) {
  std::string t = s;
  if (t.rfind("0x", 0) == 0 || t.rfind("0X", 0) == 0) t = t.substr(2);
  if (t.size() != 16) throw Error("key must be exactly 16 hex digits: '" + s + "'");
  u64 v = 0;
  for (char c : t) {
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
    else throw Error("key must be exactly 16 hex digits: '" + s + "'");
    v = (v << 4) | static_cast<u64>(d);
  }
  return ObfKey{v};
}

std::string ObfKey::to_hex() const {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(bits));
  return buf;
}

LfsrConfig LfsrConfig::make(int n, int k, u64 taps) {
  if (n < 4 || n > 64) throw std::invalid_argument("lfsr: n must be in 4..64");
  if (k <= n) throw std::invalid_argument("lfsr: k must exceed n");
  u64 mask = n == 64 ? ~0ull : (1ull << n) - 1;
  if ((taps & mask) == 0) throw std::invalid_argument("lfsr: taps must be nonzero");
  if ((taps & ~mask) != 0) throw std::invalid_argument("lfsr: taps wider than n bits");
  return LfsrConfig{n, k, taps};
}

u64 lfsr_step(const LfsrConfig& cfg, u64 state) {
  u64 fb = static_cast<u64>(std::popcount(state & cfg.taps) & 1);
  return (state >> 1) | (fb << (cfg.n - 1));
}

u64 lfsr_run(const LfsrConfig& cfg, u64 seed, int steps) {
  u64 s = seed;
  for (int i = 0; i < steps; ++i) s = lfsr_step(cfg, s);
  return s;
}

int lfsr_bit(const LfsrConfig& cfg, const ObfKey& key, u32 address) {
  u64 mask = cfg.n == 64 ? ~0ull : (1ull << cfg.n) - 1;
  u64 seed = (static_cast<u64>(address) ^ key.bits ^ (key.bits >> 32)) & mask;
  if (seed == 0) seed = mask;
  return static_cast<int>(lfsr_run(cfg, seed, cfg.k) & 1);
}

int mix64_bit(const ObfKey& key, u32 address) {
  u64 x = static_cast<u64>(address) + 0x9e3779b97f4a7c15ull;
  x = mix64(x);
  x ^= key.bits;
  x = mix64(x);
  return static_cast<int>(x & 1);
}

std::optional<bool> lfsr_taps_maximal(const LfsrConfig& cfg) {
  if (cfg.n > 24) return std::nullopt;
  u64 period_target = (1ull << cfg.n) - 1;
  u64 s = 1;
  for (u64 i = 1; i <= period_target; ++i) {
    s = lfsr_step(cfg, s);
    if (s == 1) return i == period_target;
  }
  return false;
}

int decide(const HashScheme& scheme, const ObfKey& key, u32 address) {
  return std::visit(
      [&](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, LfsrScheme>) return lfsr_bit(s.cfg, key, address);
        else if constexpr (std::is_same_v<T, Mix64Scheme>) return mix64_bit(key, address);
        else return s.mask.bit(address);
      },
      scheme);
}

const char* scheme_name(const HashScheme& scheme) {
  if (std::holds_alternative<LfsrScheme>(scheme)) return "lfsr";
  if (std::holds_alternative<Mix64Scheme>(scheme)) return "mix64";
  return "mask";
}

}  // namespace drndalo
