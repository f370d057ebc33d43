#include "drndalo/config.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

namespace drndalo {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

u64 parse_u64(const std::string& value, const std::string& where) {
  try {
    size_t pos = 0;
    u64 v = std::stoull(value, &pos, 0);  // base 0: decimal or 0x-prefixed hex
    if (pos != value.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw Error(where + ": expected a number, got '" + value + "'");
  }
}

int parse_int(const std::string& value, const std::string& where) {
  u64 v = parse_u64(value, where);
  if (v > 1'000'000'000ull) throw Error(where + ": value out of range: '" + value + "'");
  return static_cast<int>(v);
}

}  // namespace

void apply_config_pair(ToolConfig& cfg, const std::string& key, const std::string& value,
                       const std::string& where) {
  if (key == "key")
    cfg.key = ObfKey::from_hex(value);
  else if (key == "scheme")
    cfg.scheme = value;
  else if (key == "lfsr.n")
    cfg.lfsr_n = parse_int(value, where);
  else if (key == "lfsr.k")
    cfg.lfsr_k = parse_int(value, where);
  else if (key == "lfsr.taps")
    cfg.lfsr_taps = parse_u64(value, where);
  else if (key == "sim.design")
    cfg.sim_design = value;
  else if (key == "sim.hash_cycles")
    cfg.sim_hash_cycles = parse_u64(value, where);
  else if (key == "sim.cache_lines")
    cfg.sim_cache_lines = parse_u64(value, where);
  else if (key == "sim.branch_penalty")
    cfg.sim_branch_penalty = parse_u64(value, where);
  else if (key == "sim.overlap")
    cfg.sim_overlap = parse_u64(value, where);
  else if (key == "sim.max_cycles")
    cfg.sim_max_cycles = parse_u64(value, where);
  else if (key == "soft.mode")
    cfg.soft_mode = value;
  else if (key == "soft.per_branch_cost")
    cfg.soft_per_branch_cost = parse_u64(value, where);
  else if (key == "soft.mask_lookup_cost")
    cfg.soft_mask_lookup_cost = parse_u64(value, where);
  else if (key == "stealth.window")
    cfg.stealth_window = parse_int(value, where);
  else if (key == "stealth.model")
    cfg.stealth_model = value;
  else if (key == "stealth.split_seed")
    cfg.stealth_split_seed = parse_u64(value, where);
  else if (key == "attack.trials")
    cfg.attack_trials = parse_u64(value, where);
  else if (key == "attack.seed")
    cfg.attack_seed = parse_u64(value, where);
  else if (key == "attack.inputs")
    cfg.attack_inputs = parse_u64(value, where);
  else if (key == "jobs")
    cfg.jobs = parse_int(value, where);
  else
    throw Error(where + ": unknown config key '" + key + "'");
}

ToolConfig load_config_file(const std::string& path, ToolConfig base) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string where = path + ":" + std::to_string(lineno);
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) throw Error(where + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw Error(where + ": empty key");
    if (value.empty()) throw Error(where + ": empty value for '" + key + "'");
    apply_config_pair(base, key, value, where);
  }
  return base;
}

HashScheme ToolConfig::hash_scheme() const {
  if (scheme == "lfsr") {
    LfsrConfig lc = LfsrConfig::make(lfsr_n, lfsr_k, lfsr_taps);
    return LfsrScheme{lc};
  }
  if (scheme == "mix64") return Mix64Scheme{};
  throw Error("unknown scheme '" + scheme + "' (expected lfsr or mix64)");
}

SimConfig ToolConfig::sim_config() const {
  SimConfig sc;
  std::optional<Design> d = design_from_name(sim_design);
  if (!d) throw Error("unknown sim design '" + sim_design + "'");
  sc.design = *d;
  sc.hash_cycles = sim_hash_cycles;
  sc.cache_lines = sim_cache_lines;
  sc.branch_penalty = sim_branch_penalty;
  sc.decode_to_execute_overlap = sim_overlap;
  sc.max_cycles = sim_max_cycles;
  return sc;
}

SoftDeobfModel ToolConfig::soft_model() const {
  SoftDeobfModel m;
  std::optional<SoftDeobfMode> mo = soft_deobf_mode_from_name(soft_mode);
  if (!mo) throw Error("unknown soft-deobf mode '" + soft_mode + "'");
  m.mode = *mo;
  m.per_branch_cost = soft_per_branch_cost;
  m.mask_lookup_cost = soft_mask_lookup_cost;
  return m;
}

ObfKey ToolConfig::require_key() const {
  if (!key) throw Error("no key given (pass --key or set `key` in the config file)");
  return *key;
}

}  // namespace drndalo
