#include "drndalo/soft_deobf.hpp"

#include <nlohmann/json.hpp>

#include "drndalo/obfuscate.hpp"

namespace drndalo {

const char* soft_deobf_mode_name(SoftDeobfMode m) {
  switch (m) {
    case SoftDeobfMode::JitCached: return "jit-cached";
    case SoftDeobfMode::JitUncached: return "jit-uncached";
    case SoftDeobfMode::Runtime: return "runtime";
  }
  return "?";
}

std::optional<SoftDeobfMode> soft_deobf_mode_from_name(const std::string& name) {
  if (name == "jit-cached") return SoftDeobfMode::JitCached;
  if (name == "jit-uncached") return SoftDeobfMode::JitUncached;
  if (name == "runtime") return SoftDeobfMode::Runtime;
  return std::nullopt;
}

SoftDeobfReport estimate_overhead(const Program& p, const SoftDeobfModel& model,
                                  const SimReport& baseline) {
  if (baseline.status != SimStatus::Ok)
    throw Error("soft-deobf: baseline run did not complete");
  if (baseline.instructions == 0) throw Error("soft-deobf: empty baseline run");

  SoftDeobfReport r;
  r.mode = model.mode;
  r.baseline_instructions = baseline.instructions;
  r.dynamic_branches = baseline.branches;
  r.distinct_branches = baseline.distinct_branches;

  switch (model.mode) {
    case SoftDeobfMode::JitCached:
      r.extra_instructions = static_cast<u64>(model.per_branch_cost) * baseline.distinct_branches;
      break;
    case SoftDeobfMode::JitUncached:
      r.extra_instructions = static_cast<u64>(model.per_branch_cost) * baseline.branches;
      break;
    case SoftDeobfMode::Runtime: {
      InversionMask zeros;
      for (u32 a : p.branch_addresses()) zeros.entries[a] = 0;
      RuntimeDeobfResult rt = emit_runtime_deobf(p, zeros);
      SimConfig cfg;
      SimReport run = simulate(rt.program, cfg);
      if (run.status != SimStatus::Ok)
        throw Error("soft-deobf: rewritten program did not complete");
      if (run.exit_code != baseline.exit_code || run.output_bytes != baseline.output_bytes)
        throw Error("soft-deobf: rewritten program diverged from the baseline");
      r.extra_instructions = run.instructions - baseline.instructions;
      r.analytic_floor = static_cast<double>(model.mask_lookup_cost) *
                         static_cast<double>(baseline.branches) /
                         static_cast<double>(baseline.instructions);
      break;
    }
  }
  r.overhead = static_cast<double>(r.extra_instructions) /
               static_cast<double>(baseline.instructions);
  return r;
}

std::string SoftDeobfReport::to_json() const {
  nlohmann::json j;
  j["mode"] = soft_deobf_mode_name(mode);
  j["baseline_instructions"] = baseline_instructions;
  j["dynamic_branches"] = dynamic_branches;
  j["distinct_branches"] = distinct_branches;
  j["extra_instructions"] = extra_instructions;
  j["overhead"] = overhead;
  if (mode == SoftDeobfMode::Runtime) j["analytic_floor"] = analytic_floor;
  return j.dump(2);
}

}  // namespace drndalo
