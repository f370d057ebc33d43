// drndalo: obfuscate programs by keyed conditional-branch inversion, undo the
// transform (statically, or in a simulated pipelined processor), and measure
// what the secrecy costs in cycles and what it leaks to classifiers.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "drndalo/attack.hpp"
#include "drndalo/config.hpp"
#include "drndalo/hash.hpp"
#include "drndalo/isa.hpp"
#include "drndalo/mask.hpp"
#include "drndalo/obfuscate.hpp"
#include "drndalo/parallel.hpp"
#include "drndalo/pipeline.hpp"
#include "drndalo/soft_deobf.hpp"
#include "drndalo/stealth.hpp"
#include "drndalo/synth.hpp"

namespace {

using namespace drndalo;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
}

// "-" or an empty path means stdout
void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-")
    std::cout << content;
  else
    write_file(path, content);
}

std::string stem_of(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

Program load_program(const std::string& path) {
  if (path.empty()) throw Error("no input file (pass it positionally or with --in)");
  try {
    return parse_asm(read_file(path));
  } catch (const ParseError& e) {
    throw Error(path + ": " + e.what());  // what() already names the line
  }
}

u64 parse_number_arg(const std::string& s, const std::string& what) {
  try {
    size_t pos = 0;
    u64 v = std::stoull(s, &pos, 0);
    if (pos != s.size()) throw std::invalid_argument("junk");
    return v;
  } catch (const std::exception&) {
    throw Error("bad " + what + ": '" + s + "'");
  }
}

unsigned jobs_of(const ToolConfig& tool) {
  return tool.jobs <= 0 ? 0u : static_cast<unsigned>(tool.jobs);
}

}  // namespace

int main(int argc, char** argv) {
  ToolConfig tool;

  // The config file is applied before flag parsing so flags win over it.
  try {
    std::string config_path;
    for (int i = 1; i < argc; ++i) {
      std::string a = argv[i];
      if (a == "--config" && i + 1 < argc)
        config_path = argv[i + 1];
      else if (a.rfind("--config=", 0) == 0)
        config_path = a.substr(9);
    }
    if (const char* env = std::getenv("DRNDALO_CONFIG")) tool = load_config_file(env, tool);
    if (!config_path.empty()) tool = load_config_file(config_path, tool);
  } catch (const std::exception& e) {
    std::cerr << "drndalo: error: " << e.what() << "\n";
    return 1;
  }

  CLI::App app{"keyed conditional-branch inversion toolchain"};
  app.require_subcommand(1);
  app.fallthrough();  // lets --config appear after the subcommand too
  std::string config_flag;
  app.add_option("--config", config_flag,
                 "config file (also read from $DRNDALO_CONFIG); flags override it");

  // Shared option storage; only one subcommand ever runs.
  std::string key_hex, taps_str, out_path, mask_path;
  auto add_key = [&](CLI::App* sub) {
    sub->add_option("--key", key_hex, "obfuscation key, 16 hex digits");
  };
  auto add_scheme = [&](CLI::App* sub) {
    sub->add_option("--scheme", tool.scheme, "decision scheme: lfsr or mix64")
        ->capture_default_str();
    sub->add_option("--lfsr-n", tool.lfsr_n, "LFSR register count")->capture_default_str();
    sub->add_option("--lfsr-k", tool.lfsr_k, "LFSR cycles per decision")->capture_default_str();
    sub->add_option("--lfsr-taps", taps_str, "LFSR feedback taps (e.g. 0x2d)");
  };
  auto add_out = [&](CLI::App* sub, const char* what) {
    sub->add_option("-o,--out,--report", out_path, what);
  };
  // every file-transforming subcommand takes its input positionally or as --in
  auto add_input = [&](CLI::App* sub, std::string& var) {
    sub->add_option("input", var, "assembly file");
    sub->add_option("--in", var, "assembly file (same as the positional)");
  };
  auto finish_overrides = [&]() {
    if (!key_hex.empty()) tool.key = ObfKey::from_hex(key_hex);
    if (!taps_str.empty()) tool.lfsr_taps = parse_number_arg(taps_str, "--lfsr-taps");
  };

  // ---- obfuscate ------------------------------------------------------
  auto* obf = app.add_subcommand("obfuscate", "invert branches selected by the keyed scheme");
  std::string obf_input, obf_mask_out;
  add_input(obf, obf_input);
  add_out(obf, "obfuscated assembly (default stdout)");
  obf->add_option("--mask-out,--emit-mask", obf_mask_out, "also record the inversion mask here");
  add_key(obf);
  add_scheme(obf);
  obf->callback([&] {
    finish_overrides();
    Program p = load_program(obf_input);
    ObfResult res = obfuscate(p, tool.hash_scheme(), tool.require_key());
    emit(out_path, print_asm(res.program));
    if (!obf_mask_out.empty()) write_file(obf_mask_out, format_mask(res.mask));
  });

  // ---- deobfuscate ----------------------------------------------------
  auto* deobf = app.add_subcommand(
      "deobfuscate", "restore a program with the key, or apply/embed an explicit mask");
  std::string deobf_input;
  bool runtime = false;
  add_input(deobf, deobf_input);
  add_out(deobf, "output assembly (default stdout)");
  deobf->add_option("--mask,--mask-file", mask_path,
                    "inversion mask file (instead of recomputing from the key)");
  deobf->add_flag("--runtime", runtime,
                  "emit a self-deobfuscating rewrite that consults an embedded mask table "
                  "(requires --mask)");
  add_key(deobf);
  add_scheme(deobf);
  deobf->callback([&] {
    finish_overrides();
    Program p = load_program(deobf_input);
    if (runtime && mask_path.empty()) throw Error("--runtime requires --mask");
    if (!mask_path.empty() && !key_hex.empty())
      throw Error("give either --mask or --key, not both");
    if (!mask_path.empty()) {
      InversionMask m = parse_mask(read_file(mask_path));
      if (runtime) {
        RuntimeDeobfResult r = emit_runtime_deobf(p, m);
        emit(out_path, print_asm(r.program));
      } else {
        emit(out_path, print_asm(apply_mask(p, m)));
      }
    } else {
      emit(out_path, print_asm(deobfuscate(p, tool.hash_scheme(), tool.require_key())));
    }
  });

  // ---- sim ------------------------------------------------------------
  auto* sim = app.add_subcommand("sim", "run a program on one of the pipeline designs");
  std::string sim_input;
  add_input(sim, sim_input);
  sim->add_option("--design", tool.sim_design, "baseline | stall | cache | mask")
      ->capture_default_str();
  sim->add_option("--mask,--mask-file", mask_path, "inversion mask file (mask design)");
  sim->add_option("--hash-cycles", tool.sim_hash_cycles, "hash latency in cycles")
      ->capture_default_str();
  sim->add_option("--cache-lines", tool.sim_cache_lines, "decision-cache lines (power of two)")
      ->capture_default_str();
  sim->add_option("--branch-penalty", tool.sim_branch_penalty, "cycles per taken branch")
      ->capture_default_str();
  sim->add_option("--overlap", tool.sim_overlap, "hash cycles hidden by decode-execute overlap")
      ->capture_default_str();
  sim->add_option("--max-cycles", tool.sim_max_cycles, "cycle budget before giving up")
      ->capture_default_str();
  add_key(sim);
  add_scheme(sim);
  add_out(sim, "JSON report (default stdout)");
  sim->callback([&] {
    finish_overrides();
    Program p = load_program(sim_input);
    SimConfig sc = tool.sim_config();
    if (sc.design == Design::StalledHash || sc.design == Design::CachedHash) {
      sc.scheme = tool.hash_scheme();
      sc.key = tool.require_key();
    } else if (sc.design == Design::MaskBased) {
      if (mask_path.empty()) throw Error("the mask design needs --mask");
      sc.mask = parse_mask(read_file(mask_path));
    }
    emit(out_path, simulate(p, sc).to_json() + "\n");
  });

  // ---- soft-deobf -----------------------------------------------------
  auto* soft = app.add_subcommand("soft-deobf",
                                  "estimate the cost of undoing the transform in software");
  std::string soft_input;
  add_input(soft, soft_input);
  soft->add_option("--mode", tool.soft_mode, "jit-cached | jit-uncached | runtime")
      ->capture_default_str();
  soft->add_option("--per-branch-cost", tool.soft_per_branch_cost,
                   "instructions charged per deobfuscation event")
      ->capture_default_str();
  soft->add_option("--mask-lookup-cost", tool.soft_mask_lookup_cost,
                   "instructions per mask load-and-compare (analytic floor)")
      ->capture_default_str();
  soft->add_option("--max-cycles", tool.sim_max_cycles, "cycle budget")->capture_default_str();
  add_out(soft, "JSON report (default stdout)");
  soft->callback([&] {
    Program p = load_program(soft_input);
    SimConfig base;
    base.max_cycles = tool.sim_max_cycles;
    SimReport baseline = simulate(p, base);
    if (baseline.status != SimStatus::Ok)
      throw Error("baseline run did not finish cleanly: " +
                  (baseline.status == SimStatus::TimedOut ? std::string("cycle budget exhausted")
                                                          : baseline.trap_message));
    emit(out_path, estimate_overhead(p, tool.soft_model(), baseline).to_json() + "\n");
  });

  // ---- stealth --------------------------------------------------------
  auto* stealth = app.add_subcommand(
      "stealth", "train a classifier to spot inverted branches and report its accuracy");
  std::vector<std::string> stealth_inputs;
  std::vector<int> windows;
  std::string dump_dataset;
  int synth_programs = 0, synth_branches = 64;
  u64 synth_seed = 1;
  stealth->add_option("inputs", stealth_inputs, "assembly files (>= 4 programs)");
  stealth->add_option("--synth", synth_programs,
                      "generate this many synthetic programs instead of reading files");
  stealth->add_option("--synth-branches", synth_branches, "branches per synthetic program")
      ->capture_default_str();
  stealth->add_option("--synth-seed", synth_seed, "generator seed")->capture_default_str();
  stealth->add_option("--window", tool.stealth_window, "instructions per sample window")
      ->capture_default_str();
  stealth->add_option("--windows", windows, "sweep these window sizes (comma separated)")
      ->delimiter(',');
  stealth->add_option("--model", tool.stealth_model, "logreg | tree")->capture_default_str();
  stealth->add_option("--split-seed", tool.stealth_split_seed, "train/test split seed")
      ->capture_default_str();
  stealth->add_option("--dump-dataset", dump_dataset, "also write the labelled windows here");
  stealth->add_option("--jobs", tool.jobs, "worker threads (0 = all cores)")
      ->capture_default_str();
  add_key(stealth);
  add_scheme(stealth);
  add_out(stealth, "JSON report (default stdout)");
  stealth->callback([&] {
    finish_overrides();
    std::vector<NamedProgram> corpus;
    if (synth_programs > 0) {
      if (!stealth_inputs.empty())
        throw Error("give either assembly files or --synth, not both");
      corpus = synth_corpus(SynthConfig::uniform(synth_seed, synth_programs, synth_branches));
    } else {
      for (const std::string& path : stealth_inputs)
        corpus.emplace_back(stem_of(path), load_program(path));
    }
    if (corpus.empty()) throw Error("no input programs (pass files or --synth N)");
    HashScheme scheme = tool.hash_scheme();
    ObfKey key = tool.require_key();
    std::optional<ClassifierKind> kind = classifier_from_name(tool.stealth_model);
    if (!kind) throw Error("unknown model '" + tool.stealth_model + "'");
    if (!windows.empty()) {
      std::vector<ClassifierReport> reports = window_sweep(
          corpus, scheme, key, windows, tool.stealth_split_seed, *kind, jobs_of(tool));
      nlohmann::json arr = nlohmann::json::array();
      for (const ClassifierReport& r : reports) arr.push_back(nlohmann::json::parse(r.to_json()));
      emit(out_path, arr.dump(2) + "\n");
      return;
    }
    Dataset ds = build_dataset(corpus, scheme, key, tool.stealth_window, jobs_of(tool));
    if (!dump_dataset.empty()) write_file(dump_dataset, format_dataset(ds));
    SplitSets sets = preprocess(ds, tool.stealth_split_seed);
    ClassifierReport rep = train_and_evaluate(sets, *kind, tool.stealth_window);
    emit(out_path, rep.to_json() + "\n");
  });

  // ---- attack ---------------------------------------------------------
  auto* attack = app.add_subcommand(
      "attack", "try to restore the plain program from the obfuscated one without the key");
  std::string attack_plain, attack_obf, attack_mode;
  bool divergence = false, exhaustive_flag = false;
  attack->add_option("PLAIN", attack_plain, "plain assembly file");
  attack->add_option("OBF", attack_obf, "obfuscated assembly file");
  attack->add_option("--plain", attack_plain, "plain assembly file (same as positional)");
  attack->add_option("--obf", attack_obf, "obfuscated assembly file (same as positional)");
  attack->add_option("--mode", attack_mode, "exhaustive | sampled");
  attack->add_flag("--exhaustive", exhaustive_flag, "same as --mode exhaustive");
  attack->add_option("--trials", tool.attack_trials,
                     "samples (implies sampled mode unless --exhaustive)")
      ->capture_default_str();
  attack->add_option("--seed", tool.attack_seed, "sampling seed")->capture_default_str();
  attack->add_flag("--divergence", divergence,
                   "instead, measure how often the two programs behave differently");
  attack->add_option("--inputs", tool.attack_inputs, "inputs tried for --divergence")
      ->capture_default_str();
  attack->add_option("--max-cycles", tool.sim_max_cycles, "cycle budget per run")
      ->capture_default_str();
  add_out(attack, "JSON report (default stdout)");
  attack->callback([&] {
    Program plain = load_program(attack_plain);
    Program obfp = load_program(attack_obf);
    if (divergence) {
      if (tool.attack_inputs == 0) throw Error("--inputs must be positive");
      std::mt19937_64 rng(tool.attack_seed);
      std::vector<u32> inputs(tool.attack_inputs);
      for (u32& v : inputs) v = static_cast<u32>(rng());
      emit(out_path,
           measure_divergence(plain, obfp, inputs, tool.sim_max_cycles).to_json() + "\n");
      return;
    }
    AttackMode mode;
    if (!attack_mode.empty()) {
      if (attack_mode == "exhaustive")
        mode = AttackMode::Exhaustive;
      else if (attack_mode == "sampled")
        mode = AttackMode::Sampled;
      else
        throw Error("unknown attack mode '" + attack_mode + "'");
    } else if (exhaustive_flag) {
      mode = AttackMode::Exhaustive;
    } else {
      // an explicit trial count selects sampling; otherwise enumerate
      mode = attack->count("--trials") ? AttackMode::Sampled : AttackMode::Exhaustive;
    }
    emit(out_path,
         brute_force(obfp, plain, mode, tool.attack_trials, tool.attack_seed).to_json() + "\n");
  });

  // ---- bench ----------------------------------------------------------
  auto* bench = app.add_subcommand(
      "bench", "obfuscate each program and compare all pipeline designs (CSV)");
  std::vector<std::string> bench_inputs;
  bench->add_option("inputs", bench_inputs, "assembly files")->required();
  bench->add_option("--hash-cycles", tool.sim_hash_cycles, "hash latency in cycles")
      ->capture_default_str();
  bench->add_option("--cache-lines", tool.sim_cache_lines, "decision-cache lines")
      ->capture_default_str();
  bench->add_option("--branch-penalty", tool.sim_branch_penalty, "cycles per taken branch")
      ->capture_default_str();
  bench->add_option("--overlap", tool.sim_overlap, "hash cycles hidden by the pipeline")
      ->capture_default_str();
  bench->add_option("--max-cycles", tool.sim_max_cycles, "cycle budget per run")
      ->capture_default_str();
  bench->add_option("--jobs", tool.jobs, "worker threads (0 = all cores)")
      ->capture_default_str();
  add_key(bench);
  add_scheme(bench);
  add_out(bench, "CSV output (default stdout)");
  bench->callback([&] {
    finish_overrides();
    HashScheme scheme = tool.hash_scheme();
    ObfKey key = tool.require_key();
    std::vector<std::string> blocks(bench_inputs.size());
    parallel_for(bench_inputs.size(), jobs_of(tool), [&](size_t i) {
      const std::string& path = bench_inputs[i];
      Program p = load_program(path);
      ObfResult res = obfuscate(p, scheme, key);
      SimConfig base = tool.sim_config();
      base.design = Design::Baseline;
      SimReport baseline = simulate(p, base);
      std::ostringstream csv;
      auto row = [&](Design d, const SimReport& r) {
        double ovh = d == Design::Baseline ? 0.0 : overhead(r, baseline);
        char ovh_s[32];
        std::snprintf(ovh_s, sizeof ovh_s, "%.6f", ovh);
        csv << stem_of(path) << ',' << design_name(d) << ',' << r.cycles << ','
            << r.instructions << ',' << r.branches << ',' << r.stall_cycles << ','
            << r.cache_hits << ',' << r.cache_misses << ',' << baseline.cycles << ','
            << ovh_s << '\n';
      };
      row(Design::Baseline, baseline);
      for (Design d : {Design::StalledHash, Design::CachedHash, Design::MaskBased}) {
        SimConfig sc = tool.sim_config();
        sc.design = d;
        if (d == Design::MaskBased) {
          sc.mask = res.mask;
        } else {
          sc.scheme = scheme;
          sc.key = key;
        }
        row(d, simulate(res.program, sc));
      }
      blocks[i] = csv.str();
    });
    std::ostringstream all;
    all << "program,design,cycles,instructions,branches,stall_cycles,cache_hits,"
           "cache_misses,baseline_cycles,overhead\n";
    for (const std::string& b : blocks) all << b;
    emit(out_path, all.str());
  });

  // ---- gen ------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "write a synthetic corpus for experiments");
  std::string gen_dir;
  int gen_programs = 8, gen_branches = 64;
  u64 gen_seed = 1;
  std::string skew_heavy, skew_light;
  double skew_weight = 0.8;
  gen->add_option("-o,--out", gen_dir, "output directory")->required();
  gen->add_option("--programs", gen_programs, "programs to generate")->capture_default_str();
  gen->add_option("--branches", gen_branches, "branches per program")->capture_default_str();
  gen->add_option("--seed", gen_seed, "generator seed")->capture_default_str();
  gen->add_option("--skew-heavy", skew_heavy, "favored branch mnemonic (e.g. blt)");
  gen->add_option("--skew-light", skew_light, "rare branch mnemonic (e.g. bge)");
  gen->add_option("--skew-weight", skew_weight, "probability mass of the favored kind")
      ->capture_default_str();
  gen->callback([&] {
    SynthConfig cfg;
    if (!skew_heavy.empty() || !skew_light.empty()) {
      if (skew_heavy.empty() || skew_light.empty())
        throw Error("--skew-heavy and --skew-light go together");
      std::optional<Opcode> heavy = opcode_from_name(skew_heavy);
      std::optional<Opcode> light = opcode_from_name(skew_light);
      if (!heavy || !is_cond_branch(*heavy)) throw Error("bad --skew-heavy '" + skew_heavy + "'");
      if (!light || !is_cond_branch(*light)) throw Error("bad --skew-light '" + skew_light + "'");
      cfg = SynthConfig::skewed(gen_seed, gen_programs, gen_branches, *heavy, *light,
                                skew_weight);
    } else {
      cfg = SynthConfig::uniform(gen_seed, gen_programs, gen_branches);
    }
    std::filesystem::create_directories(gen_dir);
    for (const NamedProgram& np : synth_corpus(cfg)) {
      std::string path = (std::filesystem::path(gen_dir) / (np.first + ".s")).string();
      write_file(path, print_asm(np.second));
      std::cout << path << "\n";
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "drndalo: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
