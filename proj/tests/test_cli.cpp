#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

const fs::path& scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::current_path() / "cli_scratch";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << content;
}

// runs `drndalo <args>` through the shell, capturing both streams
RunResult run(const std::string& args, const std::string& env_prefix = "") {
  static int counter = 0;
  fs::path out = scratch() / ("out" + std::to_string(counter) + ".txt");
  fs::path err = scratch() / ("err" + std::to_string(counter) + ".txt");
  ++counter;
  std::string cmd = env_prefix + DRNDALO_BIN + " " + args + " >" + out.string() + " 2>" +
                    err.string();
  int rc = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string corpus(const std::string& name) {
  return std::string(CORPUS_DIR) + "/" + name;
}

nlohmann::json as_json(const std::string& text) {
  return nlohmann::json::parse(text);
}

const std::string kKey = "deadbeefcafef00d";

}  // namespace

TEST_CASE("help succeeds and lists the subcommands") {
  RunResult r = run("--help");
  CHECK(r.exit_code == 0);
  for (const char* sub :
       {"obfuscate", "deobfuscate", "sim", "soft-deobf", "stealth", "attack", "bench", "gen"})
    CHECK(r.out.find(sub) != std::string::npos);
}

TEST_CASE("usage mistakes exit with code 2, module failures with code 1") {
  CHECK(run("").exit_code == 2);                       // a subcommand is required
  CHECK(run("frobnicate").exit_code == 2);             // unknown subcommand
  CHECK(run("sim --no-such-flag x.s").exit_code == 2); // unknown flag

  RunResult missing = run("sim " + corpus("sum10.s") + " --design stall");
  CHECK(missing.exit_code == 1);  // stall design needs a key
  CHECK(missing.err.find("drndalo: error:") != std::string::npos);

  RunResult no_input = run("obfuscate --key " + kKey);
  CHECK(no_input.exit_code == 1);
  CHECK(no_input.err.find("no input file") != std::string::npos);

  fs::path bad = scratch() / "bad.s";
  spit(bad, "frob t0, t1, t2\n");
  RunResult parse = run("sim " + bad.string());
  CHECK(parse.exit_code == 1);
  CHECK(parse.err.find("bad.s") != std::string::npos);
  CHECK(parse.err.find("line 1") != std::string::npos);
}

TEST_CASE("scramble and restore round-trip through files under any key") {
  fs::path a_obf = scratch() / "gcd_a.s";
  fs::path a_back = scratch() / "gcd_back_a.s";
  fs::path b_obf = scratch() / "gcd_b.s";
  fs::path b_back = scratch() / "gcd_back_b.s";

  CHECK(run("obfuscate " + corpus("gcd.s") + " --key " + kKey + " -o " + a_obf.string())
            .exit_code == 0);
  CHECK(run("deobfuscate " + a_obf.string() + " --key " + kKey + " -o " + a_back.string())
            .exit_code == 0);
  CHECK(run("obfuscate " + corpus("gcd.s") + " --key 0123456789abcdef -o " + b_obf.string())
            .exit_code == 0);
  CHECK(run("deobfuscate " + b_obf.string() + " --key 0123456789abcdef -o " + b_back.string())
            .exit_code == 0);

  // both routes normalize to the same canonical text
  std::string a = slurp(a_back), b = slurp(b_back);
  REQUIRE(!a.empty());
  CHECK(a == b);
  // and different keys scrambled the file differently
  CHECK(slurp(a_obf) != slurp(b_obf));

  // without -o the program lands on stdout
  RunResult stdout_run = run("deobfuscate " + a_obf.string() + " --key " + kKey);
  CHECK(stdout_run.exit_code == 0);
  CHECK(stdout_run.out == a);
  RunResult dash = run("deobfuscate " + a_obf.string() + " --key " + kKey + " -o -");
  CHECK(dash.out == a);
}

TEST_CASE("masks written at scramble time drive key-free restoration") {
  fs::path obf = scratch() / "fib_obf.s";
  fs::path mask = scratch() / "fib.mask";
  fs::path by_key = scratch() / "fib_by_key.s";
  fs::path by_mask = scratch() / "fib_by_mask.s";

  CHECK(run("obfuscate " + corpus("fib.s") + " --key " + kKey + " -o " + obf.string() +
            " --emit-mask " + mask.string())
            .exit_code == 0);
  std::string mask_text = slurp(mask);
  CHECK(mask_text.rfind("# n=", 0) == 0);

  CHECK(run("deobfuscate " + obf.string() + " --key " + kKey + " -o " + by_key.string())
            .exit_code == 0);
  CHECK(run("deobfuscate " + obf.string() + " --mask " + mask.string() + " -o " +
            by_mask.string())
            .exit_code == 0);
  CHECK(slurp(by_key) == slurp(by_mask));

  RunResult both = run("deobfuscate " + obf.string() + " --mask " + mask.string() + " --key " +
                       kKey);
  CHECK(both.exit_code == 1);
  CHECK(both.err.find("either --mask or --key") != std::string::npos);

  RunResult runtime_needs_mask = run("deobfuscate " + obf.string() + " --runtime --key " + kKey);
  CHECK(runtime_needs_mask.exit_code == 1);
  CHECK(runtime_needs_mask.err.find("--runtime requires --mask") != std::string::npos);
}

TEST_CASE("the self-deobfuscating rewrite runs like the original") {
  fs::path obf = scratch() / "collatz_obf.s";
  fs::path mask = scratch() / "collatz.mask";
  fs::path rewritten = scratch() / "collatz_rt.s";
  CHECK(run("obfuscate " + corpus("collatz.s") + " --key " + kKey + " -o " + obf.string() +
            " --mask-out " + mask.string())
            .exit_code == 0);
  CHECK(run("deobfuscate " + obf.string() + " --mask " + mask.string() + " --runtime -o " +
            rewritten.string())
            .exit_code == 0);
  nlohmann::json plain = as_json(run("sim " + corpus("collatz.s")).out);
  nlohmann::json rt = as_json(run("sim " + rewritten.string()).out);
  CHECK(plain["exit_code"] == 111);
  CHECK(rt["exit_code"] == 111);
  CHECK(rt["status"] == "ok");
  CHECK(rt["instructions"].get<long>() > plain["instructions"].get<long>());
}

TEST_CASE("simulation reports frozen counts for the arithmetic demo") {
  RunResult r = run("sim " + corpus("sum10.s"));
  REQUIRE(r.exit_code == 0);
  nlohmann::json j = as_json(r.out);
  CHECK(j["cycles"] == 52);
  CHECK(j["instructions"] == 34);
  CHECK(j["taken_branches"] == 9);
  CHECK(j["stall_cycles"] == 0);
  CHECK(j["exit_code"] == 45);
  CHECK(j["status"] == "ok");
}

TEST_CASE("each hardware design is reachable from the command line") {
  fs::path obf = scratch() / "sum10_obf.s";
  fs::path mask = scratch() / "sum10.mask";
  REQUIRE(run("obfuscate " + corpus("sum10.s") + " --key " + kKey + " -o " + obf.string() +
              " --emit-mask " + mask.string())
              .exit_code == 0);
  nlohmann::json base = as_json(run("sim " + corpus("sum10.s")).out);

  nlohmann::json stall =
      as_json(run("sim " + obf.string() + " --design stall --key " + kKey).out);
  CHECK(stall["stall_cycles"] == 150);  // 10 dynamic branches, 15 cycles each
  CHECK(stall["exit_code"] == base["exit_code"]);
  CHECK(stall["trace_digest"] == base["trace_digest"]);

  nlohmann::json cache =
      as_json(run("sim " + obf.string() + " --design cache --key " + kKey).out);
  CHECK(cache["cache_misses"] == 1);
  CHECK(cache["cache_hits"] == 9);
  CHECK(cache["stall_cycles"] == 15);
  CHECK(cache["trace_digest"] == base["trace_digest"]);

  nlohmann::json masked =
      as_json(run("sim " + obf.string() + " --design mask --mask " + mask.string()).out);
  CHECK(masked["stall_cycles"] == 0);
  CHECK(masked["cycles"] == base["cycles"]);
  CHECK(masked["trace_digest"] == base["trace_digest"]);

  RunResult mask_missing = run("sim " + obf.string() + " --design mask");
  CHECK(mask_missing.exit_code == 1);
  CHECK(mask_missing.err.find("needs --mask") != std::string::npos);

  // custom latency: 8-cycle hash with 1 cycle hidden => 7 per branch
  nlohmann::json fast = as_json(
      run("sim " + obf.string() + " --design stall --key " + kKey + " --hash-cycles 8").out);
  CHECK(fast["stall_cycles"] == 70);
}

TEST_CASE("configuration flows from file and environment, flags win") {
  fs::path obf = scratch() / "sum10_obf2.s";
  REQUIRE(run("obfuscate " + corpus("sum10.s") + " --key " + kKey + " -o " + obf.string())
              .exit_code == 0);
  fs::path cfg = scratch() / "tool.cfg";
  spit(cfg,
       "# reusable settings\n"
       "sim.design = stall\n"
       "key = " + kKey + "\n");

  nlohmann::json from_file = as_json(run("sim " + obf.string() + " --config " + cfg.string()).out);
  CHECK(from_file["stall_cycles"] == 150);

  nlohmann::json from_env =
      as_json(run("sim " + obf.string(), "DRNDALO_CONFIG=" + cfg.string() + " ").out);
  CHECK(from_env["stall_cycles"] == 150);

  // a flag overrides the file: baseline design ignores the key entirely
  nlohmann::json overridden = as_json(
      run("sim " + corpus("sum10.s") + " --config " + cfg.string() + " --design baseline").out);
  CHECK(overridden["stall_cycles"] == 0);
  CHECK(overridden["cycles"] == 52);

  fs::path bad = scratch() / "bad.cfg";
  spit(bad, "sim.design = stall\nno_such_setting = 1\n");
  RunResult r = run("sim " + obf.string() + " --config " + bad.string());
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("unknown config key 'no_such_setting'") != std::string::npos);
  CHECK(r.err.find("bad.cfg:2") != std::string::npos);
}

TEST_CASE("software deobfuscation estimates arrive as JSON") {
  nlohmann::json rt = as_json(run("soft-deobf " + corpus("collatz.s") + " --mode runtime").out);
  CHECK(rt["mode"] == "runtime");
  CHECK(rt["extra_instructions"] == 1115);
  CHECK(rt["dynamic_branches"] == 223);
  CHECK(rt.contains("analytic_floor"));

  nlohmann::json jc = as_json(run("soft-deobf " + corpus("collatz.s")).out);
  CHECK(jc["mode"] == "jit-cached");  // the default
  CHECK(jc["extra_instructions"] == 20);
  CHECK_FALSE(jc.contains("analytic_floor"));

  nlohmann::json ju = as_json(
      run("soft-deobf " + corpus("collatz.s") + " --mode jit-uncached --per-branch-cost 4").out);
  CHECK(ju["extra_instructions"] == 4 * 223);
}

TEST_CASE("the classifier pipeline runs end to end from the command line") {
  RunResult single = run("stealth --synth 8 --synth-branches 24 --window 1 --key " + kKey);
  REQUIRE(single.exit_code == 0);
  nlohmann::json j = as_json(single.out);
  CHECK(j["model"] == "logreg");
  CHECK(j["window"] == 1);
  CHECK(j["accuracy"].is_number());
  CHECK(j["test_rows"].get<int>() > 0);

  RunResult sweep =
      run("stealth --synth 8 --synth-branches 24 --windows 1,2 --model tree --key " + kKey);
  REQUIRE(sweep.exit_code == 0);
  nlohmann::json arr = as_json(sweep.out);
  REQUIRE(arr.is_array());
  REQUIRE(arr.size() == 2);
  CHECK(arr[0]["window"] == 1);
  CHECK(arr[1]["window"] == 2);
  CHECK(arr[0]["model"] == "tree");

  fs::path dump = scratch() / "windows.csv";
  RunResult dumped = run("stealth --synth 8 --synth-branches 24 --window 1 --key " + kKey +
                         " --dump-dataset " + dump.string());
  REQUIRE(dumped.exit_code == 0);
  std::string ds = slurp(dump);
  CHECK(ds.find("synth0,0x") != std::string::npos);
  CHECK(ds.find("window:[") != std::string::npos);

  RunResult both = run("stealth " + corpus("gcd.s") + " --synth 4 --key " + kKey);
  CHECK(both.exit_code == 1);
  CHECK(both.err.find("either assembly files or --synth") != std::string::npos);
}

TEST_CASE("the attack subcommand reports reconstruction odds and behavioral divergence") {
  fs::path obf = scratch() / "gcd_attack.s";
  REQUIRE(run("obfuscate " + corpus("gcd.s") + " --key " + kKey + " -o " + obf.string())
              .exit_code == 0);

  nlohmann::json ex = as_json(run("attack " + corpus("gcd.s") + " " + obf.string()).out);
  CHECK(ex["mode"] == "exhaustive");  // the default without --trials
  CHECK(ex["successes"] == 1);

  nlohmann::json sampled = as_json(
      run("attack " + corpus("gcd.s") + " " + obf.string() + " --trials 2000 --seed 3").out);
  CHECK(sampled["mode"] == "sampled");
  CHECK(sampled["trials"] == 2000);

  nlohmann::json flagged = as_json(run("attack --plain " + corpus("gcd.s") + " --obf " +
                                       obf.string() + " --trials 50 --exhaustive")
                                       .out);
  CHECK(flagged["mode"] == "exhaustive");

  RunResult bad_mode = run("attack " + corpus("gcd.s") + " " + obf.string() + " --mode psychic");
  CHECK(bad_mode.exit_code == 1);
  CHECK(bad_mode.err.find("unknown attack mode") != std::string::npos);

  nlohmann::json self = as_json(
      run("attack " + corpus("input_gate.s") + " " + corpus("input_gate.s") + " --divergence")
          .out);
  CHECK(self["divergence"] == 0.0);
  CHECK(self["inputs"] == 16);
}

TEST_CASE("bench emits one CSV row per program and design") {
  RunResult r = run("bench " + corpus("sum10.s") + " " + corpus("gcd.s") + " --key " + kKey);
  REQUIRE(r.exit_code == 0);
  std::istringstream lines(r.out);
  std::string line;
  REQUIRE(std::getline(lines, line));
  CHECK(line ==
        "program,design,cycles,instructions,branches,stall_cycles,cache_hits,"
        "cache_misses,baseline_cycles,overhead");
  int rows = 0, baseline_rows = 0, mask_rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    if (line.find(",baseline,") != std::string::npos) {
      ++baseline_rows;
      CHECK(line.rfind(",0.000000") == line.size() - 9);
    }
    if (line.find(",mask,") != std::string::npos) {
      ++mask_rows;
      CHECK(line.rfind(",0.000000") == line.size() - 9);  // zero overhead by design
    }
  }
  CHECK(rows == 8);  // 2 programs x 4 designs
  CHECK(baseline_rows == 2);
  CHECK(mask_rows == 2);
  CHECK(r.out.find("sum10,stall,") != std::string::npos);
  CHECK(r.out.find("gcd,cache,") != std::string::npos);
}

TEST_CASE("generated corpora land on disk ready for the other subcommands") {
  fs::path dir = scratch() / "gen_corpus";
  RunResult r = run("gen -o " + dir.string() + " --programs 3 --branches 6 --seed 11");
  REQUIRE(r.exit_code == 0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".s") ++files;
  CHECK(files == 3);
  // the generated text is accepted by the rest of the tool
  CHECK(run("obfuscate " + (dir / "synth0.s").string() + " --key " + kKey).exit_code == 0);
  CHECK(run("sim " + (dir / "synth1.s").string() + " --max-cycles 100000").exit_code == 0);

  RunResult skew = run("gen -o " + dir.string() + " --skew-heavy blt");
  CHECK(skew.exit_code == 1);
  CHECK(skew.err.find("--skew-heavy and --skew-light go together") != std::string::npos);

  RunResult bad = run("gen -o " + dir.string() + " --skew-heavy addi --skew-light bge");
  CHECK(bad.exit_code == 1);
  CHECK(bad.err.find("bad --skew-heavy") != std::string::npos);
}
