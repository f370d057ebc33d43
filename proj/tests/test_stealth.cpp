#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "drndalo/obfuscate.hpp"
#include "drndalo/stealth.hpp"
#include "drndalo/synth.hpp"

using namespace drndalo;

namespace {

const ObfKey kKey{0xdeadbeefcafef00dull};

HashScheme lfsr16() { return LfsrScheme{LfsrConfig::cycles16()}; }

// a one-slot sample with a given branch opcode and label
BbblSample quick_sample(const std::string& id, u32 addr, Opcode branch, int label) {
  BbblSample s;
  s.program_id = id;
  s.branch_address = addr;
  WindowSlot w;
  w.opcode = branch;
  w.rs1 = 5;
  w.rs2 = 6;
  w.rd = -1;
  s.window.push_back(w);
  s.br_up = 0;
  s.label = label;
  return s;
}

// 4 programs, each with 6 label-0 rows and 2 label-1 rows; whatever program
// the split sends to test, the class counts per side are the same
Dataset fixed_count_dataset() {
  Dataset ds;
  ds.window = 1;
  for (int p = 0; p < 4; ++p) {
    std::string id = "p" + std::to_string(p);
    for (int i = 0; i < 6; ++i)
      ds.samples.push_back(quick_sample(id, static_cast<u32>(16 * i), Opcode::Beq, 0));
    for (int i = 0; i < 2; ++i)
      ds.samples.push_back(quick_sample(id, static_cast<u32>(256 + 16 * i), Opcode::Bne, 1));
  }
  return ds;
}

size_t count_ones(const EncodedSet& s) {
  return static_cast<size_t>(std::accumulate(s.y.begin(), s.y.end(), 0));
}

}  // namespace

TEST_CASE("a dataset holds one labelled row per branch of the scrambled and plain programs") {
  std::vector<NamedProgram> corpus = synth_corpus(SynthConfig::uniform(1, 6, 32));
  REQUIRE(corpus.size() == 6);
  Dataset ds = build_dataset(corpus, lfsr16(), kKey, 1);
  CHECK(ds.window == 1);

  size_t total_branches = 0;
  std::map<std::string, InversionMask> masks;
  for (const auto& [id, p] : corpus) {
    total_branches += p.branch_addresses().size();
    masks[id] = obfuscate(p, lfsr16(), kKey).mask;
  }
  CHECK(ds.samples.size() == 2 * total_branches);

  // the first half of each program's rows carries the mask bits, the second
  // half is the plain program (all zeros); verify by re-deriving the mask
  size_t obf_rows = 0, plain_rows = 0;
  std::map<std::string, std::map<u32, int>> seen;
  for (const BbblSample& s : ds.samples) {
    if (seen[s.program_id].count(s.branch_address) == 0) {
      // first occurrence: the obfuscated program's row
      CHECK(s.label == masks.at(s.program_id).bit(s.branch_address));
      seen[s.program_id][s.branch_address] = 1;
      ++obf_rows;
    } else {
      CHECK(s.label == 0);
      ++plain_rows;
    }
    REQUIRE(!s.window.empty());
    CHECK(is_cond_branch(s.window.back().opcode));
  }
  CHECK(obf_rows == total_branches);
  CHECK(plain_rows == total_branches);
}

TEST_CASE("scrambled rows show the flipped opcode, plain rows the original") {
  Program p = parse_asm(
      "  addi t0, zero, 5\n"
      "loop:\n"
      "  addi t0, t0, -1\n"
      "  bne  t0, zero, loop\n"
      "  ecall\n");
  // pick a key/scheme replay where the only branch is inverted
  InversionMask flip;
  flip.entries[8] = 1;
  Dataset ds = build_dataset({{"p", p}}, MaskScheme{flip}, ObfKey{0}, 1);
  REQUIRE(ds.samples.size() == 2);
  CHECK(ds.samples[0].label == 1);
  CHECK(ds.samples[0].window.back().opcode == Opcode::Beq);  // inverted in the text
  CHECK(ds.samples[1].label == 0);
  CHECK(ds.samples[1].window.back().opcode == Opcode::Bne);
}

TEST_CASE("the branch-direction bit distinguishes backward from forward targets") {
  Program p = parse_asm(
      "loop:\n"
      "  addi t0, t0, 1\n"
      "  blt  t0, t1, loop\n"   // backward
      "  beq  t0, t1, skip\n"   // forward
      "skip:\n"
      "  ecall\n");
  Dataset ds = build_dataset({{"p", p}}, lfsr16(), kKey, 1);
  std::map<u32, int> up;
  for (const BbblSample& s : ds.samples) up[s.branch_address] = s.br_up;
  CHECK(up.at(4) == 1);
  CHECK(up.at(8) == 0);
}

TEST_CASE("windows stop at the basic-block boundary") {
  Program p = parse_asm(
      "  addi t0, zero, 5\n"    // 0x0: bootstrap, outside the loop block
      "loop:\n"
      "  addi t0, t0, -1\n"     // 0x4: jump target => block leader
      "  addi t1, t1, 1\n"      // 0x8
      "  bne  t0, zero, loop\n" // 0xc: window may reach back only to 0x4
      "  ecall\n");
  Dataset ds = build_dataset({{"p", p}}, lfsr16(), kKey, 4);
  for (const BbblSample& s : ds.samples) {
    REQUIRE(s.window.size() == 3);  // capped by the leader at 0x4
    CHECK(s.window[0].opcode == Opcode::Addi);
    CHECK(s.window[1].opcode == Opcode::Addi);
    CHECK(is_cond_branch(s.window[2].opcode));
  }

  // a branch that opens its own block sees only itself
  Program q = parse_asm(
      "loop:\n"
      "  beq t0, t1, loop\n"
      "  ecall\n");
  Dataset dq = build_dataset({{"q", q}}, lfsr16(), kKey, 4);
  for (const BbblSample& s : dq.samples) CHECK(s.window.size() == 1);

  CHECK_THROWS_AS(build_dataset({{"q", q}}, lfsr16(), kKey, 0), Error);
}

TEST_CASE("feature rows are one-hot per slot plus a direction bit") {
  constexpr size_t kSlotWidth = 33 + 3 * 33;  // opcode group + rs1/rs2/rd groups
  CHECK(feature_width(1) == kSlotWidth + 1);
  CHECK(feature_width(4) == 4 * kSlotWidth + 1);

  BbblSample s = quick_sample("p", 0x10, Opcode::Beq, 1);
  s.br_up = 1;
  std::vector<u8> row(feature_width(2), 0xff);
  encode_sample(s, 2, row.data());

  // slot 0 is the branch: opcode one-hot, rs1=5, rs2=6, rd absent
  CHECK(row[static_cast<size_t>(Opcode::Beq)] == 1);
  CHECK(row[33 + 5] == 1);
  CHECK(row[33 + 33 + 6] == 1);
  CHECK(row[33 + 2 * 33 + 32] == 1);
  // slot 1 is beyond the recorded window: all-absent markers
  const size_t b = kSlotWidth;
  CHECK(row[b + 32] == 1);
  CHECK(row[b + 33 + 32] == 1);
  CHECK(row[b + 33 + 33 + 32] == 1);
  CHECK(row[b + 33 + 2 * 33 + 32] == 1);
  // direction bit last; exactly 4 marks per slot plus the direction bit
  CHECK(row[feature_width(2) - 1] == 1);
  CHECK(std::accumulate(row.begin(), row.end(), 0) == 4 + 4 + 1);
}

TEST_CASE("the text dump is one comma-separated line per sample") {
  Dataset ds;
  ds.window = 1;
  ds.samples.push_back(quick_sample("demo", 0x24, Opcode::Bltu, 1));
  ds.samples[0].br_up = 1;
  CHECK(format_dataset(ds) == "demo,0x00000024,1,1,window:[bltu;5;6;-]\n");
}

TEST_CASE("the split rebalances classes by thinning plain-labelled training rows") {
  Dataset ds = fixed_count_dataset();
  for (u64 seed : {1ull, 2ull, 5ull}) {
    CAPTURE(seed);
    SplitSets sets = preprocess(ds, seed);
    CHECK(sets.test_programs == 1);
    CHECK(sets.train_programs == 3);
    // the test side is untouched: one whole program, 8 rows, 2 of them label-1
    CHECK(sets.test.rows == 8);
    CHECK(count_ones(sets.test) == 2);
    // training: 3 programs hold 18 label-0 rows, thinned to 6, plus 6 label-1
    CHECK(sets.train.rows == 12);
    CHECK(count_ones(sets.train) == 6);
    CHECK(sets.train.cols == feature_width(1));
    CHECK(sets.test.cols == feature_width(1));
  }
}

TEST_CASE("splits are deterministic in the seed") {
  std::vector<NamedProgram> corpus = synth_corpus(SynthConfig::uniform(3, 8, 16));
  Dataset ds = build_dataset(corpus, lfsr16(), kKey, 2);
  SplitSets a = preprocess(ds, 7);
  SplitSets b = preprocess(ds, 7);
  CHECK(a.train.x == b.train.x);
  CHECK(a.train.y == b.train.y);
  CHECK(a.test.x == b.test.x);
  CHECK(a.test.y == b.test.y);
  // 8 programs: a quarter (2) go to the test side
  CHECK(a.test_programs == 2);
  CHECK(a.train_programs == 6);
}

TEST_CASE("degenerate corpora are rejected") {
  Dataset small;
  small.window = 1;
  for (int p = 0; p < 3; ++p)
    small.samples.push_back(quick_sample("p" + std::to_string(p), 0, Opcode::Beq, p % 2));
  CHECK_THROWS_WITH_AS(preprocess(small, 1),
                       "corpus too small for a program-disjoint split (need >= 4 programs)",
                       Error);

  Dataset onesided;
  onesided.window = 1;
  for (int p = 0; p < 4; ++p)
    for (int i = 0; i < 4; ++i)
      onesided.samples.push_back(
          quick_sample("p" + std::to_string(p), static_cast<u32>(16 * i), Opcode::Beq, 0));
  CHECK_THROWS_WITH_AS(preprocess(onesided, 1),
                       "a class is absent from the training set after subsampling", Error);
}

TEST_CASE("dataset construction is identical across worker counts") {
  std::vector<NamedProgram> corpus = synth_corpus(SynthConfig::uniform(5, 8, 24));
  Dataset serial = build_dataset(corpus, lfsr16(), kKey, 3, 1);
  Dataset threaded = build_dataset(corpus, lfsr16(), kKey, 3, 4);
  CHECK(format_dataset(serial) == format_dataset(threaded));
}

TEST_CASE("both models master a dataset whose labels follow the opcode") {
  // label 1 iff the branch is a bne: linearly separable on one feature
  Dataset ds;
  ds.window = 1;
  for (int p = 0; p < 8; ++p) {
    std::string id = "p" + std::to_string(p);
    for (int i = 0; i < 12; ++i) {
      Opcode op = (i % 3 == 0) ? Opcode::Bne : Opcode::Beq;
      ds.samples.push_back(
          quick_sample(id, static_cast<u32>(16 * i), op, op == Opcode::Bne ? 1 : 0));
    }
  }
  SplitSets sets = preprocess(ds, 1);
  ClassifierReport lr = train_and_evaluate(sets, ClassifierKind::LogReg, 1);
  ClassifierReport dt = train_and_evaluate(sets, ClassifierKind::DecisionTree, 1, {}, {8, 1});
  CHECK(lr.accuracy >= 0.99);
  CHECK(dt.accuracy >= 0.99);
  CHECK(lr.tp + lr.tn + lr.fp + lr.fn == lr.test_rows);
  CHECK(lr.test_rows == sets.test.rows);
  CHECK(lr.model == ClassifierKind::LogReg);
  CHECK(dt.model == ClassifierKind::DecisionTree);
}

TEST_CASE("a lopsided branch mix leaks through the mask") {
  // 80% blt / 20% bge: inverted sites show up as unusually frequent bge
  std::vector<NamedProgram> corpus =
      synth_corpus(SynthConfig::skewed(3, 12, 64, Opcode::Blt, Opcode::Bge, 0.8));
  Dataset ds = build_dataset(corpus, lfsr16(), kKey, 1);
  SplitSets sets = preprocess(ds, 1);
  ClassifierReport lr = train_and_evaluate(sets, ClassifierKind::LogReg, 1);
  ClassifierReport dt = train_and_evaluate(sets, ClassifierKind::DecisionTree, 1);
  CHECK(lr.accuracy > 0.55);
  CHECK(dt.accuracy > 0.55);
}

TEST_CASE("a uniform branch mix leaves nothing to detect") {
  std::vector<NamedProgram> corpus = synth_corpus(SynthConfig::uniform(11, 12, 48));
  Dataset ds = build_dataset(corpus, lfsr16(), kKey, 1);
  SplitSets sets = preprocess(ds, 2);
  ClassifierReport lr = train_and_evaluate(sets, ClassifierKind::LogReg, 1);
  CHECK(lr.accuracy > 0.35);
  CHECK(lr.accuracy < 0.65);
}

TEST_CASE("the window sweep reports one result per window size") {
  std::vector<NamedProgram> corpus =
      synth_corpus(SynthConfig::skewed(3, 8, 32, Opcode::Blt, Opcode::Bge, 0.8));
  std::vector<int> windows = {1, 2, 4};
  std::vector<ClassifierReport> serial =
      window_sweep(corpus, lfsr16(), kKey, windows, 1, ClassifierKind::LogReg, 1);
  REQUIRE(serial.size() == 3);
  for (size_t i = 0; i < windows.size(); ++i) {
    CHECK(serial[i].window == windows[i]);
    CHECK(serial[i].accuracy >= 0.0);
    CHECK(serial[i].accuracy <= 1.0);
    CHECK(serial[i].test_rows > 0);
  }
  std::vector<ClassifierReport> threaded =
      window_sweep(corpus, lfsr16(), kKey, windows, 1, ClassifierKind::LogReg, 4);
  REQUIRE(threaded.size() == serial.size());
  for (size_t i = 0; i < serial.size(); ++i)
    CHECK(serial[i].accuracy == threaded[i].accuracy);
}

TEST_CASE("classifier names round-trip and the report serializes every field") {
  CHECK(classifier_from_name("logreg") == ClassifierKind::LogReg);
  CHECK(classifier_from_name("tree") == ClassifierKind::DecisionTree);
  CHECK(classifier_from_name("svm") == std::nullopt);
  CHECK(std::string(classifier_name(ClassifierKind::LogReg)) == "logreg");
  CHECK(std::string(classifier_name(ClassifierKind::DecisionTree)) == "tree");

  Dataset ds = fixed_count_dataset();
  ClassifierReport r = train_and_evaluate(preprocess(ds, 1), ClassifierKind::LogReg, 1);
  std::string j = r.to_json();
  for (const char* field : {"model", "window", "accuracy", "confusion", "converged",
                            "epochs", "train_rows", "test_rows", "train_programs",
                            "test_programs"}) {
    CAPTURE(field);
    CHECK(j.find('"' + std::string(field) + '"') != std::string::npos);
  }
}

TEST_CASE("generator rejects nonsense configurations") {
  CHECK_THROWS_AS(synth_corpus(SynthConfig::uniform(1, 0, 8)), Error);
  CHECK_THROWS_AS(synth_corpus(SynthConfig::uniform(1, 4, 0)), Error);
  SynthConfig bad = SynthConfig::uniform(1, 4, 8);
  bad.branch_weights[Opcode::Addi] = 1.0;  // not a branch
  CHECK_THROWS_AS(synth_corpus(bad), Error);
  SynthConfig neg = SynthConfig::uniform(1, 4, 8);
  neg.branch_weights[Opcode::Blt] = -1.0;
  CHECK_THROWS_AS(synth_corpus(neg), Error);
  SynthConfig blocks = SynthConfig::uniform(1, 4, 8);
  blocks.min_block = 3;
  blocks.max_block = 2;
  CHECK_THROWS_AS(synth_corpus(blocks), Error);
}

TEST_CASE("generated programs are structurally sound and reproducible") {
  std::vector<NamedProgram> a = synth_corpus(SynthConfig::uniform(9, 4, 16));
  std::vector<NamedProgram> b = synth_corpus(SynthConfig::uniform(9, 4, 16));
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second == b[i].second);
    CHECK(a[i].second.branch_addresses().size() == 16);
    // the emitted text parses back to the same program
    Program reparsed = parse_asm(print_asm(a[i].second));
    CHECK(reparsed.text == a[i].second.text);
  }
  // a skewed mix only ever emits the two chosen kinds
  std::vector<NamedProgram> skew =
      synth_corpus(SynthConfig::skewed(4, 4, 32, Opcode::Blt, Opcode::Bge, 0.8));
  int heavy = 0, light = 0;
  for (const auto& [id, p] : skew)
    for (const Instruction& ins : p.text) {
      if (!is_cond_branch(ins.opcode)) continue;
      if (ins.opcode == Opcode::Blt) ++heavy;
      else if (ins.opcode == Opcode::Bge) ++light;
      else FAIL_CHECK("unexpected branch kind in a two-kind mix");
    }
  CHECK(heavy > light);
  CHECK(heavy + light == 4 * 32);
}
