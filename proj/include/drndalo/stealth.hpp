#ifndef DRNDALO_STEALTH_HPP
#define DRNDALO_STEALTH_HPP

#include <string>
#include <utility>
#include <vector>

#include "drndalo/hash.hpp"
#include "drndalo/isa.hpp"

namespace drndalo {

struct WindowSlot {
  Opcode opcode = Opcode::Ecall;
  // -1 encodes a register field the instruction does not have
  int rs1 = -1;
  int rs2 = -1;
  int rd = -1;
};

// One labelled window: the instructions of the branch's basic block that
// precede (and include) the branch, capped at the window size.
struct BbblSample {
  std::string program_id;
  u32 branch_address = 0;
  std::vector<WindowSlot> window;  // oldest first; last slot is the branch
  int br_up = 0;                   // 1 iff the target lies below the branch
  int label = 0;                   // 1 iff the branch was inverted
};

struct Dataset {
  int window = 1;
  std::vector<BbblSample> samples;
};

using NamedProgram = std::pair<std::string, Program>;

// Obfuscates each program under (scheme, key), then emits one sample per
// conditional branch of the obfuscated program (label = mask bit) plus one
// per branch of the plain program (label = 0).
Dataset build_dataset(const std::vector<NamedProgram>& corpus, const HashScheme& scheme,
                      const ObfKey& key, int window, unsigned jobs = 1);

// program_id,branch_addr,br_up,label,window:[op;rs1;rs2;rd|...]
std::string format_dataset(const Dataset& ds);

// Bit-vector encoding: per slot, one-hot opcode (opcode count + absent) then
// one-hot rs1/rs2/rd (32 + absent each); slot 0 is the branch itself and
// higher slots walk backwards; a final br_up bit.
size_t feature_width(int window);
void encode_sample(const BbblSample& s, int window, u8* row);

struct EncodedSet {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<u8> x;  // row-major
  std::vector<u8> y;
  const u8* row(size_t r) const { return x.data() + r * cols; }
};

struct SplitSets {
  EncodedSet train;
  EncodedSet test;
  size_t train_programs = 0;
  size_t test_programs = 0;
};

// Program-disjoint 75/25 split, then the training plain-labelled samples
// are subsampled to one third (balancing the 3:1 class ratio to 1:1).
// Deterministic in split_seed. Requires >= 4 distinct programs and both
// classes present in the training set afterwards.
SplitSets preprocess(const Dataset& ds, u64 split_seed);

enum class ClassifierKind : u8 { LogReg, DecisionTree };

const char* classifier_name(ClassifierKind k);
std::optional<ClassifierKind> classifier_from_name(const std::string& name);

struct ClassifierReport {
  ClassifierKind model = ClassifierKind::LogReg;
  int window = 1;
  double accuracy = 0.0;
  // confusion counts: true class (plain=0/obf=1) x predicted class
  u64 tn = 0, fp = 0, fn = 0, tp = 0;
  bool converged = true;  // LogReg: loss-delta stop before the epoch cap
  int epochs = 0;
  size_t train_rows = 0, test_rows = 0;
  size_t train_programs = 0, test_programs = 0;

  std::string to_json() const;
};

struct LogRegParams {
  double learning_rate = 1.0;
  double l2 = 1e-4;
  double tolerance = 1e-6;
  int max_epochs = 5000;
};

struct TreeParams {
  int max_depth = 12;
  int min_leaf = 5;
};

ClassifierReport train_and_evaluate(const SplitSets& sets, ClassifierKind kind, int window,
                                    const LogRegParams& lr = {}, const TreeParams& tp = {});

// One report per window size, all using the same split seed.
std::vector<ClassifierReport> window_sweep(const std::vector<NamedProgram>& corpus,
                                           const HashScheme& scheme, const ObfKey& key,
                                           const std::vector<int>& windows, u64 split_seed,
                                           ClassifierKind kind, unsigned jobs = 1);

}  // namespace drndalo

#endif  // DRNDALO_STEALTH_HPP
