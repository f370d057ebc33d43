#include "drndalo/stealth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "drndalo/cfg.hpp"
#include "drndalo/obfuscate.hpp"
#include "drndalo/parallel.hpp"

namespace drndalo {

namespace {

WindowSlot slot_of(const Instruction& ins) {
  const OpcodeInfo& info = opcode_info(ins.opcode);
  WindowSlot s;
  s.opcode = ins.opcode;
  s.rs1 = info.has_rs1 ? ins.rs1 : -1;
  s.rs2 = info.has_rs2 ? ins.rs2 : -1;
  s.rd = info.has_rd ? ins.rd : -1;
  return s;
}

std::vector<BbblSample> samples_of(const std::string& id, const Program& p, int window,
                                   const InversionMask* mask) {
  std::vector<BbblSample> out;
  std::vector<BasicBlock> blocks = basic_blocks(p);
  for (size_t i = 0; i < p.text.size(); ++i) {
    const Instruction& ins = p.text[i];
    if (!is_cond_branch(ins.opcode)) continue;
    BbblSample s;
    s.program_id = id;
    s.branch_address = ins.address;
    for (size_t idx : branch_window(p, blocks, i, window))
      s.window.push_back(slot_of(p.text[idx]));
    s.br_up = ins.target() < ins.address ? 1 : 0;
    s.label = mask ? mask->bit(ins.address) : 0;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

Dataset build_dataset(const std::vector<NamedProgram>& corpus, const HashScheme& scheme,
                      const ObfKey& key, int window, unsigned jobs) {
  if (window < 1) throw Error("window must be at least 1");
  Dataset ds;
  ds.window = window;
  std::vector<std::vector<BbblSample>> per_program(corpus.size());
  parallel_for(corpus.size(), jobs, [&](size_t i) {
    const auto& [id, p] = corpus[i];
    ObfResult obf = obfuscate(p, scheme, key);
    std::vector<BbblSample> rows = samples_of(id, obf.program, window, &obf.mask);
    std::vector<BbblSample> plain = samples_of(id, p, window, nullptr);
    rows.insert(rows.end(), plain.begin(), plain.end());
    per_program[i] = std::move(rows);
  });
  for (auto& rows : per_program)
    ds.samples.insert(ds.samples.end(), rows.begin(), rows.end());
  return ds;
}

std::string format_dataset(const Dataset& ds) {
  std::ostringstream os;
  auto field = [](int r) { return r < 0 ? std::string("-") : std::to_string(r); };
  for (const BbblSample& s : ds.samples) {
    char addr[16];
    std::snprintf(addr, sizeof addr, "0x%08x", s.branch_address);
    os << s.program_id << ',' << addr << ',' << s.br_up << ',' << s.label << ",window:[";
    for (size_t i = 0; i < s.window.size(); ++i) {
      const WindowSlot& w = s.window[i];
      if (i) os << '|';
      os << opcode_name(w.opcode) << ';' << field(w.rs1) << ';' << field(w.rs2) << ';'
         << field(w.rd);
    }
    os << "]\n";
  }
  return os.str();
}

namespace {

constexpr size_t kOpGroup = static_cast<size_t>(kOpcodeCount) + 1;  // + absent
constexpr size_t kRegGroup = 33;                                    // 32 + absent
constexpr size_t kSlotWidth = kOpGroup + 3 * kRegGroup;

}  // namespace

size_t feature_width(int window) {
  return static_cast<size_t>(window) * kSlotWidth + 1;
}

void encode_sample(const BbblSample& s, int window, u8* row) {
  std::fill(row, row + feature_width(window), 0);
  for (int slot = 0; slot < window; ++slot) {
    u8* base = row + static_cast<size_t>(slot) * kSlotWidth;
    // slot 0 is the branch (last window element), slot s walks backwards
    if (static_cast<size_t>(slot) < s.window.size()) {
      const WindowSlot& w = s.window[s.window.size() - 1 - static_cast<size_t>(slot)];
      base[static_cast<size_t>(w.opcode)] = 1;
      base[kOpGroup + (w.rs1 >= 0 ? static_cast<size_t>(w.rs1) : 32)] = 1;
      base[kOpGroup + kRegGroup + (w.rs2 >= 0 ? static_cast<size_t>(w.rs2) : 32)] = 1;
      base[kOpGroup + 2 * kRegGroup + (w.rd >= 0 ? static_cast<size_t>(w.rd) : 32)] = 1;
    } else {
      base[kOpGroup - 1] = 1;  // absent opcode
      base[kOpGroup + 32] = 1;
      base[kOpGroup + kRegGroup + 32] = 1;
      base[kOpGroup + 2 * kRegGroup + 32] = 1;
    }
  }
  row[feature_width(window) - 1] = static_cast<u8>(s.br_up);
}

SplitSets preprocess(const Dataset& ds, u64 split_seed) {
  std::vector<std::string> ids;
  for (const BbblSample& s : ds.samples)
    if (std::find(ids.begin(), ids.end(), s.program_id) == ids.end())
      ids.push_back(s.program_id);
  if (ids.size() < 4)
    throw Error("corpus too small for a program-disjoint split (need >= 4 programs)");

  std::mt19937_64 rng(split_seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  size_t test_count = std::max<size_t>(1, (ids.size() + 2) / 4);
  std::vector<std::string> test_ids(ids.begin(), ids.begin() + static_cast<long>(test_count));
  auto is_test = [&](const std::string& id) {
    return std::find(test_ids.begin(), test_ids.end(), id) != test_ids.end();
  };

  std::vector<size_t> train_idx, test_idx;
  for (size_t i = 0; i < ds.samples.size(); ++i)
    (is_test(ds.samples[i].program_id) ? test_idx : train_idx).push_back(i);

  // subsample plain-labelled training rows to one third
  std::vector<size_t> plain, obf;
  for (size_t i : train_idx)
    (ds.samples[i].label ? obf : plain).push_back(i);
  std::shuffle(plain.begin(), plain.end(), rng);
  plain.resize((plain.size() + 2) / 3);
  train_idx.clear();
  train_idx.insert(train_idx.end(), obf.begin(), obf.end());
  train_idx.insert(train_idx.end(), plain.begin(), plain.end());
  std::sort(train_idx.begin(), train_idx.end());

  bool has0 = false, has1 = false;
  for (size_t i : train_idx)
    (ds.samples[i].label ? has1 : has0) = true;
  if (!has0 || !has1)
    throw Error("a class is absent from the training set after subsampling");

  auto encode = [&](const std::vector<size_t>& idx) {
    EncodedSet set;
    set.rows = idx.size();
    set.cols = feature_width(ds.window);
    set.x.resize(set.rows * set.cols);
    set.y.resize(set.rows);
    for (size_t r = 0; r < idx.size(); ++r) {
      const BbblSample& s = ds.samples[idx[r]];
      encode_sample(s, ds.window, set.x.data() + r * set.cols);
      set.y[r] = static_cast<u8>(s.label);
    }
    return set;
  };

  SplitSets out;
  out.train = encode(train_idx);
  out.test = encode(test_idx);
  out.train_programs = ids.size() - test_count;
  out.test_programs = test_count;
  if (out.test.rows == 0) throw Error("test split is empty");
  return out;
}

const char* classifier_name(ClassifierKind k) {
  return k == ClassifierKind::LogReg ? "logreg" : "tree";
}

std::optional<ClassifierKind> classifier_from_name(const std::string& name) {
  if (name == "logreg") return ClassifierKind::LogReg;
  if (name == "tree") return ClassifierKind::DecisionTree;
  return std::nullopt;
}

namespace {

struct LogRegModel {
  Eigen::VectorXf w;
  float b = 0;
  bool converged = false;
  int epochs = 0;
};

LogRegModel train_logreg(const EncodedSet& train, const LogRegParams& hp) {
  const auto rows = static_cast<Eigen::Index>(train.rows);
  const auto cols = static_cast<Eigen::Index>(train.cols);
  Eigen::MatrixXf X(rows, cols);
  Eigen::VectorXf y(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const u8* src = train.row(static_cast<size_t>(r));
    for (Eigen::Index c = 0; c < cols; ++c) X(r, c) = static_cast<float>(src[c]);
    y(r) = static_cast<float>(train.y[static_cast<size_t>(r)]);
  }

  LogRegModel m;
  m.w = Eigen::VectorXf::Zero(cols);
  float n = static_cast<float>(rows);
  double prev_loss = std::numeric_limits<double>::infinity();
  for (int e = 0; e < hp.max_epochs; ++e) {
    Eigen::VectorXf z = (X * m.w).array() + m.b;
    Eigen::VectorXf p = (1.0f / (1.0f + (-z.array()).exp())).matrix();
    // numerically stable binary cross-entropy
    double loss = ((z.array().max(0.0f) - z.array() * y.array() +
                    (1.0f + (-z.array().abs()).exp()).log())
                       .sum()) /
                  n;
    loss += 0.5 * hp.l2 * static_cast<double>(m.w.squaredNorm());
    Eigen::VectorXf diff = p - y;
    Eigen::VectorXf grad = (X.transpose() * diff) / n +
                           static_cast<float>(hp.l2) * m.w;
    float grad_b = diff.sum() / n;
    m.w -= static_cast<float>(hp.learning_rate) * grad;
    m.b -= static_cast<float>(hp.learning_rate) * grad_b;
    m.epochs = e + 1;
    if (std::abs(prev_loss - loss) < hp.tolerance) {
      m.converged = true;
      break;
    }
    prev_loss = loss;
  }
  return m;
}

int predict_logreg(const LogRegModel& m, const u8* row, size_t cols) {
  float z = m.b;
  for (size_t c = 0; c < cols; ++c)
    if (row[c]) z += m.w(static_cast<Eigen::Index>(c));
  return z >= 0 ? 1 : 0;
}

struct TreeNode {
  int feature = -1;  // -1: leaf
  int label = 0;
  int left = -1;   // feature == 0
  int right = -1;  // feature == 1
};

struct TreeModel {
  std::vector<TreeNode> nodes;
};

double gini_of(size_t pos, size_t n) {
  if (n == 0) return 0.0;
  double p = static_cast<double>(pos) / static_cast<double>(n);
  return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

int build_tree(TreeModel& t, const EncodedSet& train, std::vector<size_t>& idx, int depth,
               const TreeParams& hp) {
  size_t n = idx.size();
  size_t pos = 0;
  for (size_t i : idx) pos += train.y[i];
  int majority = pos * 2 >= n ? 1 : 0;

  int self = static_cast<int>(t.nodes.size());
  t.nodes.push_back(TreeNode{-1, majority, -1, -1});
  if (depth >= hp.max_depth || pos == 0 || pos == n ||
      n < 2 * static_cast<size_t>(hp.min_leaf))
    return self;

  double base = gini_of(pos, n);
  double best = base;
  int best_feature = -1;
  for (size_t f = 0; f < train.cols; ++f) {
    size_t n1 = 0, pos1 = 0;
    for (size_t i : idx) {
      if (train.row(i)[f]) {
        ++n1;
        pos1 += train.y[i];
      }
    }
    size_t n0 = n - n1;
    if (n1 < static_cast<size_t>(hp.min_leaf) || n0 < static_cast<size_t>(hp.min_leaf))
      continue;
    size_t pos0 = pos - pos1;
    double g = (static_cast<double>(n0) * gini_of(pos0, n0) +
                static_cast<double>(n1) * gini_of(pos1, n1)) /
               static_cast<double>(n);
    if (g + 1e-12 < best) {
      best = g;
      best_feature = static_cast<int>(f);
    }
  }
  if (best_feature < 0) return self;

  std::vector<size_t> left, right;
  for (size_t i : idx)
    (train.row(i)[static_cast<size_t>(best_feature)] ? right : left).push_back(i);
  idx.clear();
  idx.shrink_to_fit();
  t.nodes[static_cast<size_t>(self)].feature = best_feature;
  int l = build_tree(t, train, left, depth + 1, hp);
  t.nodes[static_cast<size_t>(self)].left = l;
  int r = build_tree(t, train, right, depth + 1, hp);
  t.nodes[static_cast<size_t>(self)].right = r;
  return self;
}

int predict_tree(const TreeModel& t, const u8* row) {
  int cur = 0;
  for (;;) {
    const TreeNode& node = t.nodes[static_cast<size_t>(cur)];
    if (node.feature < 0) return node.label;
    cur = row[static_cast<size_t>(node.feature)] ? node.right : node.left;
  }
}

}  // namespace

ClassifierReport train_and_evaluate(const SplitSets& sets, ClassifierKind kind, int window,
                                    const LogRegParams& lr, const TreeParams& tp) {
  ClassifierReport rep;
  rep.model = kind;
  rep.window = window;
  rep.train_rows = sets.train.rows;
  rep.test_rows = sets.test.rows;
  rep.train_programs = sets.train_programs;
  rep.test_programs = sets.test_programs;

  std::function<int(const u8*)> predict;
  if (kind == ClassifierKind::LogReg) {
    LogRegModel m = train_logreg(sets.train, lr);
    rep.converged = m.converged;
    rep.epochs = m.epochs;
    size_t cols = sets.train.cols;
    predict = [m = std::move(m), cols](const u8* row) { return predict_logreg(m, row, cols); };
  } else {
    TreeModel t;
    std::vector<size_t> idx(sets.train.rows);
    std::iota(idx.begin(), idx.end(), 0);
    build_tree(t, sets.train, idx, 0, tp);
    predict = [t = std::move(t)](const u8* row) { return predict_tree(t, row); };
  }

  for (size_t r = 0; r < sets.test.rows; ++r) {
    int truth = sets.test.y[r];
    int pred = predict(sets.test.row(r));
    if (truth && pred) rep.tp++;
    else if (truth && !pred) rep.fn++;
    else if (!truth && pred) rep.fp++;
    else rep.tn++;
  }
  rep.accuracy = static_cast<double>(rep.tp + rep.tn) / static_cast<double>(sets.test.rows);
  return rep;
}

std::vector<ClassifierReport> window_sweep(const std::vector<NamedProgram>& corpus,
                                           const HashScheme& scheme, const ObfKey& key,
                                           const std::vector<int>& windows, u64 split_seed,
                                           ClassifierKind kind, unsigned jobs) {
  std::vector<ClassifierReport> out;
  for (int w : windows) {
    Dataset ds = build_dataset(corpus, scheme, key, w, jobs);
    SplitSets sets = preprocess(ds, split_seed);
    out.push_back(train_and_evaluate(sets, kind, w));
  }
  return out;
}

std::string ClassifierReport::to_json() const {
  nlohmann::json j;
  j["model"] = classifier_name(model);
  j["window"] = window;
  j["accuracy"] = accuracy;
  j["confusion"] = {{"tn", tn}, {"fp", fp}, {"fn", fn}, {"tp", tp}};
  j["converged"] = converged;
  j["epochs"] = epochs;
  j["train_rows"] = train_rows;
  j["test_rows"] = test_rows;
  j["train_programs"] = train_programs;
  j["test_programs"] = test_programs;
  return j.dump(2);
}

}  // namespace drndalo
