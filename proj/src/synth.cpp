#include "drndalo/synth.hpp"

#include <random>

#include "drndalo/machine.hpp"

namespace drndalo {

SynthConfig SynthConfig::uniform(u64 seed, int programs, int branches) {
  SynthConfig c;
  c.seed = seed;
  c.programs = programs;
  c.branches_per_program = branches;
  return c;
}

SynthConfig SynthConfig::skewed(u64 seed, int programs, int branches, Opcode heavy,
                                Opcode light, double heavy_weight) {
  SynthConfig c = uniform(seed, programs, branches);
  c.branch_weights[heavy] = heavy_weight;
  c.branch_weights[light] = 1.0 - heavy_weight;
  return c;
}

namespace {

const Opcode kBranchKinds[] = {Opcode::Beq, Opcode::Bne,  Opcode::Blt,
                               Opcode::Bge, Opcode::Bltu, Opcode::Bgeu};

const Opcode kFillerOps[] = {Opcode::Add,  Opcode::Sub,  Opcode::And, Opcode::Or,
                             Opcode::Xor,  Opcode::Slt,  Opcode::Sltu, Opcode::Addi,
                             Opcode::Andi, Opcode::Ori,  Opcode::Xori, Opcode::Slti,
                             Opcode::Slli, Opcode::Srli, Opcode::Srai};

// avoids x0 writes and the t5/t6 scratch pair
const u8 kRegPool[] = {5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 18, 19, 20, 21};

}  // namespace

std::vector<NamedProgram> synth_corpus(const SynthConfig& cfg) {
  if (cfg.programs < 1 || cfg.branches_per_program < 1)
    throw Error("synth corpus needs at least one program and one branch");
  if (cfg.min_block < 0 || cfg.max_block < cfg.min_block)
    throw Error("synth corpus block bounds are inconsistent");

  std::vector<Opcode> kinds;
  std::vector<double> weights;
  if (cfg.branch_weights.empty()) {
    for (Opcode k : kBranchKinds) {
      kinds.push_back(k);
      weights.push_back(1.0);
    }
  } else {
    for (const auto& [k, w] : cfg.branch_weights) {
      if (!is_cond_branch(k)) throw Error("branch weight on a non-branch opcode");
      if (w < 0) throw Error("negative branch weight");
      kinds.push_back(k);
      weights.push_back(w);
    }
  }

  std::vector<NamedProgram> corpus;
  for (int pi = 0; pi < cfg.programs; ++pi) {
    std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ull + static_cast<u64>(pi));
    std::discrete_distribution<size_t> pick_kind(weights.begin(), weights.end());
    std::uniform_int_distribution<size_t> pick_reg(0, std::size(kRegPool) - 1);
    std::uniform_int_distribution<size_t> pick_op(0, std::size(kFillerOps) - 1);
    std::uniform_int_distribution<int> pick_len(cfg.min_block, cfg.max_block);
    std::uniform_int_distribution<int> pick_imm(-64, 63);

    Program p;
    int blocks = cfg.branches_per_program;
    std::uniform_int_distribution<int> pick_block(0, blocks);  // block index; `blocks` = exit

    // first pass: block start addresses
    std::vector<int> lens(static_cast<size_t>(blocks));
    for (int b = 0; b < blocks; ++b) lens[static_cast<size_t>(b)] = pick_len(rng);
    std::vector<u32> starts(static_cast<size_t>(blocks) + 1);
    u32 addr = 0;
    for (int b = 0; b < blocks; ++b) {
      starts[static_cast<size_t>(b)] = addr;
      addr += 4 * static_cast<u32>(lens[static_cast<size_t>(b)] + 1);
    }
    starts[static_cast<size_t>(blocks)] = addr;  // exit block

    auto rnd_reg = [&] { return kRegPool[pick_reg(rng)]; };

    for (int b = 0; b < blocks; ++b) {
      p.labels["b" + std::to_string(b)] = starts[static_cast<size_t>(b)];
      for (int j = 0; j < lens[static_cast<size_t>(b)]; ++j) {
        Instruction ins;
        ins.opcode = kFillerOps[pick_op(rng)];
        ins.address = p.text_base + static_cast<u32>(p.text.size()) * 4;
        ins.rd = rnd_reg();
        ins.rs1 = rnd_reg();
        if (ins.kind() == InstrKind::ArithReg) {
          ins.rs2 = rnd_reg();
        } else {
          bool shift = ins.opcode == Opcode::Slli || ins.opcode == Opcode::Srli ||
                       ins.opcode == Opcode::Srai;
          ins.imm = shift ? (pick_imm(rng) & 31) : pick_imm(rng);
        }
        p.text.push_back(ins);
      }
      Instruction br;
      br.opcode = kinds[pick_kind(rng)];
      br.address = p.text_base + static_cast<u32>(p.text.size()) * 4;
      br.rs1 = rnd_reg();
      br.rs2 = rnd_reg();
      int target = pick_block(rng);
      if (target == b) target = blocks;  // avoid trivial self-loops
      u32 taddr = starts[static_cast<size_t>(target)];
      br.imm = static_cast<i32>(taddr - br.address);
      br.target_label = target == blocks ? "exit" : "b" + std::to_string(target);
      p.text.push_back(br);
    }

    p.labels["exit"] = starts[static_cast<size_t>(blocks)];
    Instruction li;
    li.opcode = Opcode::Addi;
    li.address = p.text_base + static_cast<u32>(p.text.size()) * 4;
    li.rd = 17;  // a7
    li.rs1 = 0;
    li.imm = static_cast<i32>(kEcallExit);
    p.text.push_back(li);
    Instruction ec;
    ec.opcode = Opcode::Ecall;
    ec.address = p.text_base + static_cast<u32>(p.text.size()) * 4;
    p.text.push_back(ec);

    corpus.emplace_back("synth" + std::to_string(pi), std::move(p));
  }
  return corpus;
}

}  // namespace drndalo
