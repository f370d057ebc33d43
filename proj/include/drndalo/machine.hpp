#ifndef DRNDALO_MACHINE_HPP
#define DRNDALO_MACHINE_HPP

#include <optional>
#include <string>
#include <vector>

#include "drndalo/isa.hpp"

namespace drndalo {

// exit ecall: a7 == 93, exit code in a0; putchar ecall: a7 == 64, byte in a0
inline constexpr u32 kEcallExit = 93;
inline constexpr u32 kEcallPutchar = 64;

struct Trap {
  u32 pc = 0;
  std::string message;
};

struct MachineState {
  u32 pc = 0;
  u32 regs[32] = {0};
  u32 mem_base = 0;
  std::vector<u8> mem;  // the mapped data segment
  bool halted = false;
  u32 exit_code = 0;
  std::vector<u8> output;
  std::optional<Trap> trap;

  static MachineState boot(const Program& p);

  bool mem_ok(u32 addr, u32 bytes) const {
    return addr >= mem_base && bytes <= mem.size() &&
           addr - mem_base <= mem.size() - bytes;
  }
  u32 load(u32 addr, u32 bytes) const;   // little-endian, caller checked bounds
  void store(u32 addr, u32 bytes, u32 value);
  void poke_word(u32 addr, u32 value) { store(addr, 4, value); }
};

enum class StepStatus { Ok, Halted, Trapped };

struct StepInfo {
  u32 pc = 0;
  Opcode opcode = Opcode::Ecall;
  bool cond_branch = false;
  bool branch_taken = false;
  bool wrote_reg = false;  // true only for architecturally visible writes (rd != x0)
  u8 rd = 0;
  u32 rd_value = 0;
};

// Flips the outcome of each conditional branch it is asked about; the
// pipeline simulator uses this to model keyed predicate XOR in execute.
class BranchBitProvider {
 public:
  virtual ~BranchBitProvider() = default;
  virtual int bit(u32 branch_address) = 0;
};

// Executes one instruction. The conditional branch outcome is
// predicate XOR provider->bit(pc) (provider == nullptr means XOR 0).
StepStatus step(MachineState& st, const Program& p, StepInfo* info = nullptr,
                BranchBitProvider* provider = nullptr);

}  // namespace drndalo

#endif  // DRNDALO_MACHINE_HPP
