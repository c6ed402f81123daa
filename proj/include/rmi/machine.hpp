#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rmi/asm.hpp"

namespace rmi {

using Addr = std::uint64_t;

enum class Domain { priv, shared };

std::string_view domain_name(Domain d);

// Half-open [begin, end).
struct AddrRange {
    Addr begin = 0;
    Addr end = 0;

    bool contains(Addr a) const { return a >= begin && a < end; }
    bool empty() const { return end <= begin; }
    friend bool operator==(const AddrRange&, const AddrRange&) = default;
};

// Private/shared classification purely from the (virtual) address.
struct MemoryLayout {
    AddrRange private_range{0x1000, 0x2000};
    AddrRange shared_range{0x8000, 0x9000};

    // Throws std::invalid_argument when ranges are empty or overlap.
    void validate() const;
    std::optional<Domain> classify(Addr a) const;
    // Domain of a whole [a, a+width) access; nullopt if it leaves a range.
    std::optional<Domain> classify(Addr a, unsigned width) const;

    friend bool operator==(const MemoryLayout&, const MemoryLayout&) = default;
};

struct ArchState {
    std::size_t pc = 0;
    std::array<std::uint64_t, kNumRegs> regs{};
    std::map<Addr, std::uint8_t> private_mem;
    std::map<Addr, std::uint8_t> shared_mem;
    bool halted = false;

    std::uint64_t reg(Reg r) const { return r == kZero ? 0 : regs[r]; }
    void set_reg(Reg r, std::uint64_t v) {
        if (r != kZero) regs[r] = v;
    }

    std::map<Addr, std::uint8_t>& memory(Domain d) { return d == Domain::shared ? shared_mem : private_mem; }
    const std::map<Addr, std::uint8_t>& memory(Domain d) const {
        return d == Domain::shared ? shared_mem : private_mem;
    }
    // Uninitialized bytes read as 0.
    std::uint8_t byte(Domain d, Addr a) const;
    // Stores zero bytes explicitly only when overwriting; keeps maps canonical.
    void set_byte(Domain d, Addr a, std::uint8_t v);

    friend bool operator==(const ArchState& a, const ArchState& b);
};

enum class AccessKind { load, store };

struct MemEvent {
    AccessKind kind = AccessKind::load;
    Addr address = 0;
    Domain domain = Domain::priv;
    std::uint64_t value = 0;

    friend bool operator==(const MemEvent&, const MemEvent&) = default;
};

struct StepEffect {
    std::size_t next_pc = 0;
    std::optional<MemEvent> mem_event;
    std::vector<std::pair<Reg, std::uint64_t>> reg_writes;

    friend bool operator==(const StepEffect&, const StepEffect&) = default;
};

class MachineError : public std::runtime_error {
public:
    enum class Kind { out_of_range_access, invalid_pc };

    MachineError(Kind kind, std::uint64_t detail, const std::string& message)
        : std::runtime_error(message), kind_(kind), detail_(detail) {}

    Kind kind() const { return kind_; }
    // Faulting address for out_of_range_access, offending pc for invalid_pc.
    std::uint64_t detail() const { return detail_; }

private:
    Kind kind_;
    std::uint64_t detail_;
};

// Non-throwing single step used by the trace engines: mutates `state` in place
// and reports a fault instead of raising. On fault the state is unchanged.
struct StepOutcome {
    StepEffect effect;
    std::optional<MachineError::Kind> fault;
    std::uint64_t fault_detail = 0;
};
StepOutcome execute(const Program& program, ArchState& state, const MemoryLayout& layout);

// Sequential semantics of one instruction. Throws MachineError.
std::pair<ArchState, StepEffect> step(const Program& program, const ArchState& state, const MemoryLayout& layout);

struct SeqRun {
    ArchState final_state;
    std::vector<StepEffect> effects;
    bool fuel_exhausted = false;
};

SeqRun run_seq(const Program& program, const ArchState& state0, const MemoryLayout& layout, std::size_t fuel);

}  // namespace rmi
