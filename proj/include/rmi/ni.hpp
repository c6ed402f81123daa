#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rmi/contract.hpp"
#include "rmi/hw_modes.hpp"
#include "rmi/machine.hpp"
#include "rmi/policy.hpp"

namespace rmi {

inline constexpr std::size_t kDefaultPairCap = std::size_t{1} << 20;

// Finite set of initial states: base_state with each varying component ranging
// over its domain. States are numbered in mixed radix, first component fastest.
struct StateSpace {
    ArchState base_state;
    struct VaryingRegister {
        Reg reg = 0;
        std::vector<std::uint64_t> values;
    };
    struct VaryingCell {
        Addr address = 0;
        Domain domain = Domain::priv;
        std::vector<std::uint8_t> values;
    };

    std::vector<VaryingRegister> varying_registers;
    std::vector<VaryingCell> varying_cells;
    std::size_t pair_cap = kDefaultPairCap;

    // Number of states; saturates on overflow.
    std::size_t size() const;
    ArchState state(std::size_t index) const;
    // Throws EngineError(enumeration_cap_exceeded) when size()^2 exceeds pair_cap
    // or a domain is empty.
    void validate() const;
};

inline const std::vector<std::uint64_t>& default_register_domain() {
    static const std::vector<std::uint64_t> d{0, 1, 2, 0x8000};
    return d;
}
inline const std::vector<std::uint8_t>& default_cell_domain() {
    static const std::vector<std::uint8_t> d{0, 1};
    return d;
}

StateSpace default_space(const ArchState& base, const std::vector<Reg>& regs, const std::vector<Addr>& cells,
                         const MemoryLayout& layout);

// What a check observes: a contract or a resolved hardware mode.
using Semantics = std::variant<Contract, HwSemantics>;

std::string semantics_name(const Semantics& s);

TraceSet view_set(const Program& program, const ArchState& state0, const MemoryLayout& layout, const Semantics& s,
                  std::size_t fuel = kDefaultFuel, std::size_t cap = kDefaultTraceCap);

struct Witness {
    ArchState first;
    ArchState second;
    // Views of the two states under the semantics that must agree but does not.
    TraceSet first_views;
    TraceSet second_views;
};

struct NiVerdict {
    bool holds = true;
    std::optional<Witness> witness;
    std::size_t states = 0;
};

struct CheckLimits {
    std::size_t fuel = kDefaultFuel;
    std::size_t trace_cap = kDefaultTraceCap;
};

// For all pi-equivalent states: equal views under `s`.
NiVerdict check_direct_ni(const Program& program, const Semantics& s, const Policy& policy, const StateSpace& space,
                          const MemoryLayout& layout, const CheckLimits& limits = {});

// For all states: equal views under `a` imply equal views under `b`.
NiVerdict check_relative_ni(const Program& program, const Semantics& a, const Semantics& b, const StateSpace& space,
                            const MemoryLayout& layout, const CheckLimits& limits = {});

// Hardware satisfies a contract on one program: relative NI from the contract to the mode.
NiVerdict check_hw_satisfies(const Program& program, const HwSemantics& mode, const Contract& contract,
                             const StateSpace& space, const MemoryLayout& layout, const CheckLimits& limits = {});

// True iff the witness still separates `b` while agreeing on `a` (relative form).
bool replays_relative(const Program& program, const Semantics& a, const Semantics& b, const Witness& w,
                      const MemoryLayout& layout, const CheckLimits& limits = {});

}  // namespace rmi
