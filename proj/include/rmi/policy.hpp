#pragma once

#include <set>

#include "rmi/asm.hpp"
#include "rmi/machine.hpp"

namespace rmi {

// Public part of the initial state. Shared memory and the pc are always public;
// everything not listed here is secret.
struct Policy {
    std::set<Reg> public_regs;
    std::set<Addr> public_private_cells;

    bool reg_public(Reg r) const { return r == kZero || public_regs.count(r) != 0; }
    bool cell_public(const MemoryLayout& layout, Addr a) const {
        return layout.classify(a) == Domain::shared || public_private_cells.count(a) != 0;
    }

    friend bool operator==(const Policy&, const Policy&) = default;
};

}  // namespace rmi
