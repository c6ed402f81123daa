#include "rmi/machine.hpp"

namespace rmi {

std::string_view domain_name(Domain d) { return d == Domain::shared ? "shared" : "private"; }

void MemoryLayout::validate() const {
    if (private_range.empty() || shared_range.empty())
        throw std::invalid_argument("memory layout ranges must be non-empty");
    if (private_range.begin < shared_range.end && shared_range.begin < private_range.end)
        throw std::invalid_argument("private and shared ranges overlap");
}

std::optional<Domain> MemoryLayout::classify(Addr a) const {
    if (private_range.contains(a)) return Domain::priv;
    if (shared_range.contains(a)) return Domain::shared;
    return std::nullopt;
}

std::optional<Domain> MemoryLayout::classify(Addr a, unsigned width) const {
    const auto first = classify(a);
    if (!first || width == 0) return first;
    const Addr last = a + width - 1;
    if (last < a) return std::nullopt;
    const auto& range = *first == Domain::shared ? shared_range : private_range;
    return range.contains(last) ? first : std::nullopt;
}

std::uint8_t ArchState::byte(Domain d, Addr a) const {
    const auto& mem = memory(d);
    const auto it = mem.find(a);
    return it == mem.end() ? 0 : it->second;
}

void ArchState::set_byte(Domain d, Addr a, std::uint8_t v) { memory(d)[a] = v; }

namespace {

bool same_memory(const std::map<Addr, std::uint8_t>& a, const std::map<Addr, std::uint8_t>& b) {
    // Absent bytes read as zero, so compare contents modulo explicit zeros.
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() || ib != b.end()) {
        if (ia != a.end() && ia->second == 0) { ++ia; continue; }
        if (ib != b.end() && ib->second == 0) { ++ib; continue; }
        if (ia == a.end() || ib == b.end()) return false;
        if (ia->first != ib->first || ia->second != ib->second) return false;
        ++ia;
        ++ib;
    }
    return true;
}

std::uint64_t sign_extend32(std::uint64_t v) {
    return static_cast<std::uint64_t>(static_cast<std::int64_t>(static_cast<std::int32_t>(v)));
}

}  // namespace

bool operator==(const ArchState& a, const ArchState& b) {
    return a.pc == b.pc && a.halted == b.halted && a.regs == b.regs && same_memory(a.private_mem, b.private_mem) &&
           same_memory(a.shared_mem, b.shared_mem);
}

StepOutcome execute(const Program& program, ArchState& state, const MemoryLayout& layout) {
    StepOutcome out;
    const auto n = program.size();
    if (state.halted || state.pc >= n) {
        out.fault = MachineError::Kind::invalid_pc;
        out.fault_detail = state.pc;
        return out;
    }
    const Instruction& inst = program.instructions[state.pc];
    std::size_t next = state.pc + 1;
    auto& eff = out.effect;
    auto write = [&](Reg r, std::uint64_t v) {
        if (r == kZero) return;
        eff.reg_writes.emplace_back(r, v);
    };
    const std::uint64_t a = state.reg(inst.rs1);
    const std::uint64_t b = state.reg(inst.rs2);
    const auto imm = static_cast<std::uint64_t>(inst.imm);

    switch (inst.op) {
        case Opcode::lw:
        case Opcode::lbu:
        case Opcode::ld:
        case Opcode::sw:
        case Opcode::sb:
        case Opcode::sd: {
            const unsigned width = access_width(inst.op);
            const Addr addr = a + imm;
            const auto domain = layout.classify(addr, width);
            if (!domain || addr % width != 0) {
                out.fault = MachineError::Kind::out_of_range_access;
                out.fault_detail = addr;
                return out;
            }
            if (is_load(inst.op)) {
                std::uint64_t v = 0;
                for (unsigned i = 0; i < width; ++i)
                    v |= static_cast<std::uint64_t>(state.byte(*domain, addr + i)) << (8 * i);
                if (inst.op == Opcode::lw) v = sign_extend32(v);
                write(inst.rd, v);
                eff.mem_event = MemEvent{AccessKind::load, addr, *domain, v};
            } else {
                std::uint64_t v = b;
                if (width < 8) v &= (std::uint64_t{1} << (8 * width)) - 1;
                for (unsigned i = 0; i < width; ++i)
                    state.set_byte(*domain, addr + i, static_cast<std::uint8_t>(v >> (8 * i)));
                eff.mem_event = MemEvent{AccessKind::store, addr, *domain, v};
            }
            break;
        }
        case Opcode::add: write(inst.rd, a + b); break;
        case Opcode::sub: write(inst.rd, a - b); break;
        case Opcode::and_: write(inst.rd, a & b); break;
        case Opcode::or_: write(inst.rd, a | b); break;
        case Opcode::xor_: write(inst.rd, a ^ b); break;
        case Opcode::addi: write(inst.rd, a + imm); break;
        case Opcode::slli: write(inst.rd, a << (inst.imm & 63)); break;
        case Opcode::srli: write(inst.rd, a >> (inst.imm & 63)); break;
        case Opcode::li: write(inst.rd, imm); break;
        case Opcode::mv: write(inst.rd, a); break;
        case Opcode::beq:
            if (a == b) next = inst.target;
            break;
        case Opcode::bne:
            if (a != b) next = inst.target;
            break;
        case Opcode::blt:
            if (static_cast<std::int64_t>(a) < static_cast<std::int64_t>(b)) next = inst.target;
            break;
        case Opcode::bgeu:
            if (a >= b) next = inst.target;
            break;
        case Opcode::jal:
            write(inst.rd, state.pc + 1);
            next = inst.target;
            break;
        case Opcode::jalr: {
            const std::uint64_t target = a + imm;
            if (target > n) {
                out.fault = MachineError::Kind::invalid_pc;
                out.fault_detail = target;
                return out;
            }
            write(inst.rd, state.pc + 1);
            next = static_cast<std::size_t>(target);
            break;
        }
        case Opcode::csrwi: break;
    }

    for (const auto& [r, v] : eff.reg_writes) state.set_reg(r, v);
    eff.next_pc = next;
    state.pc = next;
    if (next >= n) state.halted = true;
    return out;
}

std::pair<ArchState, StepEffect> step(const Program& program, const ArchState& state, const MemoryLayout& layout) {
    ArchState next = state;
    auto out = execute(program, next, layout);
    if (out.fault) {
        if (*out.fault == MachineError::Kind::out_of_range_access)
            throw MachineError(*out.fault, out.fault_detail,
                               "access outside private/shared ranges or misaligned at " +
                                   std::to_string(out.fault_detail));
        throw MachineError(*out.fault, out.fault_detail, "invalid pc " + std::to_string(out.fault_detail));
    }
    return {std::move(next), std::move(out.effect)};
}

SeqRun run_seq(const Program& program, const ArchState& state0, const MemoryLayout& layout, std::size_t fuel) {
    SeqRun run{state0, {}, false};
    if (program.size() == 0 || run.final_state.pc >= program.size()) run.final_state.halted = true;
    while (!run.final_state.halted) {
        if (run.effects.size() >= fuel) {
            run.fuel_exhausted = true;
            break;
        }
        auto [next, eff] = step(program, run.final_state, layout);
        run.final_state = std::move(next);
        run.effects.push_back(std::move(eff));
    }
    return run;
}

}  // namespace rmi
