#include "rmi/ni.hpp"

#include <limits>
#include <map>

namespace rmi {

std::size_t StateSpace::size() const {
    std::size_t n = 1;
    const auto mul = [&](std::size_t k) {
        if (k != 0 && n > std::numeric_limits<std::size_t>::max() / k) n = std::numeric_limits<std::size_t>::max();
        else n *= k;
    };
    for (const auto& v : varying_registers) mul(v.values.size());
    for (const auto& v : varying_cells) mul(v.values.size());
    return n;
}

ArchState StateSpace::state(std::size_t index) const {
    ArchState s = base_state;
    for (const auto& v : varying_registers) {
        s.set_reg(v.reg, v.values[index % v.values.size()]);
        index /= v.values.size();
    }
    for (const auto& v : varying_cells) {
        s.set_byte(v.domain, v.address, v.values[index % v.values.size()]);
        index /= v.values.size();
    }
    return s;
}

void StateSpace::validate() const {
    for (const auto& v : varying_registers)
        if (v.values.empty())
            throw EngineError(EngineError::Kind::enumeration_cap_exceeded, 0,
                              "empty domain for register " + std::string(reg_name(v.reg)));
    for (const auto& v : varying_cells)
        if (v.values.empty())
            throw EngineError(EngineError::Kind::enumeration_cap_exceeded, 0,
                              "empty domain for cell " + std::to_string(v.address));
    const std::size_t n = size();
    const bool over = n != 0 && n > pair_cap / n;
    if (over)
        throw EngineError(EngineError::Kind::enumeration_cap_exceeded, pair_cap,
                          std::to_string(n) + " states exceed the cap of " + std::to_string(pair_cap) +
                              " state pairs");
}

StateSpace default_space(const ArchState& base, const std::vector<Reg>& regs, const std::vector<Addr>& cells,
                         const MemoryLayout& layout) {
    StateSpace space;
    space.base_state = base;
    for (auto r : regs) space.varying_registers.push_back({r, default_register_domain()});
    for (auto a : cells)
        space.varying_cells.push_back({a, layout.classify(a).value_or(Domain::priv), default_cell_domain()});
    return space;
}

std::string semantics_name(const Semantics& s) {
    if (const auto* c = std::get_if<Contract>(&s)) return contract_name(*c);
    const auto& h = std::get<HwSemantics>(s);
    std::string name(hw_mode_name(h.mode));
    if (h.mode == HwMode::burst_sta) name += h.gated_empty ? "[rejected]" : "[accepted]";
    return name;
}

TraceSet view_set(const Program& program, const ArchState& state0, const MemoryLayout& layout, const Semantics& s,
                  std::size_t fuel, std::size_t cap) {
    if (const auto* c = std::get_if<Contract>(&s)) return contract_view_set(program, state0, layout, *c, fuel, cap);
    return hw_view_set(program, state0, layout, std::get<HwSemantics>(s), fuel, cap);
}

namespace {

struct Component {
    bool is_reg;
    std::size_t slot;
};

std::uint64_t read(const StateSpace& space, const ArchState& s, const Component& c) {
    if (c.is_reg) return s.reg(space.varying_registers[c.slot].reg);
    const auto& v = space.varying_cells[c.slot];
    return s.byte(v.domain, v.address);
}

void write(const StateSpace& space, ArchState& s, const Component& c, std::uint64_t value) {
    if (c.is_reg) {
        s.set_reg(space.varying_registers[c.slot].reg, value);
    } else {
        const auto& v = space.varying_cells[c.slot];
        s.set_byte(v.domain, v.address, static_cast<std::uint8_t>(value));
    }
}

std::vector<Component> components(const StateSpace& space) {
    std::vector<Component> out;
    for (std::size_t i = 0; i < space.varying_registers.size(); ++i) out.push_back({true, i});
    for (std::size_t i = 0; i < space.varying_cells.size(); ++i) out.push_back({false, i});
    return out;
}

// Greedy shrink: reset components to their base values while the pair still violates.
template <class Violates>
void shrink(const StateSpace& space, ArchState& a, ArchState& b, Violates violates) {
    const auto comps = components(space);
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& c : comps) {
            const auto base = read(space, space.base_state, c);
            for (ArchState* s : {&a, &b}) {
                if (read(space, *s, c) == base) continue;
                ArchState cand = *s;
                write(space, cand, c, base);
                const bool ok = s == &a ? violates(cand, b) : violates(a, cand);
                if (ok) {
                    *s = std::move(cand);
                    changed = true;
                }
            }
        }
    }
}

// Finds two states with equal keys and different views; `Key` must be ordered.
template <class Key, class KeyOf, class ViewsOf>
std::optional<std::pair<ArchState, ArchState>> first_collision(const StateSpace& space, KeyOf key_of,
                                                               ViewsOf views_of, std::size_t& states) {
    std::map<Key, std::pair<std::size_t, TraceSet>> seen;
    const std::size_t n = space.size();
    for (std::size_t i = 0; i < n; ++i) {
        const ArchState s = space.state(i);
        ++states;
        auto key = key_of(s);
        auto views = views_of(s);
        auto it = seen.find(key);
        if (it == seen.end()) {
            seen.emplace(std::move(key), std::make_pair(i, std::move(views)));
            continue;
        }
        if (it->second.second != views) return std::make_pair(space.state(it->second.first), s);
    }
    return std::nullopt;
}

}  // namespace

NiVerdict check_direct_ni(const Program& program, const Semantics& s, const Policy& policy, const StateSpace& space,
                          const MemoryLayout& layout, const CheckLimits& limits) {
    space.validate();
    const auto comps = components(space);
    const auto is_public = [&](const Component& c) {
        if (c.is_reg) return policy.reg_public(space.varying_registers[c.slot].reg);
        const auto& v = space.varying_cells[c.slot];
        return v.domain == Domain::shared || policy.public_private_cells.count(v.address) != 0;
    };
    const auto key_of = [&](const ArchState& st) {
        std::vector<std::uint64_t> key;
        for (const auto& c : comps)
            if (is_public(c)) key.push_back(read(space, st, c));
        return key;
    };
    const auto views = [&](const ArchState& st) {
        return view_set(program, st, layout, s, limits.fuel, limits.trace_cap);
    };

    NiVerdict verdict;
    auto hit = first_collision<std::vector<std::uint64_t>>(space, key_of, views, verdict.states);
    if (!hit) return verdict;
    auto [a, b] = std::move(*hit);
    shrink(space, a, b, [&](const ArchState& x, const ArchState& y) {
        return key_of(x) == key_of(y) && views(x) != views(y);
    });
    verdict.holds = false;
    verdict.witness = Witness{a, b, views(a), views(b)};
    return verdict;
}

NiVerdict check_relative_ni(const Program& program, const Semantics& a, const Semantics& b, const StateSpace& space,
                            const MemoryLayout& layout, const CheckLimits& limits) {
    space.validate();
    const auto views_a = [&](const ArchState& st) {
        return view_set(program, st, layout, a, limits.fuel, limits.trace_cap);
    };
    const auto views_b = [&](const ArchState& st) {
        return view_set(program, st, layout, b, limits.fuel, limits.trace_cap);
    };

    NiVerdict verdict;
    auto hit = first_collision<TraceSet>(space, views_a, views_b, verdict.states);
    if (!hit) return verdict;
    auto [x, y] = std::move(*hit);
    shrink(space, x, y, [&](const ArchState& p, const ArchState& q) {
        return views_a(p) == views_a(q) && views_b(p) != views_b(q);
    });
    verdict.holds = false;
    verdict.witness = Witness{x, y, views_b(x), views_b(y)};
    return verdict;
}

NiVerdict check_hw_satisfies(const Program& program, const HwSemantics& mode, const Contract& contract,
                             const StateSpace& space, const MemoryLayout& layout, const CheckLimits& limits) {
    return check_relative_ni(program, contract, mode, space, layout, limits);
}

bool replays_relative(const Program& program, const Semantics& a, const Semantics& b, const Witness& w,
                      const MemoryLayout& layout, const CheckLimits& limits) {
    const auto va = [&](const ArchState& s) { return view_set(program, s, layout, a, limits.fuel, limits.trace_cap); };
    const auto vb = [&](const ArchState& s) { return view_set(program, s, layout, b, limits.fuel, limits.trace_cap); };
    return va(w.first) == va(w.second) && vb(w.first) != vb(w.second) && vb(w.first) == w.first_views &&
           vb(w.second) == w.second_views;
}

}  // namespace rmi
