#include "rmi/json_io.hpp"

#include <cstdio>

namespace rmi::io {

Reg reg_from_json(const json& j) {
    if (!j.is_string()) throw FormatError("register must be a name string");
    const auto r = parse_reg(j.get<std::string>());
    if (!r) throw FormatError("unknown register '" + j.get<std::string>() + "'");
    return *r;
}

std::uint64_t number_from_json(const json& j) {
    if (j.is_number_unsigned() || j.is_number_integer()) return j.get<std::uint64_t>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        try {
            std::size_t pos = 0;
            const auto v = std::stoull(s, &pos, 0);
            if (pos == s.size()) return v;
        } catch (const std::exception&) {
        }
        throw FormatError("bad number '" + s + "'");
    }
    throw FormatError("expected a number");
}

std::string hex(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
    return buf;
}

namespace {

json memory_to_json(const std::map<Addr, std::uint8_t>& m) {
    json out = json::object();
    for (auto [a, v] : m)
        if (v != 0) out[hex(a)] = v;
    return out;
}

}  // namespace

json to_json(const ArchState& s) {
    json regs = json::object();
    for (Reg r = 1; r < kNumRegs; ++r)
        if (s.reg(r) != 0) regs[std::string(reg_name(r))] = s.reg(r);
    return {{"pc", s.pc},
            {"regs", regs},
            {"private_mem", memory_to_json(s.private_mem)},
            {"shared_mem", memory_to_json(s.shared_mem)}};
}

ArchState state_from_json(const json& j, const MemoryLayout& layout) {
    ArchState s;
    s.pc = j.value("pc", std::size_t{0});
    const json regs = j.value("regs", json::object());
    for (const auto& [name, v] : regs.items()) s.set_reg(reg_from_json(name), number_from_json(v));
    const auto fill = [&](const char* key, Domain d) {
        const json cells = j.value(key, json::object());
        for (const auto& [addr, v] : cells.items()) {
            const Addr a = number_from_json(addr);
            if (layout.classify(a) != d) throw FormatError(std::string(key) + ": " + addr + " is outside its range");
            const auto value = number_from_json(v);
            if (value > 0xff) throw FormatError(std::string(key) + ": byte value out of range at " + addr);
            s.set_byte(d, a, static_cast<std::uint8_t>(value));
        }
    };
    fill("private_mem", Domain::priv);
    fill("shared_mem", Domain::shared);
    return s;
}

MemoryLayout layout_from_json(const json& j) {
    MemoryLayout l;
    const auto range = [&](const char* key, AddrRange& r) {
        if (!j.contains(key)) return;
        const auto& a = j.at(key);
        r = AddrRange{number_from_json(a.at(0)), number_from_json(a.at(1))};
    };
    range("private", l.private_range);
    range("shared", l.shared_range);
    l.validate();
    return l;
}

json to_json(const MemoryLayout& l) {
    return {{"private", {hex(l.private_range.begin), hex(l.private_range.end)}},
            {"shared", {hex(l.shared_range.begin), hex(l.shared_range.end)}}};
}

Policy policy_from_json(const json& j) {
    Policy p;
    for (const auto& r : j.value("public_regs", json::array())) p.public_regs.insert(reg_from_json(r));
    for (const auto& a : j.value("public_private_cells", json::array())) p.public_private_cells.insert(number_from_json(a));
    return p;
}

json to_json(const Policy& p) {
    json regs = json::array();
    for (auto r : p.public_regs) regs.push_back(reg_name(r));
    json cells = json::array();
    for (auto a : p.public_private_cells) cells.push_back(hex(a));
    return {{"public_regs", regs}, {"public_private_cells", cells}};
}

StateSpace space_from_json(const json& j, const MemoryLayout& layout) {
    StateSpace s;
    if (j.contains("base")) s.base_state = state_from_json(j.at("base"), layout);
    const json regs = j.value("registers", json::object());
    for (const auto& [name, dom] : regs.items()) {
        StateSpace::VaryingRegister v{reg_from_json(name), {}};
        if (dom.is_string() && dom.get<std::string>() == "default") v.values = default_register_domain();
        else
            for (const auto& x : dom) v.values.push_back(number_from_json(x));
        s.varying_registers.push_back(std::move(v));
    }
    for (const auto& c : j.value("cells", json::array())) {
        StateSpace::VaryingCell v;
        v.address = number_from_json(c.at("address"));
        const auto d = layout.classify(v.address);
        if (!d) throw FormatError("cell " + hex(v.address) + " is outside memory");
        v.domain = *d;
        if (c.contains("values"))
            for (const auto& x : c.at("values")) v.values.push_back(static_cast<std::uint8_t>(number_from_json(x)));
        else
            v.values = default_cell_domain();
        s.varying_cells.push_back(std::move(v));
    }
    if (j.contains("pair_cap")) s.pair_cap = number_from_json(j.at("pair_cap"));
    return s;
}

json to_json(const StateSpace& s) {
    json regs = json::object();
    for (const auto& v : s.varying_registers) regs[std::string(reg_name(v.reg))] = v.values;
    json cells = json::array();
    for (const auto& v : s.varying_cells) cells.push_back({{"address", hex(v.address)}, {"values", v.values}});
    return {{"base", to_json(s.base_state)}, {"registers", regs}, {"cells", cells}, {"pair_cap", s.pair_cap}};
}

RegisterAliases aliases_from_json(const json& j) {
    RegisterAliases out;
    for (const auto& [name, alias] : j.items()) out[reg_from_json(name)] = alias.get<std::string>();
    return out;
}

json to_json(const ObservationTrace& t) {
    json events = json::array();
    for (const auto& e : t.events) {
        switch (e.kind) {
            case Observation::Kind::pc: events.push_back({{"pc", e.value}}); break;
            case Observation::Kind::addr:
                events.push_back({{"addr", hex(e.value)}, {"domain", domain_name(e.domain)}});
                break;
            case Observation::Kind::value: events.push_back({{"val", e.value}}); break;
            case Observation::Kind::rollback: events.push_back("rollback"); break;
        }
    }
    return {{"events", events}, {"end", termination_name(t.end)}};
}

json to_json(const TraceSet& ts) {
    json out = json::array();
    for (const auto& t : ts) out.push_back(to_json(t));
    return out;
}

namespace {

json condition_json(const DivergenceCondition& c) {
    json j = {{"divergence", c.divergence}, {"text", c.text}};
    if (c.value) j["value"] = {{"reg", reg_name(c.value->reg)}, {"op", c.value->op}, {"value", c.value->value}};
    return j;
}

}  // namespace

json to_json(const AnalysisReport& r, const Program& program) {
    const auto line = [&](std::size_t i) { return i < program.size() ? program.at(i).source_line : 0; };
    json violations = json::array();
    for (const auto& v : r.violations) {
        json j = {{"kind", violation_kind_name(v.kind)}, {"instruction", v.instruction}, {"line", line(v.instruction)}};
        if (v.kind == Violation::Kind::not_self_contained) {
            j["reason"] = reason_name(v.reason);
            j["region"] = {v.region.on, v.region.off};
        } else {
            if (v.kind == Violation::Kind::secret_leak) j["register"] = reg_name(v.reg);
            if (v.kind == Violation::Kind::memory_dependent_leak) j["dependency_load"] = v.dependency_load;
            j["condition"] = condition_json(v.condition);
            j["path"] = v.path;
        }
        violations.push_back(std::move(j));
    }
    json leaked = json::array();
    for (const auto& l : r.leaked_initial_registers)
        leaked.push_back({{"register", reg_name(l.reg)},
                          {"transmitter", l.transmitter},
                          {"divergence", l.divergence},
                          {"secret", l.secret},
                          {"condition", condition_json(l.condition)}});
    return {{"verdict", r.verdict == StaVerdict::pass ? "pass" : "fail"},
            {"violations", violations},
            {"leaked_initial_registers", leaked},
            {"explored_paths", r.explored_paths},
            {"program_fingerprint", hex(r.program_fingerprint)}};
}

json to_json(const NiVerdict& v) {
    json j = {{"verdict", v.holds ? "holds" : "violated"}, {"states", v.states}};
    if (v.witness)
        j["witness"] = {{"first", to_json(v.witness->first)},
                        {"second", to_json(v.witness->second)},
                        {"first_views", to_json(v.witness->first_views)},
                        {"second_views", to_json(v.witness->second_views)}};
    return j;
}

}  // namespace rmi::io
