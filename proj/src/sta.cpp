#include "rmi/sta.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace rmi {

std::string_view violation_kind_name(Violation::Kind k) {
    switch (k) {
        case Violation::Kind::not_self_contained: return "NotSelfContained";
        case Violation::Kind::secret_leak: return "SecretLeak";
        case Violation::Kind::memory_dependent_leak: return "MemoryDependentLeak";
    }
    return "?";
}

std::string_view reason_name(Violation::Reason r) {
    switch (r) {
        case Violation::Reason::indirect_branch: return "indirect branch";
        case Violation::Reason::target_outside: return "target outside snippet";
        case Violation::Reason::unmatched_markers: return "unmatched markers";
    }
    return "?";
}

std::vector<Violation> check_self_contained(const Program& program, const BurstRegion& region) {
    std::vector<Violation> out;
    const auto nsc = [&](Violation::Reason reason, std::size_t at) {
        Violation v;
        v.kind = Violation::Kind::not_self_contained;
        v.reason = reason;
        v.region = region;
        v.instruction = at;
        out.push_back(std::move(v));
    };
    const auto marker_at = [&](std::size_t i, BurstMarker m) {
        return i < program.size() && program.at(i).op == Opcode::csrwi && program.at(i).marker == m;
    };
    if (region.on >= region.off || !marker_at(region.on, BurstMarker::on) ||
        !marker_at(region.off, BurstMarker::off)) {
        nsc(Violation::Reason::unmatched_markers, region.on);
        return out;
    }
    for (std::size_t i = region.on + 1; i < region.off; ++i) {
        const auto& inst = program.at(i);
        if (inst.op == Opcode::jalr) {
            nsc(Violation::Reason::indirect_branch, i);
        } else if (is_control(inst.op)) {
            if (inst.target <= region.on || inst.target > region.off) nsc(Violation::Reason::target_outside, i);
        } else if (inst.op == Opcode::csrwi) {
            nsc(Violation::Reason::unmatched_markers, i);
        }
    }
    return out;
}

namespace {

using RegSet = std::uint32_t;

constexpr RegSet bit(Reg r) { return r == kZero ? 0u : (RegSet{1} << r); }

RegSet regs_of(const std::vector<Reg>& rs) {
    RegSet s = 0;
    for (auto r : rs) s |= bit(r);
    return s;
}

// Registers whose values decide the control flow of a branch or jump.
RegSet control_regs(const Instruction& inst) {
    if (is_cond_branch(inst.op)) return bit(inst.rs1) | bit(inst.rs2);
    if (inst.op == Opcode::jalr) return bit(inst.rs1);
    return 0;
}

struct Taint {
    RegSet leaked = 0;
    std::optional<std::size_t> dep_load;
};

// Moves a leaked set from after `inst` to before it.
Taint pull_back(const Program& program, std::size_t idx, Taint t, bool declassify) {
    const auto& inst = program.at(idx);
    if (auto d = inst.dest(); d && (t.leaked & bit(*d))) {
        t.leaked &= ~bit(*d);
        switch (inst.op) {
            case Opcode::li:
            case Opcode::jal:
            case Opcode::jalr: break;
            default:
                if (is_load(inst.op)) {
                    t.leaked |= bit(inst.rs1);
                    if (!t.dep_load) t.dep_load = idx;
                } else {
                    t.leaked |= regs_of(inst.sources());
                }
        }
    }
    t.leaked |= control_regs(inst);
    // A committed access already exposes its base register.
    if (declassify && is_memory(inst.op)) t.leaked &= ~bit(inst.rs1);
    return t;
}

// Divergence into `i` from `i - 1`: the straight-line successor is a wrong path
// for some execution.
bool diverges_into(const Program& program, std::size_t i) {
    if (i == 0) return false;
    const auto& b = program.at(i - 1);
    if (b.op == Opcode::jalr) return true;
    return (is_cond_branch(b.op) || b.op == Opcode::jal) && b.target != i;
}

struct Analyzer {
    const Program& program;
    const MemoryLayout& layout;
    StaOptions options;

    std::vector<std::vector<std::size_t>> preds;
    std::size_t nodes = 0;

    struct EntryResult {
        RegSet leaked = 0;
        std::optional<std::size_t> dep_load;
        bool reached = false;
    };
    std::map<std::tuple<std::size_t, RegSet, bool>, EntryResult> memo;

    struct Finding {
        RegSet leaked = 0;
        std::optional<std::size_t> dep_load;
        std::vector<std::size_t> path;
    };
    std::map<std::pair<std::size_t, std::size_t>, Finding> findings;  // (transmitter, divergence)

    Analyzer(const Program& p, const MemoryLayout& l, StaOptions o)
        : program(p), layout(l), options(o), preds(p.size()) {
        const std::size_t n = p.size();
        for (std::size_t j = 0; j < n; ++j) {
            const auto& inst = p.at(j);
            if (inst.op == Opcode::jalr) {
                for (std::size_t i = 0; i < n; ++i) preds[i].push_back(j);
                continue;
            }
            if (inst.op == Opcode::jal) {
                if (inst.target < n) preds[inst.target].push_back(j);
                continue;
            }
            if (j + 1 < n) preds[j + 1].push_back(j);
            if (is_cond_branch(inst.op) && inst.target < n && inst.target != j + 1) preds[inst.target].push_back(j);
        }
    }

    void count() {
        if (++nodes > options.node_cap) throw PathExplosion(options.node_cap);
    }

    // Committed backward pass from the divergence to program entry.
    EntryResult to_entry(std::size_t from, Taint start) {
        const auto key = std::make_tuple(from, start.leaked, start.dep_load.has_value());
        if (auto it = memo.find(key); it != memo.end()) return it->second;

        EntryResult result;
        std::set<std::tuple<std::size_t, RegSet, bool>> seen;
        std::vector<std::pair<std::size_t, Taint>> stack{{from, start}};
        seen.insert(key);
        while (!stack.empty()) {
            auto [at, t] = stack.back();
            stack.pop_back();
            count();
            if (at == 0) {
                result.reached = true;
                result.leaked |= t.leaked;
                if (t.dep_load && !result.dep_load) result.dep_load = t.dep_load;
            }
            for (auto j : preds[at]) {
                auto next = pull_back(program, j, t, options.declassify);
                // Pruning: the same leaked set at the same point adds nothing.
                if (seen.insert({j, next.leaked, next.dep_load.has_value()}).second) stack.push_back({j, next});
            }
        }
        memo.emplace(key, result);
        return result;
    }

    std::optional<RegSet> transmitter_regs(std::size_t idx) const {
        const auto& inst = program.at(idx);
        if (is_memory(inst.op)) {
            if (inst.rs1 == kZero) {
                const auto a = static_cast<Addr>(inst.imm);
                if (layout.classify(a) != Domain::shared) return std::nullopt;
                return RegSet{0};
            }
            return bit(inst.rs1);
        }
        if (is_cond_branch(inst.op) || inst.op == Opcode::jalr) return control_regs(inst);
        return std::nullopt;
    }

    void from_transmitter(std::size_t t_idx, RegSet regs) {
        struct Node {
            std::size_t at;
            Taint taint;
            unsigned steps;
            std::vector<std::size_t> path;  // wrong-path instructions, first executed first
        };
        std::set<std::tuple<std::size_t, RegSet, bool, unsigned>> seen;
        std::vector<Node> stack{{t_idx, Taint{regs, std::nullopt}, 1, {t_idx}}};
        seen.insert({t_idx, regs, false, 1});
        while (!stack.empty()) {
            Node node = std::move(stack.back());
            stack.pop_back();
            count();
            if (diverges_into(program, node.at)) {
                const std::size_t b = node.at - 1;
                Taint at_b = node.taint;
                if (auto d = program.at(b).dest()) at_b.leaked &= ~bit(*d);
                at_b.leaked |= control_regs(program.at(b));
                const auto entry = to_entry(b, at_b);
                if (entry.reached) {
                    auto [it, fresh] = findings.try_emplace({t_idx, b});
                    auto& f = it->second;
                    f.leaked |= entry.leaked;
                    if (!f.dep_load) f.dep_load = entry.dep_load;
                    if (fresh) {
                        f.path.push_back(b);
                        f.path.insert(f.path.end(), node.path.begin(), node.path.end());
                    }
                }
            }
            if (node.steps >= options.spec_depth) continue;
            for (auto j : preds[node.at]) {
                if (program.at(j).op == Opcode::csrwi) continue;
                auto t = pull_back(program, j, node.taint, false);
                if (!seen.insert({j, t.leaked, t.dep_load.has_value(), node.steps + 1}).second) continue;
                std::vector<std::size_t> path{j};
                path.insert(path.end(), node.path.begin(), node.path.end());
                stack.push_back({j, t, node.steps + 1, std::move(path)});
            }
        }
    }
};

struct Linear {
    bool known = true;
    std::map<Reg, std::int64_t> coef;
    std::int64_t k = 0;

    Linear& operator+=(const Linear& o) {
        known = known && o.known;
        for (auto [r, c] : o.coef) coef[r] += c;
        k += o.k;
        std::erase_if(coef, [](const auto& e) { return e.second == 0; });
        return *this;
    }
    Linear scaled(std::int64_t s) const {
        Linear out = *this;
        for (auto& [r, c] : out.coef) c *= s;
        out.k *= s;
        return out;
    }
    std::optional<Reg> single_unit() const {
        if (!known || coef.size() != 1 || coef.begin()->second != 1) return std::nullopt;
        return coef.begin()->first;
    }
    bool constant() const { return known && coef.empty(); }
};

// Value reading of "the branch at b is taken", from linear forms of initial
// registers along the straight-line prefix [0, b).
std::optional<ValueCondition> value_reading(const Program& program, std::size_t b) {
    const auto& br = program.at(b);
    if (!is_cond_branch(br.op)) return std::nullopt;
    for (std::size_t j = 0; j < program.size(); ++j) {
        const auto& inst = program.at(j);
        if (inst.op == Opcode::jalr) return std::nullopt;
        if (j < b && is_control(inst.op)) return std::nullopt;
        if ((is_cond_branch(inst.op) || inst.op == Opcode::jal) && inst.target > 0 && inst.target <= b)
            return std::nullopt;
    }
    std::array<Linear, kNumRegs> f;
    for (Reg r = 1; r < kNumRegs; ++r) f[r].coef[r] = 1;
    for (std::size_t j = 0; j < b; ++j) {
        const auto& inst = program.at(j);
        const auto d = inst.dest();
        if (!d) continue;
        Linear v;
        switch (inst.op) {
            case Opcode::li: v.k = inst.imm; break;
            case Opcode::mv: v = f[inst.rs1]; break;
            case Opcode::addi: v = f[inst.rs1]; v.k += inst.imm; break;
            case Opcode::add: v = f[inst.rs1]; v += f[inst.rs2]; break;
            case Opcode::sub: v = f[inst.rs1]; v += f[inst.rs2].scaled(-1); break;
            case Opcode::slli:
                if (inst.imm >= 0 && inst.imm < 32) v = f[inst.rs1].scaled(std::int64_t{1} << inst.imm);
                else v.known = false;
                break;
            default: v.known = false;
        }
        f[*d] = v;
    }
    f[kZero] = Linear{};
    const Linear& lhs = f[br.rs1];
    const Linear& rhs = f[br.rs2];
    if (!lhs.known || !rhs.known) return std::nullopt;
    Linear diff = rhs;
    diff += lhs.scaled(-1);

    switch (br.op) {
        case Opcode::beq:
        case Opcode::bne: {
            const std::string op = br.op == Opcode::beq ? "==" : "!=";
            if (auto r = diff.single_unit()) return ValueCondition{*r, op, -diff.k};
            if (auto r = diff.scaled(-1).single_unit()) return ValueCondition{*r, op, diff.k};
            return std::nullopt;
        }
        case Opcode::bgeu:
        case Opcode::blt: {
            const bool geu = br.op == Opcode::bgeu;
            // rhs = lhs + r: taken iff r == 0 (bgeu) / r > 0 (blt), reading without wrap-around.
            if (auto r = diff.single_unit(); r && diff.k == 0) return ValueCondition{*r, geu ? "==" : ">", 0};
            if (auto r = lhs.single_unit(); r && lhs.k == 0 && rhs.constant())
                return ValueCondition{*r, geu ? ">=" : "<", rhs.k};
            if (auto r = rhs.single_unit(); r && rhs.k == 0 && lhs.constant())
                return ValueCondition{*r, geu ? "<=" : ">", lhs.k};
            return std::nullopt;
        }
        default: return std::nullopt;
    }
}

DivergenceCondition describe(const Program& program, std::size_t b) {
    const auto& inst = program.at(b);
    DivergenceCondition c;
    c.divergence = b;
    std::ostringstream os;
    const int line = inst.source_line;
    if (is_cond_branch(inst.op)) {
        os << "branch at line " << line << " (" << format_instruction(inst) << ") taken";
    } else if (inst.op == Opcode::jal) {
        os << "jump at line " << line << " (" << format_instruction(inst) << ") always taken";
    } else {
        os << "indirect jump at line " << line << " (" << format_instruction(inst)
           << ") not targeting the next instruction";
    }
    c.text = os.str();
    c.value = value_reading(program, b);
    return c;
}

}  // namespace

AnalysisReport analyze(const Program& program, const Policy& policy, const MemoryLayout& layout,
                       const StaOptions& options) {
    AnalysisReport report;
    report.program_fingerprint = fingerprint(program);
    for (const auto& region : program.burst_regions) {
        auto v = check_self_contained(program, region);
        report.violations.insert(report.violations.end(), v.begin(), v.end());
    }

    Analyzer an(program, layout, options);
    if (options.spec_depth > 0) {
        for (std::size_t i = 0; i < program.size(); ++i)
            if (auto regs = an.transmitter_regs(i)) an.from_transmitter(i, *regs);
    }
    report.explored_paths = an.nodes;

    std::map<std::size_t, DivergenceCondition> conditions;
    const auto condition_of = [&](std::size_t b) -> const DivergenceCondition& {
        auto it = conditions.find(b);
        if (it == conditions.end()) it = conditions.emplace(b, describe(program, b)).first;
        return it->second;
    };

    for (const auto& [key, f] : an.findings) {
        const auto [t, b] = key;
        const auto& cond = condition_of(b);
        for (Reg r = 1; r < kNumRegs; ++r) {
            if (!(f.leaked & bit(r))) continue;
            const bool secret = !policy.reg_public(r);
            report.leaked_initial_registers.push_back({r, t, b, cond, secret});
            if (!secret) continue;
            Violation v;
            v.kind = Violation::Kind::secret_leak;
            v.instruction = t;
            v.reg = r;
            v.divergence = b;
            v.condition = cond;
            v.path = f.path;
            report.violations.push_back(std::move(v));
        }
        if (f.dep_load) {
            Violation v;
            v.kind = Violation::Kind::memory_dependent_leak;
            v.instruction = t;
            v.divergence = b;
            v.condition = cond;
            v.dependency_load = *f.dep_load;
            v.path = f.path;
            report.violations.push_back(std::move(v));
        }
    }
    report.verdict = report.violations.empty() ? StaVerdict::pass : StaVerdict::fail;
    return report;
}

namespace {

std::string display(Reg r, const RegisterAliases& aliases) {
    std::string s(reg_name(r));
    if (auto it = aliases.find(r); it != aliases.end()) s += " (" + it->second + ")";
    return s;
}

std::string value_text(const ValueCondition& v, const RegisterAliases& aliases) {
    auto it = aliases.find(v.reg);
    const std::string name = it != aliases.end() ? it->second : std::string(reg_name(v.reg));
    return name + v.op + std::to_string(v.value);
}

void print_path(std::ostream& os, const Program& program, const std::vector<std::size_t>& path, std::size_t transmitter,
                std::size_t dep) {
    for (std::size_t k = 0; k < path.size(); ++k) {
        const auto i = path[k];
        const auto& inst = program.at(i);
        os << "    " << k + 1 << ". line " << inst.source_line << ": " << format_instruction(inst);
        if (k == 0) os << "    <- divergence";
        else if (i == transmitter && k + 1 == path.size()) os << "    <- transmitter";
        else if (i == dep) os << "    <- dependency load";
        os << '\n';
    }
}

void print_condition(std::ostream& os, const DivergenceCondition& c, const RegisterAliases& aliases) {
    os << "  wrong when: " << c.text;
    if (c.value) os << ", i.e. " << value_text(*c.value, aliases);
    os << '\n';
}

}  // namespace

std::string explain(const AnalysisReport& report, const Program& program, const RegisterAliases& aliases) {
    std::ostringstream os;
    if (report.verdict == StaVerdict::pass) {
        os << "sta: pass, no violations (" << report.explored_paths << " nodes explored)\n";
        return os.str();
    }
    os << "sta: fail, " << report.violations.size() << " violation(s) (" << report.explored_paths
       << " nodes explored)\n";

    // Secret leaks sharing a transmitter and divergence are reported together.
    std::map<std::pair<std::size_t, std::size_t>, std::vector<const Violation*>> leaks;
    for (const auto& v : report.violations)
        if (v.kind == Violation::Kind::secret_leak) leaks[{v.instruction, v.divergence}].push_back(&v);

    for (const auto& v : report.violations) {
        if (v.kind != Violation::Kind::not_self_contained) continue;
        const auto& inst = program.at(v.instruction);
        os << "\nNotSelfContained (" << reason_name(v.reason) << "): line " << inst.source_line << ": "
           << format_instruction(inst) << " in burst region at lines " << program.at(v.region.on).source_line
           << ".." << program.at(std::min(v.region.off, program.size() - 1)).source_line << '\n';
    }
    for (const auto& [key, group] : leaks) {
        const auto& first = *group.front();
        const auto& t = program.at(first.instruction);
        os << "\nSecretLeak: ";
        for (std::size_t k = 0; k < group.size(); ++k) os << (k ? ", " : "") << display(group[k]->reg, aliases);
        os << " leaked by line " << t.source_line << " (" << format_instruction(t) << ") on a wrong path after line "
           << program.at(first.divergence).source_line << '\n';
        print_condition(os, first.condition, aliases);
        os << "  speculative path:\n";
        print_path(os, program, first.path, first.instruction, program.size());
    }
    for (const auto& v : report.violations) {
        if (v.kind != Violation::Kind::memory_dependent_leak) continue;
        const auto& t = program.at(v.instruction);
        const auto& ld = program.at(v.dependency_load);
        os << "\nMemoryDependentLeak: line " << t.source_line << " (" << format_instruction(t)
           << ") transmits a value derived from the load at line " << ld.source_line << " ("
           << format_instruction(ld) << "), a double dereference\n";
        print_condition(os, v.condition, aliases);
        os << "  speculative path:\n";
        print_path(os, program, v.path, v.instruction, v.dependency_load);
    }
    return os.str();
}

}  // namespace rmi
