#include "rmi/contract.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace rmi {

std::string_view leakage_name(Leakage l) {
    switch (l) {
        case Leakage::ct: return "ct";
        case Leakage::arch: return "arch";
        case Leakage::mem: return "mem";
        case Leakage::shm: return "shm";
    }
    return "?";
}

std::string_view exec_name(ExecKind e) {
    switch (e) {
        case ExecKind::seq: return "seq";
        case ExecKind::stl: return "stl";
        case ExecKind::spec: return "spec";
    }
    return "?";
}

std::optional<Leakage> parse_leakage(std::string_view s) {
    for (auto l : {Leakage::ct, Leakage::arch, Leakage::mem, Leakage::shm})
        if (leakage_name(l) == s) return l;
    return std::nullopt;
}

std::optional<ExecKind> parse_exec(std::string_view s) {
    for (auto e : {ExecKind::seq, ExecKind::stl, ExecKind::spec})
        if (exec_name(e) == s) return e;
    return std::nullopt;
}

std::string contract_name(const Contract& c) {
    return std::string(leakage_name(c.leak)) + "." + std::string(exec_name(c.exec.kind));
}

std::optional<Contract> parse_contract(std::string_view s, unsigned spec_depth) {
    const auto dot = s.find('.');
    if (dot == std::string_view::npos) return std::nullopt;
    const auto leak = parse_leakage(s.substr(0, dot));
    const auto exec = parse_exec(s.substr(dot + 1));
    if (!leak || !exec) return std::nullopt;
    return Contract{*leak, ExecModel{*exec, spec_depth}};
}

std::string_view termination_name(Termination t) {
    switch (t) {
        case Termination::halted: return "halted";
        case Termination::fuel_exhausted: return "fuel_exhausted";
        case Termination::fault: return "fault";
    }
    return "?";
}

std::string format_trace(const ObservationTrace& trace) {
    std::ostringstream os;
    os << '[';
    bool first = true;
    for (const auto& e : trace.events) {
        if (!first) os << ", ";
        first = false;
        switch (e.kind) {
            case Observation::Kind::pc: os << "pc " << e.value; break;
            case Observation::Kind::addr:
                os << "addr 0x" << std::hex << e.value << std::dec << ' ' << domain_name(e.domain);
                break;
            case Observation::Kind::value: os << "val " << e.value; break;
            case Observation::Kind::rollback: os << "rollback"; break;
        }
    }
    os << "] " << termination_name(trace.end);
    return os.str();
}

ObservationTrace attacker_view(const ObservationTrace& trace) {
    ObservationTrace out;
    out.end = trace.end;
    out.events.reserve(trace.events.size());
    for (const auto& e : trace.events)
        if (e.kind != Observation::Kind::rollback) out.events.push_back(e);
    return out;
}

std::vector<std::size_t> mispredict_targets(const Program& program, std::size_t index, std::size_t actual_next,
                                            ExecKind kind) {
    std::vector<std::size_t> out;
    const auto& inst = program.at(index);
    if (kind == ExecKind::seq || !is_control(inst.op)) return out;
    const std::size_t fall = index + 1;
    if (kind == ExecKind::stl || inst.op == Opcode::jal) {
        if (actual_next != fall) out.push_back(fall);
        return out;
    }
    if (is_cond_branch(inst.op)) {
        const std::size_t other = actual_next == fall ? inst.target : fall;
        if (other != actual_next) out.push_back(other);
        return out;
    }
    // jalr under spec: BTB/RSB may send fetch to any instruction of the program.
    for (std::size_t t = 0; t < program.size(); ++t)
        if (t != actual_next) out.push_back(t);
    return out;
}

namespace {

void emit(Leakage leak, std::size_t pc, const StepEffect& eff, std::vector<Observation>& out) {
    if (leak == Leakage::ct || leak == Leakage::arch) out.push_back(Observation::pc(pc));
    if (!eff.mem_event) return;
    const auto& m = *eff.mem_event;
    if (leak != Leakage::shm || m.domain == Domain::shared) out.push_back(Observation::addr(m.address, m.domain));
    if (leak == Leakage::arch && m.kind == AccessKind::load) out.push_back(Observation::val(m.value));
}

bool in_any_region(const Program& program, std::size_t index) { return program.region_of(index).has_value(); }

WrongPath run_wrong_path(const Program& program, const ArchState& after_branch, std::size_t target,
                         const MemoryLayout& layout, Leakage leak, unsigned depth, bool track_escapes) {
    WrongPath wp;
    wp.target = target;
    ArchState spec = after_branch;
    spec.pc = target;
    spec.halted = false;
    // Stores land in this private copy only: buffered, forwarded to later
    // wrong-path loads, and dropped at rollback.
    while (wp.length < depth && spec.pc < program.size()) {
        const std::size_t pc = spec.pc;
        if (program.instructions[pc].op == Opcode::csrwi) break;
        auto outcome = execute(program, spec, layout);
        if (outcome.fault) break;
        if (track_escapes && !in_any_region(program, pc)) wp.escapes.push_back(pc);
        emit(leak, pc, outcome.effect, wp.events);
        ++wp.length;
    }
    return wp;
}

std::size_t saturating_mul(std::size_t a, std::size_t b) {
    if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a) return std::numeric_limits<std::size_t>::max();
    return a * b;
}

}  // namespace

Exploration explore(const Program& program, const ArchState& state0, const MemoryLayout& layout, Leakage leak,
                    const SpeculationPolicy& policy, std::size_t fuel) {
    Exploration run;
    ArchState state = state0;
    const std::size_t n = program.size();
    bool burst_bit = false;
    std::size_t steps = 0;
    if (state.pc >= n) state.halted = true;

    while (!state.halted) {
        if (steps >= fuel) {
            run.end = Termination::fuel_exhausted;
            break;
        }
        const std::size_t pc = state.pc;
        const Instruction& inst = program.instructions[pc];
        if (policy.burst_gated && burst_bit && !in_any_region(program, pc)) run.escapes.push_back(pc);

        auto outcome = execute(program, state, layout);
        if (outcome.fault) {
            run.end = Termination::fault;
            break;
        }
        ++steps;
        emit(leak, pc, outcome.effect, run.committed);

        if (inst.op == Opcode::csrwi) burst_bit = inst.marker == BurstMarker::on;

        if (is_control(inst.op)) {
            ChoicePoint point;
            point.instruction = pc;
            point.position = run.committed.size();
            point.actual_next = outcome.effect.next_pc;
            const bool allowed = !policy.burst_gated || burst_bit;
            if (allowed) {
                for (auto t : mispredict_targets(program, pc, point.actual_next, policy.kind))
                    point.options.push_back(
                        run_wrong_path(program, state, t, layout, leak, policy.depth, policy.burst_gated && burst_bit));
            }
            run.points.push_back(std::move(point));
        }
    }
    run.final_state = std::move(state);
    return run;
}

ObservationTrace assemble(const Exploration& run, const PredictorChoice& choice) {
    if (choice.size() > run.points.size()) {
        for (std::size_t k = run.points.size(); k < choice.size(); ++k)
            if (choice[k].mispredict)
                throw EngineError(EngineError::Kind::inconsistent_choice, k,
                                  "misprediction for dynamic branch " + std::to_string(k) +
                                      " which is never executed");
    }
    ObservationTrace out;
    out.end = run.end;
    std::size_t emitted = 0;
    for (std::size_t k = 0; k < run.points.size(); ++k) {
        const auto& point = run.points[k];
        out.events.insert(out.events.end(), run.committed.begin() + static_cast<std::ptrdiff_t>(emitted),
                          run.committed.begin() + static_cast<std::ptrdiff_t>(point.position));
        emitted = point.position;
        if (k >= choice.size() || !choice[k].mispredict) continue;
        const auto it = std::find_if(point.options.begin(), point.options.end(),
                                     [&](const WrongPath& wp) { return wp.target == choice[k].target; });
        if (it == point.options.end())
            throw EngineError(EngineError::Kind::inconsistent_choice, k,
                              "target " + std::to_string(choice[k].target) +
                                  " is not an admissible misprediction at instruction " +
                                  std::to_string(point.instruction));
        out.events.insert(out.events.end(), it->events.begin(), it->events.end());
        out.events.push_back(Observation::rollback());
    }
    out.events.insert(out.events.end(), run.committed.begin() + static_cast<std::ptrdiff_t>(emitted),
                      run.committed.end());
    return out;
}

namespace {

// Alternatives per choice point as event fragments; an empty optional means
// "predicted correctly". Expands the cartesian product into `out`.
void expand(const Exploration& run, const std::vector<std::vector<const std::vector<Observation>*>>& alts,
            bool with_rollback, std::size_t k, std::size_t emitted, std::vector<Observation>& prefix,
            TraceSet& out) {
    if (k == run.points.size()) {
        ObservationTrace t;
        t.events = prefix;
        t.events.insert(t.events.end(), run.committed.begin() + static_cast<std::ptrdiff_t>(emitted),
                        run.committed.end());
        t.end = run.end;
        out.insert(std::move(t));
        return;
    }
    const auto& point = run.points[k];
    const auto mark = prefix.size();
    prefix.insert(prefix.end(), run.committed.begin() + static_cast<std::ptrdiff_t>(emitted),
                  run.committed.begin() + static_cast<std::ptrdiff_t>(point.position));
    expand(run, alts, with_rollback, k + 1, point.position, prefix, out);
    const auto base = prefix.size();
    for (const auto* events : alts[k]) {
        prefix.insert(prefix.end(), events->begin(), events->end());
        if (with_rollback) prefix.push_back(Observation::rollback());
        expand(run, alts, with_rollback, k + 1, point.position, prefix, out);
        prefix.resize(base);
    }
    prefix.resize(mark);
}

TraceSet expand_with(const Exploration& run, std::size_t cap, bool views) {
    std::vector<std::vector<const std::vector<Observation>*>> alts(run.points.size());
    std::size_t count = 1;
    for (std::size_t k = 0; k < run.points.size(); ++k) {
        for (const auto& wp : run.points[k].options) {
            if (views) {
                // The empty fragment is indistinguishable from a correct prediction.
                if (wp.events.empty()) continue;
                const bool dup = std::any_of(alts[k].begin(), alts[k].end(),
                                             [&](const auto* e) { return *e == wp.events; });
                if (dup) continue;
            }
            alts[k].push_back(&wp.events);
        }
        count = saturating_mul(count, alts[k].size() + 1);
        if (count > cap)
            throw EngineError(EngineError::Kind::enumeration_cap_exceeded, cap,
                              "trace enumeration exceeds cap of " + std::to_string(cap));
    }
    TraceSet out;
    std::vector<Observation> prefix;
    expand(run, alts, !views, 0, 0, prefix, out);
    return out;
}

}  // namespace

TraceSet expand_traces(const Exploration& run, std::size_t cap) { return expand_with(run, cap, false); }

TraceSet expand_views(const Exploration& run, std::size_t cap) { return expand_with(run, cap, true); }

ObservationTrace contract_trace(const Program& program, const ArchState& state0, const MemoryLayout& layout,
                                const Contract& contract, const PredictorChoice& choice, std::size_t fuel) {
    if (contract.exec.kind == ExecKind::seq) {
        for (std::size_t k = 0; k < choice.size(); ++k)
            if (choice[k].mispredict)
                throw EngineError(EngineError::Kind::inconsistent_choice, k,
                                  "seq execution admits no mispredictions");
    }
    const auto run = explore(program, state0, layout, contract.leak,
                             {contract.exec.kind, contract.exec.spec_depth, false}, fuel);
    return assemble(run, choice);
}

TraceSet contract_trace_set(const Program& program, const ArchState& state0, const MemoryLayout& layout,
                            const Contract& contract, std::size_t fuel, std::size_t cap) {
    const auto run = explore(program, state0, layout, contract.leak,
                             {contract.exec.kind, contract.exec.spec_depth, false}, fuel);
    return expand_traces(run, cap);
}

TraceSet contract_view_set(const Program& program, const ArchState& state0, const MemoryLayout& layout,
                           const Contract& contract, std::size_t fuel, std::size_t cap) {
    const auto run = explore(program, state0, layout, contract.leak,
                             {contract.exec.kind, contract.exec.spec_depth, false}, fuel);
    return expand_views(run, cap);
}

}  // namespace rmi
