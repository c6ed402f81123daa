#include "rmi/hw_modes.hpp"

#include <algorithm>

#include "rmi/sta.hpp"

namespace rmi {

std::string_view hw_mode_name(HwMode m) {
    switch (m) {
        case HwMode::insecure: return "insecure";
        case HwMode::mi6: return "mi6";
        case HwMode::safe: return "safe";
        case HwMode::burst: return "burst";
        case HwMode::burst_sta: return "burst_sta";
    }
    return "?";
}

std::optional<HwMode> parse_hw_mode(std::string_view s) {
    for (auto m : {HwMode::insecure, HwMode::mi6, HwMode::safe, HwMode::burst, HwMode::burst_sta})
        if (hw_mode_name(m) == s) return m;
    if (s == "burst-sta") return HwMode::burst_sta;
    return std::nullopt;
}

HwSemantics sta_gate(const Program& program, const AnalysisReport& report, unsigned spec_depth) {
    if (report.program_fingerprint != fingerprint(program))
        throw HwError(HwError::Kind::report_program_mismatch, "analysis report was produced for a different program");
    return HwSemantics{HwMode::burst_sta, report.verdict != StaVerdict::pass, spec_depth};
}

HwSemantics resolve(HwMode mode, unsigned spec_depth) {
    if (mode == HwMode::burst_sta)
        throw HwError(HwError::Kind::missing_report, "burst_sta needs an analysis report (use sta_gate)");
    return HwSemantics{mode, false, spec_depth};
}

namespace {

bool observes_nothing(const HwSemantics& s) { return s.mode == HwMode::mi6 || s.gated_empty; }

TraceSet nothing() { return TraceSet{ObservationTrace{}}; }

SpeculationPolicy policy_for(const HwSemantics& s) {
    switch (s.mode) {
        case HwMode::insecure: return {ExecKind::spec, s.spec_depth, false};
        case HwMode::safe: return {ExecKind::seq, s.spec_depth, false};
        default: return {ExecKind::stl, s.spec_depth, true};
    }
}

std::vector<SelfContainmentViolation> escapes_of(const Exploration& run) {
    std::vector<SelfContainmentViolation> out;
    const auto add = [&](std::size_t i, bool spec) {
        SelfContainmentViolation v{i, spec};
        const bool seen = std::any_of(out.begin(), out.end(), [&](const auto& o) {
            return o.instruction == v.instruction && o.speculative == v.speculative;
        });
        if (!seen) out.push_back(v);
    };
    for (auto i : run.escapes) add(i, false);
    for (const auto& p : run.points)
        for (const auto& wp : p.options)
            for (auto i : wp.escapes) add(i, true);
    return out;
}

}  // namespace

HwTraceResult hw_trace_set(const Program& program, const ArchState& state0, const MemoryLayout& layout,
                           const HwSemantics& semantics, std::size_t fuel, std::size_t cap) {
    if (observes_nothing(semantics)) return {nothing(), {}};
    const auto run = explore(program, state0, layout, Leakage::shm, policy_for(semantics), fuel);
    return {expand_traces(run, cap), escapes_of(run)};
}

TraceSet hw_view_set(const Program& program, const ArchState& state0, const MemoryLayout& layout,
                     const HwSemantics& semantics, std::size_t fuel, std::size_t cap) {
    if (observes_nothing(semantics)) return nothing();
    const auto run = explore(program, state0, layout, Leakage::shm, policy_for(semantics), fuel);
    return expand_views(run, cap);
}

}  // namespace rmi
