#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rmi/contract.hpp"

namespace rmi {

struct AnalysisReport;

// Attacker-observation semantics of the defense modes (all observe shm):
//   insecure  - shm.spec: shared memory observable speculatively, every predictor live
//   mi6       - no shared memory, nothing observable
//   safe      - shared accesses delayed until non-speculative: exactly shm.seq
//   burst     - shm.stl while the burst bit is set, shm.seq otherwise
//   burst_sta - burst if the static analyzer accepted the program, nothing otherwise
enum class HwMode { insecure, mi6, safe, burst, burst_sta };

std::string_view hw_mode_name(HwMode m);
std::optional<HwMode> parse_hw_mode(std::string_view s);

// A mode with the analyzer verdict already applied.
struct HwSemantics {
    HwMode mode = HwMode::safe;
    // burst_sta on a rejected program: every trace is empty.
    bool gated_empty = false;
    unsigned spec_depth = kDefaultSpecDepth;
};

class HwError : public std::runtime_error {
public:
    enum class Kind { report_program_mismatch, missing_report };
    HwError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// Resolves burst_sta against a report produced for the same program.
HwSemantics sta_gate(const Program& program, const AnalysisReport& report, unsigned spec_depth = kDefaultSpecDepth);

// Any mode other than burst_sta; burst_sta requires sta_gate.
HwSemantics resolve(HwMode mode, unsigned spec_depth = kDefaultSpecDepth);

struct SelfContainmentViolation {
    std::size_t instruction = 0;
    bool speculative = false;
};

struct HwTraceResult {
    TraceSet traces;
    std::vector<SelfContainmentViolation> diagnostics;
};

HwTraceResult hw_trace_set(const Program& program, const ArchState& state0, const MemoryLayout& layout,
                           const HwSemantics& semantics, std::size_t fuel = kDefaultFuel,
                           std::size_t cap = kDefaultTraceCap);

// Attacker views (Rollback markers dropped, deduplicated) of hw_trace_set.
TraceSet hw_view_set(const Program& program, const ArchState& state0, const MemoryLayout& layout,
                     const HwSemantics& semantics, std::size_t fuel = kDefaultFuel,
                     std::size_t cap = kDefaultTraceCap);

}  // namespace rmi
