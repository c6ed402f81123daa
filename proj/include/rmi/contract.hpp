#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rmi/asm.hpp"
#include "rmi/machine.hpp"

namespace rmi {

// What the attacker sees of an execution:
//   ct   - pc of every executed instruction + every memory address
//   arch - ct + loaded values
//   mem  - every memory address
//   shm  - addresses of shared-memory accesses only
enum class Leakage { ct, arch, mem, shm };

// Which control flows are explored:
//   seq  - in-order, non-speculative
//   stl  - seq + straight-line (pc+1) mispredictions of taken branches and jumps
//   spec - seq + adversarial PHT/BTB/RSB mispredictions
enum class ExecKind { seq, stl, spec };

inline constexpr unsigned kDefaultSpecDepth = 8;

struct ExecModel {
    ExecKind kind = ExecKind::seq;
    unsigned spec_depth = kDefaultSpecDepth;

    friend bool operator==(const ExecModel&, const ExecModel&) = default;
};

struct Contract {
    Leakage leak = Leakage::shm;
    ExecModel exec;

    friend bool operator==(const Contract&, const Contract&) = default;
};

std::string_view leakage_name(Leakage l);
std::string_view exec_name(ExecKind e);
std::optional<Leakage> parse_leakage(std::string_view s);
std::optional<ExecKind> parse_exec(std::string_view s);
// "shm.stl" form.
std::string contract_name(const Contract& c);
std::optional<Contract> parse_contract(std::string_view s, unsigned spec_depth = kDefaultSpecDepth);

struct Observation {
    enum class Kind { pc, addr, value, rollback };

    Kind kind = Kind::pc;
    std::uint64_t value = 0;  // pc index, address or loaded value
    Domain domain = Domain::priv;

    static Observation pc(std::size_t index) { return {Kind::pc, index, Domain::priv}; }
    static Observation addr(Addr a, Domain d) { return {Kind::addr, a, d}; }
    static Observation val(std::uint64_t v) { return {Kind::value, v, Domain::priv}; }
    static Observation rollback() { return {Kind::rollback, 0, Domain::priv}; }

    friend auto operator<=>(const Observation&, const Observation&) = default;
};

enum class Termination { halted, fuel_exhausted, fault };

std::string_view termination_name(Termination t);

struct ObservationTrace {
    std::vector<Observation> events;
    Termination end = Termination::halted;

    friend auto operator<=>(const ObservationTrace&, const ObservationTrace&) = default;
};

using TraceSet = std::set<ObservationTrace>;

std::string format_trace(const ObservationTrace& trace);

// The trace as the attacker compares it: Rollback markers carry no observable
// content of their own and are dropped.
ObservationTrace attacker_view(const ObservationTrace& trace);

struct Prediction {
    bool mispredict = false;
    std::size_t target = 0;

    static Prediction correct() { return {}; }
    static Prediction wrong(std::size_t target) { return {true, target}; }
    friend bool operator==(const Prediction&, const Prediction&) = default;
};

// One entry per dynamic control-flow instruction on the committed path; a
// missing tail means Correct.
using PredictorChoice = std::vector<Prediction>;

class EngineError : public std::runtime_error {
public:
    enum class Kind { inconsistent_choice, enumeration_cap_exceeded };

    EngineError(Kind kind, std::size_t detail, const std::string& message)
        : std::runtime_error(message), kind_(kind), detail_(detail) {}

    Kind kind() const { return kind_; }
    std::size_t detail() const { return detail_; }

private:
    Kind kind_;
    std::size_t detail_;
};

inline constexpr std::size_t kDefaultFuel = 128;
inline constexpr std::size_t kDefaultTraceCap = std::size_t{1} << 16;

// Mispredicted targets admissible for a control instruction whose architectural
// successor is `actual_next`.
std::vector<std::size_t> mispredict_targets(const Program& program, std::size_t index, std::size_t actual_next,
                                            ExecKind kind);

// ---- exploration ----------------------------------------------------------
//
// Wrong paths run at most one level deep, never commit, and stop at a csrwi
// MSPEC (speculation barrier), at the end of the program or at a fault. Since
// they never alter the committed path, a run is fully described by the
// committed event stream plus, for each dynamic control instruction, the
// observation sequence of every admissible wrong path.

struct WrongPath {
    std::size_t target = 0;
    std::vector<Observation> events;
    std::size_t length = 0;               // instructions executed speculatively
    std::vector<std::size_t> escapes;     // executed with burst on, outside any region
};

struct ChoicePoint {
    std::size_t instruction = 0;
    std::size_t position = 0;  // committed events emitted before the choice
    std::size_t actual_next = 0;
    std::vector<WrongPath> options;
};

struct Exploration {
    std::vector<Observation> committed;
    Termination end = Termination::halted;
    std::vector<ChoicePoint> points;
    ArchState final_state;
    // Committed instructions executed with burst on but outside every static region.
    std::vector<std::size_t> escapes;
};

struct SpeculationPolicy {
    ExecKind kind = ExecKind::seq;
    unsigned depth = kDefaultSpecDepth;
    // Mispredictions allowed only while the dynamic burst bit is set.
    bool burst_gated = false;
};

Exploration explore(const Program& program, const ArchState& state0, const MemoryLayout& layout, Leakage leak,
                    const SpeculationPolicy& policy, std::size_t fuel);

ObservationTrace assemble(const Exploration& run, const PredictorChoice& choice);
// Every admissible choice. Throws EnumerationCapExceeded past `cap` traces.
TraceSet expand_traces(const Exploration& run, std::size_t cap);
// Attacker views of every admissible choice, deduplicated per choice point.
TraceSet expand_views(const Exploration& run, std::size_t cap);

// ---- contract API ----------------------------------------------------------

ObservationTrace contract_trace(const Program& program, const ArchState& state0, const MemoryLayout& layout,
                                const Contract& contract, const PredictorChoice& choice,
                                std::size_t fuel = kDefaultFuel);

TraceSet contract_trace_set(const Program& program, const ArchState& state0, const MemoryLayout& layout,
                            const Contract& contract, std::size_t fuel = kDefaultFuel,
                            std::size_t cap = kDefaultTraceCap);

TraceSet contract_view_set(const Program& program, const ArchState& state0, const MemoryLayout& layout,
                           const Contract& contract, std::size_t fuel = kDefaultFuel,
                           std::size_t cap = kDefaultTraceCap);

}  // namespace rmi
