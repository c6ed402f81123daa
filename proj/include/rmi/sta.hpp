#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmi/asm.hpp"
#include "rmi/contract.hpp"
#include "rmi/machine.hpp"
#include "rmi/policy.hpp"

namespace rmi {

enum class StaVerdict { pass, fail };

// Value-level reading of a divergence condition over initial registers,
// e.g. {a2, "==", 0}. Only produced for simple comparisons.
struct ValueCondition {
    Reg reg = 0;
    std::string op;
    std::int64_t value = 0;

    friend bool operator==(const ValueCondition&, const ValueCondition&) = default;
};

// When a wrong path starting after `divergence` is actually wrong.
struct DivergenceCondition {
    std::size_t divergence = 0;
    std::string text;  // syntactic, e.g. "branch at line 3 (bgeu a0, a2, .end) taken"
    std::optional<ValueCondition> value;
};

struct LeakedRegister {
    Reg reg = 0;
    std::size_t transmitter = 0;
    std::size_t divergence = 0;
    DivergenceCondition condition;
    bool secret = true;
};

struct Violation {
    enum class Kind { not_self_contained, secret_leak, memory_dependent_leak };
    enum class Reason { indirect_branch, target_outside, unmatched_markers };

    Kind kind = Kind::secret_leak;
    // not_self_contained
    Reason reason = Reason::target_outside;
    BurstRegion region;
    std::size_t instruction = 0;  // offending instruction or transmitter
    // secret_leak
    Reg reg = 0;
    // secret_leak / memory_dependent_leak
    std::size_t divergence = 0;
    DivergenceCondition condition;
    std::size_t dependency_load = 0;   // memory_dependent_leak: load feeding the transmitter
    std::vector<std::size_t> path;     // speculative path, divergence first, transmitter last
};

std::string_view violation_kind_name(Violation::Kind k);
std::string_view reason_name(Violation::Reason r);

struct AnalysisReport {
    StaVerdict verdict = StaVerdict::pass;
    std::vector<Violation> violations;
    std::vector<LeakedRegister> leaked_initial_registers;
    std::size_t explored_paths = 0;
    std::uint64_t program_fingerprint = 0;
};

struct StaOptions {
    // Must match the stl window of the contract engine.
    unsigned spec_depth = kDefaultSpecDepth;
    std::size_t node_cap = 10'000;
    // Committed loads/stores make their base register public. Only sound when the
    // shm trace pins down that base, e.g. when no varying register can hold a
    // private address; disable for a strictly conservative analysis.
    bool declassify = true;
};

class PathExplosion : public std::runtime_error {
public:
    explicit PathExplosion(std::size_t cap)
        : std::runtime_error("backward exploration exceeded " + std::to_string(cap) + " nodes"), cap_(cap) {}
    std::size_t cap() const { return cap_; }

private:
    std::size_t cap_;
};

std::vector<Violation> check_self_contained(const Program& program, const BurstRegion& region);

AnalysisReport analyze(const Program& program, const Policy& policy, const MemoryLayout& layout,
                       const StaOptions& options = {});

// Register display names, e.g. {a2 -> "len"}.
using RegisterAliases = std::map<Reg, std::string>;

std::string explain(const AnalysisReport& report, const Program& program, const RegisterAliases& aliases = {});

}  // namespace rmi
