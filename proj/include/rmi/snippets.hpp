#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

#include "rmi/ni.hpp"
#include "rmi/sta.hpp"

namespace rmi {

struct SnippetOptions {
    std::size_t max_instructions = 12;
    // Probability of wrapping part of the snippet in a burst region.
    double region_probability = 0.6;
    // Probability that a branch target lies before the branch.
    double backward_probability = 0.15;
};

// Random assembly text over a0..a3/t0 with loads, stores, arithmetic, branches,
// jumps and at most one burst region. Always parses.
std::string random_snippet(std::mt19937_64& rng, const SnippetOptions& options = {});

// State space used to cross-check the analyzer on random snippets: a0..a2
// over the default register domain plus one shared and one private byte.
StateSpace snippet_space(const MemoryLayout& layout = {});

struct SoundnessSample {
    std::string source;
    StaVerdict verdict = StaVerdict::pass;
    bool oracle_holds = true;
    bool conclusive = true;   // false when the analyzer or the oracle hit a cap
    bool unsound() const { return conclusive && verdict == StaVerdict::pass && !oracle_holds; }
};

struct SoundnessSummary {
    std::size_t samples = 0;
    std::size_t conclusive = 0;
    std::size_t analyzer_pass = 0;
    std::size_t oracle_holds = 0;
    std::size_t conservative = 0;  // analyzer fail, oracle holds
    std::vector<SoundnessSample> counterexamples;
};

SoundnessSample check_snippet(const std::string& source, const CheckLimits& limits);
// Draws snippets until `count` conclusive samples were checked (or 4*count draws).
SoundnessSummary sample_soundness(std::uint64_t seed, std::size_t count, const CheckLimits& limits);

}  // namespace rmi
