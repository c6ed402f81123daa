// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <array>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "rmi/corpus.hpp"
#include "rmi/llc.hpp"
#include "rmi/snippets.hpp"

using namespace rmi;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

const CorpusEntry& entry(const std::vector<CorpusEntry>& corpus, const std::string& name) {
    for (const auto& e : corpus)
        if (e.name == name) return e;
    throw std::runtime_error("corpus entry " + name + " missing");
}

Contract contract(Leakage l, ExecKind e) { return Contract{l, ExecModel{e, kDefaultSpecDepth}}; }
const Contract kShmSeq = contract(Leakage::shm, ExecKind::seq);
const Contract kShmStl = contract(Leakage::shm, ExecKind::stl);

constexpr Reg a0 = 10, a1 = 11, a2 = 12;

Outcome sta_reproduction(const std::vector<CorpusEntry>& corpus) {
    Outcome o;
    const auto& left = entry(corpus, "memcpy-left");
    const auto& right = entry(corpus, "memcpy-right");

    auto t = Clock::now();
    const auto rl = analyze(left.program, left.policy, left.layout);
    const double tl = seconds_since(t);
    t = Clock::now();
    const auto rr = analyze(right.program, right.policy, right.layout);
    const double tr = seconds_since(t);

    bool src = false, len = false;
    for (const auto& l : rl.leaked_initial_registers) {
        const bool len_zero = l.condition.value && *l.condition.value == ValueCondition{a2, "==", 0};
        src = src || (l.reg == a1 && len_zero);
        len = len || (l.reg == a2 && len_zero);
    }
    o.require(rl.verdict == StaVerdict::fail, "memcpy-left rejected");
    o.require(src && len, "a1 and a2 leaked under len==0");
    o.require(rr.verdict == StaVerdict::pass, "memcpy-right accepted");
    o.require(tl < 1.0 && tr < 1.0, "under 1 s per snippet");
    o.detail << "left fail leaking src+len under len==0 in " << tl * 1e3 << " ms, right pass in " << tr * 1e3
             << " ms";
    return o;
}

Outcome read_gadget(const std::vector<CorpusEntry>& corpus) {
    Outcome o;
    const auto& e = entry(corpus, "spectre-v1");
    const auto t = Clock::now();
    const auto spec = check_direct_ni(e.program, contract(Leakage::shm, ExecKind::spec), e.policy, e.space, e.layout);
    const auto insecure = check_direct_ni(e.program, resolve(HwMode::insecure), e.policy, e.space, e.layout);
    const auto safe = check_direct_ni(e.program, resolve(HwMode::safe), e.policy, e.space, e.layout);
    const double dt = seconds_since(t);

    o.require(!spec.holds && !insecure.holds, "violated under shm.spec and insecure");
    o.require(safe.holds, "holds under safe");
    o.require(dt < 60.0, "under 60 s");
    for (const auto* v : {&spec, &insecure}) {
        if (!v->witness) continue;
        const auto& w = *v->witness;
        std::size_t differing = 0;
        Addr where = 0;
        for (Addr a = e.layout.private_range.begin; a < e.layout.private_range.end; ++a)
            if (w.first.byte(Domain::priv, a) != w.second.byte(Domain::priv, a)) {
                ++differing;
                where = a;
            }
        const bool same_rest = w.first.regs == w.second.regs && w.first.shared_mem == w.second.shared_mem;
        o.require(same_rest && differing == 1 && !e.policy.cell_public(e.layout, where),
                  "witness differs in one secret byte");
        if (v == &insecure) o.detail << "witness differs only at private 0x" << std::hex << where << std::dec << ", ";
    }
    o.detail << "safe holds, " << spec.states << " states, " << dt << " s";
    return o;
}

Outcome satisfaction(const std::vector<CorpusEntry>& corpus, const std::vector<std::pair<std::string, Contract>>& checks) {
    Outcome o;
    std::size_t held = 0, total = 0;
    for (const auto& e : corpus) {
        for (const auto& [mode, c] : checks) {
            const auto sem = std::get<HwSemantics>(resolve_semantics(mode, e.program, e.policy, e.layout));
            const bool h = check_hw_satisfies(e.program, sem, c, e.space, e.layout).holds;
            held += h;
            ++total;
            o.require(h, mode + " on " + e.name);
        }
    }
    o.detail << held << "/" << total << " entry checks hold";
    return o;
}

// Same varying components as the entry, with each domain widened so that pairs
// also cover out-of-domain values.
StateSpace widened(const StateSpace& space) {
    StateSpace w = space;
    for (auto& v : w.varying_registers)
        for (std::uint64_t x : {0ULL, 1ULL, 3ULL, 8ULL, 0x1000ULL, 0x1008ULL, 0x8000ULL, 0x8040ULL})
            if (std::find(v.values.begin(), v.values.end(), x) == v.values.end()) v.values.push_back(x);
    return w;
}

Outcome lattice(const std::vector<CorpusEntry>& corpus) {
    Outcome o;
    constexpr std::size_t kPairs = 1000;
    constexpr std::size_t kFuel = 64;
    std::mt19937_64 rng(2024);
    std::size_t counterexamples = 0, premises = 0, min_pairs = SIZE_MAX;
    const std::array leaks{Leakage::arch, Leakage::ct, Leakage::mem, Leakage::shm};
    const std::array execs{ExecKind::spec, ExecKind::stl, ExecKind::seq};
    for (const auto& e : corpus) {
        const auto space = widened(e.space);
        std::size_t pairs = 0;
        for (std::size_t draw = 0; pairs < kPairs && draw < 4 * kPairs; ++draw) {
            const ArchState x = space.state(rng() % space.size());
            // Half the pairs differ in one component, which makes equal views likely.
            ArchState y = x;
            if (rng() % 2) {
                y = space.state(rng() % space.size());
            } else if (!space.varying_registers.empty()) {
                const auto& v = space.varying_registers[rng() % space.varying_registers.size()];
                y.set_reg(v.reg, v.values[rng() % v.values.size()]);
            }
            // eq[l][k]: equal views under leak l and exec k.
            std::array<std::array<bool, 3>, 4> eq{};
            try {
                for (std::size_t l = 0; l < leaks.size(); ++l)
                    for (std::size_t k = 0; k < execs.size(); ++k) {
                        const auto c = contract(leaks[l], execs[k]);
                        eq[l][k] = contract_view_set(e.program, x, e.layout, c, kFuel) ==
                                   contract_view_set(e.program, y, e.layout, c, kFuel);
                    }
            } catch (const EngineError&) {
                continue;
            }
            ++pairs;
            for (std::size_t l = 0; l + 1 < leaks.size(); ++l)
                for (std::size_t k = 0; k < execs.size(); ++k) {
                    premises += eq[l][k];
                    counterexamples += eq[l][k] && !eq[l + 1][k];
                }
            for (std::size_t l = 0; l < leaks.size(); ++l)
                for (std::size_t k = 0; k + 1 < execs.size(); ++k) {
                    premises += eq[l][k];
                    counterexamples += eq[l][k] && !eq[l][k + 1];
                }
        }
        min_pairs = std::min(min_pairs, pairs);
        o.require(pairs >= kPairs, "1000 pairs for " + e.name);
    }
    o.require(counterexamples == 0, "no counterexample");
    o.detail << corpus.size() << " entries, >= " << min_pairs << " pairs each, " << premises
             << " implication premises met, " << counterexamples << " counterexamples";
    return o;
}

Outcome soundness(const std::vector<CorpusEntry>& corpus) {
    Outcome o;
    const auto summary = sample_soundness(7, 250, CheckLimits{});
    o.require(summary.conclusive >= 200, "200 conclusive snippets");
    o.require(summary.counterexamples.empty(), "no unsound snippet");
    std::size_t corpus_unsound = 0;
    for (const auto& e : corpus) {
        if (analyze(e.program, e.policy, e.layout).verdict != StaVerdict::pass) continue;
        corpus_unsound += !check_relative_ni(e.program, kShmSeq, kShmStl, e.space, e.layout).holds;
    }
    o.require(corpus_unsound == 0, "no unsound corpus entry");
    const double rate = summary.oracle_holds ? double(summary.conservative) / double(summary.oracle_holds) : 0.0;
    o.detail << summary.conclusive << " snippets + " << corpus.size() << " entries, 0 unsound expected, "
             << summary.counterexamples.size() + corpus_unsound << " found; conservative failures "
             << summary.conservative << "/" << summary.oracle_holds << " oracle-secure snippets ("
             << static_cast<int>(rate * 100 + 0.5) << "%)";
    return o;
}

Outcome llc_model() {
    using namespace rmi::llc;
    Outcome o;
    std::mt19937_64 rng(99);

    std::ostringstream layout_text;
    {
        FILE* f = std::fopen(RMI_SOURCE_DIR "/layouts/enclave_split.json", "r");
        if (!f) throw std::runtime_error("layout file missing");
        std::array<char, 4096> buf{};
        std::size_t n = 0;
        while ((n = std::fread(buf.data(), 1, buf.size(), f)) > 0) layout_text.write(buf.data(), n);
        std::fclose(f);
    }
    const auto layout = parse_table(layout_text.str());
    PartitionTable initial;
    initial.sm_regions = layout.sm_regions;
    initial.entries[0] = layout.entries[0];
    initial.entries[1] = Entry{16, 512 - 17};
    CacheState cache;
    bool accepted = true;
    try {
        configure(initial, layout, 0, cache);
    } catch (const LlcError&) {
        accepted = false;
    }
    o.require(accepted, "layout accepted");

    std::size_t rejected = 0;
    constexpr std::size_t kOverlaps = 1000;
    for (std::size_t i = 0; i < kOverlaps; ++i) {
        PartitionTable bad = layout;
        const unsigned r = 1 + static_cast<unsigned>(rng() % (kRegionCount - 1));
        unsigned v = static_cast<unsigned>(rng() % kRegionCount);
        if (v == r) v = (v + 1) % kRegionCount;
        const auto& victim = layout.entry(v);
        const std::uint32_t base = victim.base + static_cast<std::uint32_t>(rng() % victim.size);
        bad.entries[r] = Entry{base, 1 + static_cast<std::uint32_t>(rng() % 8)};
        try {
            configure(layout, bad, 0, cache);
        } catch (const LlcError& e) {
            rejected += e.kind() == LlcError::Kind::overlapping_ranges || e.kind() == LlcError::Kind::exceeds_capacity;
        }
    }
    o.require(rejected == kOverlaps, "every overlapping table rejected");

    bool flush_exact = true;
    std::size_t flushed_lines = 0;
    for (unsigned r = 0; r < kRegionCount; ++r) {
        CacheState c;
        const auto& e = layout.entry(r);
        for (std::size_t i = 0; i < std::size_t{e.size} * 40; ++i)
            c.access((PhysAddr{r} << kRegionShift) | ((rng() % (1u << 19)) << 6), layout);
        const auto before = c.valid_data_lines(r);
        const auto res = flush_region(r, c, layout);
        flush_exact = flush_exact && before > 0 && c.valid_data_lines(r) == 0 &&
                      res.accesses == std::size_t{e.size} * layout.geometry.ways &&
                      res.accesses == flush_cost(r, layout) && res.evicted_data_lines == before;
        flushed_lines += before;
    }
    o.require(flush_exact, "flush invalidates all region lines in size*ways accesses");

    constexpr int kSequences = 10'000;
    std::size_t disturbed = 0;
    CacheState shared_cache;
    for (int s = 0; s < kSequences; ++s) {
        const unsigned victim = static_cast<unsigned>(rng() % kRegionCount);
        const auto& e = layout.entry(victim);
        for (int i = 0; i < 8; ++i)
            shared_cache.access((PhysAddr{victim} << kRegionShift) | ((rng() % (1u << 19)) << 6), layout);
        std::vector<std::vector<Line>> snapshot;
        for (std::size_t k = e.base; k < e.base + e.size; ++k) snapshot.push_back(shared_cache.set(k));
        for (int i = 0; i < 32; ++i) {
            unsigned other = static_cast<unsigned>(rng() % kRegionCount);
            if (other == victim) other = (other + 1) % kRegionCount;
            PhysAddr a = (PhysAddr{other} << kRegionShift) | ((rng() % (1u << 19)) << 6);
            if (rng() % 4 == 0) a |= kZeroDeviceBase;
            shared_cache.access(a, layout);
        }
        bool same = true;
        for (std::size_t k = e.base; k < e.base + e.size; ++k) {
            const auto& now = shared_cache.set(k);
            const auto& then = snapshot[k - e.base];
            for (std::size_t w = 0; w < now.size(); ++w)
                same = same && now[w].valid == then[w].valid && now[w].tag == then[w].tag &&
                       now[w].last_use == then[w].last_use;
        }
        disturbed += !same;
    }
    o.require(disturbed == 0, "isolation");
    o.detail << "layout accepted, " << rejected << "/" << kOverlaps << " overlapping tables rejected, 64 regions "
             << "flushed (" << flushed_lines << " lines, exact cost), " << kSequences << " sequences with "
             << disturbed << " cross-region disturbances";
    return o;
}

std::string tool_output(const std::string& args, int& code) {
    const std::string cmd = std::string("\"") + RMI_TOOL + "\" " + args;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw std::runtime_error("cannot run " + cmd);
    std::string out;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
    code = pclose(pipe);
    return out;
}

Outcome determinism() {
    Outcome o;
    int c1 = 0, c2 = 0;
    const auto first = tool_output("corpus-verify --json", c1);
    const auto second = tool_output("corpus-verify --json", c2);
    o.require(c1 == 0 && c2 == 0, "both runs succeed");
    o.require(!first.empty() && first == second, "byte-identical output");
    o.detail << "two runs, " << first.size() << " bytes each, " << (first == second ? "identical" : "different");
    return o;
}

}  // namespace

int main() {
    const auto corpus = load_corpus();
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"memcpy analyzer verdicts", [&] { return sta_reproduction(corpus); }},
        {"universal read gadget", [&] { return read_gadget(corpus); }},
        {"safe mode satisfies shm.seq", [&] { return satisfaction(corpus, {{"safe", kShmSeq}}); }},
        {"burst containment and composition",
         [&] { return satisfaction(corpus, {{"burst", kShmStl}, {"burst_sta", kShmSeq}}); }},
        {"contract lattice", [&] { return lattice(corpus); }},
        {"analyzer soundness", [&] { return soundness(corpus); }},
        {"LLC partitioning", [] { return llc_model(); }},
        {"deterministic corpus-verify", [] { return determinism(); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& [name, run] = criteria[i];
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        failed += !o.pass;
        std::cout << "criterion " << i + 1 << ": " << (o.pass ? "PASS" : "FAIL") << "  " << name << ": "
                  << o.detail.str() << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
