#include "rmi/snippets.hpp"

#include <sstream>
#include <vector>

namespace rmi {

namespace {

const char* const kRegs[] = {"a0", "a1", "a2", "a3", "t0"};
const char* const kImms[] = {"0", "1", "64", "0x1000", "0x8000"};

template <class T, std::size_t N>
const T& pick(std::mt19937_64& rng, const T (&items)[N]) {
    return items[std::uniform_int_distribution<std::size_t>(0, N - 1)(rng)];
}

struct Line {
    std::string text;
    int target = -1;  // branch/jump target index, resolved to a label
};

}  // namespace

std::string random_snippet(std::mt19937_64& rng, const SnippetOptions& options) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const std::size_t limit = std::max<std::size_t>(options.max_instructions, 3);
    const bool region = coin(rng) < options.region_probability;
    const std::size_t body = std::uniform_int_distribution<std::size_t>(1, limit - (region ? 2 : 0))(rng);
    const std::size_t total = body + (region ? 2 : 0);

    std::vector<Line> lines(total);
    std::size_t on = 0;
    std::size_t off = 0;
    if (region) {
        on = std::uniform_int_distribution<std::size_t>(0, total - 2)(rng);
        off = std::uniform_int_distribution<std::size_t>(on + 1, total - 1)(rng);
        lines[on].text = "csrwi MSPEC, BURST_ON";
        lines[off].text = "csrwi MSPEC, BURST_OFF";
    }
    for (std::size_t i = 0; i < total; ++i) {
        if (region && (i == on || i == off)) continue;
        const std::string rd = pick(rng, kRegs), rs = pick(rng, kRegs), rt = pick(rng, kRegs);
        std::ostringstream os;
        const int kind = std::uniform_int_distribution<int>(0, 9)(rng);
        const auto target = [&] {
            if (i > 0 && coin(rng) < options.backward_probability)
                return static_cast<int>(std::uniform_int_distribution<std::size_t>(0, i)(rng));
            return static_cast<int>(std::uniform_int_distribution<std::size_t>(i + 1, total)(rng));
        };
        switch (kind) {
            case 0: os << "lbu " << rd << ", 0(" << rs << ")"; break;
            case 1: os << (coin(rng) < 0.5 ? "lw " : "ld ") << rd << ", 0(" << rs << ")"; break;
            case 2: os << "sb " << rt << ", 0(" << rs << ")"; break;
            case 3: os << "add " << rd << ", " << rs << ", " << rt; break;
            case 4: os << "addi " << rd << ", " << rs << ", " << pick(rng, kImms); break;
            case 5: os << "li " << rd << ", " << pick(rng, kImms); break;
            case 6:
                if (coin(rng) < 0.5) os << "mv " << rd << ", " << rs;
                else os << "slli " << rd << ", " << rs << ", 6";
                break;
            case 7:
            case 8: {
                static const char* const kBranches[] = {"beq", "bne", "blt", "bgeu"};
                os << pick(rng, kBranches) << ' ' << rs << ", " << rt << ", ";
                lines[i].target = target();
                break;
            }
            default:
                os << "jal zero, ";
                lines[i].target = static_cast<int>(std::uniform_int_distribution<std::size_t>(i + 1, total)(rng));
        }
        lines[i].text = os.str();
    }

    std::vector<bool> labelled(total + 1, false);
    for (const auto& l : lines)
        if (l.target >= 0) labelled[static_cast<std::size_t>(l.target)] = true;
    std::ostringstream out;
    for (std::size_t i = 0; i <= total; ++i) {
        if (labelled[i]) out << "L" << i << ":\n";
        if (i == total) break;
        out << "  " << lines[i].text;
        if (lines[i].target >= 0) out << 'L' << lines[i].target;
        out << '\n';
    }
    return out.str();
}

StateSpace snippet_space(const MemoryLayout& layout) {
    StateSpace s;
    for (Reg r : {Reg{10}, Reg{11}, Reg{12}}) s.varying_registers.push_back({r, default_register_domain()});
    s.varying_cells.push_back({layout.shared_range.begin, Domain::shared, default_cell_domain()});
    s.varying_cells.push_back({layout.private_range.begin, Domain::priv, default_cell_domain()});
    return s;
}

SoundnessSample check_snippet(const std::string& source, const CheckLimits& limits) {
    SoundnessSample out;
    out.source = source;
    const MemoryLayout layout;
    const Program p = parse_program(source);
    try {
        out.verdict = analyze(p, Policy{}, layout).verdict;
        const Contract seq{Leakage::shm, {ExecKind::seq, kDefaultSpecDepth}};
        const Contract stl{Leakage::shm, {ExecKind::stl, kDefaultSpecDepth}};
        out.oracle_holds = check_relative_ni(p, seq, stl, snippet_space(layout), layout, limits).holds;
    } catch (const PathExplosion&) {
        out.conclusive = false;
    } catch (const EngineError&) {
        out.conclusive = false;
    }
    return out;
}

SoundnessSummary sample_soundness(std::uint64_t seed, std::size_t count, const CheckLimits& limits) {
    std::mt19937_64 rng(seed);
    SoundnessSummary sum;
    for (std::size_t draw = 0; sum.conclusive < count && draw < 4 * count; ++draw) {
        auto s = check_snippet(random_snippet(rng), limits);
        ++sum.samples;
        if (!s.conclusive) continue;
        ++sum.conclusive;
        sum.analyzer_pass += s.verdict == StaVerdict::pass;
        sum.oracle_holds += s.oracle_holds;
        sum.conservative += s.verdict == StaVerdict::fail && s.oracle_holds;
        if (s.unsound()) sum.counterexamples.push_back(std::move(s));
    }
    return sum;
}

}  // namespace rmi
