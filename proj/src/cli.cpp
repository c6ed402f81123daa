#include "rmi/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "rmi/corpus.hpp"
#include "rmi/hw_modes.hpp"
#include "rmi/json_io.hpp"
#include "rmi/llc.hpp"
#include "rmi/ni.hpp"
#include "rmi/snippets.hpp"
#include "rmi/sta.hpp"

namespace rmi {

namespace {

using io::json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json read_json(const std::string& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw UsageError(path + ": " + e.what());
    }
}

// Program plus the context it is checked in, from a file or a corpus entry.
struct Subject {
    std::string name;
    Program program;
    MemoryLayout layout;
    Policy policy;
    RegisterAliases aliases;
    std::optional<StateSpace> space;
};

struct Inputs {
    std::string file;
    std::string entry;
    std::string corpus_dir;
    std::string policy_path;
    std::string space_path;
    std::string state_path;
    std::vector<std::string> alias_specs;
    bool json_out = false;
    std::size_t fuel = kDefaultFuel;
    std::size_t cap = kDefaultTraceCap;
};

void add_subject_options(CLI::App* cmd, Inputs& in, bool with_file = true) {
    if (with_file) cmd->add_option("file", in.file, "assembly source (.s)");
    cmd->add_option("--entry", in.entry, "take program, policy and state space from a corpus entry");
    cmd->add_option("--corpus", in.corpus_dir, "corpus directory");
    cmd->add_option("--policy", in.policy_path, "policy JSON {public_regs, public_private_cells}");
    cmd->add_flag("--json", in.json_out, "JSON output");
}

std::filesystem::path corpus_dir(const Inputs& in) {
    return in.corpus_dir.empty() ? default_corpus_dir() : std::filesystem::path(in.corpus_dir);
}

Subject subject_from(const CorpusEntry& e) {
    return {e.name, e.program, e.layout, e.policy, e.aliases, e.space};
}

Subject load_subject(const Inputs& in) {
    Subject s;
    if (!in.entry.empty()) {
        const auto entries = load_corpus(corpus_dir(in));
        const auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.name == in.entry; });
        if (it == entries.end()) throw UsageError("no corpus entry named '" + in.entry + "'");
        s = subject_from(*it);
    } else {
        if (in.file.empty()) throw UsageError("an assembly file or --entry is required");
        s.name = in.file;
        try {
            s.program = parse_program(read_file(in.file));
        } catch (const ParseError& e) {
            throw UsageError(in.file + ":" + std::to_string(e.line()) + ":" + std::to_string(e.column()) + ": " +
                             std::string(e.kind_name()) + ": " + e.what());
        }
    }
    if (!in.policy_path.empty()) s.policy = io::policy_from_json(read_json(in.policy_path));
    if (!in.space_path.empty()) s.space = io::space_from_json(read_json(in.space_path), s.layout);
    for (const auto& spec : in.alias_specs) {
        const auto eq = spec.find('=');
        const auto reg = parse_reg(spec.substr(0, eq));
        if (eq == std::string::npos || !reg) throw UsageError("alias must look like a2=len");
        s.aliases[*reg] = spec.substr(eq + 1);
    }
    return s;
}

// Registers the program reads, each over the default domain.
StateSpace inferred_space(const Subject& s) {
    std::vector<Reg> regs;
    for (const auto& inst : s.program.instructions)
        for (auto r : inst.sources())
            if (r != kZero && std::find(regs.begin(), regs.end(), r) == regs.end()) regs.push_back(r);
    std::sort(regs.begin(), regs.end());
    return default_space(ArchState{}, regs, {}, s.layout);
}

const StateSpace& space_of(Subject& s) {
    if (!s.space) s.space = inferred_space(s);
    return *s.space;
}

Semantics semantics_of(const std::string& name, const Subject& s) {
    try {
        return resolve_semantics(name, s.program, s.policy, s.layout);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

void print_witness(std::ostream& out, const Witness& w) {
    out << "  witness first:  " << io::to_json(w.first).dump() << '\n';
    out << "  witness second: " << io::to_json(w.second).dump() << '\n';
    out << "  views first:\n";
    for (const auto& t : w.first_views) out << "    " << format_trace(t) << '\n';
    out << "  views second:\n";
    for (const auto& t : w.second_views) out << "    " << format_trace(t) << '\n';
}

int cmd_trace(const Inputs& in, const std::string& sem_name, bool views, std::ostream& out) {
    auto s = load_subject(in);
    ArchState state = in.state_path.empty() ? ArchState{} : io::state_from_json(read_json(in.state_path), s.layout);
    const auto sem = semantics_of(sem_name, s);
    TraceSet traces;
    std::vector<SelfContainmentViolation> diagnostics;
    if (views) {
        traces = view_set(s.program, state, s.layout, sem, in.fuel, in.cap);
    } else if (const auto* c = std::get_if<Contract>(&sem)) {
        traces = contract_trace_set(s.program, state, s.layout, *c, in.fuel, in.cap);
    } else {
        auto r = hw_trace_set(s.program, state, s.layout, std::get<HwSemantics>(sem), in.fuel, in.cap);
        traces = std::move(r.traces);
        diagnostics = std::move(r.diagnostics);
    }
    if (in.json_out) {
        json d = json::array();
        for (const auto& v : diagnostics) d.push_back({{"instruction", v.instruction}, {"speculative", v.speculative}});
        out << json{{"program", s.name}, {"semantics", semantics_name(sem)}, {"traces", io::to_json(traces)},
                    {"self_containment_violations", d}}
                   .dump(2)
            << '\n';
        return 0;
    }
    out << s.name << " under " << semantics_name(sem) << ": " << traces.size() << " trace(s)\n";
    for (const auto& t : traces) out << "  " << format_trace(t) << '\n';
    for (const auto& v : diagnostics)
        out << "  self-containment violation: instruction " << v.instruction << " ran with burst on outside its region"
            << (v.speculative ? " (speculatively)" : "") << '\n';
    return 0;
}

int cmd_ni(const Inputs& in, const std::string& a, const std::string& b, std::ostream& out) {
    auto s = load_subject(in);
    const auto& space = space_of(s);
    const CheckLimits limits{in.fuel, in.cap};
    NiVerdict v;
    std::string what;
    if (b.empty()) {
        const auto sem = semantics_of(a, s);
        what = "direct NI under " + semantics_name(sem);
        v = check_direct_ni(s.program, sem, s.policy, space, s.layout, limits);
    } else {
        const auto sa = semantics_of(a, s);
        const auto sb = semantics_of(b, s);
        what = "relative NI " + semantics_name(sa) + " -> " + semantics_name(sb);
        v = check_relative_ni(s.program, sa, sb, space, s.layout, limits);
    }
    if (in.json_out) {
        auto j = io::to_json(v);
        j["program"] = s.name;
        j["check"] = what;
        out << j.dump(2) << '\n';
    } else {
        out << s.name << ": " << what << ": " << (v.holds ? "holds" : "violated") << " (" << v.states
            << " states)\n";
        if (v.witness) print_witness(out, *v.witness);
    }
    return v.holds ? 0 : 1;
}

int cmd_hw_check(const Inputs& in, const std::string& mode_name, const std::string& contract_name_arg,
                 std::ostream& out) {
    const auto contract = parse_contract(contract_name_arg);
    if (!contract) throw UsageError("unknown contract '" + contract_name_arg + "'");
    if (!parse_hw_mode(mode_name)) throw UsageError("unknown mode '" + mode_name + "'");
    std::vector<Subject> subjects;
    if (in.file.empty() && in.entry.empty()) {
        for (const auto& e : load_corpus(corpus_dir(in))) subjects.push_back(subject_from(e));
    } else {
        subjects.push_back(load_subject(in));
    }
    const CheckLimits limits{in.fuel, in.cap};
    bool all = true;
    json results = json::array();
    for (auto& s : subjects) {
        const auto sem = std::get<HwSemantics>(semantics_of(mode_name, s));
        const auto v = check_hw_satisfies(s.program, sem, *contract, space_of(s), s.layout, limits);
        all = all && v.holds;
        if (in.json_out) {
            auto j = io::to_json(v);
            j["program"] = s.name;
            results.push_back(std::move(j));
        } else {
            out << std::left << std::setw(24) << s.name << ' ' << semantics_name(sem) << " |- " << contract_name(*contract)
                << ": " << (v.holds ? "holds" : "violated") << '\n';
            if (v.witness) print_witness(out, *v.witness);
        }
    }
    if (in.json_out)
        out << json{{"mode", mode_name}, {"contract", contract_name(*contract)}, {"results", results},
                    {"verdict", all ? "holds" : "violated"}}
                   .dump(2)
            << '\n';
    else
        out << "aggregate: " << (all ? "holds" : "violated") << " on " << subjects.size() << " program(s)\n";
    return all ? 0 : 1;
}

int cmd_sta(const Inputs& in, const StaOptions& options, std::ostream& out) {
    const auto s = load_subject(in);
    AnalysisReport report;
    try {
        report = analyze(s.program, s.policy, s.layout, options);
    } catch (const PathExplosion& e) {
        if (in.json_out) out << json{{"verdict", "path_explosion"}, {"node_cap", e.cap()}}.dump(2) << '\n';
        else out << s.name << ": " << e.what() << '\n';
        return 3;
    }
    if (in.json_out) out << io::to_json(report, s.program).dump(2) << '\n';
    else out << s.name << '\n' << explain(report, s.program, s.aliases);
    return report.verdict == StaVerdict::pass ? 0 : 2;
}

int cmd_cache(const std::string& table_path, bool show_cost, bool json_out, std::ostream& out) {
    if (table_path.empty()) throw UsageError("--table is required");
    llc::PartitionTable table;
    try {
        table = llc::parse_table(read_file(table_path));
        table.validate();
    } catch (const llc::LlcError& e) {
        out << table_path << ": rejected: " << e.kind_name() << ": " << e.what() << '\n';
        return 1;
    }
    const auto& g = table.geometry;
    if (json_out) {
        json regions = json::array();
        for (unsigned r = 0; r < llc::kRegionCount; ++r) {
            if (!table.entries[r]) continue;
            json j = {{"region", r}, {"base", table.entries[r]->base}, {"size", table.entries[r]->size},
                      {"sm", table.sm_regions.count(r) != 0}};
            if (show_cost) j["flush_cost"] = llc::flush_cost(r, table);
            regions.push_back(std::move(j));
        }
        out << json{{"geometry", {{"cache_bytes", g.cache_bytes}, {"ways", g.ways}, {"line_bytes", g.line_bytes},
                                  {"sets", g.sets()}}},
                    {"regions", regions}}
                   .dump(2)
            << '\n';
        return 0;
    }
    out << "geometry: " << g.cache_bytes << " bytes, " << g.ways << " ways, " << g.line_bytes << "-byte lines, "
        << g.sets() << " sets\n";
    out << "region  sets        size  bytes";
    if (show_cost) out << "     flush accesses";
    out << '\n';
    std::size_t used = 0;
    for (unsigned r = 0; r < llc::kRegionCount; ++r) {
        if (!table.entries[r]) continue;
        const auto& e = *table.entries[r];
        used += e.size;
        std::ostringstream range;
        range << '[' << e.base << ", " << e.base + e.size << ')';
        out << std::right << std::setw(6) << r << "  " << std::left << std::setw(12) << range.str() << std::right
            << std::setw(4) << e.size << "  " << std::setw(7) << std::size_t{e.size} * g.ways * g.line_bytes;
        if (show_cost) out << "  " << std::setw(15) << llc::flush_cost(r, table);
        if (table.sm_regions.count(r)) out << "  (monitor)";
        out << '\n';
    }
    out << "sets in use: " << used << " of " << g.sets() << '\n';
    return 0;
}

int cmd_corpus_verify(const Inputs& in, std::optional<std::uint64_t> seed, std::size_t samples, std::ostream& out) {
    const auto entries = load_corpus(corpus_dir(in));
    const CheckLimits limits{in.fuel, in.cap};
    bool all = true;
    json jentries = json::array();
    for (const auto& e : entries) {
        const auto outcomes = verify_entry(e, limits);
        json checks = json::array();
        bool entry_ok = true;
        if (!in.json_out) out << e.name << '\n';
        for (const auto& o : outcomes) {
            entry_ok = entry_ok && o.ok;
            if (in.json_out) {
                checks.push_back({{"check", o.expected.label()},
                                  {"expect", o.expected.expect},
                                  {"actual", o.actual},
                                  {"ok", o.ok},
                                  {"provenance", o.expected.provenance}});
            } else {
                out << "  " << (o.ok ? "ok  " : "FAIL") << "  " << std::left << std::setw(40) << o.expected.label()
                    << " expect " << std::setw(8) << o.expected.expect << " got " << o.actual << "  ["
                    << o.expected.provenance << "]\n";
            }
        }
        all = all && entry_ok;
        if (in.json_out) jentries.push_back({{"name", e.name}, {"ok", entry_ok}, {"checks", checks}});
    }
    json doc = {{"entries", jentries}};
    if (seed) {
        const auto sum = sample_soundness(*seed, samples, limits);
        all = all && sum.counterexamples.empty();
        if (in.json_out) {
            json cex = json::array();
            for (const auto& c : sum.counterexamples) cex.push_back(c.source);
            doc["soundness"] = {{"seed", *seed},         {"samples", sum.samples},
                                {"conclusive", sum.conclusive}, {"analyzer_pass", sum.analyzer_pass},
                                {"oracle_holds", sum.oracle_holds}, {"conservative", sum.conservative},
                                {"counterexamples", cex}};
        } else {
            out << "soundness sample (seed " << *seed << "): " << sum.conclusive << " conclusive of " << sum.samples
                << ", analyzer pass " << sum.analyzer_pass << ", oracle holds " << sum.oracle_holds
                << ", conservative failures " << sum.conservative << ", unsound " << sum.counterexamples.size()
                << '\n';
            for (const auto& c : sum.counterexamples) out << "unsound snippet:\n" << c.source;
        }
    }
    if (in.json_out) {
        doc["ok"] = all;
        out << doc.dump(2) << '\n';
    } else {
        out << (all ? "all expected verdicts reproduced" : "some expected verdicts differ") << '\n';
    }
    return all ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"rmicheck: contract traces, NI oracles, burst-mode analysis and LLC partitioning"};
    app.require_subcommand(1);
    Inputs in;

    auto* trace = app.add_subcommand("trace", "print the trace set of a program");
    add_subject_options(trace, in);
    std::string trace_sem;
    bool views = false;
    trace->add_option("--contract,--mode", trace_sem, "contract (shm.stl) or hardware mode (safe)")->required();
    trace->add_option("--state", in.state_path, "initial state JSON");
    trace->add_flag("--views", views, "attacker views (rollback markers dropped)");
    trace->add_option("--fuel", in.fuel, "committed-step budget")->check(CLI::PositiveNumber);
    trace->add_option("--cap", in.cap, "trace enumeration cap")->check(CLI::PositiveNumber);

    auto* ni = app.add_subcommand("ni", "direct NI, or relative NI with --against");
    add_subject_options(ni, in);
    std::string ni_a, ni_b;
    ni->add_option("--contract,--semantics", ni_a, "contract or mode")->required();
    ni->add_option("--against", ni_b, "second contract or mode (relative NI)");
    ni->add_option("--space", in.space_path, "state space JSON");
    ni->add_option("--fuel", in.fuel)->check(CLI::PositiveNumber);
    ni->add_option("--cap", in.cap)->check(CLI::PositiveNumber);

    auto* hw = app.add_subcommand("hw-check", "does a hardware mode satisfy a contract (whole corpus by default)");
    add_subject_options(hw, in);
    std::string hw_mode, hw_contract;
    hw->add_option("--mode", hw_mode, "insecure | mi6 | safe | burst | burst_sta")->required();
    hw->add_option("--contract", hw_contract, "contract, e.g. shm.seq")->required();
    hw->add_option("--space", in.space_path, "state space JSON");
    hw->add_option("--fuel", in.fuel)->check(CLI::PositiveNumber);
    hw->add_option("--cap", in.cap)->check(CLI::PositiveNumber);

    auto* sta = app.add_subcommand("sta", "burst-mode static analysis (exit 0 pass, 2 fail, 3 path explosion)");
    add_subject_options(sta, in);
    StaOptions sta_opts;
    sta->add_option("--alias", in.alias_specs, "register display name, e.g. a2=len");
    sta->add_option("--depth", sta_opts.spec_depth, "speculation window")->check(CLI::PositiveNumber);
    sta->add_option("--node-cap", sta_opts.node_cap, "exploration node cap")->check(CLI::PositiveNumber);
    bool no_declassify = false;
    sta->add_flag("--no-declassify", no_declassify, "never treat committed access bases as public");

    auto* cache = app.add_subcommand("cache", "LLC partition table: set map and flush costs");
    std::string table_path;
    bool show_cost = false;
    bool cache_json = false;
    cache->add_option("--table", table_path, "partition table JSON")->required();
    cache->add_flag("--show-flush-cost", show_cost, "eviction-set size per region");
    cache->add_flag("--json", cache_json, "JSON output");

    auto* verify = app.add_subcommand("corpus-verify", "check every corpus entry's expected verdicts");
    verify->add_option("--corpus", in.corpus_dir, "corpus directory");
    verify->add_flag("--json", in.json_out, "JSON output");
    std::optional<std::uint64_t> seed;
    std::size_t samples = 200;
    verify->add_option("--seed", seed, "also cross-check the analyzer on random snippets drawn with this seed");
    verify->add_option("--samples", samples, "random snippets to check with --seed")->check(CLI::PositiveNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "rmicheck: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (*trace) return cmd_trace(in, trace_sem, views, out);
        if (*ni) return cmd_ni(in, ni_a, ni_b, out);
        if (*hw) return cmd_hw_check(in, hw_mode, hw_contract, out);
        if (*sta) {
            sta_opts.declassify = !no_declassify;
            return cmd_sta(in, sta_opts, out);
        }
        if (*cache) return cmd_cache(table_path, show_cost, cache_json, out);
        if (*verify) return cmd_corpus_verify(in, seed, samples, out);
    } catch (const UsageError& e) {
        err << "rmicheck: " << e.what() << '\n';
        return kExitUsage;
    } catch (const CorpusIntegrity& e) {
        err << "rmicheck: corpus: " << e.what() << '\n';
        return kExitUsage;
    } catch (const io::FormatError& e) {
        err << "rmicheck: " << e.what() << '\n';
        return kExitUsage;
    } catch (const EngineError& e) {
        err << "rmicheck: " << e.what() << '\n';
        return 1;
    } catch (const HwError& e) {
        err << "rmicheck: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace rmi
