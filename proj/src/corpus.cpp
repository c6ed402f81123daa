#include "rmi/corpus.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rmi/hw_modes.hpp"
#include "rmi/json_io.hpp"

#ifndef RMI_CORPUS_DIR
#define RMI_CORPUS_DIR "corpus"
#endif

namespace rmi {

using io::json;

std::string ExpectedCheck::label() const {
    if (check == "sta") return "sta";
    if (check == "direct_ni") return "direct_ni(" + a + ")";
    if (check == "relative_ni") return "relative_ni(" + a + " -> " + b + ")";
    return check + "(" + a + ", " + b + ")";
}

std::filesystem::path default_corpus_dir() {
    if (const char* env = std::getenv("RMI_CORPUS_DIR"); env && *env) return env;
    return RMI_CORPUS_DIR;
}

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ExpectedCheck check_from_json(const json& j) {
    ExpectedCheck c;
    c.check = j.at("check").get<std::string>();
    if (c.check == "direct_ni") {
        c.a = j.at("semantics").get<std::string>();
    } else if (c.check == "relative_ni") {
        c.a = j.at("a").get<std::string>();
        c.b = j.at("b").get<std::string>();
    } else if (c.check == "hw_satisfies") {
        c.a = j.at("mode").get<std::string>();
        c.b = j.at("contract").get<std::string>();
    } else if (c.check != "sta") {
        throw std::runtime_error("unknown check '" + c.check + "'");
    }
    c.expect = j.at("expect").get<std::string>();
    c.provenance = j.at("provenance").get<std::string>();
    c.note = j.at("note").get<std::string>();
    static const std::vector<std::string> kinds{"published", "definitional", "derived"};
    if (std::find(kinds.begin(), kinds.end(), c.provenance) == kinds.end())
        throw std::runtime_error("check " + c.label() + " has unknown provenance '" + c.provenance + "'");
    if (c.note.empty()) throw std::runtime_error("check " + c.label() + " has no note");
    return c;
}

}  // namespace

CorpusEntry load_entry(const std::filesystem::path& sidecar) {
    CorpusEntry e;
    e.name = sidecar.stem().string();
    try {
        const json j = json::parse(slurp(sidecar));
        e.name = j.at("name").get<std::string>();
        e.description = j.value("description", "");
        e.source_path = sidecar.parent_path() / j.at("source").get<std::string>();
        e.source_text = slurp(e.source_path);
        e.program = parse_program(e.source_text);
        if (j.contains("layout")) e.layout = io::layout_from_json(j.at("layout"));
        e.policy = io::policy_from_json(j.value("policy", json::object()));
        e.aliases = io::aliases_from_json(j.value("aliases", json::object()));
        e.space = io::space_from_json(j.value("state_space", json::object()), e.layout);
        e.space.validate();
        for (const auto& c : j.at("expected")) e.expected.push_back(check_from_json(c));
    } catch (const ParseError& err) {
        throw CorpusIntegrity(e.name, "line " + std::to_string(err.line()) + ": " + err.what());
    } catch (const std::exception& err) {
        throw CorpusIntegrity(e.name, err.what());
    }
    return e;
}

std::vector<CorpusEntry> load_corpus(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw CorpusIntegrity(dir.string(), "corpus directory not found");
    std::vector<CorpusEntry> out;
    for (const auto& f : std::filesystem::directory_iterator(dir))
        if (f.path().extension() == ".json") out.push_back(load_entry(f.path()));
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.name < y.name; });
    return out;
}

Semantics resolve_semantics(const std::string& name, const Program& program, const Policy& policy,
                            const MemoryLayout& layout) {
    if (auto c = parse_contract(name)) return *c;
    const auto mode = parse_hw_mode(name);
    if (!mode) throw std::invalid_argument("unknown contract or mode '" + name + "'");
    if (*mode == HwMode::burst_sta) return sta_gate(program, analyze(program, policy, layout));
    return resolve(*mode);
}

CheckOutcome run_check(const CorpusEntry& entry, const ExpectedCheck& check, const CheckLimits& limits) {
    const auto start = std::chrono::steady_clock::now();
    CheckOutcome out;
    out.expected = check;
    const auto sem = [&](const std::string& n) {
        return resolve_semantics(n, entry.program, entry.policy, entry.layout);
    };
    const auto word = [](const NiVerdict& v) { return v.holds ? "holds" : "violated"; };
    if (check.check == "sta") {
        try {
            out.actual = analyze(entry.program, entry.policy, entry.layout).verdict == StaVerdict::pass ? "pass" : "fail";
        } catch (const PathExplosion&) {
            out.actual = "path_explosion";
        }
    } else if (check.check == "direct_ni") {
        out.actual = word(check_direct_ni(entry.program, sem(check.a), entry.policy, entry.space, entry.layout, limits));
    } else if (check.check == "relative_ni") {
        out.actual = word(check_relative_ni(entry.program, sem(check.a), sem(check.b), entry.space, entry.layout, limits));
    } else {
        const auto mode = sem(check.a);
        const auto contract = parse_contract(check.b);
        if (!std::holds_alternative<HwSemantics>(mode) || !contract)
            throw std::invalid_argument("hw_satisfies needs a mode and a contract");
        out.actual = word(check_hw_satisfies(entry.program, std::get<HwSemantics>(mode), *contract, entry.space,
                                             entry.layout, limits));
    }
    out.ok = out.actual == check.expect;
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

std::vector<CheckOutcome> verify_entry(const CorpusEntry& entry, const CheckLimits& limits) {
    std::vector<CheckOutcome> out;
    for (const auto& c : entry.expected) out.push_back(run_check(entry, c, limits));
    return out;
}

}  // namespace rmi
