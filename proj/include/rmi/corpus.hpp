#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmi/asm.hpp"
#include "rmi/machine.hpp"
#include "rmi/ni.hpp"
#include "rmi/policy.hpp"
#include "rmi/sta.hpp"

namespace rmi {

struct ExpectedCheck {
    std::string check;  // sta | relative_ni | direct_ni | hw_satisfies
    std::string a;      // relative_ni: first contract; direct_ni: semantics; hw_satisfies: mode
    std::string b;      // relative_ni: second contract; hw_satisfies: contract
    std::string expect;
    std::string provenance;  // published | definitional | derived
    std::string note;

    std::string label() const;
};

struct CorpusEntry {
    std::string name;
    std::string description;
    std::filesystem::path source_path;
    std::string source_text;
    Program program;
    MemoryLayout layout;
    Policy policy;
    RegisterAliases aliases;
    StateSpace space;
    std::vector<ExpectedCheck> expected;
};

class CorpusIntegrity : public std::runtime_error {
public:
    CorpusIntegrity(std::string entry, const std::string& message)
        : std::runtime_error(entry + ": " + message), entry_(std::move(entry)) {}
    const std::string& entry() const { return entry_; }

private:
    std::string entry_;
};

// Directory baked in at build time; RMI_CORPUS_DIR in the environment overrides it.
std::filesystem::path default_corpus_dir();

CorpusEntry load_entry(const std::filesystem::path& sidecar);
// Every *.json sidecar in the directory, sorted by entry name.
std::vector<CorpusEntry> load_corpus(const std::filesystem::path& dir = default_corpus_dir());

// Resolves a contract name ("shm.stl") or hardware mode ("safe"). burst_sta is
// gated by analyzing the program under the entry's policy and layout.
Semantics resolve_semantics(const std::string& name, const Program& program, const Policy& policy,
                            const MemoryLayout& layout);

struct CheckOutcome {
    ExpectedCheck expected;
    std::string actual;
    bool ok = false;
    double seconds = 0;
};

CheckOutcome run_check(const CorpusEntry& entry, const ExpectedCheck& check, const CheckLimits& limits = {});
std::vector<CheckOutcome> verify_entry(const CorpusEntry& entry, const CheckLimits& limits = {});

}  // namespace rmi
