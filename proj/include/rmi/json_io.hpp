#pragma once

#include <json.hpp>
#include <stdexcept>
#include <string>

#include "rmi/asm.hpp"
#include "rmi/contract.hpp"
#include "rmi/machine.hpp"
#include "rmi/ni.hpp"
#include "rmi/policy.hpp"
#include "rmi/sta.hpp"

namespace rmi::io {

using nlohmann::json;

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Registers by ABI name; addresses as numbers or "0x..." strings.
Reg reg_from_json(const json& j);
std::uint64_t number_from_json(const json& j);
std::string hex(std::uint64_t v);

json to_json(const ArchState& s);
ArchState state_from_json(const json& j, const MemoryLayout& layout);

MemoryLayout layout_from_json(const json& j);
json to_json(const MemoryLayout& l);

Policy policy_from_json(const json& j);
json to_json(const Policy& p);

// {"base": state, "registers": {"a0": [..] | "default"}, "cells": [{"address", "values"?}], "pair_cap"?}
StateSpace space_from_json(const json& j, const MemoryLayout& layout);
json to_json(const StateSpace& s);

RegisterAliases aliases_from_json(const json& j);

json to_json(const ObservationTrace& t);
// Sorted array (std::set order) for deterministic output.
json to_json(const TraceSet& ts);

json to_json(const AnalysisReport& r, const Program& program);
json to_json(const NiVerdict& v);

}  // namespace rmi::io
