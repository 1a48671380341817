#pragma once

// JSON encodings shared by manifests, transcripts, cohort and config files.

#include <string>
#include <string_view>

#include <json.hpp>

#include "cascade/core.hpp"
#include "cascade/trialgen.hpp"

namespace cascade {

using json = nlohmann::json;

json to_json(const Scenario& s);
Scenario scenario_from_json(const json& j);

json to_json(const AdvisorSignal& a);
json to_json(const Trial& t);
Trial trial_from_json(const json& j);

json to_json(const DesignCell& c);
json to_json(const DesignSpec& spec);
DesignSpec design_from_json(const json& j);

// Hex SHA-256 of arbitrary bytes.
std::string sha256_hex(std::string_view bytes);

// Fetches a required key, reporting the key name on absence or type mismatch.
template <typename T>
T require(const json& j, std::string_view key) {
    auto it = j.find(key);
    if (it == j.end()) throw ValidationError("missing field '" + std::string(key) + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ValidationError("field '" + std::string(key) + "' has the wrong type");
    }
}

}  // namespace cascade
