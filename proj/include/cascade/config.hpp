#pragma once

// Cohort and run configuration files.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cascade/agents.hpp"
#include "cascade/estimator.hpp"
#include "cascade/runner.hpp"
#include "cascade/trialgen.hpp"

namespace cascade {

nlohmann::json to_json(const WeightedPolicy& p);
WeightedPolicy policy_from_json(const nlohmann::json& j);

nlohmann::json to_json(const AgentSpec& a);

// Accepts either an array of agent entries or {"agents": [...]}. An entry
// with "count" expands to that many agents of one kind, seeded from "seed".
std::vector<AgentSpec> cohort_from_json(const nlohmann::json& j);
nlohmann::json cohort_to_json(const std::vector<AgentSpec>& cohort);

struct RunConfig {
    std::vector<Scenario> scenarios;
    // Per-scenario designs; scenarios without an entry use the built-in preset.
    std::map<TaskId, DesignSpec> designs;
    std::vector<AgentSpec> cohort;
    std::vector<EndpointConfig> endpoints;
    int repetitions = 3;
    std::uint64_t seed = 42;
    std::string out_dir = ".";
    ClampPolicy clamp;

    // Throws ValidationError when no respondent source is configured.
    void validate() const;
    DesignSpec design_for(TaskId task) const;
    const Scenario& scenario(TaskId task) const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

nlohmann::json load_json_file(const std::string& path);

}  // namespace cascade
