#pragma once

// Synthetic respondents with known decision policies.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "cascade/core.hpp"
#include "cascade/transcript.hpp"
#include "cascade/trialgen.hpp"

namespace cascade {

enum class ChoiceRule { argmax, sample };

struct WeightedPolicy {
    double beta0 = 0.0;
    double beta_private = 1.0;
    double beta_human = 1.0;
    double beta_ai = 1.0;
    double noise_sd = 0.0;  // Gaussian noise on the log-odds
    ChoiceRule choice_rule = ChoiceRule::argmax;

    void validate() const;
};

struct BayesianKind {};
struct ConformistKind {};
struct PrivateOnlyKind {};
struct WeightedKind {
    WeightedPolicy policy;
    // Optional per-task replacement of the default policy.
    std::map<TaskId, WeightedPolicy> per_task;

    const WeightedPolicy& policy_for(TaskId task) const;
};

using AgentKind = std::variant<BayesianKind, WeightedKind, ConformistKind, PrivateOnlyKind>;

struct AgentSpec {
    std::string agent_id;
    AgentKind kind;
    std::uint64_t seed = 0;
};

std::string_view kind_name(const AgentKind& kind);

AgentResponse respond_bayesian(const Trial& trial, const Scenario& scenario);
AgentResponse respond_weighted(const Trial& trial, const Scenario& scenario,
                               const WeightedPolicy& policy, std::mt19937_64& rng);
AgentResponse respond_conformist(const Trial& trial, const Scenario& scenario);
AgentResponse respond_private_only(const Trial& trial, const Scenario& scenario);

// Generator for one (agent, manifest) run, derived from the agent seed and the
// manifest digest so that runs never share a stream.
std::mt19937_64 agent_engine(const AgentSpec& agent, std::string_view design_digest);

AgentResponse respond(const AgentSpec& agent, const Trial& trial, const Scenario& scenario,
                      std::mt19937_64& rng);

// Throws ValidationError on duplicate ids or invalid policies.
void validate_cohort(const std::vector<AgentSpec>& cohort);

// `count` agents of one kind with ids "<kind>-01".. and seeds base_seed + i.
std::vector<AgentSpec> uniform_cohort(const AgentKind& kind, int count, std::uint64_t base_seed);

// Transcripts for every (agent, trial, repetition), in that order.
std::vector<Transcript> simulate_cohort(const std::vector<AgentSpec>& cohort, const Manifest& manifest,
                                        const Scenario& scenario, int repetitions,
                                        const std::string& run_id);

}  // namespace cascade
