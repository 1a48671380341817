#include "cascade/agents.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

namespace cascade {

void WeightedPolicy::validate() const {
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd))
        throw ValidationError(fmt::format("noise_sd = {} must be finite and >= 0", noise_sd));
    for (double b : {beta0, beta_private, beta_human, beta_ai})
        if (!std::isfinite(b)) throw ValidationError("policy weights must be finite");
}

const WeightedPolicy& WeightedKind::policy_for(TaskId task) const {
    auto it = per_task.find(task);
    return it == per_task.end() ? policy : it->second;
}

std::string_view kind_name(const AgentKind& kind) {
    struct Visitor {
        std::string_view operator()(const BayesianKind&) const { return "bayesian"; }
        std::string_view operator()(const WeightedKind&) const { return "weighted"; }
        std::string_view operator()(const ConformistKind&) const { return "conformist"; }
        std::string_view operator()(const PrivateOnlyKind&) const { return "private_only"; }
    };
    return std::visit(Visitor{}, kind);
}

AgentResponse respond_bayesian(const Trial& trial, const Scenario& scenario) {
    const double post_a = trial_posterior(trial, scenario);
    AgentResponse r;
    r.trial_id = trial.trial_id;
    // Tie at 0.5 follows the private signal.
    r.choice = most_likely_option(trial, scenario).value_or(favored_option(trial.private_signal));
    r.confidence = r.choice == Option::a ? post_a : 1.0 - post_a;
    return r;
}

AgentResponse respond_weighted(const Trial& trial, const Scenario& scenario,
                               const WeightedPolicy& policy, std::mt19937_64& rng) {
    trial_posterior(trial, scenario);  // precondition checks
    const double unit = llr(scenario.q);
    double z = policy.beta0 + policy.beta_private * sign_of(trial.private_signal) * unit +
               policy.beta_human * trial.human_net() * unit + policy.beta_ai * trial.ai_net() * unit;
    if (policy.noise_sd > 0.0) z += std::normal_distribution<double>(0.0, policy.noise_sd)(rng);
    const double p = 1.0 / (1.0 + std::exp(-z));

    AgentResponse r;
    r.trial_id = trial.trial_id;
    if (policy.choice_rule == ChoiceRule::argmax) {
        r.choice = p > 0.5 ? Option::a : p < 0.5 ? Option::b : favored_option(trial.private_signal);
    } else {
        r.choice = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p ? Option::a : Option::b;
    }
    r.confidence = std::clamp(std::max(p, 1.0 - p), 0.5, 1.0);
    return r;
}

AgentResponse respond_conformist(const Trial& trial, const Scenario& scenario) {
    trial_posterior(trial, scenario);
    int for_a = 0;
    for (const auto& adv : trial.advisors)
        if (adv.decision == Option::a) ++for_a;
    const int total = static_cast<int>(trial.advisors.size());
    const int for_b = total - for_a;

    AgentResponse r;
    r.trial_id = trial.trial_id;
    if (for_a == for_b)
        r.choice = favored_option(trial.private_signal);
    else
        r.choice = for_a > for_b ? Option::a : Option::b;
    const double share = static_cast<double>(std::max(for_a, for_b)) / total;
    r.confidence = std::clamp(0.5 + 0.5 * share, 0.5, 1.0);
    return r;
}

AgentResponse respond_private_only(const Trial& trial, const Scenario& scenario) {
    trial_posterior(trial, scenario);
    AgentResponse r;
    r.trial_id = trial.trial_id;
    r.choice = favored_option(trial.private_signal);
    r.confidence = scenario.q;
    return r;
}

std::mt19937_64 agent_engine(const AgentSpec& agent, std::string_view design_digest) {
    std::vector<std::uint32_t> material{static_cast<std::uint32_t>(agent.seed),
                                        static_cast<std::uint32_t>(agent.seed >> 32)};
    for (char c : design_digest) material.push_back(static_cast<unsigned char>(c));
    std::seed_seq seq(material.begin(), material.end());
    return std::mt19937_64(seq);
}

AgentResponse respond(const AgentSpec& agent, const Trial& trial, const Scenario& scenario,
                      std::mt19937_64& rng) {
    struct Visitor {
        const Trial& trial;
        const Scenario& scenario;
        std::mt19937_64& rng;
        AgentResponse operator()(const BayesianKind&) const { return respond_bayesian(trial, scenario); }
        AgentResponse operator()(const WeightedKind& w) const {
            return respond_weighted(trial, scenario, w.policy_for(scenario.id), rng);
        }
        AgentResponse operator()(const ConformistKind&) const { return respond_conformist(trial, scenario); }
        AgentResponse operator()(const PrivateOnlyKind&) const { return respond_private_only(trial, scenario); }
    };
    return std::visit(Visitor{trial, scenario, rng}, agent.kind);
}

void validate_cohort(const std::vector<AgentSpec>& cohort) {
    if (cohort.empty()) throw ValidationError("cohort is empty");
    std::set<std::string> ids;
    for (const auto& a : cohort) {
        if (a.agent_id.empty()) throw ValidationError("agent with empty agent_id");
        if (!ids.insert(a.agent_id).second)
            throw ValidationError(fmt::format("duplicate agent_id '{}'", a.agent_id));
        if (const auto* w = std::get_if<WeightedKind>(&a.kind)) {
            w->policy.validate();
            for (const auto& [task, p] : w->per_task) p.validate();
        }
    }
}

std::vector<AgentSpec> uniform_cohort(const AgentKind& kind, int count, std::uint64_t base_seed) {
    if (count < 1) throw ValidationError("cohort size must be >= 1");
    std::vector<AgentSpec> cohort;
    for (int i = 0; i < count; ++i)
        cohort.push_back({fmt::format("{}-{:02}", kind_name(kind), i + 1), kind, base_seed + i});
    return cohort;
}

std::vector<Transcript> simulate_cohort(const std::vector<AgentSpec>& cohort, const Manifest& manifest,
                                        const Scenario& scenario, int repetitions,
                                        const std::string& run_id) {
    validate_cohort(cohort);
    if (repetitions < 1) throw ValidationError("repetitions must be >= 1");
    if (manifest.scenario_id != scenario.id)
        throw ValidationError(fmt::format("manifest is for {}, scenario is {}",
                                          to_string(manifest.scenario_id), to_string(scenario.id)));
    std::vector<Transcript> out;
    out.reserve(cohort.size() * manifest.trials.size() * repetitions);
    for (const auto& agent : cohort) {
        auto rng = agent_engine(agent, manifest.design_digest);
        for (const auto& trial : manifest.trials) {
            for (int rep = 0; rep < repetitions; ++rep) {
                Transcript t;
                t.run_id = run_id;
                t.design_digest = manifest.design_digest;
                t.scenario_id = scenario.id;
                t.q = scenario.q;
                t.model_name = agent.agent_id;
                t.repetition_index = rep;
                t.trial = trial;
                AgentResponse r = respond(agent, trial, scenario, rng);
                r.repetition_index = rep;
                t.parsed = std::move(r);
                out.push_back(std::move(t));
            }
        }
    }
    return out;
}

}  // namespace cascade
