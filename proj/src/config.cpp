#include "cascade/config.hpp"

#include <fstream>

#include <fmt/format.h>

#include "cascade/json_io.hpp"

namespace cascade {

json to_json(const WeightedPolicy& p) {
    return {{"beta0", p.beta0},
            {"beta_private", p.beta_private},
            {"beta_human", p.beta_human},
            {"beta_ai", p.beta_ai},
            {"noise_sd", p.noise_sd},
            {"choice_rule", p.choice_rule == ChoiceRule::argmax ? "argmax" : "sample"}};
}

WeightedPolicy policy_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("policy must be an object");
    WeightedPolicy p;
    p.beta0 = j.value("beta0", p.beta0);
    p.beta_private = j.value("beta_private", p.beta_private);
    p.beta_human = j.value("beta_human", p.beta_human);
    p.beta_ai = j.value("beta_ai", p.beta_ai);
    p.noise_sd = j.value("noise_sd", p.noise_sd);
    const auto rule = j.value("choice_rule", std::string("argmax"));
    if (rule == "argmax")
        p.choice_rule = ChoiceRule::argmax;
    else if (rule == "sample")
        p.choice_rule = ChoiceRule::sample;
    else
        throw ValidationError(fmt::format("unknown choice_rule '{}'", rule));
    p.validate();
    return p;
}

json to_json(const AgentSpec& a) {
    json j = {{"id", a.agent_id}, {"kind", kind_name(a.kind)}, {"seed", a.seed}};
    if (const auto* w = std::get_if<WeightedKind>(&a.kind)) {
        j["policy"] = to_json(w->policy);
        if (!w->per_task.empty()) {
            json per = json::object();
            for (const auto& [task, p] : w->per_task) per[std::string(to_string(task))] = to_json(p);
            j["per_task"] = per;
        }
    }
    return j;
}

namespace {

AgentKind kind_from_json(const json& j) {
    const auto kind = require<std::string>(j, "kind");
    if (kind == "bayesian") return BayesianKind{};
    if (kind == "conformist") return ConformistKind{};
    if (kind == "private_only") return PrivateOnlyKind{};
    if (kind == "weighted") {
        WeightedKind w;
        if (j.contains("policy")) w.policy = policy_from_json(j["policy"]);
        if (j.contains("per_task"))
            for (const auto& [task, p] : j["per_task"].items()) w.per_task[parse_task(task)] = policy_from_json(p);
        return w;
    }
    throw ValidationError(fmt::format("unknown agent kind '{}'", kind));
}

}  // namespace

std::vector<AgentSpec> cohort_from_json(const json& j) {
    const json& entries = j.is_object() ? require<json>(j, "agents") : j;
    if (!entries.is_array()) throw ValidationError("cohort must be an array of agents");
    std::vector<AgentSpec> cohort;
    for (const auto& e : entries) {
        const AgentKind kind = kind_from_json(e);
        const auto seed = e.value("seed", std::uint64_t{0});
        if (e.contains("count")) {
            auto group = uniform_cohort(kind, require<int>(e, "count"), seed);
            if (e.contains("id"))
                for (std::size_t i = 0; i < group.size(); ++i)
                    group[i].agent_id = fmt::format("{}-{:02}", require<std::string>(e, "id"), i + 1);
            cohort.insert(cohort.end(), group.begin(), group.end());
        } else {
            cohort.push_back({require<std::string>(e, "id"), kind, seed});
        }
    }
    validate_cohort(cohort);
    return cohort;
}

json cohort_to_json(const std::vector<AgentSpec>& cohort) {
    json agents = json::array();
    for (const auto& a : cohort) agents.push_back(to_json(a));
    return {{"agents", agents}};
}

void RunConfig::validate() const {
    if (cohort.empty() && endpoints.empty()) throw ValidationError("config names no agents and no endpoints");
    if (scenarios.empty()) throw ValidationError("config names no scenarios");
    if (repetitions < 1) throw ValidationError("repetitions must be >= 1");
    if (!cohort.empty()) validate_cohort(cohort);
    for (const auto& [task, spec] : designs) spec.validate();
}

DesignSpec RunConfig::design_for(TaskId task) const {
    auto it = designs.find(task);
    return it == designs.end() ? preset_paper(task, seed) : it->second;
}

const Scenario& RunConfig::scenario(TaskId task) const {
    for (const auto& s : scenarios)
        if (s.id == task) return s;
    throw ValidationError(fmt::format("scenario '{}' is not configured", to_string(task)));
}

RunConfig run_config_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    RunConfig c;
    c.seed = j.value("seed", c.seed);
    c.repetitions = j.value("repetitions", c.repetitions);
    c.out_dir = j.value("out", c.out_dir);
    if (j.contains("scenarios")) {
        for (const auto& s : j["scenarios"])
            c.scenarios.push_back(s.is_string() ? preset_scenario(parse_task(s.get<std::string>())) : scenario_from_json(s));
    } else {
        for (TaskId t : kAllTasks) c.scenarios.push_back(preset_scenario(t));
    }
    if (j.contains("designs")) {
        for (const auto& [task, spec] : j["designs"].items()) {
            if (spec.is_string()) {
                if (spec.get<std::string>() != "paper")
                    throw ValidationError(fmt::format("unknown design preset '{}'", spec.get<std::string>()));
                continue;
            }
            auto d = design_from_json(spec);
            if (to_string(d.scenario_id) != task)
                throw ValidationError(fmt::format("design listed under '{}' is for '{}'", task, to_string(d.scenario_id)));
            c.designs[d.scenario_id] = d;
        }
    }
    if (j.contains("cohort")) c.cohort = cohort_from_json(j["cohort"]);
    if (j.contains("endpoints"))
        for (const auto& e : j["endpoints"]) c.endpoints.push_back(endpoint_from_json(e));
    if (j.contains("clamp")) {
        c.clamp.lo = j["clamp"].value("lo", c.clamp.lo);
        c.clamp.hi = j["clamp"].value("hi", c.clamp.hi);
    }
    c.validate();
    return c;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(fmt::format("cannot open '{}'", path));
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(fmt::format("'{}' is not valid JSON: {}", path, e.what()));
    }
}

RunConfig load_run_config(const std::string& path) { return run_config_from_json(load_json_file(path)); }

}  // namespace cascade
