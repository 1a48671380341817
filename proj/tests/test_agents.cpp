#include <doctest.h>

#include <cmath>

#include "cascade/agents.hpp"
#include "cascade/config.hpp"
#include "oracles.hpp"

using namespace cascade;

namespace {

Trial make_trial(TaskId task, Signal priv, std::vector<AdvisorSignal> advisors) {
    Trial t;
    t.trial_id = "x-1";
    t.scenario_id = task;
    t.private_signal = priv;
    t.advisors = std::move(advisors);
    t.posterior_a = trial_posterior(t, preset_scenario(task));
    return t;
}

}  // namespace

TEST_CASE("bayesian agent reports the posterior of its choice") {
    const auto med = preset_scenario(TaskId::medical);
    auto t = make_trial(TaskId::medical, Signal::a, {{Source::human, Option::a}, {Source::ai, Option::a}});
    auto r = respond_bayesian(t, med);
    CHECK(r.choice == Option::a);
    CHECK(std::abs(r.confidence - 0.889) < 0.0005);

    const auto legal = preset_scenario(TaskId::legal);
    t = make_trial(TaskId::legal, Signal::b, {{Source::human, Option::b}});
    r = respond_bayesian(t, legal);
    CHECK(r.choice == Option::b);
    CHECK(std::abs(r.confidence - 0.599) < 0.0005);

    t = make_trial(TaskId::legal, Signal::b, {{Source::human, Option::a}});
    r = respond_bayesian(t, legal);
    CHECK(r.choice == Option::b);
    CHECK(r.confidence == 0.5);
}

TEST_CASE("weighted agent on a hand-worked legal trial") {
    const auto legal = preset_scenario(TaskId::legal);
    const auto t = make_trial(TaskId::legal, Signal::a, {{Source::human, Option::a}});
    WeightedPolicy p{0.0, 0.813, 1.553, 1.556, 0.0, ChoiceRule::argmax};
    std::mt19937_64 rng(1);
    const auto r = respond_weighted(t, legal, p, rng);
    const double z = (0.813 + 1.553) * std::log(0.55 / 0.45);
    CHECK(z == doctest::Approx(0.4749).epsilon(1e-3));
    CHECK(r.choice == Option::a);
    CHECK(r.confidence == doctest::Approx(1.0 / (1.0 + std::exp(-z))).epsilon(1e-12));
    CHECK(r.confidence == doctest::Approx(0.6166).epsilon(1e-3));
}

TEST_CASE("unit weights reduce to the bayesian agent on every preset trial") {
    const WeightedPolicy unit{0.0, 1.0, 1.0, 1.0, 0.0, ChoiceRule::argmax};
    std::mt19937_64 rng(5);
    for (const auto& m : oracle::paper_manifests()) {
        const auto s = preset_scenario(m.scenario_id);
        for (const auto& t : m.trials) {
            const auto b = respond_bayesian(t, s);
            const auto w = respond_weighted(t, s, unit, rng);
            CHECK(b.choice == w.choice);
            CHECK(std::abs(b.confidence - w.confidence) < 1e-12);
        }
    }
}

TEST_CASE("noisy agents are reproducible under a seed and differ across seeds") {
    WeightedKind kind;
    kind.policy = {0.1, 0.8, 1.2, 1.1, 0.5, ChoiceRule::sample};
    const auto a = oracle::simulate_all(uniform_cohort(kind, 2, 11), 2);
    const auto b = oracle::simulate_all(uniform_cohort(kind, 2, 11), 2);
    const auto c = oracle::simulate_all(uniform_cohort(kind, 2, 12), 2);
    REQUIRE(a.size() == b.size());
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(transcript_line(a[i]) == transcript_line(b[i]));
        differs = differs || transcript_line(a[i]) != transcript_line(c[i]);
    }
    CHECK(differs);
}

TEST_CASE("conformist follows the advisor majority") {
    const auto s = preset_scenario(TaskId::medical);
    auto t = make_trial(TaskId::medical, Signal::b,
                        {{Source::human, Option::a}, {Source::ai, Option::a}, {Source::human, Option::b}});
    CHECK(respond_conformist(t, s).choice == Option::a);
    CHECK(respond_conformist(t, s).confidence == doctest::Approx(0.5 + 0.5 * 2.0 / 3.0));

    t = make_trial(TaskId::medical, Signal::b, {{Source::human, Option::a}, {Source::ai, Option::b}});
    CHECK(respond_conformist(t, s).choice == Option::b);

    t = make_trial(TaskId::medical, Signal::b, {{Source::human, Option::a}});
    CHECK(respond_conformist(t, s).choice == Option::a);
    CHECK(respond_conformist(t, s).confidence == 1.0);
}

TEST_CASE("private-only agent ignores the panel") {
    for (TaskId task : kAllTasks) {
        const auto s = preset_scenario(task);
        for (const auto& panel : std::vector<std::vector<AdvisorSignal>>{
                 {{Source::human, Option::a}},
                 {{Source::ai, Option::b}, {Source::ai, Option::b}},
                 {{Source::human, Option::b}, {Source::ai, Option::b}, {Source::human, Option::b}}}) {
            const auto r = respond_private_only(make_trial(task, Signal::a, panel), s);
            CHECK(r.choice == Option::a);
            CHECK(r.confidence == s.q);
        }
    }
    CHECK(std::abs(preset_scenario(TaskId::medical).q - 0.667) < 0.0005);
}

TEST_CASE("every synthetic confidence lies in [0.5, 1]") {
    WeightedKind wild;
    wild.policy = {0.5, 3.0, -2.0, 4.0, 2.0, ChoiceRule::sample};
    std::vector<AgentSpec> cohort{{"b", BayesianKind{}, 1}, {"c", ConformistKind{}, 2},
                                  {"p", PrivateOnlyKind{}, 3}, {"w", wild, 4}};
    for (const auto& t : oracle::simulate_all(cohort, 3)) {
        REQUIRE(t.parsed.has_value());
        CHECK(t.parsed->confidence >= 0.5);
        CHECK(t.parsed->confidence <= 1.0);
    }
}

TEST_CASE("per-task policies override the default") {
    WeightedKind kind;
    kind.policy = {0.0, 1.0, 1.0, 1.0, 0.0, ChoiceRule::argmax};
    kind.per_task[TaskId::legal] = {0.0, 0.0, 0.0, 0.0, 0.0, ChoiceRule::argmax};
    AgentSpec agent{"w", kind, 1};
    std::mt19937_64 rng(1);
    const auto legal = preset_scenario(TaskId::legal);
    const auto t = make_trial(TaskId::legal, Signal::a, {{Source::human, Option::a}});
    CHECK(respond(agent, t, legal, rng).confidence == 0.5);
    const auto med = preset_scenario(TaskId::medical);
    const auto tm = make_trial(TaskId::medical, Signal::a, {{Source::human, Option::a}});
    CHECK(respond(agent, tm, med, rng).confidence == doctest::Approx(0.8));
}

TEST_CASE("cohort validation and JSON") {
    CHECK_THROWS_AS(validate_cohort({}), ValidationError);
    CHECK_THROWS_AS(validate_cohort({{"a", BayesianKind{}, 1}, {"a", ConformistKind{}, 2}}), ValidationError);
    WeightedKind bad;
    bad.policy.noise_sd = -1.0;
    CHECK_THROWS_AS(validate_cohort({{"w", bad, 1}}), ValidationError);

    const auto j = nlohmann::json::parse(R"({"agents": [
        {"kind": "bayesian", "count": 3, "seed": 10},
        {"id": "w", "kind": "weighted", "seed": 5,
         "policy": {"beta_private": 0.8, "noise_sd": 0.3},
         "per_task": {"legal": {"beta_human": 1.5}}}]})");
    const auto cohort = cohort_from_json(j);
    REQUIRE(cohort.size() == 4);
    CHECK(cohort[0].agent_id == "bayesian-01");
    CHECK(cohort[2].seed == 12);
    const auto& w = std::get<WeightedKind>(cohort[3].kind);
    CHECK(w.policy.beta_private == 0.8);
    CHECK(w.policy_for(TaskId::legal).beta_human == 1.5);
    CHECK(cohort_to_json(cohort_from_json(cohort_to_json(cohort))) == cohort_to_json(cohort));
    CHECK_THROWS_AS(cohort_from_json(nlohmann::json::parse(R"([{"id": "x", "kind": "oracle"}])")), ValidationError);
}
