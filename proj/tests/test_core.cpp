#include <doctest.h>

#include <cmath>

#include "cascade/core.hpp"
#include "oracles.hpp"

using namespace cascade;

namespace {

Trial make_trial(TaskId task, Signal priv, std::vector<AdvisorSignal> advisors) {
    Trial t;
    t.trial_id = "t-1";
    t.scenario_id = task;
    t.private_signal = priv;
    t.advisors = std::move(advisors);
    return t;
}

}  // namespace

TEST_CASE("llr matches closed form") {
    CHECK(llr(2.0 / 3.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(llr(0.55) == doctest::Approx(0.200671).epsilon(1e-6));
    CHECK(llr(0.70) == doctest::Approx(0.847298).epsilon(1e-6));
    CHECK(llr(0.5 + 1e-9) > 0.0);
    CHECK(llr(0.5 + 1e-9) < 1e-8);
}

TEST_CASE("llr rejects q outside (0.5, 1)") {
    CHECK_THROWS_AS(llr(0.5), std::domain_error);
    CHECK_THROWS_AS(llr(1.0), std::domain_error);
    CHECK_THROWS_AS(llr(0.3), std::domain_error);
    CHECK_THROWS_AS(llr(std::nan("")), std::domain_error);
}

TEST_CASE("posterior_from_net agrees with explicit Bayes products") {
    for (double q : {0.55, 2.0 / 3.0, 0.70, 0.9}) {
        for (int fa = 0; fa <= 4; ++fa)
            for (int fb = 0; fb <= 4; ++fb)
                CHECK(posterior_from_net(q, fa - fb) == doctest::Approx(oracle::bayes_posterior(q, fa, fb)).epsilon(1e-12));
    }
}

TEST_CASE("posterior levels by task") {
    CHECK(posterior_from_net(0.61, 0) == 0.5);
    CHECK(posterior_from_net(2.0 / 3.0, 1) == doctest::Approx(0.667).epsilon(0.001));
    CHECK(posterior_from_net(2.0 / 3.0, 2) == doctest::Approx(0.800).epsilon(1e-12));
    CHECK(posterior_from_net(2.0 / 3.0, 3) == doctest::Approx(0.889).epsilon(0.001));
    CHECK(std::abs(posterior_from_net(0.55, 2) - 0.599) < 0.0005);
    CHECK(std::abs(posterior_from_net(0.55, 3) - 0.646) < 0.0005);
    CHECK(std::abs(posterior_from_net(0.70, 2) - 0.845) < 0.0005);
    CHECK(std::abs(posterior_from_net(0.70, 3) - 0.927) < 0.0005);
}

TEST_CASE("posterior symmetry, monotonicity and log-odds additivity") {
    for (double q : {0.51, 0.55, 2.0 / 3.0, 0.7, 0.95}) {
        for (int d = -6; d <= 6; ++d) {
            CHECK(posterior_from_net(q, d) + posterior_from_net(q, -d) == doctest::Approx(1.0).epsilon(1e-15));
            CHECK(posterior_from_net(q, d + 1) > posterior_from_net(q, d));
            const double p = posterior_from_net(q, d);
            CHECK(std::abs(std::log(p / (1.0 - p)) - d * llr(q)) < 1e-12 + 1e-15 / std::min(p, 1.0 - p));
        }
    }
    for (int d = 1; d <= 3; ++d) CHECK(posterior_from_net(0.7, d) > posterior_from_net(0.6, d));
}

TEST_CASE("trial_posterior on hand-worked trials") {
    const auto med = preset_scenario(TaskId::medical);
    auto t = make_trial(TaskId::medical, Signal::a, {{Source::human, Option::a}});
    CHECK(trial_posterior(t, med) == doctest::Approx(0.8).epsilon(1e-12));

    const auto legal = preset_scenario(TaskId::legal);
    t = make_trial(TaskId::legal, Signal::a, {{Source::human, Option::b}});
    CHECK(trial_posterior(t, legal) == 0.5);
    CHECK(t.neutral());

    const auto inv = preset_scenario(TaskId::investment);
    t = make_trial(TaskId::investment, Signal::a,
                   {{Source::ai, Option::a}, {Source::human, Option::a}, {Source::ai, Option::b}});
    CHECK(t.net_count() == 2);
    CHECK(t.human_net() == 1);
    CHECK(t.ai_net() == 0);
    CHECK(std::abs(trial_posterior(t, inv) - 0.845) < 0.0005);

    CHECK_THROWS_AS(trial_posterior(t, med), ValidationError);
    t.advisors.clear();
    CHECK_THROWS_AS(trial_posterior(t, inv), ValidationError);
}

TEST_CASE("most likely option") {
    const auto med = preset_scenario(TaskId::medical);
    auto t = make_trial(TaskId::medical, Signal::a, {{Source::human, Option::a}});
    CHECK(most_likely_option(t, med) == Option::a);

    t = make_trial(TaskId::medical, Signal::b, {{Source::ai, Option::a}});
    CHECK_FALSE(most_likely_option(t, med).has_value());
    CHECK(max_posterior(t, med) == 0.5);

    const auto legal = preset_scenario(TaskId::legal);
    t = make_trial(TaskId::legal, Signal::b, {{Source::ai, Option::b}, {Source::human, Option::b}});
    CHECK(most_likely_option(t, legal) == Option::b);
    CHECK(std::abs(max_posterior(t, legal) - 0.646) < 0.0005);
}

TEST_CASE("normalize_confidence") {
    CHECK(normalize_confidence(50) == 0.5);
    CHECK(normalize_confidence(100) == 1.0);
    CHECK(normalize_confidence(67) == doctest::Approx(0.67));
    CHECK_THROWS_AS(normalize_confidence(49.9), ValidationError);
    CHECK_THROWS_AS(normalize_confidence(101), ValidationError);
}

TEST_CASE("preset scenarios validate and display q as the protocol does") {
    CHECK(preset_scenario(TaskId::medical).q_display == "66.7%");
    CHECK(preset_scenario(TaskId::legal).q_display == "55%");
    CHECK(preset_scenario(TaskId::investment).q_display == "70%");
    for (TaskId t : kAllTasks) CHECK_NOTHROW(preset_scenario(t).validate());

    auto s = preset_scenario(TaskId::legal);
    s.q = 0.5;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = preset_scenario(TaskId::legal);
    s.option_b = s.option_a;
    CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("enum text round trips") {
    for (TaskId t : kAllTasks) CHECK(parse_task(to_string(t)) == t);
    CHECK(parse_option(to_string(Option::b)) == Option::b);
    CHECK(parse_source(to_string(Source::ai)) == Source::ai);
    CHECK_THROWS_AS(parse_task("finance"), ValidationError);
}
