// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "cascade/analysis.hpp"
#include "cascade/cli.hpp"
#include "cascade/report.hpp"
#include "cascade/runner.hpp"
#include "oracles.hpp"

using namespace cascade;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Check {
    bool ok = true;
    std::string detail;

    void expect(bool cond, const std::string& what) {
        if (!cond && ok) detail = what;
        ok = ok && cond;
    }
};

std::vector<AgentSpec> numbered(const AgentKind& kind, const std::string& prefix, int n, std::uint64_t seed) {
    std::vector<AgentSpec> out;
    for (int k = 0; k < n; ++k) out.push_back({fmt::format("{}-{:02}", prefix, k), kind, seed + k});
    return out;
}

const std::map<TaskId, std::array<double, 3>> kTruth{
    {TaskId::legal, {0.813, 1.553, 1.556}},
    {TaskId::medical, {0.567, 0.664, 0.660}},
    {TaskId::investment, {0.850, 0.710, 0.707}},
};

Eigen::VectorXd truth_coefficients() {
    const auto& l = kTruth.at(TaskId::legal);
    const auto& m = kTruth.at(TaskId::medical);
    const auto& i = kTruth.at(TaskId::investment);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(12);
    for (int s = 0; s < 3; ++s) {
        b(3 + s) = l[s];
        b(6 + 2 * s) = m[s] - l[s];
        b(7 + 2 * s) = i[s] - l[s];
    }
    return b;
}

WeightedKind truth_agent(double noise) {
    WeightedKind k;
    k.policy.noise_sd = noise;
    for (const auto& [task, w] : kTruth) k.per_task[task] = {0.0, w[0], w[1], w[2], noise, ChoiceRule::argmax};
    return k;
}

// C1
Check posterior_levels() {
    Check c;
    const auto t0 = Clock::now();
    const std::map<TaskId, std::vector<double>> expected{
        {TaskId::medical, {0.500, 0.667, 0.800, 0.889}},
        {TaskId::legal, {0.500, 0.550, 0.599, 0.646}},
        {TaskId::investment, {0.500, 0.700, 0.845, 0.927}},
    };
    for (const auto& m : oracle::paper_manifests()) {
        const auto s = preset_scenario(m.scenario_id);
        std::set<int> seen;
        for (const auto& t : m.trials) {
            const int d = std::abs(t.net_count());
            seen.insert(d);
            const double level = std::max(t.posterior_a, 1.0 - t.posterior_a);
            c.expect(std::abs(level - expected.at(m.scenario_id)[d]) <= 0.005,
                     fmt::format("{} |d|={} level {}", to_string(m.scenario_id), d, level));
        }
        c.expect(seen == std::set<int>{0, 1, 2, 3}, "missing a posterior level");
    }
    const double secs = seconds_since(t0);
    c.expect(secs < 1.0, fmt::format("took {:.3f}s", secs));
    return c;
}

// C2
Check bayesian_recovery() {
    Check c;
    const auto t0 = Clock::now();
    const auto a = analyze(oracle::simulate_all(numbered(BayesianKind{}, "bayes", 9, 1), 3));
    const auto& fit = a.models.front().fit;
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(12);
    truth.segment(3, 3).setOnes();
    c.expect(fit.beta.size() == 12, "not the full model");
    if (!c.ok) return c;
    c.expect((fit.beta - truth).cwiseAbs().maxCoeff() <= 1e-6,
             fmt::format("max |beta - truth| = {}", (fit.beta - truth).cwiseAbs().maxCoeff()));
    c.expect(fit.sigma2_residual < 1e-12, fmt::format("residual variance {}", fit.sigma2_residual));
    c.expect(fit.sigma2_intercept == 0.0, fmt::format("intercept variance {}", fit.sigma2_intercept));
    const double secs = seconds_since(t0);
    c.expect(secs < 5.0, fmt::format("took {:.3f}s", secs));
    return c;
}

// C3
Check weighted_recovery() {
    Check c;
    const auto t0 = Clock::now();
    const auto truth = truth_coefficients();
    int within = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto records = oracle::simulate_all(numbered(truth_agent(0.3), "w", 9, 1000 * seed), 6, seed);
        c.expect(records.size() >= 5000, "fewer than 5000 rows");
        const auto a = analyze(records);
        const auto& fit = a.models.front().fit;
        within += (fit.beta - truth).cwiseAbs().maxCoeff() <= 0.10;
        const auto human = wald_contrast(fit, weight_vector(fit, TaskId::legal, InfoSource::human), 1.0);
        const auto ai = wald_contrast(fit, weight_vector(fit, TaskId::legal, InfoSource::ai), 1.0);
        const auto priv = wald_contrast(fit, weight_vector(fit, TaskId::legal, InfoSource::private_info), 1.0);
        c.expect(human.p_greater < 0.001, fmt::format("seed {}: legal human p = {}", seed, human.p_greater));
        c.expect(ai.p_greater < 0.001, fmt::format("seed {}: legal ai p = {}", seed, ai.p_greater));
        c.expect(priv.p_less < 0.001, fmt::format("seed {}: legal private p = {}", seed, priv.p_less));
    }
    c.expect(within >= 18, fmt::format("{} of 20 replicates within 0.10", within));
    const double secs = seconds_since(t0);
    c.expect(secs < 60.0, fmt::format("took {:.1f}s", secs));
    return c;
}

// C4
Check conformist_and_private() {
    Check c;
    const auto conf = oracle::simulate_all(numbered(ConformistKind{}, "conf", 9, 1), 3);
    const auto a = analyze(conf);
    for (const auto& mf : a.models) {
        const auto& fit = mf.fit;
        for (TaskId t : kAllTasks) {
            const auto pi = weight_vector(fit, t, InfoSource::private_info);
            const auto h = wald_contrast(fit, weight_vector(fit, t, InfoSource::human) - pi);
            const auto ai = wald_contrast(fit, weight_vector(fit, t, InfoSource::ai) - pi);
            c.expect(h.p_greater < 0.001, fmt::format("{} human-private p = {}", to_string(t), h.p_greater));
            c.expect(ai.p_greater < 0.001, fmt::format("{} ai-private p = {}", to_string(t), ai.p_greater));
        }
    }
    auto unanimous = [](const Transcript& t) {
        return t.trial.neutral() && std::all_of(t.trial.advisors.begin(), t.trial.advisors.end(), [&](const auto& adv) {
                   return adv.decision != favored_option(t.trial.private_signal);
               });
    };
    std::vector<Transcript> cells;
    std::copy_if(conf.begin(), conf.end(), std::back_inserter(cells), unanimous);
    c.expect(!cells.empty(), "no unanimous-opposition neutral trials");
    for (const auto& row : table_neutral(cells))
        c.expect(row.private_choice.mean && fmt::format("{:.2f}", *row.private_choice.mean) == "0.00",
                 fmt::format("conformist private share in {}", to_string(row.task)));

    const auto priv = oracle::simulate_all(numbered(PrivateOnlyKind{}, "priv", 9, 1), 3);
    for (const auto& row : table_neutral(priv))
        c.expect(row.private_choice.mean && fmt::format("{:.2f}", *row.private_choice.mean) == "1.00",
                 fmt::format("private-only share in {}", to_string(row.task)));
    return c;
}

// C5
Check confidence_slopes() {
    Check c;
    const auto bayes = fit_confidence_model(
        confidence_records(oracle::simulate_all(numbered(BayesianKind{}, "bayes", 9, 1), 3)));
    for (const auto& [t, s] : bayes.slopes)
        c.expect(std::abs(s.estimate - 1.0) <= 1e-6, fmt::format("bayesian {} slope {}", to_string(t), s.estimate));
    const auto priv = fit_confidence_model(
        confidence_records(oracle::simulate_all(numbered(PrivateOnlyKind{}, "priv", 9, 1), 3)));
    for (const auto& [t, s] : priv.slopes)
        c.expect(std::abs(s.estimate) <= 1e-6, fmt::format("private-only {} slope {}", to_string(t), s.estimate));
    c.expect(bayes.slopes.size() == 3 && priv.slopes.size() == 3, "missing task slopes");
    return c;
}

// C6
Check reml_against_oracle() {
    Check c;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto d = oracle::simulate_mixed(9, 500, 4, 0.7, 1.0, 100 + seed);
        const auto fit = fit_random_intercept(d.X, d.y, d.groups);
        const oracle::GroupSumReml ref(d.X, d.y, d.groups);
        const auto best = oracle::grid_search(ref, 10.0, 1e-3);
        c.expect(std::abs(*fit.log_likelihood - best.point.loglik) <= 1e-3,
                 fmt::format("seed {}: loglik {} vs {}", seed, *fit.log_likelihood, best.point.loglik));
        const double db = (fit.beta - best.point.beta).cwiseAbs().maxCoeff();
        c.expect(db <= 1e-4, fmt::format("seed {}: max |beta diff| {}", seed, db));
    }
    return c;
}

// C7
Check reference_weights() {
    Check c;
    std::ifstream in(std::string(CASCADE_SOURCE_DIR) + "/fixtures/reference_coefficients.json");
    c.expect(static_cast<bool>(in), "fixture missing");
    if (!c.ok) return c;
    const auto doc = nlohmann::json::parse(in);
    const auto fit = fit_from_coefficients(doc["coefficients"].get<std::vector<double>>());
    const std::map<TaskId, std::array<double, 3>> expected{
        {TaskId::medical, {0.567, 0.664, 0.660}},
        {TaskId::legal, {0.813, 1.553, 1.556}},
        {TaskId::investment, {0.850, 0.710, 0.707}},
    };
    for (const auto& [t, e] : expected) {
        const auto w = effective_weights(fit, t);
        for (int s = 0; s < 3; ++s)
            c.expect(std::abs(w.weight[s] - e[s]) <= 0.001 + 1e-12,
                     fmt::format("{} weight {} = {}", to_string(t), s, w.weight[s]));
    }
    return c;
}

// C8
Check replay_with_malformed() {
    Check c;
    const auto scenario = preset_scenario(TaskId::legal);
    const auto manifest = generate_manifest(preset_paper(TaskId::legal), scenario);
    EndpointConfig ep;
    ep.model_name = "fixture-model";
    ep.max_concurrent_requests = 4;
    ep.max_retries = 2;
    ep.backoff_seconds = 0.0;
    ep.api_key_env_var = "";
    ep.decoding = {{"temperature", 0.7}};

    const int reps = 3;
    nlohmann::json responses = nlohmann::json::object();
    int malformed = 0, expected_failures = 0;
    for (std::size_t i = 0; i < manifest.trials.size(); ++i) {
        const auto& t = manifest.trials[i];
        const auto prompt = render_prompt(scenario, t);
        nlohmann::json first = nlohmann::json::array(), repair = nlohmann::json::array();
        for (int r = 0; r < reps; ++r) {
            const Option pick = t.private_signal == Signal::a ? Option::a : Option::b;
            const std::string good = fmt::format("Reasoning: case notes.\nFinal Evaluation: {}\nConfidence Level: {}",
                                                 scenario.label(pick), 55 + 5 * r);
            const bool bad = (i * reps + r) % 10 == 0;
            const bool fixable = i % 2 == 0;
            malformed += bad;
            expected_failures += bad && !fixable;
            first.push_back({{"content", bad ? std::string("Final Evaluation: both\nConfidence Level: 70") : good}});
            repair.push_back({{"content", bad && !fixable ? std::string("still unsure") : good}});
        }
        responses[request_hash(chat_request_body(ep, scenario, prompt))] = first;
        responses[request_hash(chat_request_body(ep, scenario, prompt + kRepairSuffix))] = repair;
    }
    c.expect(malformed * 10 >= static_cast<int>(manifest.trials.size()) * reps, "fewer than 10% malformed");
    const ReplayFixture fixture(nlohmann::json{{"format", "cascade-replay/1"}, {"responses", responses}});

    auto run_once = [&] {
        ReplayServer server(fixture);
        auto e = ep;
        e.base_url = server.base_url();
        HttpTransport http(e);
        const auto records = run_session(manifest, scenario, e, http, {reps, "acceptance", false});
        std::ostringstream os;
        write_transcripts(os, records);
        return std::make_pair(records, os.str());
    };
    const auto [records, first_text] = run_once();
    const auto second_text = run_once().second;
    c.expect(records.size() == 156, fmt::format("{} records", records.size()));
    int failures = 0;
    for (const auto& r : records) failures += !r.ok();
    c.expect(failures == expected_failures, fmt::format("{} failures, expected {}", failures, expected_failures));
    c.expect(first_text == second_text, "replays differ");
    return c;
}

// C9
Check cli_end_to_end() {
    Check c;
    auto cli = [](std::vector<std::string> args) {
        args.insert(args.begin(), "cascade");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        if (code != 0) std::cerr << err.str();
        return code;
    };
    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    std::vector<std::pair<std::string, std::string>> outputs;
    for (const char* name : {"e2e-a", "e2e-b"}) {
        const auto dir = oracle::scratch_dir(name);
        const auto cohort = dir / "cohort-spec.json";
        std::ofstream(cohort) << R"({"agents": [
            {"kind": "bayesian", "count": 3, "seed": 1},
            {"kind": "weighted", "count": 4, "seed": 20, "policy": {"beta_private": 0.9, "beta_human": 1.3,
             "beta_ai": 1.1, "noise_sd": 0.4, "choice_rule": "sample"}},
            {"kind": "conformist", "count": 2, "seed": 40}]})";
        const auto d = dir.string();
        bool ok = cli({"gen", "--scenario", "all", "--seed", "7", "--out", d}) == 0;
        ok = ok && cli({"simulate", "--cohort", cohort.string(), "--repetitions", "2", "--seed", "7", "--out", d,
                        "--manifest", d + "/manifest-medical.jsonl", "--manifest", d + "/manifest-legal.jsonl",
                        "--manifest", d + "/manifest-investment.jsonl"}) == 0;
        ok = ok && cli({"fit", "--out", d}) == 0;
        ok = ok && cli({"report", "--seed", "7", "--out", d}) == 0;
        c.expect(ok, fmt::format("pipeline failed in {}", name));
        outputs.emplace_back(slurp(dir / "report.json"), slurp(dir / "weights.svg"));
    }
    c.expect(!outputs[0].first.empty() && outputs[0].first == outputs[1].first, "report.json differs");
    c.expect(!outputs[0].second.empty() && outputs[0].second == outputs[1].second, "weights.svg differs");
    return c;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
        {"posterior levels of the preset designs", posterior_levels},
        {"bayesian cohort recovers unit weights", bayesian_recovery},
        {"weighted cohort recovers planted coefficients", weighted_recovery},
        {"conformist and private-only signatures", conformist_and_private},
        {"confidence slopes of reference agents", confidence_slopes},
        {"REML agrees with an independent grid search", reml_against_oracle},
        {"effective weights from reference coefficients", reference_weights},
        {"replay with malformed responses is complete and reproducible", replay_with_malformed},
        {"command line pipeline is deterministic", cli_end_to_end},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto t0 = Clock::now();
        Check c;
        try {
            c = criteria[k].second();
        } catch (const std::exception& e) {
            c.ok = false;
            c.detail = std::string("exception: ") + e.what();
        }
        failed += !c.ok;
        std::cout << fmt::format("[{}] {} {} ({:.2f}s){}\n", c.ok ? "PASS" : "FAIL", k + 1, criteria[k].first,
                                 seconds_since(t0), c.ok ? "" : " : " + c.detail);
    }
    std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
