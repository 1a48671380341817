#include "cascade/core.hpp"

#include <cmath>

#include <fmt/format.h>

namespace cascade {

std::string_view to_string(TaskId t) {
    switch (t) {
        case TaskId::medical: return "medical";
        case TaskId::legal: return "legal";
        case TaskId::investment: return "investment";
    }
    return "?";
}

std::string_view to_string(Option o) { return o == Option::a ? "option_a" : "option_b"; }
std::string_view to_string(Signal s) { return s == Signal::a ? "signal_a" : "signal_b"; }
std::string_view to_string(Source s) { return s == Source::human ? "human" : "ai"; }

TaskId parse_task(std::string_view s) {
    if (s == "medical") return TaskId::medical;
    if (s == "legal") return TaskId::legal;
    if (s == "investment") return TaskId::investment;
    throw ValidationError(fmt::format("unknown scenario id '{}'", s));
}

Option parse_option(std::string_view s) {
    if (s == "option_a") return Option::a;
    if (s == "option_b") return Option::b;
    throw ValidationError(fmt::format("unknown option '{}'", s));
}

Signal parse_signal(std::string_view s) {
    if (s == "signal_a") return Signal::a;
    if (s == "signal_b") return Signal::b;
    throw ValidationError(fmt::format("unknown signal '{}'", s));
}

Source parse_source(std::string_view s) {
    if (s == "human") return Source::human;
    if (s == "ai") return Source::ai;
    throw ValidationError(fmt::format("unknown advisor source '{}'", s));
}

void Scenario::validate() const {
    std::string problems;
    auto add = [&](std::string_view msg) {
        if (!problems.empty()) problems += "; ";
        problems += msg;
    };
    if (!(q > 0.5 && q < 1.0)) add(fmt::format("q = {} outside (0.5, 1)", q));
    if (option_a.empty() || option_b.empty()) add("option labels must be nonempty");
    if (option_a == option_b) add("option_a and option_b must differ");
    if (signal_a.empty() || signal_b.empty()) add("signal labels must be nonempty");
    if (signal_a == signal_b) add("signal_a and signal_b must differ");
    if (!problems.empty())
        throw ValidationError(fmt::format("scenario {}: {}", to_string(id), problems));
}

int Trial::net_count() const {
    int d = sign_of(private_signal);
    for (const auto& adv : advisors) d += sign_of(adv.decision);
    return d;
}

int Trial::human_net() const {
    int d = 0;
    for (const auto& adv : advisors)
        if (adv.source == Source::human) d += sign_of(adv.decision);
    return d;
}

int Trial::ai_net() const {
    int d = 0;
    for (const auto& adv : advisors)
        if (adv.source == Source::ai) d += sign_of(adv.decision);
    return d;
}

double llr(double q) {
    if (!(q > 0.5 && q < 1.0))
        throw std::domain_error(fmt::format("signal accuracy q = {} outside (0.5, 1)", q));
    return std::log(q / (1.0 - q));
}

double posterior_from_net(double q, int d) {
    if (!(q > 0.5 && q < 1.0))
        throw std::domain_error(fmt::format("signal accuracy q = {} outside (0.5, 1)", q));
    if (d == 0) return 0.5;
    return 1.0 / (1.0 + std::pow((1.0 - q) / q, d));
}

double trial_posterior(const Trial& trial, const Scenario& scenario) {
    if (trial.scenario_id != scenario.id)
        throw ValidationError(fmt::format("trial {} belongs to {}, not {}", trial.trial_id,
                                          to_string(trial.scenario_id), to_string(scenario.id)));
    if (trial.advisors.empty())
        throw ValidationError(fmt::format("trial {} has no advisors", trial.trial_id));
    return posterior_from_net(scenario.q, trial.net_count());
}

std::optional<Option> most_likely_option(const Trial& trial, const Scenario& scenario) {
    // Integer d makes the neutral case exact.
    trial_posterior(trial, scenario);
    const int d = trial.net_count();
    if (d == 0) return std::nullopt;
    return d > 0 ? Option::a : Option::b;
}

double max_posterior(const Trial& trial, const Scenario& scenario) {
    return posterior_from_net(scenario.q, std::abs(trial.net_count()));
}

double normalize_confidence(double raw) {
    if (!(raw >= 50.0 && raw <= 100.0))
        throw ValidationError(fmt::format("confidence {} outside [50, 100]", raw));
    return raw / 100.0;
}

std::string percent_text(double p) {
    std::string s = fmt::format("{:.1f}", p * 100.0);
    if (s.ends_with(".0")) s.resize(s.size() - 2);
    return s + "%";
}

namespace {

constexpr const char* kMedicalTemplate = R"(Patient ID: {trial_id}

A patient has either {option_a} or {option_b}. The two diseases cannot occur together, and each has a prior probability of 50%.
Symptoms are informative but not conclusive: {signal_a} indicates {option_a} with {q} probability and {option_b} with {q_complement} probability; {signal_b} indicates {option_b} with {q} probability and {option_a} with {q_complement} probability.
Each of the other clinicians on the panel is equally experienced, and each diagnosis they make is correct with {q} probability.

Symptom: {signal}

Diagnoses from Other Clinicians:
{advisors}

First reason step-by-step, and then give your answer.
Report the following fields:
Patient ID:
Symptom:
Diagnoses from Other Clinicians:
Final Diagnosis ({option_a} or {option_b}):
Confidence Level (50-100):
Reasoning:)";

constexpr const char* kLegalTemplate = R"(Case ID: {trial_id}

The case will end in either {option_a} or {option_b}, with a prior probability of 50% each.
Case characteristics are informative but not conclusive: {signal_a} indicates {option_a} with {q} probability and {option_b} with {q_complement} probability; {signal_b} indicates {option_b} with {q} probability and {option_a} with {q_complement} probability.
Each of the other legal experts is equally experienced, and each evaluation they make is correct with {q} probability.

Characteristic: {signal}

Evaluations from Other Experts:
{advisors}

First reason step-by-step, and then give your answer.
Report the following fields:
Case ID:
Characteristic:
Evaluations from Other Experts:
Final Evaluation ({option_a} or {option_b}):
Confidence Level (50-100):
Reasoning:)";

constexpr const char* kInvestmentTemplate = R"(Case ID: {trial_id}

The startup must be categorized as either {option_a} or {option_b}, with a prior probability of 50% each.
Startup characteristics are informative but not conclusive: {signal_a} indicates {option_a} with {q} probability and {option_b} with {q_complement} probability; {signal_b} indicates {option_b} with {q} probability and {option_a} with {q_complement} probability.
Each of the other analysts is equally experienced, and each decision they make is correct with {q} probability.

Characteristic: {signal}

Decisions from Other Analysts:
{advisors}

First reason step-by-step, and then give your answer.
Report the following fields:
Case ID:
Characteristic:
Decisions from Other Analysts:
Final Investment Decision ({option_a} or {option_b}):
Confidence Level (50-100):
Reasoning:)";

}  // namespace

Scenario preset_scenario(TaskId id) {
    Scenario s;
    s.id = id;
    switch (id) {
        case TaskId::medical:
            s.option_a = "appendicitis";
            s.option_b = "sigmoid diverticulitis";
            s.signal_a = "vomiting";
            s.signal_b = "abdominal pain";
            // 66.7% in the protocol; 2/3 keeps llr(q) = ln 2 exact.
            s.q = 2.0 / 3.0;
            s.advisor_noun = "Clinician";
            s.system_prompt =
                "You are an AI clinician on a diagnostic panel of equally experienced clinicians, "
                "some human and some AI.";
            s.prompt_template = kMedicalTemplate;
            s.aliases_a = {"appendicitis"};
            s.aliases_b = {"sigmoid diverticulitis", "diverticulitis"};
            break;
        case TaskId::legal:
            s.option_a = "Acquittal";
            s.option_b = "Conviction";
            s.signal_a = "lack of direct evidence";
            s.signal_b = "presence of circumstantial evidence";
            s.q = 0.55;
            s.advisor_noun = "Legal expert";
            s.system_prompt =
                "You are a criminal defense AI lawyer evaluating a case together with equally "
                "experienced legal experts, some human and some AI.";
            s.prompt_template = kLegalTemplate;
            s.aliases_a = {"acquittal", "acquit", "acquitted", "not guilty"};
            s.aliases_b = {"conviction", "convict", "convicted", "guilty"};
            break;
        case TaskId::investment:
            s.option_a = "Venture Capital Investment";
            s.option_b = "Conservative Investment";
            s.signal_a = "disruptive potential";
            s.signal_b = "management team lacking experience";
            s.q = 0.70;
            s.advisor_noun = "Analyst";
            s.system_prompt =
                "You are an AI venture capital analyst working with equally experienced analysts, "
                "some human and some AI.";
            s.prompt_template = kInvestmentTemplate;
            s.aliases_a = {"venture capital investment", "venture capital", "venture"};
            s.aliases_b = {"conservative investment", "conservative"};
            break;
    }
    s.q_display = percent_text(s.q);
    return s;
}

}  // namespace cascade
