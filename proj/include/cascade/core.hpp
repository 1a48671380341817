#pragma once

// Domain types and exact Bayesian arithmetic for the binary-signal cascade
// paradigm. Everything here is a pure function over immutable values.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cascade {

// Input that violates a documented precondition. The CLI maps it to exit 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class TaskId { medical, legal, investment };
enum class Option { a, b };
enum class Signal { a, b };
enum class Source { human, ai };

inline constexpr TaskId kAllTasks[] = {TaskId::medical, TaskId::legal, TaskId::investment};

std::string_view to_string(TaskId t);
std::string_view to_string(Option o);
std::string_view to_string(Signal s);
std::string_view to_string(Source s);
TaskId parse_task(std::string_view s);
Option parse_option(std::string_view s);
Signal parse_signal(std::string_view s);
Source parse_source(std::string_view s);

inline Option opposite(Option o) { return o == Option::a ? Option::b : Option::a; }
inline Option favored_option(Signal s) { return s == Signal::a ? Option::a : Option::b; }
// +1 for evidence toward option_a, -1 toward option_b.
inline int sign_of(Option o) { return o == Option::a ? 1 : -1; }
inline int sign_of(Signal s) { return sign_of(favored_option(s)); }

struct Scenario {
    TaskId id = TaskId::medical;
    std::string option_a;
    std::string option_b;
    std::string signal_a;
    std::string signal_b;
    double q = 2.0 / 3.0;
    // Presentation of q in prompts, e.g. "66.7%". Derived from q when empty.
    std::string q_display;
    std::string advisor_noun;  // "clinician", "legal expert", ...
    std::string system_prompt;
    std::string prompt_template;
    // Lower-case alternative spellings accepted by the parser, per option.
    std::vector<std::string> aliases_a;
    std::vector<std::string> aliases_b;

    const std::string& label(Option o) const { return o == Option::a ? option_a : option_b; }
    const std::string& label(Signal s) const { return s == Signal::a ? signal_a : signal_b; }

    // Throws ValidationError listing every broken invariant.
    void validate() const;
};

struct AdvisorSignal {
    Source source = Source::human;
    Option decision = Option::a;

    friend bool operator==(const AdvisorSignal&, const AdvisorSignal&) = default;
};

struct Trial {
    std::string trial_id;
    TaskId scenario_id = TaskId::medical;
    Signal private_signal = Signal::a;
    std::vector<AdvisorSignal> advisors;
    // Cache of trial_posterior(); never authoritative.
    double posterior_a = 0.5;

    // Signals favoring option_a minus signals favoring option_b, private included.
    int net_count() const;
    int human_net() const;
    int ai_net() const;
    bool neutral() const { return net_count() == 0; }
};

struct AgentResponse {
    std::string trial_id;
    Option choice = Option::a;
    double confidence = 0.5;  // [0.5, 1.0]
    std::optional<std::string> rationale;
    int repetition_index = 0;
};

// ln(q / (1 - q)); q must lie in (0.5, 1).
double llr(double q);

// Posterior of option_a under a 0.5 prior given net signed count d.
double posterior_from_net(double q, int d);

double trial_posterior(const Trial& trial, const Scenario& scenario);

// std::nullopt on a neutral trial (posterior exactly 0.5).
std::optional<Option> most_likely_option(const Trial& trial, const Scenario& scenario);

// Posterior of whichever option is more likely; 0.5 on neutral trials.
double max_posterior(const Trial& trial, const Scenario& scenario);

// 50..100 scale to probability.
double normalize_confidence(double raw);

// Built-in scenarios for the three tasks.
Scenario preset_scenario(TaskId id);

// Percent text for a probability, e.g. 0.667 -> "66.7%", 0.55 -> "55%".
std::string percent_text(double p);

}  // namespace cascade
