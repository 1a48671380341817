#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "cascade/runner.hpp"

namespace cascade {

const char* const kRepairSuffix =
    "\n\nYour previous reply could not be read. Reply again and include the line "
    "'Final ...: <one of the two options>' naming exactly one option, and the line "
    "'Confidence Level: <number from 50 to 100>'.";

namespace {

std::string advisor_lines(const Scenario& scenario, const Trial& trial) {
    std::string out;
    for (std::size_t k = 0; k < trial.advisors.size(); ++k) {
        const auto& adv = trial.advisors[k];
        if (k) out += '\n';
        out += fmt::format("- {} {} ({}): {}", scenario.advisor_noun, k + 1,
                           adv.source == Source::human ? "human" : "AI", scenario.label(adv.decision));
    }
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    lines.push_back(std::move(cur));
    return lines;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Options named in `text`. Longer aliases shadow shorter ones they contain,
// so "not guilty" does not also count as "guilty".
std::set<Option> options_named(const std::string& text, const Scenario& scenario) {
    struct Alias {
        std::string word;
        Option option;
    };
    std::vector<Alias> aliases;
    auto add = [&](const std::string& w, Option o) {
        if (!w.empty()) aliases.push_back({lower(w), o});
    };
    add(scenario.option_a, Option::a);
    add(scenario.option_b, Option::b);
    for (const auto& w : scenario.aliases_a) add(w, Option::a);
    for (const auto& w : scenario.aliases_b) add(w, Option::b);
    std::stable_sort(aliases.begin(), aliases.end(),
                     [](const Alias& x, const Alias& y) { return x.word.size() > y.word.size(); });

    std::vector<bool> covered(text.size(), false);
    std::set<Option> found;
    for (const auto& alias : aliases) {
        for (auto pos = text.find(alias.word); pos != std::string::npos;
             pos = text.find(alias.word, pos + 1)) {
            const auto end = pos + alias.word.size();
            if (pos > 0 && is_word_char(text[pos - 1])) continue;
            if (end < text.size() && is_word_char(text[end])) continue;
            if (std::any_of(covered.begin() + pos, covered.begin() + end, [](bool b) { return b; }))
                continue;
            std::fill(covered.begin() + pos, covered.begin() + end, true);
            found.insert(alias.option);
        }
    }
    return found;
}

}  // namespace

std::string render_prompt(const Scenario& scenario, const Trial& trial) {
    if (trial.scenario_id != scenario.id)
        throw ValidationError(fmt::format("trial {} belongs to {}, not {}", trial.trial_id,
                                          to_string(trial.scenario_id), to_string(scenario.id)));
    const std::map<std::string, std::string> values{
        {"trial_id", trial.trial_id},
        {"option_a", scenario.option_a},
        {"option_b", scenario.option_b},
        {"signal_a", scenario.signal_a},
        {"signal_b", scenario.signal_b},
        {"q", scenario.q_display.empty() ? percent_text(scenario.q) : scenario.q_display},
        {"q_complement", percent_text(1.0 - scenario.q)},
        {"signal", scenario.label(trial.private_signal)},
        {"advisors", advisor_lines(scenario, trial)},
        {"advisor_noun", scenario.advisor_noun},
    };
    const auto& tpl = scenario.prompt_template;
    std::set<std::string> used;
    std::string out;
    out.reserve(tpl.size() + 256);
    std::size_t i = 0;
    while (i < tpl.size()) {
        if (tpl[i] == '{') {
            auto close = tpl.find('}', i);
            if (close == std::string::npos)
                throw ValidationError(fmt::format("unterminated placeholder at offset {}", i));
            const std::string name = tpl.substr(i + 1, close - i - 1);
            auto it = values.find(name);
            if (it == values.end()) throw ValidationError(fmt::format("unknown placeholder {{{}}}", name));
            out += it->second;
            used.insert(name);
            i = close + 1;
        } else {
            out += tpl[i++];
        }
    }
    for (const char* required : {"option_a", "option_b", "q", "signal", "advisors"})
        if (!used.contains(required))
            throw ValidationError(fmt::format("template lacks placeholder {{{}}}", required));
    return out;
}

ParseResult parse_response(std::string_view raw, const Scenario& scenario) {
    std::string cleaned;
    cleaned.reserve(raw.size());
    for (char c : raw)
        if (c != '*' && c != '#' && c != '`') cleaned += c;
    const auto lines = split_lines(lower(cleaned));

    static const std::regex decision_re(
        R"(^\s*[-•]?\s*final\s+(?:diagnosis|evaluation|investment\s+decision|decision|answer|verdict)\b[^:]*:\s*(.*)$)");
    static const std::regex confidence_re(
        R"(confidence(?:\s+level)?\s*(?:\([^)]*\))?\s*[:=\-]?\s*(-?\d+(?:\.\d+)?))");
    static const std::regex reasoning_re(R"(^\s*[-•]?\s*reasoning\b[^:]*:\s*(.*)$)");

    std::set<Option> named;
    std::optional<std::size_t> decision_line;
    for (std::size_t k = 0; k < lines.size(); ++k) {
        std::smatch m;
        if (!std::regex_match(lines[k], m, decision_re)) continue;
        std::string value = trim(m[1].str());
        if (value.empty()) {
            for (std::size_t n = k + 1; n < lines.size() && value.empty(); ++n) value = trim(lines[n]);
        }
        auto opts = options_named(value, scenario);
        named.insert(opts.begin(), opts.end());
        if (!decision_line) decision_line = k;
    }
    if (named.size() > 1)
        return ParseFailure{FailureReason::ambiguous, "final decision names both options"};
    if (named.empty())
        return ParseFailure{FailureReason::no_choice,
                            decision_line ? "final decision names neither option" : "no final decision field"};

    std::optional<double> raw_conf;
    auto scan = [&](std::size_t from) {
        for (std::size_t k = from; k < lines.size() && !raw_conf; ++k) {
            std::smatch m;
            if (std::regex_search(lines[k], m, confidence_re)) raw_conf = std::stod(m[1].str());
        }
    };
    scan(*decision_line);
    if (!raw_conf) scan(0);
    if (!raw_conf) return ParseFailure{FailureReason::bad_confidence, "no confidence value"};
    if (!(*raw_conf >= 50.0 && *raw_conf <= 100.0))
        return ParseFailure{FailureReason::bad_confidence, fmt::format("confidence {} outside 50-100", *raw_conf)};

    AgentResponse r;
    r.choice = *named.begin();
    r.confidence = normalize_confidence(*raw_conf);

    // Rationale keeps the original casing: re-split the cleaned text.
    const auto original = split_lines(cleaned);
    for (std::size_t k = 0; k < lines.size(); ++k) {
        std::smatch m;
        if (!std::regex_match(lines[k], m, reasoning_re)) continue;
        std::string text = trim(original[k].substr(original[k].size() - m[1].length()));
        for (std::size_t n = k + 1; n < original.size(); ++n) text += "\n" + original[n];
        text = trim(text);
        while (!text.empty() && (text.back() == '\n' || text.back() == ' ')) text.pop_back();
        if (!text.empty()) r.rationale = text;
        break;
    }
    return r;
}

}  // namespace cascade
