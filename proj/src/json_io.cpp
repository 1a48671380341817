#include "cascade/json_io.hpp"

#include <array>
#include <memory>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace cascade {

std::string sha256_hex(std::string_view bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1)
        throw std::runtime_error("sha256 failed");
    std::string hex;
    hex.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

json to_json(const Scenario& s) {
    return json{{"id", to_string(s.id)},
                {"option_a", s.option_a},
                {"option_b", s.option_b},
                {"signal_a", s.signal_a},
                {"signal_b", s.signal_b},
                {"q", s.q},
                {"q_display", s.q_display},
                {"advisor_noun", s.advisor_noun},
                {"system_prompt", s.system_prompt},
                {"prompt_template", s.prompt_template},
                {"aliases_a", s.aliases_a},
                {"aliases_b", s.aliases_b}};
}

// Missing fields fall back to the built-in preset for that id, so a config
// can override just q or the template.
Scenario scenario_from_json(const json& j) {
    Scenario s = preset_scenario(parse_task(require<std::string>(j, "id")));
    auto take = [&](const char* key, auto& field) {
        if (j.contains(key)) field = require<std::decay_t<decltype(field)>>(j, key);
    };
    take("option_a", s.option_a);
    take("option_b", s.option_b);
    take("signal_a", s.signal_a);
    take("signal_b", s.signal_b);
    take("advisor_noun", s.advisor_noun);
    take("system_prompt", s.system_prompt);
    take("prompt_template", s.prompt_template);
    take("aliases_a", s.aliases_a);
    take("aliases_b", s.aliases_b);
    if (j.contains("q")) {
        s.q = require<double>(j, "q");
        s.q_display = percent_text(s.q);
    }
    take("q_display", s.q_display);
    s.validate();
    return s;
}

json to_json(const AdvisorSignal& a) {
    return json{{"source", to_string(a.source)}, {"decision", to_string(a.decision)}};
}

json to_json(const Trial& t) {
    json advisors = json::array();
    for (const auto& a : t.advisors) advisors.push_back(to_json(a));
    return json{{"trial_id", t.trial_id},
                {"scenario_id", to_string(t.scenario_id)},
                {"private", to_string(t.private_signal)},
                {"advisors", std::move(advisors)},
                {"posterior_a", t.posterior_a}};
}

Trial trial_from_json(const json& j) {
    Trial t;
    t.trial_id = require<std::string>(j, "trial_id");
    t.scenario_id = parse_task(require<std::string>(j, "scenario_id"));
    t.private_signal = parse_signal(require<std::string>(j, "private"));
    for (const auto& a : require<json>(j, "advisors")) {
        t.advisors.push_back({parse_source(require<std::string>(a, "source")),
                              parse_option(require<std::string>(a, "decision"))});
    }
    t.posterior_a = require<double>(j, "posterior_a");
    return t;
}

json to_json(const DesignCell& c) {
    return json{{"panel_size", c.panel_size}, {"human", c.human_count},
                {"ai", c.ai_count},           {"agree", c.agree_count},
                {"disagree", c.disagree_count}, {"repetitions", c.repetitions}};
}

json to_json(const DesignSpec& spec) {
    json cells = json::array();
    for (const auto& c : spec.cells) cells.push_back(to_json(c));
    return json{{"scenario_id", to_string(spec.scenario_id)},
                {"seed", spec.seed},
                {"target_trial_count", spec.target_trial_count},
                {"cells", std::move(cells)}};
}

DesignSpec design_from_json(const json& j) {
    DesignSpec spec;
    spec.scenario_id = parse_task(require<std::string>(j, "scenario_id"));
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.target_trial_count = j.value("target_trial_count", 52);
    for (const auto& c : require<json>(j, "cells")) {
        DesignCell cell;
        cell.panel_size = require<int>(c, "panel_size");
        cell.human_count = require<int>(c, "human");
        cell.ai_count = require<int>(c, "ai");
        cell.agree_count = require<int>(c, "agree");
        cell.disagree_count = require<int>(c, "disagree");
        cell.repetitions = c.value("repetitions", 1);
        spec.cells.push_back(cell);
    }
    return spec;
}

}  // namespace cascade
