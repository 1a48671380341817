#include "cascade/transcript.hpp"

#include <istream>
#include <map>
#include <ostream>

#include <fmt/format.h>

#include "cascade/json_io.hpp"

namespace cascade {

std::string_view to_string(FailureReason r) {
    switch (r) {
        case FailureReason::no_choice: return "no_choice";
        case FailureReason::bad_confidence: return "bad_confidence";
        case FailureReason::ambiguous: return "ambiguous";
        case FailureReason::transport_failure: return "transport_failure";
    }
    return "?";
}

FailureReason parse_failure_reason(std::string_view s) {
    if (s == "no_choice") return FailureReason::no_choice;
    if (s == "bad_confidence") return FailureReason::bad_confidence;
    if (s == "ambiguous") return FailureReason::ambiguous;
    if (s == "transport_failure") return FailureReason::transport_failure;
    throw ValidationError(fmt::format("unknown failure reason '{}'", s));
}

std::string transcript_line(const Transcript& t) {
    json j{{"run_id", t.run_id},
           {"design_digest", t.design_digest},
           {"scenario_id", to_string(t.scenario_id)},
           {"q", t.q},
           {"model_name", t.model_name},
           {"repetition_index", t.repetition_index},
           {"trial_id", t.trial.trial_id},
           {"trial", to_json(t.trial)},
           {"rendered_prompt", t.rendered_prompt},
           {"raw_completion", t.raw_completion},
           {"attempts", t.attempts}};
    if (!t.rejected_completions.empty()) j["rejected_completions"] = t.rejected_completions;
    if (t.parsed) {
        json p{{"choice", to_string(t.parsed->choice)}, {"confidence", t.parsed->confidence}};
        if (t.parsed->rationale) p["rationale"] = *t.parsed->rationale;
        j["parsed"] = std::move(p);
    } else {
        j["parsed"] = nullptr;
    }
    if (t.failure) {
        j["failure"] = to_string(*t.failure);
        j["failure_detail"] = t.failure_detail;
    }
    if (t.usage)
        j["usage"] = {{"prompt_tokens", t.usage->prompt_tokens},
                      {"completion_tokens", t.usage->completion_tokens}};
    if (t.latency_ms) j["latency_ms"] = *t.latency_ms;
    return j.dump();
}

Transcript transcript_from_line(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw ValidationError(fmt::format("not JSON: {}", e.what()));
    }
    Transcript t;
    t.run_id = require<std::string>(j, "run_id");
    t.design_digest = j.value("design_digest", "");
    t.scenario_id = parse_task(require<std::string>(j, "scenario_id"));
    t.q = require<double>(j, "q");
    t.model_name = require<std::string>(j, "model_name");
    t.repetition_index = require<int>(j, "repetition_index");
    t.trial = trial_from_json(require<json>(j, "trial"));
    t.rendered_prompt = j.value("rendered_prompt", "");
    t.raw_completion = j.value("raw_completion", "");
    t.attempts = j.value("attempts", 1);
    if (j.contains("rejected_completions"))
        t.rejected_completions = require<std::vector<std::string>>(j, "rejected_completions");
    if (j.contains("parsed") && !j["parsed"].is_null()) {
        const auto& p = j["parsed"];
        AgentResponse r;
        r.trial_id = t.trial.trial_id;
        r.choice = parse_option(require<std::string>(p, "choice"));
        r.confidence = require<double>(p, "confidence");
        if (!(r.confidence >= 0.5 && r.confidence <= 1.0))
            throw ValidationError(fmt::format("confidence {} outside [0.5, 1]", r.confidence));
        if (p.contains("rationale")) r.rationale = require<std::string>(p, "rationale");
        r.repetition_index = t.repetition_index;
        t.parsed = r;
    }
    if (j.contains("failure")) {
        t.failure = parse_failure_reason(require<std::string>(j, "failure"));
        t.failure_detail = j.value("failure_detail", "");
    }
    if (!t.parsed && !t.failure) throw ValidationError("record has neither parsed response nor failure");
    if (j.contains("usage"))
        t.usage = TokenUsage{j["usage"].value("prompt_tokens", 0L), j["usage"].value("completion_tokens", 0L)};
    if (j.contains("latency_ms")) t.latency_ms = require<double>(j, "latency_ms");
    return t;
}

void write_transcripts(std::ostream& os, const std::vector<Transcript>& records) {
    for (const auto& r : records) os << transcript_line(r) << '\n';
}

TranscriptFile read_transcripts(std::istream& is) {
    TranscriptFile out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.records.push_back(transcript_from_line(line));
        } catch (const std::exception& e) {
            out.errors.push_back(fmt::format("line {}: {}", lineno, e.what()));
        }
    }
    return out;
}

void check_single_manifest_per_scenario(const std::vector<Transcript>& records) {
    std::map<TaskId, std::string> seen;
    for (const auto& r : records) {
        auto [it, inserted] = seen.emplace(r.scenario_id, r.design_digest);
        if (!inserted && it->second != r.design_digest)
            throw ValidationError(fmt::format("transcripts mix manifests for {}: digests {} and {}",
                                              to_string(r.scenario_id), it->second, r.design_digest));
    }
}

}  // namespace cascade
