#pragma once

// One record per (trial, repetition), shared by synthetic cohorts and live
// endpoint runs so that analysis does not care where responses came from.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cascade/core.hpp"

namespace cascade {

enum class FailureReason { no_choice, bad_confidence, ambiguous, transport_failure };

std::string_view to_string(FailureReason r);
FailureReason parse_failure_reason(std::string_view s);

struct TokenUsage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

struct Transcript {
    std::string run_id;
    std::string design_digest;
    TaskId scenario_id = TaskId::medical;
    double q = 0.0;
    std::string model_name;  // subject identifier in the fits
    int repetition_index = 0;
    Trial trial;
    std::string rendered_prompt;
    std::string raw_completion;
    // Completions rejected by the parser before the recorded one.
    std::vector<std::string> rejected_completions;
    int attempts = 1;
    std::optional<AgentResponse> parsed;
    std::optional<FailureReason> failure;
    std::string failure_detail;
    std::optional<TokenUsage> usage;
    std::optional<double> latency_ms;

    bool ok() const { return parsed.has_value(); }
};

std::string transcript_line(const Transcript& t);
Transcript transcript_from_line(const std::string& line);

void write_transcripts(std::ostream& os, const std::vector<Transcript>& records);

struct TranscriptFile {
    std::vector<Transcript> records;
    // Lines that could not be decoded at all (as opposed to parse_failure records).
    std::vector<std::string> errors;
};

TranscriptFile read_transcripts(std::istream& is);

// Throws ValidationError when one scenario carries more than one design digest.
void check_single_manifest_per_scenario(const std::vector<Transcript>& records);

}  // namespace cascade
