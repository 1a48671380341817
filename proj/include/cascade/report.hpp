#pragma once

// Descriptive tables, the weight chart and the report bundle.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cascade/analysis.hpp"
#include "cascade/transcript.hpp"

namespace cascade {

// Mean over subjects of per-subject means, with the spread measured both
// across subjects and across (subject, trial) units. Spreads are sample
// standard deviations and are empty with fewer than two units.
struct Summary {
    std::optional<double> mean;
    std::optional<double> std_subjects;
    std::optional<double> std_trials;
};

struct AlignmentRow {
    TaskId task = TaskId::medical;
    int abs_net = 1;          // |d|
    double posterior = 0.5;   // posterior of the most likely option
    int n_subjects = 0;
    int n_trials = 0;         // (subject, trial) units
    int n_responses = 0;
    Summary choice;           // share of choices for the most likely option
    Summary confidence;
};

struct NeutralRow {
    TaskId task = TaskId::medical;
    int n_subjects = 0;
    int n_trials = 0;
    int n_responses = 0;
    Summary private_choice;      // share of choices for the private-signal option
    Summary private_confidence;  // confidence attributed to the private option
};

// Non-neutral trials, one row per task and |d| in 1..3, empty cells included.
std::vector<AlignmentRow> table_alignment(const std::vector<Transcript>& records);
// Neutral trials, one row per task.
std::vector<NeutralRow> table_neutral(const std::vector<Transcript>& records);

std::string alignment_csv(const std::vector<AlignmentRow>& rows);
std::string neutral_csv(const std::vector<NeutralRow>& rows);

nlohmann::json to_json(const AlignmentRow& r);
nlohmann::json to_json(const NeutralRow& r);

// Grouped bars (task x source) with standard-error whiskers and a reference
// line at weight 1. Tasks absent from the map leave a gap and a legend note.
std::string plot_weights(const std::map<TaskId, EffectiveWeights>& weights, const std::string& title = "");

struct ReportBundle {
    std::vector<AlignmentRow> table1;
    std::vector<NeutralRow> table2;
    Analysis analysis;
    nlohmann::json provenance;
};

// Fits and tables from one transcript set. `provenance` is merged with the
// digests, run ids and subjects found in the records.
ReportBundle build_report(const std::vector<Transcript>& records, const nlohmann::json& provenance,
                          const AnalysisOptions& options = {});

nlohmann::json to_json(const ReportBundle& b);

// Renders the read-only reference tables shipped in fixtures/.
std::string reference_table_csv(const nlohmann::json& fixture, const std::string& table);

extern const char* const kVersion;

}  // namespace cascade
