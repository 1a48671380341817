#pragma once

// Fits the decision-weight model and the confidence model on a transcript set
// and serializes the results.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cascade/estimator.hpp"

namespace cascade {

enum class ResponseMode { log_odds, binary };

struct AnalysisOptions {
    ClampPolicy clamp;
    ResponseMode mode = ResponseMode::log_odds;
};

struct ModelFit {
    FitResult fit;
    std::optional<FitResult> null_fit;  // fixed effects only, for the variance test
    std::optional<LrtResult> lrt;
};

struct Analysis {
    // "full" when every task is present, else "per_task".
    std::string structure;
    ResponseMode mode = ResponseMode::log_odds;
    std::vector<ModelFit> models;
    std::map<TaskId, EffectiveWeights> weights;
    // Keyed "private-human", "private-ai", "human-ai" within each task.
    std::map<TaskId, std::map<std::string, ContrastResult>> contrasts;
    std::optional<ConfidenceModelResult> confidence;
    std::string confidence_error;
    std::vector<TaskId> missing_tasks;
    std::vector<std::string> design_digests;
    int n_records = 0;
    int excluded_failures = 0;
    int clamped = 0;
    double clamped_fraction = 0.0;
};

// Throws EstimabilityError when the legal task is absent or a design is
// rank deficient.
Analysis analyze(const std::vector<Transcript>& records, const AnalysisOptions& options = {});

nlohmann::json to_json(const FitResult& fit);
nlohmann::json to_json(const ContrastResult& c);
nlohmann::json to_json(const LrtResult& lrt);
nlohmann::json to_json(const EffectiveWeights& w);
nlohmann::json to_json(const ConfidenceModelResult& c);
nlohmann::json to_json(const Analysis& a);

// One row per coefficient of every fitted model.
std::string coefficients_csv(const Analysis& a);

}  // namespace cascade
