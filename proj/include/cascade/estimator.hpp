#pragma once

// Decision-weight estimation: transcripts -> regression rows -> the
// task-interacted linear model with an optional per-subject random intercept.
//
// Column order of the full model (legal is the reference task):
//   0 intercept   1 med        2 inv
//   3 i_pi        4 i_h        5 i_ai
//   6 med*i_pi    7 inv*i_pi   8 med*i_h   9 inv*i_h   10 med*i_ai   11 inv*i_ai

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cascade/core.hpp"
#include "cascade/transcript.hpp"

namespace cascade {

class EstimabilityError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::vector<std::pair<double, double>> trace)
        : std::runtime_error(what), trace_(std::move(trace)) {}
    // (variance ratio, restricted log-likelihood) per evaluation.
    const std::vector<std::pair<double, double>>& trace() const { return trace_; }

private:
    std::vector<std::pair<double, double>> trace_;
};

struct ClampPolicy {
    double lo = 0.01;
    double hi = 0.99;
};

struct ObservationRow {
    double y = 0.0;  // logit of P(option_a)
    double i_pi = 0.0;
    double i_h = 0.0;
    double i_ai = 0.0;
    TaskId task = TaskId::legal;
    std::string subject_id;
    std::string trial_id;
    int repetition_index = 0;
    bool clamped = false;
};

ObservationRow to_observation(const Trial& trial, const AgentResponse& response, const Scenario& scenario,
                              const std::string& subject_id, const ClampPolicy& clamp = {});
ObservationRow to_observation(const Trial& trial, const AgentResponse& response, double q,
                              const std::string& subject_id, const ClampPolicy& clamp = {});

struct ObservationSet {
    std::vector<ObservationRow> rows;
    int excluded_failures = 0;
    int clamped = 0;

    double clamped_fraction() const { return rows.empty() ? 0.0 : static_cast<double>(clamped) / rows.size(); }
};

ObservationSet observations_from_transcripts(const std::vector<Transcript>& records, const ClampPolicy& clamp = {});

struct Design {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<int> groups;
    std::vector<std::string> group_names;
    std::vector<std::string> column_names;
    std::optional<TaskId> task;  // set for single-task submodels
};

const std::vector<std::string>& full_column_names();

// Full 12-column design. Throws EstimabilityError naming dependent columns.
Design build_design(const std::vector<ObservationRow>& rows);
// Four-column [1, i_pi, i_h, i_ai] design from the rows of one task.
Design build_task_design(const std::vector<ObservationRow>& rows, TaskId task);

// Throws EstimabilityError when X is rank deficient.
void check_full_rank(const Eigen::MatrixXd& X, const std::vector<std::string>& names);

struct FitResult {
    std::string method;  // "ols", "random_intercept", "logistic"
    std::vector<std::string> names;
    Eigen::VectorXd beta;
    Eigen::MatrixXd covariance;
    double sigma2_residual = 0.0;
    double sigma2_intercept = 0.0;
    // Restricted log-likelihood (maximum likelihood for "logistic"). Empty
    // when the data are fitted exactly and the likelihood is unbounded.
    std::optional<double> log_likelihood;
    int n_observations = 0;
    int n_subjects = 0;
    int iterations = 0;
    bool exact_fit = false;
    std::optional<TaskId> task;

    int n_parameters() const { return static_cast<int>(beta.size()); }
    int df_residual() const { return n_observations - n_parameters(); }
};

FitResult fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
FitResult fit_ols(const Design& d);

// REML fit of y = X beta + b_group + e, b ~ N(0, s2_b), e ~ N(0, s2_e).
FitResult fit_random_intercept(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<int>& groups);
FitResult fit_random_intercept(const Design& d);

// Restricted log-likelihood profiled over the residual variance, at a fixed
// ratio s2_b / s2_e.
double restricted_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<int>& groups,
                         double variance_ratio);

// Logistic regression by IRLS on 0/1 outcomes.
FitResult fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y01);

struct LrtResult {
    double chi2 = 0.0;
    double p_value = 1.0;        // 50:50 mixture of chi2(0) and chi2(1)
    double p_value_chi2_1 = 1.0;  // plain chi2(1)
    bool clamped = false;         // negative statistic from numerical noise set to 0
};

LrtResult lrt_random_intercept(const FitResult& fit_full, const FitResult& fit_null);

struct ContrastResult {
    double estimate = 0.0;
    double standard_error = 0.0;
    double t_statistic = 0.0;
    int degrees_of_freedom = 0;
    double p_value = 1.0;    // two-sided
    double p_greater = 0.5;  // one-sided, H1: c'beta > null value
    double p_less = 0.5;     // one-sided, H1: c'beta < null value
    bool tested = true;      // false when the contrast has no sampling variance
};

// Tests c'beta against null_value.
ContrastResult wald_contrast(const FitResult& fit, const Eigen::VectorXd& c, double null_value = 0.0);
// Like wald_contrast, but a zero-variance contrast (exact fits) yields the
// point estimate with se 0 and no test instead of an error.
ContrastResult try_wald_contrast(const FitResult& fit, const Eigen::VectorXd& c, double null_value = 0.0);

enum class InfoSource { private_info, human, ai };
std::string_view to_string(InfoSource s);

// Contrast vector selecting one source's effective weight in one task.
Eigen::VectorXd weight_vector(const FitResult& fit, TaskId task, InfoSource source);

struct EffectiveWeights {
    TaskId task = TaskId::legal;
    std::array<double, 3> weight{};  // private, human, ai
    std::array<double, 3> se{};
};

EffectiveWeights effective_weights(const FitResult& fit, TaskId task);

// Model-level fit built directly from a coefficient vector (e.g. reference
// point estimates); covariance is zero.
FitResult fit_from_coefficients(const std::vector<double>& beta);

// --- confidence model --------------------------------------------------------

struct ConfidenceRecord {
    double confidence = 0.5;  // reported confidence in the chosen option
    double posterior = 0.5;   // posterior of the most likely option
    TaskId task = TaskId::legal;
    std::string subject_id;
};

std::vector<ConfidenceRecord> confidence_records(const std::vector<Transcript>& records);

struct ConfidenceModelResult {
    FitResult fit;       // [1, med, inv, post, med*post, inv*post]
    FitResult null_fit;  // same fixed effects, no random intercept
    LrtResult lrt;
    std::map<TaskId, ContrastResult> slopes;
    // Keyed "medical-legal", "medical-investment", "legal-investment".
    std::map<std::string, ContrastResult> slope_differences;
};

ConfidenceModelResult fit_confidence_model(const std::vector<ConfidenceRecord>& records);

}  // namespace cascade
