#include "cascade/analysis.hpp"

#include <set>
#include <sstream>

#include <fmt/format.h>

namespace cascade {

namespace {

using nlohmann::json;

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

FitResult fit_binary(const Design& d, const std::vector<ObservationRow>& rows, const std::vector<Transcript>& records) {
    // Choice indicators line up with the observation rows, which skip failures.
    std::vector<double> chose_a;
    for (const auto& r : records)
        if (r.parsed) chose_a.push_back(r.parsed->choice == Option::a ? 1.0 : 0.0);
    Eigen::VectorXd y(d.X.rows());
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (d.task && rows[i].task != *d.task) continue;
        y(k++) = chose_a[i];
    }
    FitResult fit = fit_logistic(d.X, y);
    fit.names = d.column_names;
    fit.task = d.task;
    fit.n_subjects = static_cast<int>(d.group_names.size());
    return fit;
}

ModelFit fit_model(const Design& d, const std::vector<ObservationRow>& rows, const std::vector<Transcript>& records,
                   ResponseMode mode) {
    ModelFit m;
    if (mode == ResponseMode::binary) {
        m.fit = fit_binary(d, rows, records);
        return m;
    }
    if (d.group_names.size() < 2) {
        m.fit = fit_ols(d);
        return m;
    }
    m.fit = fit_random_intercept(d);
    m.null_fit = fit_ols(d);
    m.lrt = lrt_random_intercept(m.fit, *m.null_fit);
    return m;
}

std::map<std::string, ContrastResult> source_contrasts(const FitResult& fit, TaskId task) {
    const auto pi = weight_vector(fit, task, InfoSource::private_info);
    const auto h = weight_vector(fit, task, InfoSource::human);
    const auto ai = weight_vector(fit, task, InfoSource::ai);
    return {{"private-human", try_wald_contrast(fit, pi - h)},
            {"private-ai", try_wald_contrast(fit, pi - ai)},
            {"human-ai", try_wald_contrast(fit, h - ai)}};
}

std::string_view mode_name(ResponseMode m) { return m == ResponseMode::binary ? "binary" : "log_odds"; }

}  // namespace

Analysis analyze(const std::vector<Transcript>& records, const AnalysisOptions& options) {
    check_single_manifest_per_scenario(records);
    Analysis a;
    a.mode = options.mode;
    a.n_records = static_cast<int>(records.size());
    std::set<std::string> digests;
    for (const auto& r : records) digests.insert(r.design_digest);
    a.design_digests.assign(digests.begin(), digests.end());

    const auto obs = observations_from_transcripts(records, options.clamp);
    a.excluded_failures = obs.excluded_failures;
    a.clamped = obs.clamped;
    a.clamped_fraction = obs.clamped_fraction();

    std::set<TaskId> present;
    for (const auto& r : obs.rows) present.insert(r.task);
    if (!present.contains(TaskId::legal))
        throw EstimabilityError("reference task 'legal' has no parsed observations");
    for (TaskId t : kAllTasks)
        if (!present.contains(t)) a.missing_tasks.push_back(t);

    if (a.missing_tasks.empty()) {
        a.structure = "full";
        a.models.push_back(fit_model(build_design(obs.rows), obs.rows, records, options.mode));
        const auto& fit = a.models.front().fit;
        for (TaskId t : kAllTasks) {
            a.weights[t] = effective_weights(fit, t);
            a.contrasts[t] = source_contrasts(fit, t);
        }
    } else {
        a.structure = "per_task";
        for (TaskId t : kAllTasks) {
            if (!present.contains(t)) continue;
            a.models.push_back(fit_model(build_task_design(obs.rows, t), obs.rows, records, options.mode));
            const auto& fit = a.models.back().fit;
            a.weights[t] = effective_weights(fit, t);
            a.contrasts[t] = source_contrasts(fit, t);
        }
    }

    try {
        a.confidence = fit_confidence_model(confidence_records(records));
    } catch (const ValidationError& e) {
        a.confidence_error = e.what();
    }
    return a;
}

json to_json(const FitResult& fit) {
    json coefficients = json::object();
    json names = json::array();
    json se = json::object();
    for (Eigen::Index k = 0; k < fit.beta.size(); ++k) {
        coefficients[fit.names[k]] = fit.beta(k);
        se[fit.names[k]] = std::sqrt(std::max(fit.covariance(k, k), 0.0));
        names.push_back(fit.names[k]);
    }
    json cov = json::array();
    for (Eigen::Index r = 0; r < fit.covariance.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < fit.covariance.cols(); ++c) row.push_back(fit.covariance(r, c));
        cov.push_back(row);
    }
    return {{"method", fit.method},
            {"task", fit.task ? json(to_string(*fit.task)) : json(nullptr)},
            {"names", names},
            {"coefficients", coefficients},
            {"standard_errors", se},
            {"covariance", cov},
            {"sigma2_residual", fit.sigma2_residual},
            {"sigma2_intercept", fit.sigma2_intercept},
            {"log_likelihood", optional_number(fit.log_likelihood)},
            {"exact_fit", fit.exact_fit},
            {"n_observations", fit.n_observations},
            {"n_subjects", fit.n_subjects},
            {"df_residual", fit.df_residual()},
            {"iterations", fit.iterations}};
}

json to_json(const ContrastResult& c) {
    json j = {{"estimate", c.estimate}, {"standard_error", c.standard_error}, {"degrees_of_freedom", c.degrees_of_freedom}};
    if (c.tested) {
        j["t_statistic"] = c.t_statistic;
        j["p_value"] = c.p_value;
        j["p_greater"] = c.p_greater;
        j["p_less"] = c.p_less;
    } else {
        j["t_statistic"] = nullptr;
        j["p_value"] = nullptr;
        j["p_greater"] = nullptr;
        j["p_less"] = nullptr;
    }
    return j;
}

json to_json(const LrtResult& lrt) {
    return {{"chi2", lrt.chi2},
            {"p_value_mixture", lrt.p_value},
            {"p_value_chi2_1", lrt.p_value_chi2_1},
            {"clamped", lrt.clamped}};
}

json to_json(const EffectiveWeights& w) {
    json j = {{"task", to_string(w.task)}};
    for (int s = 0; s < 3; ++s)
        j[std::string(to_string(static_cast<InfoSource>(s)))] = {{"weight", w.weight[s]}, {"se", w.se[s]}};
    return j;
}

json to_json(const ConfidenceModelResult& c) {
    json slopes = json::object();
    for (const auto& [task, s] : c.slopes) slopes[std::string(to_string(task))] = to_json(s);
    json diffs = json::object();
    for (const auto& [label, s] : c.slope_differences) diffs[label] = to_json(s);
    return {{"fit", to_json(c.fit)},
            {"null_fit", to_json(c.null_fit)},
            {"lrt", to_json(c.lrt)},
            {"slopes", slopes},
            {"slope_differences", diffs}};
}

json to_json(const Analysis& a) {
    json models = json::array();
    for (const auto& m : a.models) {
        json j = {{"fit", to_json(m.fit)}};
        j["null_fit"] = m.null_fit ? to_json(*m.null_fit) : json(nullptr);
        j["lrt"] = m.lrt ? to_json(*m.lrt) : json(nullptr);
        models.push_back(j);
    }
    json weights = json::object();
    for (const auto& [task, w] : a.weights) weights[std::string(to_string(task))] = to_json(w);
    json contrasts = json::object();
    for (const auto& [task, m] : a.contrasts) {
        json jt = json::object();
        for (const auto& [label, c] : m) jt[label] = to_json(c);
        contrasts[std::string(to_string(task))] = jt;
    }
    json missing = json::array();
    for (TaskId t : a.missing_tasks) missing.push_back(to_string(t));
    json j = {{"structure", a.structure},
              {"response_mode", mode_name(a.mode)},
              {"models", models},
              {"effective_weights", weights},
              {"source_contrasts", contrasts},
              {"missing_tasks", missing},
              {"design_digests", a.design_digests},
              {"n_records", a.n_records},
              {"excluded_failures", a.excluded_failures},
              {"clamped_rows", a.clamped},
              {"clamped_fraction", a.clamped_fraction}};
    if (a.confidence)
        j["confidence_model"] = to_json(*a.confidence);
    else
        j["confidence_model"] = {{"error", a.confidence_error}};
    return j;
}

std::string coefficients_csv(const Analysis& a) {
    std::ostringstream os;
    os << "model,task,method,term,estimate,std_error\n";
    auto emit = [&](std::string_view model, const FitResult& fit) {
        const std::string task = fit.task ? std::string(to_string(*fit.task)) : "all";
        for (Eigen::Index k = 0; k < fit.beta.size(); ++k)
            os << fmt::format("{},{},{},{},{:.10g},{:.10g}\n", model, task, fit.method, fit.names[k], fit.beta(k),
                              std::sqrt(std::max(fit.covariance(k, k), 0.0)));
    };
    for (const auto& m : a.models) emit("weights", m.fit);
    if (a.confidence) emit("confidence", a.confidence->fit);
    return os.str();
}

}  // namespace cascade
