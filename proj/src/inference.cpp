#include <algorithm>
#include <cmath>
#include <set>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "cascade/estimator.hpp"

namespace cascade {

LrtResult lrt_random_intercept(const FitResult& fit_full, const FitResult& fit_null) {
    if (fit_full.names != fit_null.names || fit_full.n_observations != fit_null.n_observations)
        throw ValidationError("likelihood-ratio test needs the same fixed-effects design in both fits");
    LrtResult out;
    if (fit_full.log_likelihood && fit_null.log_likelihood) {
        out.chi2 = 2.0 * (*fit_full.log_likelihood - *fit_null.log_likelihood);
        if (out.chi2 < 0.0) {
            out.chi2 = 0.0;
            out.clamped = true;
        }
    } else if (fit_full.log_likelihood.has_value() != fit_null.log_likelihood.has_value()) {
        throw ValidationError("likelihood-ratio test mixes an exact fit with a non-exact one");
    }
    const boost::math::chi_squared chi1(1.0);
    out.p_value_chi2_1 = boost::math::cdf(boost::math::complement(chi1, out.chi2));
    out.p_value = 0.5 * out.p_value_chi2_1;
    return out;
}

ContrastResult wald_contrast(const FitResult& fit, const Eigen::VectorXd& c, double null_value) {
    if (c.size() != fit.beta.size())
        throw ValidationError(fmt::format("contrast has {} entries, fit has {} coefficients", c.size(), fit.beta.size()));
    ContrastResult out;
    out.estimate = c.dot(fit.beta);
    const double var = c.dot(fit.covariance * c);
    out.standard_error = std::sqrt(std::max(var, 0.0));
    if (!(out.standard_error > 0.0)) throw ValidationError("contrast has zero standard error");
    out.t_statistic = (out.estimate - null_value) / out.standard_error;
    out.degrees_of_freedom = fit.df_residual();
    const boost::math::students_t dist(std::max(out.degrees_of_freedom, 1));
    out.p_greater = boost::math::cdf(boost::math::complement(dist, out.t_statistic));
    out.p_less = boost::math::cdf(dist, out.t_statistic);
    out.p_value = std::min(1.0, 2.0 * std::min(out.p_greater, out.p_less));
    return out;
}

ContrastResult try_wald_contrast(const FitResult& fit, const Eigen::VectorXd& c, double null_value) {
    if (c.size() == fit.beta.size() && c.dot(fit.covariance * c) > 0.0) return wald_contrast(fit, c, null_value);
    if (c.size() != fit.beta.size())
        throw ValidationError(fmt::format("contrast has {} entries, fit has {} coefficients", c.size(), fit.beta.size()));
    ContrastResult r;
    r.estimate = c.dot(fit.beta);
    r.degrees_of_freedom = fit.df_residual();
    r.tested = false;
    return r;
}

std::string_view to_string(InfoSource s) {
    switch (s) {
        case InfoSource::private_info: return "private";
        case InfoSource::human: return "human";
        case InfoSource::ai: return "ai";
    }
    return "?";
}

Eigen::VectorXd weight_vector(const FitResult& fit, TaskId task, InfoSource source) {
    const int s = static_cast<int>(source);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(fit.beta.size());
    if (fit.beta.size() == 4) {
        if (fit.task && *fit.task != task)
            throw ValidationError(fmt::format("fit covers task {}, not {}", to_string(*fit.task), to_string(task)));
        c(1 + s) = 1.0;
        return c;
    }
    if (fit.beta.size() != 12) throw ValidationError("effective weights need the 12-column or a 4-column model");
    c(3 + s) = 1.0;
    if (task == TaskId::medical) c(6 + 2 * s) = 1.0;
    if (task == TaskId::investment) c(7 + 2 * s) = 1.0;
    return c;
}

EffectiveWeights effective_weights(const FitResult& fit, TaskId task) {
    EffectiveWeights w;
    w.task = task;
    for (int s = 0; s < 3; ++s) {
        const auto c = weight_vector(fit, task, static_cast<InfoSource>(s));
        w.weight[s] = c.dot(fit.beta);
        w.se[s] = std::sqrt(std::max(c.dot(fit.covariance * c), 0.0));
    }
    return w;
}

FitResult fit_from_coefficients(const std::vector<double>& beta) {
    if (beta.size() != 12) throw ValidationError(fmt::format("expected 12 coefficients, got {}", beta.size()));
    FitResult fit;
    fit.method = "fixture";
    fit.names = full_column_names();
    fit.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), 12);
    fit.covariance = Eigen::MatrixXd::Zero(12, 12);
    return fit;
}

std::vector<ConfidenceRecord> confidence_records(const std::vector<Transcript>& records) {
    std::vector<ConfidenceRecord> out;
    for (const auto& r : records) {
        if (!r.parsed || r.trial.neutral()) continue;
        out.push_back({r.parsed->confidence, posterior_from_net(r.q, std::abs(r.trial.net_count())),
                       r.trial.scenario_id, r.model_name});
    }
    return out;
}

ConfidenceModelResult fit_confidence_model(const std::vector<ConfidenceRecord>& records) {
    if (records.empty()) throw EstimabilityError("no non-neutral records for the confidence model");
    std::set<TaskId> present;
    for (const auto& r : records) present.insert(r.task);
    // Legal is the reference when present; other tasks enter as shifts.
    std::vector<TaskId> order;
    if (present.contains(TaskId::legal)) order.push_back(TaskId::legal);
    for (TaskId t : {TaskId::medical, TaskId::investment})
        if (present.contains(t)) order.push_back(t);
    const std::vector<TaskId> shifted(order.begin() + 1, order.end());

    std::vector<std::string> names{"intercept"};
    for (TaskId t : shifted) names.push_back(std::string(to_string(t)).substr(0, 3));
    names.emplace_back("posterior");
    for (TaskId t : shifted) names.push_back(std::string(to_string(t)).substr(0, 3) + ":posterior");

    const auto n = static_cast<Eigen::Index>(records.size());
    const auto p = static_cast<Eigen::Index>(names.size());
    const Eigen::Index post_col = 1 + static_cast<Eigen::Index>(shifted.size());
    Design d;
    d.column_names = names;
    d.X = Eigen::MatrixXd::Zero(n, p);
    d.y.resize(n);
    std::map<std::string, int> group_index;
    for (const auto& r : records) group_index.emplace(r.subject_id, 0);
    int k = 0;
    for (auto& [name, idx] : group_index) {
        idx = k++;
        d.group_names.push_back(name);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = records[i];
        d.X(i, 0) = 1.0;
        d.X(i, post_col) = r.posterior;
        for (std::size_t s = 0; s < shifted.size(); ++s) {
            if (r.task != shifted[s]) continue;
            d.X(i, 1 + s) = 1.0;
            d.X(i, post_col + 1 + s) = r.posterior;
        }
        d.y(i) = r.confidence;
        d.groups.push_back(group_index.at(r.subject_id));
    }
    check_full_rank(d.X, d.column_names);

    ConfidenceModelResult out;
    out.null_fit = fit_ols(d);
    out.fit = group_index.size() >= 2 ? fit_random_intercept(d) : out.null_fit;
    out.lrt = lrt_random_intercept(out.fit, out.null_fit);

    auto slope_vector = [&](TaskId t) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(p);
        c(post_col) = 1.0;
        for (std::size_t s = 0; s < shifted.size(); ++s)
            if (shifted[s] == t) c(post_col + 1 + s) = 1.0;
        return c;
    };
    for (TaskId t : order) out.slopes[t] = try_wald_contrast(out.fit, slope_vector(t));
    for (std::size_t a = 0; a < order.size(); ++a)
        for (std::size_t b = a + 1; b < order.size(); ++b) {
            // First minus second in medical, legal, investment order.
            TaskId x = order[a], y = order[b];
            if (static_cast<int>(x) > static_cast<int>(y)) std::swap(x, y);
            const auto label = fmt::format("{}-{}", to_string(x), to_string(y));
            out.slope_differences[label] = try_wald_contrast(out.fit, slope_vector(x) - slope_vector(y));
        }
    return out;
}

}  // namespace cascade
