#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "cascade/estimator.hpp"

namespace cascade {

ObservationRow to_observation(const Trial& trial, const AgentResponse& response, double q,
                              const std::string& subject_id, const ClampPolicy& clamp) {
    if (!(clamp.lo > 0.0 && clamp.lo < clamp.hi && clamp.hi < 1.0))
        throw ValidationError(fmt::format("clamp bounds [{}, {}] must satisfy 0 < lo < hi < 1", clamp.lo, clamp.hi));
    const double unit = llr(q);
    double p = response.choice == Option::a ? response.confidence : 1.0 - response.confidence;
    ObservationRow row;
    if (p < clamp.lo || p > clamp.hi) {
        row.clamped = true;
        p = std::clamp(p, clamp.lo, clamp.hi);
    }
    row.y = std::log(p / (1.0 - p));
    row.i_pi = sign_of(trial.private_signal) * unit;
    row.i_h = trial.human_net() * unit;
    row.i_ai = trial.ai_net() * unit;
    row.task = trial.scenario_id;
    row.subject_id = subject_id;
    row.trial_id = trial.trial_id;
    row.repetition_index = response.repetition_index;
    return row;
}

ObservationRow to_observation(const Trial& trial, const AgentResponse& response, const Scenario& scenario,
                              const std::string& subject_id, const ClampPolicy& clamp) {
    if (trial.scenario_id != scenario.id)
        throw ValidationError(fmt::format("trial {} belongs to {}, not {}", trial.trial_id,
                                          to_string(trial.scenario_id), to_string(scenario.id)));
    return to_observation(trial, response, scenario.q, subject_id, clamp);
}

ObservationSet observations_from_transcripts(const std::vector<Transcript>& records, const ClampPolicy& clamp) {
    ObservationSet set;
    set.rows.reserve(records.size());
    for (const auto& r : records) {
        if (!r.parsed) {
            ++set.excluded_failures;
            continue;
        }
        set.rows.push_back(to_observation(r.trial, *r.parsed, r.q, r.model_name, clamp));
        if (set.rows.back().clamped) ++set.clamped;
    }
    return set;
}

const std::vector<std::string>& full_column_names() {
    static const std::vector<std::string> names{"intercept", "med",      "inv",     "i_pi",
                                                "i_h",       "i_ai",     "med:i_pi", "inv:i_pi",
                                                "med:i_h",   "inv:i_h",  "med:i_ai", "inv:i_ai"};
    return names;
}

void check_full_rank(const Eigen::MatrixXd& X, const std::vector<std::string>& names) {
    const auto p = X.cols();
    if (X.rows() < p)
        throw EstimabilityError(fmt::format("{} observations cannot identify {} coefficients", X.rows(), p));
    std::vector<std::string> zero;
    for (Eigen::Index c = 0; c < p; ++c)
        if (X.col(c).isZero(0.0)) zero.push_back(names[c]);
    if (!zero.empty())
        throw EstimabilityError(fmt::format("design columns identically zero: {}", fmt::join(zero, ", ")));
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < p) {
        std::vector<std::string> dependent;
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index k = qr.rank(); k < p; ++k) dependent.push_back(names[perm(k)]);
        throw EstimabilityError(fmt::format("design is rank deficient (rank {} of {}); dependent columns: {}",
                                            qr.rank(), p, fmt::join(dependent, ", ")));
    }
}

namespace {

void assign_groups(const std::vector<const ObservationRow*>& rows, Design& d) {
    std::map<std::string, int> index;
    for (const auto* r : rows) index.emplace(r->subject_id, 0);
    int k = 0;
    for (auto& [name, idx] : index) {
        idx = k++;
        d.group_names.push_back(name);
    }
    d.groups.reserve(rows.size());
    for (const auto* r : rows) d.groups.push_back(index.at(r->subject_id));
}

}  // namespace

Design build_design(const std::vector<ObservationRow>& rows) {
    if (rows.empty()) throw EstimabilityError("no observations");
    std::set<TaskId> tasks;
    for (const auto& r : rows) tasks.insert(r.task);
    if (!tasks.contains(TaskId::legal))
        throw EstimabilityError("reference task 'legal' has no observations");

    Design d;
    d.column_names = full_column_names();
    const auto n = static_cast<Eigen::Index>(rows.size());
    d.X = Eigen::MatrixXd::Zero(n, 12);
    d.y.resize(n);
    std::vector<const ObservationRow*> ptrs;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[i];
        ptrs.push_back(&r);
        const double med = r.task == TaskId::medical ? 1.0 : 0.0;
        const double inv = r.task == TaskId::investment ? 1.0 : 0.0;
        d.X.row(i) << 1.0, med, inv, r.i_pi, r.i_h, r.i_ai, med * r.i_pi, inv * r.i_pi, med * r.i_h, inv * r.i_h,
            med * r.i_ai, inv * r.i_ai;
        d.y(i) = r.y;
    }
    assign_groups(ptrs, d);
    check_full_rank(d.X, d.column_names);
    return d;
}

Design build_task_design(const std::vector<ObservationRow>& rows, TaskId task) {
    std::vector<const ObservationRow*> ptrs;
    for (const auto& r : rows)
        if (r.task == task) ptrs.push_back(&r);
    if (ptrs.empty()) throw EstimabilityError(fmt::format("task '{}' has no observations", to_string(task)));
    Design d;
    d.task = task;
    d.column_names = {"intercept", "i_pi", "i_h", "i_ai"};
    const auto n = static_cast<Eigen::Index>(ptrs.size());
    d.X.resize(n, 4);
    d.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d.X.row(i) << 1.0, ptrs[i]->i_pi, ptrs[i]->i_h, ptrs[i]->i_ai;
        d.y(i) = ptrs[i]->y;
    }
    assign_groups(ptrs, d);
    check_full_rank(d.X, d.column_names);
    return d;
}

}  // namespace cascade
