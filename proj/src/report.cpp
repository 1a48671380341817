#include "cascade/report.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "cascade/json_io.hpp"

namespace cascade {

const char* const kVersion = "0.3.0";

namespace {

struct Unit {
    double first = 0.0;   // alignment or private choice
    double second = 0.0;  // confidence
    int n = 0;
};

// cell -> subject -> trial -> accumulated repetitions
template <typename Cell>
using Grouped = std::map<Cell, std::map<std::string, std::map<std::string, Unit>>>;

std::optional<double> sample_std(const std::vector<double>& xs) {
    if (xs.size() < 2) return std::nullopt;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

struct Aggregate {
    Summary first;
    Summary second;
    int n_subjects = 0;
    int n_trials = 0;
    int n_responses = 0;
};

// Within-trial mean over repetitions, then within-subject mean over trials,
// then across subjects.
Aggregate aggregate(const std::map<std::string, std::map<std::string, Unit>>& by_subject) {
    Aggregate a;
    std::vector<double> subj_first, subj_second, trial_first, trial_second;
    for (const auto& [subject, trials] : by_subject) {
        std::vector<double> f, s;
        for (const auto& [trial, u] : trials) {
            f.push_back(u.first / u.n);
            s.push_back(u.second / u.n);
            a.n_responses += u.n;
        }
        trial_first.insert(trial_first.end(), f.begin(), f.end());
        trial_second.insert(trial_second.end(), s.begin(), s.end());
        subj_first.push_back(mean_of(f));
        subj_second.push_back(mean_of(s));
    }
    a.n_subjects = static_cast<int>(subj_first.size());
    a.n_trials = static_cast<int>(trial_first.size());
    if (a.n_subjects > 0) {
        a.first = {mean_of(subj_first), sample_std(subj_first), sample_std(trial_first)};
        a.second = {mean_of(subj_second), sample_std(subj_second), sample_std(trial_second)};
    }
    return a;
}

std::map<TaskId, double> task_q(const std::vector<Transcript>& records) {
    std::map<TaskId, double> q;
    for (TaskId t : kAllTasks) q[t] = preset_scenario(t).q;
    for (const auto& r : records) q[r.scenario_id] = r.q;
    return q;
}

std::string cell(const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : ""; }

json summary_json(const Summary& s) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return {{"mean", opt(s.mean)}, {"std_subjects", opt(s.std_subjects)}, {"std_trials", opt(s.std_trials)}};
}

}  // namespace

std::vector<AlignmentRow> table_alignment(const std::vector<Transcript>& records) {
    Grouped<std::pair<TaskId, int>> groups;
    for (const auto& r : records) {
        if (!r.parsed || r.trial.neutral()) continue;
        const int d = r.trial.net_count();
        const Option likely = d > 0 ? Option::a : Option::b;
        auto& u = groups[{r.scenario_id, std::abs(d)}][r.model_name][r.trial.trial_id];
        u.first += r.parsed->choice == likely ? 1.0 : 0.0;
        u.second += r.parsed->confidence;
        ++u.n;
    }
    const auto q = task_q(records);
    std::vector<AlignmentRow> rows;
    for (TaskId t : kAllTasks) {
        for (int d = 1; d <= 3; ++d) {
            AlignmentRow row;
            row.task = t;
            row.abs_net = d;
            row.posterior = posterior_from_net(q.at(t), d);
            auto it = groups.find({t, d});
            if (it != groups.end()) {
                const auto a = aggregate(it->second);
                row.n_subjects = a.n_subjects;
                row.n_trials = a.n_trials;
                row.n_responses = a.n_responses;
                row.choice = a.first;
                row.confidence = a.second;
            }
            rows.push_back(row);
        }
    }
    // Any deeper |d| present in custom designs gets its own rows.
    for (const auto& [key, subjects] : groups) {
        if (key.second <= 3) continue;
        AlignmentRow row;
        row.task = key.first;
        row.abs_net = key.second;
        row.posterior = posterior_from_net(q.at(key.first), key.second);
        const auto a = aggregate(subjects);
        row.n_subjects = a.n_subjects;
        row.n_trials = a.n_trials;
        row.n_responses = a.n_responses;
        row.choice = a.first;
        row.confidence = a.second;
        rows.push_back(row);
    }
    return rows;
}

std::vector<NeutralRow> table_neutral(const std::vector<Transcript>& records) {
    Grouped<TaskId> groups;
    for (const auto& r : records) {
        if (!r.parsed || !r.trial.neutral()) continue;
        const bool chose_private = r.parsed->choice == favored_option(r.trial.private_signal);
        auto& u = groups[r.scenario_id][r.model_name][r.trial.trial_id];
        u.first += chose_private ? 1.0 : 0.0;
        u.second += chose_private ? r.parsed->confidence : 1.0 - r.parsed->confidence;
        ++u.n;
    }
    std::vector<NeutralRow> rows;
    for (TaskId t : kAllTasks) {
        NeutralRow row;
        row.task = t;
        auto it = groups.find(t);
        if (it != groups.end()) {
            const auto a = aggregate(it->second);
            row.n_subjects = a.n_subjects;
            row.n_trials = a.n_trials;
            row.n_responses = a.n_responses;
            row.private_choice = a.first;
            row.private_confidence = a.second;
        }
        rows.push_back(row);
    }
    return rows;
}

std::string alignment_csv(const std::vector<AlignmentRow>& rows) {
    std::ostringstream os;
    os << "task,abs_net,posterior,n_subjects,n_trials,n_responses,choice_mean,choice_std_subjects,"
          "choice_std_trials,confidence_mean,confidence_std_subjects,confidence_std_trials\n";
    for (const auto& r : rows)
        os << fmt::format("{},{},{:.6f},{},{},{},{},{},{},{},{},{}\n", to_string(r.task), r.abs_net, r.posterior,
                          r.n_subjects, r.n_trials, r.n_responses, cell(r.choice.mean), cell(r.choice.std_subjects),
                          cell(r.choice.std_trials), cell(r.confidence.mean), cell(r.confidence.std_subjects),
                          cell(r.confidence.std_trials));
    return os.str();
}

std::string neutral_csv(const std::vector<NeutralRow>& rows) {
    std::ostringstream os;
    os << "task,posterior,n_subjects,n_trials,n_responses,private_choice_mean,private_choice_std_subjects,"
          "private_choice_std_trials,private_confidence_mean,private_confidence_std_subjects,"
          "private_confidence_std_trials\n";
    for (const auto& r : rows)
        os << fmt::format("{},0.5,{},{},{},{},{},{},{},{},{}\n", to_string(r.task), r.n_subjects, r.n_trials,
                          r.n_responses, cell(r.private_choice.mean), cell(r.private_choice.std_subjects),
                          cell(r.private_choice.std_trials), cell(r.private_confidence.mean),
                          cell(r.private_confidence.std_subjects), cell(r.private_confidence.std_trials));
    return os.str();
}

json to_json(const AlignmentRow& r) {
    return {{"task", to_string(r.task)},
            {"abs_net", r.abs_net},
            {"posterior", r.posterior},
            {"n_subjects", r.n_subjects},
            {"n_trials", r.n_trials},
            {"n_responses", r.n_responses},
            {"choice", summary_json(r.choice)},
            {"confidence", summary_json(r.confidence)}};
}

json to_json(const NeutralRow& r) {
    return {{"task", to_string(r.task)},
            {"posterior", 0.5},
            {"n_subjects", r.n_subjects},
            {"n_trials", r.n_trials},
            {"n_responses", r.n_responses},
            {"private_choice", summary_json(r.private_choice)},
            {"private_confidence", summary_json(r.private_confidence)}};
}

ReportBundle build_report(const std::vector<Transcript>& records, const json& provenance, const AnalysisOptions& options) {
    ReportBundle b;
    b.table1 = table_alignment(records);
    b.table2 = table_neutral(records);
    b.analysis = analyze(records, options);

    std::map<std::string, std::string> digests;
    std::set<std::string> run_ids, subjects;
    for (const auto& r : records) {
        digests[std::string(to_string(r.scenario_id))] = r.design_digest;
        run_ids.insert(r.run_id);
        subjects.insert(r.model_name);
    }
    b.provenance = provenance.is_object() ? provenance : json::object();
    b.provenance["design_digests"] = digests;
    b.provenance["run_ids"] = run_ids;
    b.provenance["subjects"] = subjects;
    b.provenance["n_records"] = records.size();
    b.provenance["version"] = kVersion;
    b.provenance["clamp"] = {{"lo", options.clamp.lo}, {"hi", options.clamp.hi}};
    return b;
}

json to_json(const ReportBundle& b) {
    json t1 = json::array();
    for (const auto& r : b.table1) t1.push_back(to_json(r));
    json t2 = json::array();
    for (const auto& r : b.table2) t2.push_back(to_json(r));
    return {{"format", "cascade-report/1"},
            {"provenance", b.provenance},
            {"table1", t1},
            {"table2", t2},
            {"effective_weights", to_json(b.analysis)["effective_weights"]},
            {"analysis", to_json(b.analysis)}};
}

std::string reference_table_csv(const json& fixture, const std::string& table) {
    const auto& rows = require<json>(fixture, table);
    std::ostringstream os;
    os << "task,posterior,choice_mean,choice_std,confidence_mean,confidence_std\n";
    for (const auto& r : rows)
        os << fmt::format("{},{:.2f},{:.3f},{:.3f},{:.3f},{:.3f}\n", require<std::string>(r, "task"),
                          require<double>(r, "posterior"), require<double>(r, "choice_mean"),
                          require<double>(r, "choice_std"), require<double>(r, "confidence_mean"),
                          require<double>(r, "confidence_std"));
    return os.str();
}

}  // namespace cascade
