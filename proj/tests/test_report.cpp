#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cascade/cli.hpp"
#include "cascade/report.hpp"
#include "oracles.hpp"

using namespace cascade;

namespace {

std::vector<AgentSpec> cohort_of(const AgentKind& kind, const std::string& prefix, int n) {
    std::vector<AgentSpec> out;
    for (int k = 0; k < n; ++k) out.push_back({prefix + std::to_string(k), kind, std::uint64_t(100 + k)});
    return out;
}

int cli(std::vector<std::string> args, std::string* err_text = nullptr) {
    args.insert(args.begin(), "cascade");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (err_text) *err_text = err.str();
    return code;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("bayesian cohort tables") {
    const auto records = oracle::simulate_all(cohort_of(BayesianKind{}, "b", 3), 2);
    const auto t1 = table_alignment(records);
    REQUIRE(t1.size() == 9);
    for (const auto& row : t1) {
        CHECK(row.n_subjects == 3);
        CHECK(*row.choice.mean == 1.0);
        CHECK(*row.confidence.mean == doctest::Approx(row.posterior).epsilon(1e-12));
        CHECK(*row.confidence.std_subjects == doctest::Approx(0.0));
    }
    const auto t2 = table_neutral(records);
    REQUIRE(t2.size() == 3);
    for (const auto& row : t2) {
        CHECK(*row.private_choice.mean == 1.0);
        CHECK(*row.private_confidence.mean == 0.5);
    }
}

TEST_CASE("table cells partition the successful records") {
    WeightedKind w;
    w.policy = {0.0, 1.0, 0.8, 1.2, 0.6, ChoiceRule::sample};
    auto records = oracle::simulate_all(cohort_of(w, "w", 4), 3);
    records[5].parsed.reset();
    records[5].failure = FailureReason::no_choice;
    int responses = 0;
    for (const auto& r : table_alignment(records)) responses += r.n_responses;
    for (const auto& r : table_neutral(records)) responses += r.n_responses;
    CHECK(responses == static_cast<int>(records.size()) - 1);
}

TEST_CASE("two-stage aggregation averages repetitions before subjects") {
    const auto m = generate_manifest(preset_paper(TaskId::legal), preset_scenario(TaskId::legal));
    const auto it = std::find_if(m.trials.begin(), m.trials.end(), [](const Trial& t) { return t.net_count() == 1; });
    REQUIRE(it != m.trials.end());
    auto make = [&](const std::string& subj, int rep, double conf) {
        Transcript t;
        t.scenario_id = TaskId::legal;
        t.q = 0.55;
        t.model_name = subj;
        t.repetition_index = rep;
        t.trial = *it;
        AgentResponse r;
        r.choice = Option::a;
        r.confidence = conf;
        t.parsed = r;
        return t;
    };
    // Subject s1 has three repetitions, s2 one; a pooled mean would weigh s1 more.
    const std::vector<Transcript> recs{make("s1", 0, 0.6), make("s1", 1, 0.6), make("s1", 2, 0.6),
                                       make("s2", 0, 1.0)};
    const auto t1 = table_alignment(recs);
    const auto row = std::find_if(t1.begin(), t1.end(),
                                  [](const AlignmentRow& r) { return r.task == TaskId::legal && r.abs_net == 1; });
    CHECK(*row->confidence.mean == doctest::Approx(0.8));
    CHECK(*row->confidence.std_subjects == doctest::Approx(std::sqrt(0.08)));
    CHECK(row->n_responses == 4);
    CHECK(row->n_trials == 2);
    const auto empty = std::find_if(t1.begin(), t1.end(), [](const AlignmentRow& r) { return r.abs_net == 3; });
    CHECK_FALSE(empty->confidence.mean.has_value());
    CHECK(alignment_csv(t1).find("legal,3,") != std::string::npos);
}

TEST_CASE("weight chart is deterministic and marks missing tasks") {
    std::map<TaskId, EffectiveWeights> w;
    w[TaskId::legal] = {TaskId::legal, {0.8, 1.5, 1.6}, {0.05, 0.1, 0.1}};
    w[TaskId::medical] = {TaskId::medical, {0.6, 0.7, 0.7}, {0.05, 0.1, 0.1}};
    const auto a = plot_weights(w);
    CHECK(a == plot_weights(w));
    CHECK(a.starts_with("<svg"));
    CHECK(a.find("Bayesian weight = 1") != std::string::npos);
    CHECK(a.find("no data") != std::string::npos);
    CHECK(a.find("Not estimated: investment") != std::string::npos);
    w[TaskId::investment] = {TaskId::investment, {0.9, 0.7, 0.7}, {0.05, 0.1, 0.1}};
    CHECK(plot_weights(w).find("no data") == std::string::npos);
}

TEST_CASE("reference tables render from the fixture") {
    std::ifstream in(std::string(CASCADE_SOURCE_DIR) + "/fixtures/reference_tables.json");
    REQUIRE(in);
    const auto ref = nlohmann::json::parse(in);
    const auto t1 = reference_table_csv(ref, "table1");
    CHECK(std::count(t1.begin(), t1.end(), '\n') == 10);
    const auto t2 = reference_table_csv(ref, "table2");
    CHECK(std::count(t2.begin(), t2.end(), '\n') == 4);
    CHECK_THROWS_AS(reference_table_csv(ref, "table9"), ValidationError);
}

TEST_CASE("report bundle carries provenance") {
    const auto records = oracle::simulate_all(cohort_of(ConformistKind{}, "c", 2), 1);
    const auto j = to_json(build_report(records, {{"seed", 42}}));
    CHECK(j["format"] == "cascade-report/1");
    CHECK(j["provenance"]["seed"] == 42);
    CHECK(j["provenance"]["design_digests"].size() == 3);
    CHECK(j["provenance"]["subjects"].size() == 2);
}

TEST_CASE("command line exit codes") {
    const auto dir = oracle::scratch_dir("cli-codes");
    CHECK(cli({"--help"}) == 0);
    CHECK(cli({"gen", "--bogus"}) == 1);
    CHECK(cli({"gen", "--scenario", "finance", "--out", dir.string()}) == 1);
    CHECK(cli({"gen", "--scenario", "medical", "--out", dir.string()}) == 0);
    CHECK(std::filesystem::exists(dir / "manifest-medical.jsonl"));
    CHECK(cli({"simulate", "--agent", "bayesian", "--count", "2", "--manifest",
               (dir / "manifest-medical.jsonl").string(), "--out", dir.string()}) == 0);
    std::string err;
    CHECK(cli({"fit", "--out", dir.string()}, &err) == 1);
    CHECK(err.find("legal") != std::string::npos);

    std::ofstream(dir / ".cascade.lock") << "";
    CHECK(cli({"gen", "--scenario", "medical", "--out", dir.string()}) == 2);
    std::filesystem::remove(dir / ".cascade.lock");

    std::ofstream(dir / "transcripts.jsonl", std::ios::app) << "{not json\n";
    CHECK(cli({"report", "--out", dir.string()}) == 1);
}

TEST_CASE("simulate and report from the command line") {
    const auto dir = oracle::scratch_dir("cli-flow");
    REQUIRE(cli({"gen", "--scenario", "all", "--out", dir.string(), "--seed", "3"}) == 0);
    std::vector<std::string> sim{"simulate", "--agent", "conformist", "--count", "3", "--repetitions", "1",
                                 "--out", dir.string()};
    for (TaskId t : kAllTasks) {
        sim.push_back("--manifest");
        sim.push_back((dir / ("manifest-" + std::string(to_string(t)) + ".jsonl")).string());
    }
    REQUIRE(cli(sim) == 0);
    REQUIRE(cli({"report", "--out", dir.string(), "--reference",
                 std::string(CASCADE_SOURCE_DIR) + "/fixtures/reference_tables.json"}) == 0);
    for (const char* f : {"table1.csv", "table2.csv", "weights.svg", "report.json", "reference_table1.csv"})
        CHECK(std::filesystem::exists(dir / f));
    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(report["provenance"]["manifests"].size() == 3);
    CHECK(report["provenance"]["cohort"].size() == 3);
    const auto t2 = slurp(dir / "table2.csv");
    CHECK(t2.find("legal,0.5,3,") != std::string::npos);
}
