#include "cascade/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cascade/agents.hpp"
#include "cascade/analysis.hpp"
#include "cascade/config.hpp"
#include "cascade/json_io.hpp"
#include "cascade/report.hpp"
#include "cascade/runner.hpp"
#include "cascade/trialgen.hpp"

namespace fs = std::filesystem;

namespace cascade {

namespace {

// Single-owner guard on an output directory.
class DirectoryLock {
public:
    explicit DirectoryLock(const fs::path& dir) : path_(dir / ".cascade.lock") {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw ValidationError(fmt::format("cannot create output directory '{}': {}", dir.string(), ec.message()));
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0) {
            if (errno == EEXIST)
                throw std::runtime_error(fmt::format("output directory '{}' is locked ({} exists)", dir.string(),
                                                     path_.string()));
            throw ValidationError(fmt::format("output directory '{}' is not writable", dir.string()));
        }
        const auto pid = fmt::format("{}\n", ::getpid());
        if (::write(fd_, pid.data(), pid.size()) < 0) { /* the lock itself is what matters */ }
    }
    ~DirectoryLock() {
        ::close(fd_);
        std::error_code ec;
        fs::remove(path_, ec);
    }
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    fs::path path_;
    int fd_ = -1;
};

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
    os << content;
    if (!os) throw std::runtime_error(fmt::format("write to '{}' failed", path.string()));
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(fmt::format("cannot open manifest '{}'", path));
    return read_manifest(in);
}

std::vector<Transcript> load_transcripts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(fmt::format("cannot open transcripts '{}'", path));
    auto file = read_transcripts(in);
    if (!file.errors.empty())
        throw ValidationError(fmt::format("'{}' has {} undecodable lines; first: {}", path, file.errors.size(),
                                          file.errors.front()));
    return std::move(file.records);
}

void save_transcripts(const fs::path& path, const std::vector<Transcript>& records) {
    std::ostringstream os;
    write_transcripts(os, records);
    write_file(path, os.str());
}

struct Common {
    std::uint64_t seed = 42;
    std::string config_path;
    std::string out = ".";
    std::vector<CLI::Option*> seed_opts;
    std::vector<CLI::Option*> out_opts;
    std::optional<RunConfig> config;

    void add_to(CLI::App* app) {
        seed_opts.push_back(app->add_option("--seed", seed, "Random seed"));
        app->add_option("--config", config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
        out_opts.push_back(app->add_option("--out", out, "Output directory"));
    }

    static bool given(const std::vector<CLI::Option*>& opts) {
        for (const auto* o : opts)
            if (o->count() > 0) return true;
        return false;
    }
    bool seed_given() const { return given(seed_opts); }

    // Config values fill in whatever the command line left unset.
    void resolve() {
        if (config_path.empty()) return;
        config = load_run_config(config_path);
        if (!seed_given()) seed = config->seed;
        if (!given(out_opts)) out = config->out_dir;
    }

    Scenario scenario(TaskId task) const {
        if (config)
            for (const auto& s : config->scenarios)
                if (s.id == task) return s;
        return preset_scenario(task);
    }

    std::vector<std::string> default_manifests() const {
        std::vector<std::string> paths;
        const auto tasks = config ? config->scenarios : std::vector<Scenario>{};
        for (const auto& s : tasks) paths.push_back((fs::path(out) / fmt::format("manifest-{}.jsonl", to_string(s.id))).string());
        return paths;
    }
};

std::vector<TaskId> tasks_for(const std::string& scenario, const Common& common) {
    if (scenario == "all") return {kAllTasks[0], kAllTasks[1], kAllTasks[2]};
    if (!scenario.empty()) return {parse_task(scenario)};
    if (common.config) {
        std::vector<TaskId> tasks;
        for (const auto& s : common.config->scenarios) tasks.push_back(s.id);
        return tasks;
    }
    throw ValidationError("--scenario is required without --config");
}

std::vector<Manifest> manifests_for(const std::vector<std::string>& given, const Common& common) {
    auto paths = given.empty() ? common.default_manifests() : given;
    if (paths.empty()) throw ValidationError("no manifest given (use --manifest or --config)");
    std::vector<Manifest> out;
    for (const auto& p : paths) out.push_back(load_manifest(p));
    return out;
}

int cmd_gen(const Common& common, const std::string& scenario, const std::string& preset, const std::string& design_path,
            std::ostream& out) {
    const auto tasks = tasks_for(scenario, common);
    DirectoryLock lock(common.out);
    for (TaskId task : tasks) {
        DesignSpec spec;
        if (!design_path.empty()) {
            spec = design_from_json(load_json_file(design_path));
            if (spec.scenario_id != task)
                throw ValidationError(fmt::format("design is for '{}', not '{}'", to_string(spec.scenario_id), to_string(task)));
            if (common.seed_given()) spec.seed = common.seed;
        } else if (common.config && common.config->designs.contains(task)) {
            spec = common.config->design_for(task);
        } else {
            if (preset != "paper") throw ValidationError(fmt::format("unknown preset '{}'", preset));
            spec = preset_paper(task, common.seed);
        }
        const Scenario sc = common.scenario(task);
        const Manifest manifest = generate_manifest(spec, sc);
        const auto violations = validate_manifest(manifest, sc);
        if (!violations.empty()) {
            std::string msg = fmt::format("manifest for '{}' is not usable:", to_string(task));
            for (const auto& v : violations) msg += "\n  " + v;
            throw ValidationError(msg);
        }
        std::ostringstream os;
        write_manifest(os, manifest);
        const auto path = fs::path(common.out) / fmt::format("manifest-{}.jsonl", to_string(task));
        write_file(path, os.str());
        out << fmt::format("{}: {} trials, digest {}\n", path.string(), manifest.trials.size(), manifest.design_digest);
    }
    return 0;
}

int cmd_simulate(const Common& common, const std::vector<std::string>& manifest_paths, const std::string& cohort_path,
                 const std::string& agent_kind, int count, std::optional<int> repetitions, std::string run_id,
                 std::ostream& out) {
    std::vector<AgentSpec> cohort;
    if (!cohort_path.empty())
        cohort = cohort_from_json(load_json_file(cohort_path));
    else if (!agent_kind.empty())
    {
        json entry = json::object();
        entry["kind"] = agent_kind;
        entry["count"] = count;
        entry["seed"] = common.seed;
        cohort = cohort_from_json(json::array({entry}));
    }
    else if (common.config && !common.config->cohort.empty())
        cohort = common.config->cohort;
    else
        throw ValidationError("no cohort given (use --cohort, --agent or --config)");
    const int reps = repetitions.value_or(common.config ? common.config->repetitions : 3);
    if (run_id.empty()) run_id = fmt::format("sim-{}", common.seed);

    const auto manifests = manifests_for(manifest_paths, common);
    std::vector<Transcript> records;
    for (const auto& m : manifests) {
        auto part = simulate_cohort(cohort, m, common.scenario(m.scenario_id), reps, run_id);
        records.insert(records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    DirectoryLock lock(common.out);
    const auto path = fs::path(common.out) / "transcripts.jsonl";
    save_transcripts(path, records);
    write_file(fs::path(common.out) / "cohort.json", cohort_to_json(cohort).dump(2) + "\n");
    out << fmt::format("{}: {} transcripts from {} agents\n", path.string(), records.size(), cohort.size());
    return 0;
}

std::vector<EndpointConfig> endpoints_for(const std::string& endpoint_path, const Common& common) {
    if (!endpoint_path.empty()) {
        const auto j = load_json_file(endpoint_path);
        std::vector<EndpointConfig> eps;
        if (j.is_array())
            for (const auto& e : j) eps.push_back(endpoint_from_json(e));
        else
            eps.push_back(endpoint_from_json(j));
        return eps;
    }
    if (common.config && !common.config->endpoints.empty()) return common.config->endpoints;
    return {};
}

int cmd_run(const Common& common, const std::vector<std::string>& manifest_paths, const std::string& endpoint_path,
            std::optional<int> repetitions, std::string run_id, const std::string& record_path, std::ostream& out) {
    const auto endpoints = endpoints_for(endpoint_path, common);
    if (endpoints.empty()) throw ValidationError("no endpoint given (use --endpoint or --config)");
    const auto manifests = manifests_for(manifest_paths, common);
    SessionOptions options;
    options.repetitions = repetitions.value_or(common.config ? common.config->repetitions : 3);
    options.run_id = run_id.empty() ? fmt::format("run-{}", common.seed) : run_id;

    DirectoryLock lock(common.out);
    std::vector<Transcript> records;
    json recorded = ReplayFixture().document();
    for (const auto& ep : endpoints) {
        HttpTransport http(ep);
        RecordingTransport recorder(http);
        for (const auto& m : manifests) {
            auto part = run_session(m, common.scenario(m.scenario_id), ep, recorder, options);
            records.insert(records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
        }
        for (const auto& [hash, entry] : recorder.fixture().document()["responses"].items())
            recorded["responses"][hash] = entry;
    }
    const auto path = fs::path(common.out) / "transcripts.jsonl";
    save_transcripts(path, records);
    if (!record_path.empty()) write_file(record_path, recorded.dump(2) + "\n");
    int failures = 0;
    for (const auto& r : records) failures += r.ok() ? 0 : 1;
    out << fmt::format("{}: {} transcripts, {} failures\n", path.string(), records.size(), failures);
    return 0;
}

int cmd_replay(const Common& common, const std::vector<std::string>& manifest_paths, const std::string& fixture_path,
               const std::string& endpoint_path, std::optional<int> repetitions, std::string run_id, bool over_http,
               std::ostream& out) {
    auto fixture = ReplayFixture::load(fixture_path);
    auto endpoints = endpoints_for(endpoint_path, common);
    EndpointConfig ep;
    if (!endpoints.empty()) {
        ep = endpoints.front();
    } else {
        ep.model_name = "replay";
        ep.base_url = "http://127.0.0.1/v1";
    }
    ep.backoff_seconds = 0.0;
    const auto manifests = manifests_for(manifest_paths, common);
    SessionOptions options;
    options.repetitions = repetitions.value_or(common.config ? common.config->repetitions : 3);
    options.run_id = run_id.empty() ? fmt::format("replay-{}", common.seed) : run_id;
    options.record_timing = false;

    DirectoryLock lock(common.out);
    std::vector<Transcript> records;
    std::optional<ReplayServer> server;
    std::unique_ptr<ChatTransport> transport;
    if (over_http) {
        server.emplace(fixture);
        ep.base_url = server->base_url();
        ep.api_key_env_var = "";
        transport = std::make_unique<HttpTransport>(ep);
    } else {
        transport = std::make_unique<ReplayTransport>(fixture);
    }
    for (const auto& m : manifests) {
        auto part = run_session(m, common.scenario(m.scenario_id), ep, *transport, options);
        records.insert(records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    const auto path = fs::path(common.out) / "transcripts.jsonl";
    save_transcripts(path, records);
    int failures = 0;
    for (const auto& r : records) failures += r.ok() ? 0 : 1;
    out << fmt::format("{}: {} transcripts, {} failures\n", path.string(), records.size(), failures);
    return 0;
}

AnalysisOptions analysis_options(const Common& common, bool binary, std::optional<double> lo, std::optional<double> hi) {
    AnalysisOptions o;
    if (common.config) o.clamp = common.config->clamp;
    if (lo) o.clamp.lo = *lo;
    if (hi) o.clamp.hi = *hi;
    o.mode = binary ? ResponseMode::binary : ResponseMode::log_odds;
    return o;
}

std::string transcripts_path(const std::string& given, const Common& common) {
    return given.empty() ? (fs::path(common.out) / "transcripts.jsonl").string() : given;
}

int cmd_fit(const Common& common, const std::string& transcripts, const AnalysisOptions& options, std::ostream& out) {
    const auto records = load_transcripts(transcripts_path(transcripts, common));
    const auto analysis = analyze(records, options);
    DirectoryLock lock(common.out);
    write_file(fs::path(common.out) / "fit.json", to_json(analysis).dump(2) + "\n");
    write_file(fs::path(common.out) / "coefficients.csv", coefficients_csv(analysis));
    for (const auto& [task, w] : analysis.weights)
        out << fmt::format("{:<11} private {:.4f} ({:.4f})  human {:.4f} ({:.4f})  ai {:.4f} ({:.4f})\n",
                           to_string(task), w.weight[0], w.se[0], w.weight[1], w.se[1], w.weight[2], w.se[2]);
    return 0;
}

int cmd_report(const Common& common, const std::string& transcripts, std::vector<std::string> manifest_paths,
               std::string cohort_path, const std::string& reference_path, const AnalysisOptions& options,
               std::ostream& out) {
    const auto tpath = fs::path(transcripts_path(transcripts, common));
    const auto records = load_transcripts(tpath.string());
    const auto dir = tpath.parent_path().empty() ? fs::path(".") : tpath.parent_path();

    // Seeds live in the manifests and the cohort file next to the transcripts.
    if (manifest_paths.empty())
        for (TaskId t : kAllTasks) {
            const auto p = dir / fmt::format("manifest-{}.jsonl", to_string(t));
            if (fs::exists(p)) manifest_paths.push_back(p.string());
        }
    if (cohort_path.empty() && fs::exists(dir / "cohort.json")) cohort_path = (dir / "cohort.json").string();

    json provenance = {{"seed", common.seed}};
    json manifests = json::array();
    for (const auto& p : manifest_paths) {
        const auto m = load_manifest(p);
        json entry = {{"scenario_id", to_string(m.scenario_id)}, {"design_digest", m.design_digest}};
        entry["design_seed"] = m.design ? json(m.design->seed) : json(nullptr);
        manifests.push_back(entry);
    }
    provenance["manifests"] = manifests;
    if (!cohort_path.empty()) provenance["cohort"] = cohort_to_json(cohort_from_json(load_json_file(cohort_path)))["agents"];

    const auto bundle = build_report(records, provenance, options);
    DirectoryLock lock(common.out);
    const fs::path o(common.out);
    write_file(o / "table1.csv", alignment_csv(bundle.table1));
    write_file(o / "table2.csv", neutral_csv(bundle.table2));
    write_file(o / "weights.svg", plot_weights(bundle.analysis.weights));
    write_file(o / "report.json", to_json(bundle).dump(2) + "\n");
    if (!reference_path.empty()) {
        const auto ref = load_json_file(reference_path);
        write_file(o / "reference_table1.csv", reference_table_csv(ref, "table1"));
        write_file(o / "reference_table2.csv", reference_table_csv(ref, "table2"));
    }
    out << fmt::format("{}: report for {} transcripts\n", (o / "report.json").string(), records.size());
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Information-cascade conformity experiments: generate, simulate, run, fit, report", "cascade"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);
    app.set_version_flag("--version", kVersion);

    Common common;

    auto* gen = app.add_subcommand("gen", "Generate trial manifests");
    std::string scenario, preset = "paper", design_path;
    gen->add_option("--scenario", scenario, "medical, legal, investment or all");
    gen->add_option("--preset", preset, "Built-in design")->check(CLI::IsMember({"paper"}));
    gen->add_option("--design", design_path, "Design spec (JSON)")->check(CLI::ExistingFile);

    auto* sim = app.add_subcommand("simulate", "Run a synthetic cohort over manifests");
    std::vector<std::string> manifests;
    std::string cohort_path, agent_kind, run_id;
    int count = 9;
    std::optional<int> repetitions;
    sim->add_option("--manifest", manifests, "Manifest file(s)")->check(CLI::ExistingFile);
    sim->add_option("--cohort", cohort_path, "Cohort spec (JSON)")->check(CLI::ExistingFile);
    sim->add_option("--agent", agent_kind, "Uniform cohort kind")
        ->check(CLI::IsMember({"bayesian", "conformist", "private_only", "weighted"}));
    sim->add_option("--count", count, "Uniform cohort size")->check(CLI::PositiveNumber);
    sim->add_option("--repetitions", repetitions, "Repetitions per trial")->check(CLI::PositiveNumber);
    sim->add_option("--run-id", run_id, "Run identifier");

    auto* run = app.add_subcommand("run", "Run live chat-completion endpoints over manifests");
    std::string endpoint_path, record_path;
    run->add_option("--manifest", manifests, "Manifest file(s)")->check(CLI::ExistingFile);
    run->add_option("--endpoint", endpoint_path, "Endpoint config (JSON)")->check(CLI::ExistingFile);
    run->add_option("--repetitions", repetitions, "Repetitions per trial")->check(CLI::PositiveNumber);
    run->add_option("--run-id", run_id, "Run identifier");
    run->add_option("--record", record_path, "Write a replay fixture of every reply");

    auto* replay = app.add_subcommand("replay", "Run a recorded replay fixture over manifests");
    std::string fixture_path;
    bool over_http = false;
    replay->add_option("--manifest", manifests, "Manifest file(s)")->check(CLI::ExistingFile);
    replay->add_option("--fixture", fixture_path, "Replay fixture (JSON)")->required()->check(CLI::ExistingFile);
    replay->add_option("--endpoint", endpoint_path, "Endpoint config (JSON)")->check(CLI::ExistingFile);
    replay->add_option("--repetitions", repetitions, "Repetitions per trial")->check(CLI::PositiveNumber);
    replay->add_option("--run-id", run_id, "Run identifier");
    replay->add_flag("--http", over_http, "Serve the fixture on localhost and go through HTTP");

    auto* fit = app.add_subcommand("fit", "Fit the weight and confidence models");
    std::string transcripts;
    bool binary = false;
    std::optional<double> clamp_lo, clamp_hi;
    fit->add_option("--transcripts", transcripts, "Transcript file (default: <out>/transcripts.jsonl)");
    fit->add_flag("--binary", binary, "Logistic fit on choices instead of confidence log-odds");
    fit->add_option("--clamp-lo", clamp_lo, "Lower probability clamp before the logit");
    fit->add_option("--clamp-hi", clamp_hi, "Upper probability clamp before the logit");

    auto* report = app.add_subcommand("report", "Tables, weight chart and report bundle");
    std::string reference_path;
    report->add_option("--transcripts", transcripts, "Transcript file (default: <out>/transcripts.jsonl)");
    report->add_option("--manifest", manifests, "Manifest file(s) for provenance")->check(CLI::ExistingFile);
    report->add_option("--cohort", cohort_path, "Cohort file for provenance")->check(CLI::ExistingFile);
    report->add_option("--reference", reference_path, "Also render a reference-table fixture")->check(CLI::ExistingFile);
    report->add_flag("--binary", binary, "Logistic fit on choices instead of confidence log-odds");
    report->add_option("--clamp-lo", clamp_lo, "Lower probability clamp before the logit");
    report->add_option("--clamp-hi", clamp_hi, "Upper probability clamp before the logit");

    for (auto* sub : {gen, sim, run, replay, fit, report}) common.add_to(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        common.resolve();
        if (gen->parsed()) return cmd_gen(common, scenario, preset, design_path, out);
        if (sim->parsed()) return cmd_simulate(common, manifests, cohort_path, agent_kind, count, repetitions, run_id, out);
        if (run->parsed()) return cmd_run(common, manifests, endpoint_path, repetitions, run_id, record_path, out);
        if (replay->parsed())
            return cmd_replay(common, manifests, fixture_path, endpoint_path, repetitions, run_id, over_http, out);
        const auto options = analysis_options(common, binary, clamp_lo, clamp_hi);
        if (fit->parsed()) return cmd_fit(common, transcripts, options, out);
        if (report->parsed()) return cmd_report(common, transcripts, manifests, cohort_path, reference_path, options, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const ConvergenceError& e) {
        err << "error: " << e.what() << " (" << e.trace().size() << " evaluations traced)\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace cascade
