#include "cascade/trialgen.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "cascade/json_io.hpp"

namespace cascade {

namespace {

constexpr const char* kManifestFormat = "cascade-manifest/1";

std::mt19937_64 seeded_engine(std::uint64_t seed, TaskId task) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(task)};
    return std::mt19937_64(seq);
}

}  // namespace

void DesignSpec::validate() const {
    std::vector<std::string> bad;
    int total = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& c = cells[i];
        std::vector<std::string> why;
        if (c.panel_size < 1 || c.panel_size > 3) why.push_back("panel_size outside 1..3");
        if (c.human_count < 0 || c.ai_count < 0) why.push_back("negative source count");
        if (c.agree_count < 0 || c.disagree_count < 0) why.push_back("negative agreement count");
        if (c.human_count + c.ai_count != c.panel_size) why.push_back("human + ai != panel_size");
        if (c.agree_count + c.disagree_count != c.panel_size)
            why.push_back("agree + disagree != panel_size");
        if (c.repetitions < 1) why.push_back("repetitions < 1");
        if (!why.empty()) {
            std::string joined;
            for (const auto& w : why) joined += (joined.empty() ? "" : ", ") + w;
            bad.push_back(fmt::format("cell {}: {}", i, joined));
        }
        total += c.repetitions;
    }
    if (cells.empty()) bad.emplace_back("no cells");
    if (total != target_trial_count)
        bad.push_back(fmt::format("cell repetitions sum to {}, target is {}", total, target_trial_count));
    if (target_trial_count % 2 != 0)
        bad.push_back(fmt::format("target_trial_count {} is odd; private directions cannot balance",
                                  target_trial_count));
    if (!bad.empty()) {
        std::string msg = fmt::format("invalid design for {}:", to_string(scenario_id));
        for (const auto& b : bad) msg += "\n  " + b;
        throw ValidationError(msg);
    }
}

std::string design_digest(const DesignSpec& spec) { return sha256_hex(to_json(spec).dump()); }

Manifest generate_manifest(const DesignSpec& spec, const Scenario& scenario) {
    spec.validate();
    scenario.validate();
    if (spec.scenario_id != scenario.id)
        throw ValidationError(fmt::format("design is for {}, scenario is {}",
                                          to_string(spec.scenario_id), to_string(scenario.id)));

    auto rng = seeded_engine(spec.seed, spec.scenario_id);

    // Each cell splits evenly across private directions; odd remainders
    // alternate globally, which balances because the total is even.
    std::vector<Trial> trials;
    trials.reserve(spec.target_trial_count);
    Signal next_odd = Signal::a;
    for (const auto& cell : spec.cells) {
        std::vector<Signal> directions;
        for (int r = 0; r < cell.repetitions / 2; ++r) {
            directions.push_back(Signal::a);
            directions.push_back(Signal::b);
        }
        if (cell.repetitions % 2 == 1) {
            directions.push_back(next_odd);
            next_odd = next_odd == Signal::a ? Signal::b : Signal::a;
        }
        for (Signal priv : directions) {
            std::vector<Source> sources(cell.human_count, Source::human);
            sources.insert(sources.end(), cell.ai_count, Source::ai);
            std::vector<bool> agrees(cell.agree_count, true);
            agrees.insert(agrees.end(), cell.disagree_count, false);
            std::shuffle(sources.begin(), sources.end(), rng);
            std::shuffle(agrees.begin(), agrees.end(), rng);

            Trial t;
            t.scenario_id = spec.scenario_id;
            t.private_signal = priv;
            const Option favored = favored_option(priv);
            for (int k = 0; k < cell.panel_size; ++k)
                t.advisors.push_back({sources[k], agrees[k] ? favored : opposite(favored)});
            trials.push_back(std::move(t));
        }
    }
    std::shuffle(trials.begin(), trials.end(), rng);

    const char* prefix = spec.scenario_id == TaskId::medical ? "med"
                         : spec.scenario_id == TaskId::legal ? "leg"
                                                             : "inv";
    for (std::size_t i = 0; i < trials.size(); ++i) {
        trials[i].trial_id = fmt::format("{}-{:03}", prefix, i + 1);
        trials[i].posterior_a = trial_posterior(trials[i], scenario);
    }
    return Manifest{spec.scenario_id, std::move(trials), design_digest(spec), spec};
}

std::vector<std::string> validate_manifest(const Manifest& manifest, const Scenario& scenario) {
    std::vector<std::string> violations;
    if (manifest.scenario_id != scenario.id)
        violations.push_back(fmt::format("manifest is for {}, scenario is {}",
                                         to_string(manifest.scenario_id), to_string(scenario.id)));
    if (manifest.trials.empty()) {
        violations.emplace_back("manifest has no trials");
        return violations;
    }
    if (manifest.design && static_cast<int>(manifest.trials.size()) != manifest.design->target_trial_count)
        violations.push_back(fmt::format("{} trials, design target is {}", manifest.trials.size(),
                                         manifest.design->target_trial_count));

    std::set<std::string> ids;
    std::set<int> levels;
    int private_a = 0;
    const int n = static_cast<int>(manifest.trials.size());
    Eigen::MatrixXd evidence(n, 3);
    for (int i = 0; i < n; ++i) {
        const auto& t = manifest.trials[i];
        if (!ids.insert(t.trial_id).second) violations.push_back("duplicate trial_id " + t.trial_id);
        if (t.scenario_id != scenario.id)
            violations.push_back(fmt::format("trial {} belongs to {}", t.trial_id, to_string(t.scenario_id)));
        if (t.advisors.empty() || t.advisors.size() > 3) {
            violations.push_back(
                fmt::format("trial {} has {} advisors (expected 1-3)", t.trial_id, t.advisors.size()));
        } else if (scenario.q > 0.5 && scenario.q < 1.0 &&
                   posterior_from_net(scenario.q, t.net_count()) != t.posterior_a) {
            violations.push_back(fmt::format("trial {} cached posterior {} != recomputed {}", t.trial_id,
                                             t.posterior_a, posterior_from_net(scenario.q, t.net_count())));
        }
        if (t.private_signal == Signal::a) ++private_a;
        levels.insert(std::abs(t.net_count()));
        evidence(i, 0) = sign_of(t.private_signal);
        evidence(i, 1) = t.human_net();
        evidence(i, 2) = t.ai_net();
    }
    if (2 * private_a != n)
        violations.push_back(fmt::format("private directions unbalanced: {} signal_a vs {} signal_b",
                                         private_a, n - private_a));
    for (int level : {0, 1, 2, 3})
        if (!levels.contains(level))
            violations.push_back(fmt::format("posterior level |d| = {} not covered", level));

    const char* names[] = {"I_PI", "I_H", "I_AI"};
    bool zero_column = false;
    for (int c = 0; c < 3; ++c) {
        if (evidence.col(c).isZero()) {
            violations.push_back(fmt::format("{} column identically zero", names[c]));
            zero_column = true;
        }
    }
    if (!zero_column) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(evidence);
        if (qr.rank() < 3)
            violations.push_back(fmt::format("evidence columns I_PI, I_H, I_AI are collinear (rank {})", qr.rank()));
    }
    return violations;
}

DesignSpec preset_paper(TaskId scenario_id, std::uint64_t seed) {
    DesignSpec spec;
    spec.scenario_id = scenario_id;
    spec.seed = seed;
    spec.target_trial_count = 52;
    // Per panel size, every source mix crossed with every agreement pattern
    // except unanimous agreement at size 3 (|d| = 4 lies outside the four
    // posterior levels). Each cell appears once per private direction; the
    // mixed-source two-agree cell is doubled to reach 26 per direction.
    for (int size = 1; size <= 3; ++size) {
        for (int humans = size; humans >= 0; --humans) {
            for (int agree = size; agree >= 0; --agree) {
                if (size == 3 && agree == 3) continue;
                const bool doubled = size == 2 && humans == 1 && agree == 2;
                spec.cells.push_back({size, humans, size - humans, agree, size - agree, doubled ? 4 : 2});
            }
        }
    }
    return spec;
}

void write_manifest(std::ostream& os, const Manifest& manifest) {
    json header{{"kind", "manifest_header"},
                {"format", kManifestFormat},
                {"scenario_id", to_string(manifest.scenario_id)},
                {"design_digest", manifest.design_digest},
                {"trial_count", manifest.trials.size()}};
    if (manifest.design) header["design"] = to_json(*manifest.design);
    os << header.dump() << '\n';
    for (const auto& t : manifest.trials) os << to_json(t).dump() << '\n';
}

Manifest read_manifest(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ValidationError("empty manifest");
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw ValidationError(fmt::format("manifest header is not JSON: {}", e.what()));
    }
    if (header.value("kind", "") != "manifest_header")
        throw ValidationError("manifest must start with a manifest_header line");
    Manifest m;
    m.scenario_id = parse_task(require<std::string>(header, "scenario_id"));
    m.design_digest = require<std::string>(header, "design_digest");
    if (header.contains("design")) m.design = design_from_json(header["design"]);
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            m.trials.push_back(trial_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw ValidationError(fmt::format("manifest line {}: {}", lineno, e.what()));
        }
    }
    const auto declared = header.value("trial_count", m.trials.size());
    if (declared != m.trials.size())
        throw ValidationError(fmt::format("manifest declares {} trials, contains {}", declared, m.trials.size()));
    return m;
}

}  // namespace cascade
