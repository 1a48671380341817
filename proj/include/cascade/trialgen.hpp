#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cascade/core.hpp"

namespace cascade {

// One block of identical-structure trials. Agreement is counted relative to
// the private signal of each generated trial.
struct DesignCell {
    int panel_size = 1;
    int human_count = 1;
    int ai_count = 0;
    int agree_count = 1;
    int disagree_count = 0;
    int repetitions = 1;

    friend bool operator==(const DesignCell&, const DesignCell&) = default;
};

struct DesignSpec {
    TaskId scenario_id = TaskId::medical;
    std::vector<DesignCell> cells;
    std::uint64_t seed = 0;
    int target_trial_count = 52;

    // Throws ValidationError listing every offending cell.
    void validate() const;
};

struct Manifest {
    TaskId scenario_id = TaskId::medical;
    std::vector<Trial> trials;
    std::string design_digest;
    std::optional<DesignSpec> design;
};

// Hex SHA-256 of the canonical JSON encoding of the spec (seed included).
std::string design_digest(const DesignSpec& spec);

Manifest generate_manifest(const DesignSpec& spec, const Scenario& scenario);

// Empty result means ok. Never throws.
std::vector<std::string> validate_manifest(const Manifest& manifest, const Scenario& scenario);

// Canonical balanced 52-trial design: every panel size 1-3, every source
// mix, every agreement pattern that keeps |d| <= 3, both private directions.
DesignSpec preset_paper(TaskId scenario_id, std::uint64_t seed = 42);

// JSON Lines: one header line carrying the digest and design, then one trial per line.
void write_manifest(std::ostream& os, const Manifest& manifest);
Manifest read_manifest(std::istream& is);

}  // namespace cascade
