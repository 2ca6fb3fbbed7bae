// Single JSON run configuration shared by every CLI stage.
//
// One file, one section per module; the global seed is hashed with each stage
// name so stages are independently reproducible.  Parsing is strict: unknown
// keys and module-invariant violations are errors.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trapkit/classifier.hpp"
#include "trapkit/labeler.hpp"
#include "trapkit/noise.hpp"
#include "trapkit/reward_learning.hpp"
#include "trapkit/simulator.hpp"
#include "trapkit/wct_dataset.hpp"

namespace trapkit {

struct SimulateConfig {
    int expert_count = 500;
    int test_count = 200;
    std::vector<double> epsilon_ladder = {0.0, 0.2, 0.4, 0.6, 0.8};
    double test_clean_fraction = 0.5;
    std::optional<ScheduleKind> scripted_kind;  // fixed kind for the scripted mix
};

struct EvalConfig {
    double threshold = 0.5;
    int trim_steps = 5;               // withheld from every test trajectory
    std::string ground_truth = "or";  // "or" | "labels" | "wct"
};

struct RunConfig {
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out_dir = "trapkit-run";
    SimulateConfig simulate;
    ScenarioConfig scenario;
    LabelerConfig labeler;
    std::optional<NoiseSpec> noise;    // stage skipped when absent
    RewardTrainConfig reward;          // seed overwritten per stage
    SamplerConfig sampler;             // seed overwritten per stage
    ClassifierTrainConfig classifier;  // seed overwritten per stage
    EvalConfig evaluation;
};

// Throws std::invalid_argument on unknown keys, bad types, or any module
// invariant violation.
RunConfig parse_run_config(const std::string& json_text);

// Reads and parses the file; a missing path is an error.
RunConfig load_run_config(const std::string& path);

void validate_run_config(const RunConfig& cfg);

}  // namespace trapkit
