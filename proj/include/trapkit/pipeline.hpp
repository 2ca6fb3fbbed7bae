// Pipeline stages behind the CLI.
//
// Stage functions read and write fixed artifact names under cfg.out_dir, so
// `pipeline` equals running the stages individually with the same config.
// Each stage derives its seed as hash(cfg.seed, stage name) and returns a
// one-line summary.  The *_file helpers implement the ad-hoc flag forms on
// explicit paths; stages are thin wrappers over them.

#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "trapkit/noise.hpp"
#include "trapkit/run_config.hpp"

namespace trapkit {

// "<out_dir>/<name>"; creates out_dir lazily on writes, never on reads.
std::string artifact_path(const RunConfig& cfg, const std::string& name);

// Parses "A..B" (half-open, A <= B).  Throws std::invalid_argument.
std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text);

// Ad-hoc forms on explicit paths.  `mix` is "expert", "scripted", or "test".
std::string simulate_to_file(const RunConfig& cfg, std::uint64_t seed_begin,
                             std::uint64_t seed_end, const std::string& mix,
                             const std::string& out);
std::string label_file(const RunConfig& cfg, const std::string& in, const std::string& out);
std::string noise_file(const RunConfig& cfg, const NoiseSpec& spec, const std::string& in,
                       const std::string& out, const std::string& displacement_out);
std::string train_reward_file(const RunConfig& cfg, const std::string& demos,
                              const std::string& out);
std::string annotate_file(const RunConfig& cfg, const std::string& in,
                          const std::string& reward_model, const std::string& out);
std::string build_dataset_file(const RunConfig& cfg, const std::string& in,
                               const std::string& out);
std::string train_classifier_file(const RunConfig& cfg, const std::string& data,
                                  const std::string& reward_model, const std::string& out);
std::string score_file(const RunConfig& cfg, const std::string& model, const std::string& in,
                       const std::string& out);

// Pipeline stages over the fixed artifact names.
std::string stage_simulate(const RunConfig& cfg);
std::string stage_label(const RunConfig& cfg);
std::string stage_noise(const RunConfig& cfg);  // no-op without a noise section
std::string stage_train_reward(const RunConfig& cfg);
std::string stage_annotate(const RunConfig& cfg);
std::string stage_build_dataset(const RunConfig& cfg);
std::string stage_train_classifier(const RunConfig& cfg);
std::string stage_score(const RunConfig& cfg);
std::string stage_evaluate(const RunConfig& cfg);

// Runs every stage in order, streaming summaries to `progress` when given.
std::vector<std::string> run_pipeline(const RunConfig& cfg, std::ostream* progress = nullptr);

}  // namespace trapkit
