// Classifier training-set construction: every reward-annotated trajectory is
// end-clipped to a random prefix, and trajectories that reached a worst-case
// terminus are additionally expanded into several shorter prefixes, all
// inheriting the source label.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "trapkit/trajectory.hpp"

namespace trapkit {

class Rng;

struct SamplerConfig {
    int max_clip_length = 100;  // cap on the clip lower bound
    int expansions = 5;         // prefixes per positive trajectory
    std::uint64_t seed = 0;
};

// Throws std::invalid_argument unless max_clip_length >= 2 and expansions >= 1.
void validate_sampler(const SamplerConfig& cfg);

struct WctDataset {
    std::vector<Trajectory> items;
    int positives = 0;
    int negatives = 0;
};

// Prefix of length uniform over [min(dataset_min_length, cfg.max_clip_length),
// len]; inputs already shorter than the lower bound come back unclipped.
// Either way the item records provenance (src, prefix_len), keeps its label,
// clips anomaly intervals, and drops the terminal event if it was cut off.
Trajectory end_clip(const Trajectory& traj, int dataset_min_length, const SamplerConfig& cfg,
                    Rng& rng);

// min(cfg.expansions, len - 2) prefixes with distinct lengths drawn uniformly
// without replacement from {2, ..., len - 1}; empty when len < 3.  The final
// step is never included, so no prefix contains the terminus itself.  Throws
// std::invalid_argument on a non-positive source.
std::vector<Trajectory> expand_prefixes(const Trajectory& traj, const SamplerConfig& cfg,
                                        Rng& rng);

// Clipped copies of every input plus prefix expansions of the positive ones,
// shuffled by cfg.seed.  Pure function of (inputs, cfg); inputs must be fully
// reward-annotated, at least 2 steps long, and carry distinct ids.
WctDataset build_dataset(std::span<const Trajectory> trajs, const SamplerConfig& cfg,
                         int threads = 1);

// Partition by source trajectory so one source's items never straddle the
// split.  val_fraction in [0, 1); at least one source lands on each side when
// there are two or more sources and val_fraction > 0.
struct DatasetSplit {
    std::vector<Trajectory> train, val;
};
DatasetSplit split_by_source(const WctDataset& dataset, double val_fraction, std::uint64_t seed);

}  // namespace trapkit
