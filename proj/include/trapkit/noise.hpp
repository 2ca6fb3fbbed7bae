// Per-beam LiDAR corruption families and displacement metrics.
//
// Noise only touches obs.lidar; states, actions, labels, and the other sensor
// channels pass through untouched.  Every beam draws from its own generator
// seeded by (spec.seed, trajectory id, step, beam), so application order and
// thread count never change the result.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "trapkit/trajectory.hpp"

namespace trapkit {

enum class NoiseFamily : int {
    kPrecipitation = 0,
    kDistance,
    kAmbient,
    kSpurious,
    kGaussian,
    kDropout,
    kComposite1,  // precipitation, distance, ambient, spurious
    kComposite2,  // gaussian, dropout, spurious
};

inline constexpr int kNoiseFamilyCount = 8;

enum class NoiseIntensity : int { kLow = 0, kMed, kHigh };

inline constexpr int kNoiseIntensityCount = 3;

std::string_view noise_family_name(NoiseFamily family);
std::optional<NoiseFamily> noise_family_from_name(std::string_view name);
std::string_view noise_intensity_name(NoiseIntensity intensity);
std::optional<NoiseIntensity> noise_intensity_from_name(std::string_view name);

struct NoiseSpec {
    NoiseFamily family = NoiseFamily::kGaussian;
    NoiseIntensity intensity = NoiseIntensity::kLow;
    std::uint64_t seed = 0;
};

struct DisplacementReport {
    double mse = 0.0;
    double mae = 0.0;
    double mean_displacement = 0.0;
    double dtw_distance = 0.0;
};

class Rng;

// One reading through one family's rule at the given intensity, unclamped.
// Exposed so the family rules stay testable in isolation.
double corrupt_reading(double r, NoiseFamily family, NoiseIntensity intensity, Rng& rng);

// Returns a copy of traj with each lidar entry independently perturbed and
// clamped to [0,1].
Trajectory apply_noise(const Trajectory& traj, const NoiseSpec& spec);

std::vector<Trajectory> apply_noise(std::span<const Trajectory> trajs, const NoiseSpec& spec,
                                    int threads = 1);

// Classical DTW with Euclidean step cost and moves (i-1,j), (i,j-1), (i-1,j-1).
// Throws std::invalid_argument on empty input or mismatched vector widths.
double dtw_distance(std::span<const std::vector<double>> a,
                    std::span<const std::vector<double>> b);

// MSE and MAE over the flattened lidar entries, mean per-step Euclidean
// displacement, and DTW over the per-step lidar vectors.  Throws
// std::invalid_argument on length or beam-count mismatch.
DisplacementReport displacement_metrics(const Trajectory& clean, const Trajectory& noisy);

}  // namespace trapkit
