#include "trapkit/noise.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "trapkit/rng.hpp"
#include "trapkit/threading.hpp"

namespace trapkit {

namespace {

struct PrecipitationParams {
    double p, mean_echo, delta;
};
struct AmbientParams {
    double bias, sigma;
};

constexpr std::array<PrecipitationParams, 3> kPrecipitation = {
    {{0.02, 0.5, 0.01}, {0.10, 0.5, 0.03}, {0.20, 0.5, 0.05}}};
constexpr std::array<double, 3> kDistanceSigma = {0.01, 0.02, 0.05};
constexpr std::array<AmbientParams, 3> kAmbient = {
    {{0.02, 0.02}, {0.05, 0.05}, {0.08, 0.08}}};
constexpr std::array<double, 3> kSpuriousProb = {0.01, 0.05, 0.10};
constexpr std::array<double, 3> kGaussianSigma = {0.01, 0.03, 0.08};
constexpr std::array<double, 3> kDropoutProb = {0.05, 0.15, 0.25};

double corrupt_level(double r, NoiseFamily family, int level, Rng& rng) {
    switch (family) {
        case NoiseFamily::kPrecipitation: {
            const PrecipitationParams& prm = kPrecipitation[level];
            if (rng.bernoulli(prm.p)) return std::min(r, rng.exponential(prm.mean_echo));
            return r * (1.0 + rng.uniform(-prm.delta, prm.delta));
        }
        case NoiseFamily::kDistance:
            return r * (1.0 + rng.normal(0.0, kDistanceSigma[level]));
        case NoiseFamily::kAmbient: {
            const AmbientParams& prm = kAmbient[level];
            return r + prm.bias + rng.normal(0.0, prm.sigma);
        }
        case NoiseFamily::kSpurious:
            if (rng.bernoulli(kSpuriousProb[level])) return rng.uniform(0.0, 1.0);
            return r;
        case NoiseFamily::kGaussian:
            return r + rng.normal(0.0, kGaussianSigma[level]);
        case NoiseFamily::kDropout:
            return rng.bernoulli(kDropoutProb[level]) ? 0.0 : r;
        case NoiseFamily::kComposite1:
            r = corrupt_level(r, NoiseFamily::kPrecipitation, level, rng);
            r = corrupt_level(r, NoiseFamily::kDistance, level, rng);
            r = corrupt_level(r, NoiseFamily::kAmbient, level, rng);
            return corrupt_level(r, NoiseFamily::kSpurious, level, rng);
        case NoiseFamily::kComposite2:
            r = corrupt_level(r, NoiseFamily::kGaussian, level, rng);
            r = corrupt_level(r, NoiseFamily::kDropout, level, rng);
            return corrupt_level(r, NoiseFamily::kSpurious, level, rng);
    }
    return r;
}

}  // namespace

double corrupt_reading(double r, NoiseFamily family, NoiseIntensity intensity, Rng& rng) {
    const int level = static_cast<int>(intensity);
    if (level < 0 || level >= kNoiseIntensityCount)
        throw std::invalid_argument("unknown noise intensity");
    return corrupt_level(r, family, level, rng);
}

std::string_view noise_family_name(NoiseFamily family) {
    switch (family) {
        case NoiseFamily::kPrecipitation: return "precipitation";
        case NoiseFamily::kDistance: return "distance";
        case NoiseFamily::kAmbient: return "ambient";
        case NoiseFamily::kSpurious: return "spurious";
        case NoiseFamily::kGaussian: return "gaussian";
        case NoiseFamily::kDropout: return "dropout";
        case NoiseFamily::kComposite1: return "composite1";
        case NoiseFamily::kComposite2: return "composite2";
    }
    return "unknown";
}

std::optional<NoiseFamily> noise_family_from_name(std::string_view name) {
    for (int i = 0; i < kNoiseFamilyCount; ++i) {
        const auto family = static_cast<NoiseFamily>(i);
        if (noise_family_name(family) == name) return family;
    }
    return std::nullopt;
}

std::string_view noise_intensity_name(NoiseIntensity intensity) {
    switch (intensity) {
        case NoiseIntensity::kLow: return "low";
        case NoiseIntensity::kMed: return "med";
        case NoiseIntensity::kHigh: return "high";
    }
    return "unknown";
}

std::optional<NoiseIntensity> noise_intensity_from_name(std::string_view name) {
    for (int i = 0; i < kNoiseIntensityCount; ++i) {
        const auto intensity = static_cast<NoiseIntensity>(i);
        if (noise_intensity_name(intensity) == name) return intensity;
    }
    return std::nullopt;
}

Trajectory apply_noise(const Trajectory& traj, const NoiseSpec& spec) {
    const int level = static_cast<int>(spec.intensity);
    if (level < 0 || level >= kNoiseIntensityCount)
        throw std::invalid_argument("unknown noise intensity");
    Trajectory out = traj;
    const std::uint64_t traj_seed = derive_seed(spec.seed, traj.id);
    for (std::size_t t = 0; t < out.steps.size(); ++t) {
        const std::uint64_t step_seed = mix_seed(traj_seed, static_cast<std::uint64_t>(t));
        auto& lidar = out.steps[t].obs.lidar;
        for (std::size_t beam = 0; beam < lidar.size(); ++beam) {
            Rng rng(mix_seed(step_seed, static_cast<std::uint64_t>(beam)));
            lidar[beam] =
                std::clamp(corrupt_level(lidar[beam], spec.family, level, rng), 0.0, 1.0);
        }
    }
    return out;
}

std::vector<Trajectory> apply_noise(std::span<const Trajectory> trajs, const NoiseSpec& spec,
                                    int threads) {
    std::vector<Trajectory> out(trajs.size());
    parallel_for(trajs.size(), threads,
                 [&](std::size_t i) { out[i] = apply_noise(trajs[i], spec); });
    return out;
}

double dtw_distance(std::span<const std::vector<double>> a,
                    std::span<const std::vector<double>> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("dtw needs nonempty sequences");
    const std::size_t width = a[0].size();
    for (const auto& v : a)
        if (v.size() != width) throw std::invalid_argument("dtw vector width mismatch");
    for (const auto& v : b)
        if (v.size() != width) throw std::invalid_argument("dtw vector width mismatch");

    auto cost = [&](std::size_t i, std::size_t j) {
        double sum = 0.0;
        for (std::size_t k = 0; k < width; ++k) {
            const double d = a[i][k] - b[j][k];
            sum += d * d;
        }
        return std::sqrt(sum);
    };

    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(b.size() + 1, kInf), curr(b.size() + 1, kInf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        curr[0] = kInf;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            curr[j] = cost(i - 1, j - 1) +
                      std::min({prev[j], curr[j - 1], prev[j - 1]});
        }
        std::swap(prev, curr);
    }
    return prev[b.size()];
}

DisplacementReport displacement_metrics(const Trajectory& clean, const Trajectory& noisy) {
    if (clean.length() != noisy.length())
        throw std::invalid_argument("displacement_metrics: trajectory length mismatch");
    if (clean.steps.empty())
        throw std::invalid_argument("displacement_metrics: empty trajectory");

    DisplacementReport report;
    std::size_t entries = 0;
    std::vector<std::vector<double>> clean_seq, noisy_seq;
    clean_seq.reserve(clean.steps.size());
    noisy_seq.reserve(noisy.steps.size());
    for (int t = 0; t < clean.length(); ++t) {
        const auto& x = clean.steps[t].obs.lidar;
        const auto& y = noisy.steps[t].obs.lidar;
        if (x.size() != y.size())
            throw std::invalid_argument("displacement_metrics: beam count mismatch");
        double step_sq = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double d = x[k] - y[k];
            report.mse += d * d;
            report.mae += std::abs(d);
            step_sq += d * d;
        }
        report.mean_displacement += std::sqrt(step_sq);
        entries += x.size();
        clean_seq.push_back(x);
        noisy_seq.push_back(y);
    }
    report.mse /= static_cast<double>(entries);
    report.mae /= static_cast<double>(entries);
    report.mean_displacement /= static_cast<double>(clean.steps.size());
    report.dtw_distance = dtw_distance(clean_seq, noisy_seq);
    return report;
}

}  // namespace trapkit
