#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "trapkit/noise.hpp"
#include "trapkit/rng.hpp"
#include "trapkit/simulator.hpp"
#include "trapkit/trajectory_io.hpp"
#include "test_util.hpp"

using namespace trapkit;
using trapkit::testutil::close;

namespace {

Trajectory sample_trajectory(std::uint64_t seed = 11) {
    ScenarioConfig cfg;
    cfg.max_steps = 120;
    return simulate_scenario(seed, cfg);
}

// Exhaustive minimum over all monotone alignment paths; oracle for the DP.
double brute_dtw(const std::vector<std::vector<double>>& a,
                 const std::vector<std::vector<double>>& b, std::size_t i, std::size_t j) {
    double c = 0.0;
    for (std::size_t k = 0; k < a[i].size(); ++k) {
        const double d = a[i][k] - b[j][k];
        c += d * d;
    }
    c = std::sqrt(c);
    if (i == 0 && j == 0) return c;
    double best = std::numeric_limits<double>::infinity();
    if (i > 0) best = std::min(best, brute_dtw(a, b, i - 1, j));
    if (j > 0) best = std::min(best, brute_dtw(a, b, i, j - 1));
    if (i > 0 && j > 0) best = std::min(best, brute_dtw(a, b, i - 1, j - 1));
    return c + best;
}

const std::vector<NoiseFamily> kAllFamilies = {
    NoiseFamily::kPrecipitation, NoiseFamily::kDistance,  NoiseFamily::kAmbient,
    NoiseFamily::kSpurious,      NoiseFamily::kGaussian,  NoiseFamily::kDropout,
    NoiseFamily::kComposite1,    NoiseFamily::kComposite2};

}  // namespace

TEST_CASE("family and intensity names round-trip") {
    for (NoiseFamily family : kAllFamilies) {
        const auto back = noise_family_from_name(noise_family_name(family));
        REQUIRE(back.has_value());
        CHECK(*back == family);
    }
    for (auto intensity :
         {NoiseIntensity::kLow, NoiseIntensity::kMed, NoiseIntensity::kHigh}) {
        const auto back = noise_intensity_from_name(noise_intensity_name(intensity));
        REQUIRE(back.has_value());
        CHECK(*back == intensity);
    }
    CHECK(!noise_family_from_name("hail").has_value());
    CHECK(!noise_intensity_from_name("extreme").has_value());
}

TEST_CASE("same spec twice gives identical noisy trajectories") {
    const Trajectory traj = sample_trajectory();
    const NoiseSpec spec{NoiseFamily::kComposite1, NoiseIntensity::kHigh, 77};
    const Trajectory a = apply_noise(traj, spec);
    const Trajectory b = apply_noise(traj, spec);
    CHECK(to_jsonl_line(a) == to_jsonl_line(b));
    // A different seed changes the corruption.
    const Trajectory c = apply_noise(traj, NoiseSpec{spec.family, spec.intensity, 78});
    CHECK(to_jsonl_line(a) != to_jsonl_line(c));
}

TEST_CASE("noise perturbs only lidar entries and keeps them in bounds") {
    const Trajectory traj = sample_trajectory();
    for (NoiseFamily family : kAllFamilies) {
        CAPTURE(noise_family_name(family));
        const Trajectory noisy =
            apply_noise(traj, NoiseSpec{family, NoiseIntensity::kHigh, 5});
        REQUIRE(noisy.length() == traj.length());
        CHECK(noisy.id == traj.id);
        CHECK(noisy.wct_label == traj.wct_label);
        bool lidar_changed = false;
        for (int t = 0; t < traj.length(); ++t) {
            const TimeStep& x = traj.steps[t];
            const TimeStep& y = noisy.steps[t];
            CHECK(y.obs.lane == x.obs.lane);
            CHECK(y.obs.side == x.obs.side);
            CHECK(y.obs.crossed_lane_line == x.obs.crossed_lane_line);
            CHECK(y.action.steer == x.action.steer);
            CHECK(y.action.accel == x.action.accel);
            CHECK(y.state.position.x == x.state.position.x);
            CHECK(y.state.speed == x.state.speed);
            for (double r : y.obs.lidar) {
                CHECK(r >= 0.0);
                CHECK(r <= 1.0);
            }
            if (y.obs.lidar != x.obs.lidar) lidar_changed = true;
        }
        CHECK(lidar_changed);
        CHECK_NOTHROW(validate(noisy));
    }
}

TEST_CASE("dropout zeroes roughly its probability share and passes the rest through") {
    const Trajectory traj = sample_trajectory();
    const Trajectory noisy =
        apply_noise(traj, NoiseSpec{NoiseFamily::kDropout, NoiseIntensity::kHigh, 9});
    int zeroed = 0, total = 0;
    for (int t = 0; t < traj.length(); ++t) {
        for (std::size_t k = 0; k < traj.steps[t].obs.lidar.size(); ++k) {
            const double before = traj.steps[t].obs.lidar[k];
            const double after = noisy.steps[t].obs.lidar[k];
            ++total;
            if (after == 0.0 && before != 0.0)
                ++zeroed;
            else
                CHECK(after == before);  // untouched beams are bit-exact
        }
    }
    // p = 0.25: binomial mean 0.25*total, generous 5-sigma band.
    const double rate = static_cast<double>(zeroed) / total;
    CHECK(rate > 0.25 - 5.0 * std::sqrt(0.25 * 0.75 / total));
    CHECK(rate < 0.25 + 5.0 * std::sqrt(0.25 * 0.75 / total));
}

TEST_CASE("spurious replaces a small fraction at low intensity") {
    const Trajectory traj = sample_trajectory();
    const Trajectory noisy =
        apply_noise(traj, NoiseSpec{NoiseFamily::kSpurious, NoiseIntensity::kLow, 9});
    int changed = 0, total = 0;
    for (int t = 0; t < traj.length(); ++t)
        for (std::size_t k = 0; k < traj.steps[t].obs.lidar.size(); ++k) {
            ++total;
            if (noisy.steps[t].obs.lidar[k] != traj.steps[t].obs.lidar[k]) ++changed;
        }
    const double rate = static_cast<double>(changed) / total;
    CHECK(rate > 0.0);
    CHECK(rate < 0.03);
}

TEST_CASE("reading kernel limiting behavior") {
    Rng rng(4);
    SUBCASE("spurious non-trigger and dropout survivor pass through exactly") {
        // With p < 1 a long run must contain pass-through draws equal to r.
        int untouched = 0;
        for (int i = 0; i < 200; ++i) {
            const double out =
                corrupt_reading(0.73, NoiseFamily::kDropout, NoiseIntensity::kLow, rng);
            if (out == 0.73) ++untouched;
        }
        CHECK(untouched > 100);
    }
    SUBCASE("precipitation non-trigger stays within the relative window") {
        for (int i = 0; i < 200; ++i) {
            const double out = corrupt_reading(0.5, NoiseFamily::kPrecipitation,
                                               NoiseIntensity::kLow, rng);
            // Either an exponential echo below r, or r*(1+u) with |u| <= 0.01.
            CHECK(out <= std::max(0.5 * 1.01, 0.5));
            if (out > 0.5 * 0.99 - 1e-12) {
                CHECK(out >= 0.5 * 0.99 - 1e-12);
                CHECK(out <= 0.5 * 1.01 + 1e-12);
            }
        }
    }
    SUBCASE("gaussian displacement scales with sigma") {
        double sum_low = 0.0, sum_high = 0.0;
        for (int i = 0; i < 4000; ++i) {
            sum_low += std::abs(
                corrupt_reading(0.5, NoiseFamily::kGaussian, NoiseIntensity::kLow, rng) - 0.5);
            sum_high += std::abs(
                corrupt_reading(0.5, NoiseFamily::kGaussian, NoiseIntensity::kHigh, rng) - 0.5);
        }
        // sigma ratio is 8; allow wide statistical slack.
        CHECK(sum_high / sum_low > 6.0);
        CHECK(sum_high / sum_low < 10.0);
    }
}

TEST_CASE("displacement metrics match closed forms") {
    Trajectory clean;
    clean.id = "disp";
    clean.seed = 0;
    const int n = 10, beams = 24;
    for (int t = 0; t < n; ++t) {
        TimeStep step;
        step.t = t;
        step.obs.lidar.assign(beams, 0.5);
        step.state.position = {static_cast<double>(t), 0.0};
        step.state.heading = {1.0, 0.0};
        step.state.speed = 1.0;
        clean.steps.push_back(step);
    }

    SUBCASE("identical trajectories give all-zero metrics") {
        const DisplacementReport r = displacement_metrics(clean, clean);
        CHECK(r.mse == 0.0);
        CHECK(r.mae == 0.0);
        CHECK(r.mean_displacement == 0.0);
        CHECK(r.dtw_distance == 0.0);
    }
    SUBCASE("constant offset of 0.1 over 24 beams") {
        Trajectory noisy = clean;
        for (auto& step : noisy.steps)
            for (auto& v : step.obs.lidar) v += 0.1;
        const DisplacementReport r = displacement_metrics(clean, noisy);
        CHECK(close(r.mae, 0.1));
        CHECK(close(r.mse, 0.01));
        CHECK(close(r.mean_displacement, 0.1 * std::sqrt(24.0)));
        // All pairwise costs are equal, so the diagonal path is optimal.
        CHECK(close(r.dtw_distance, n * 0.1 * std::sqrt(24.0)));
    }
    SUBCASE("length mismatch throws") {
        Trajectory shorter = clean;
        shorter.steps.pop_back();
        CHECK_THROWS_AS(displacement_metrics(clean, shorter), std::invalid_argument);
    }
    SUBCASE("beam count mismatch throws") {
        Trajectory fewer = clean;
        fewer.steps[3].obs.lidar.pop_back();
        CHECK_THROWS_AS(displacement_metrics(clean, fewer), std::invalid_argument);
    }
}

TEST_CASE("dtw hand case and properties") {
    using Seq = std::vector<std::vector<double>>;
    SUBCASE("two zeros against one one costs 2") {
        const Seq a = {{0.0}, {0.0}};
        const Seq b = {{1.0}};
        CHECK(close(dtw_distance(a, b), 2.0));
        CHECK(close(dtw_distance(b, a), 2.0));
    }
    SUBCASE("identical sequences cost 0") {
        const Seq a = {{0.2, 0.4}, {0.6, 0.8}, {1.0, 0.0}};
        CHECK(dtw_distance(a, a) == 0.0);
    }
    SUBCASE("empty input throws") {
        const Seq a = {{1.0}};
        CHECK_THROWS_AS(dtw_distance({}, a), std::invalid_argument);
        CHECK_THROWS_AS(dtw_distance(a, {}), std::invalid_argument);
    }
    SUBCASE("width mismatch throws") {
        const Seq a = {{1.0, 2.0}};
        const Seq b = {{1.0}};
        CHECK_THROWS_AS(dtw_distance(a, b), std::invalid_argument);
    }
    SUBCASE("random short sequences match the exhaustive path minimum") {
        Rng rng(123);
        for (int trial = 0; trial < 40; ++trial) {
            const int n = static_cast<int>(rng.uniform_int(1, 6));
            const int m = static_cast<int>(rng.uniform_int(1, 6));
            Seq a(n), b(m);
            for (auto& v : a) v = {rng.uniform(), rng.uniform()};
            for (auto& v : b) v = {rng.uniform(), rng.uniform()};
            const double expect = brute_dtw(a, b, n - 1, m - 1);
            CHECK(close(dtw_distance(a, b), expect, 1e-12));
            CHECK(close(dtw_distance(b, a), expect, 1e-12));
        }
    }
}

TEST_CASE("mean displacement increases with intensity for every family") {
    std::vector<Trajectory> batch;
    for (std::uint64_t seed = 600; seed < 620; ++seed) batch.push_back(sample_trajectory(seed));

    for (NoiseFamily family : kAllFamilies) {
        CAPTURE(noise_family_name(family));
        double means[3] = {0.0, 0.0, 0.0};
        for (int level = 0; level < 3; ++level) {
            const NoiseSpec spec{family, static_cast<NoiseIntensity>(level), 31};
            const auto noisy = apply_noise(batch, spec, 4);
            for (std::size_t i = 0; i < batch.size(); ++i)
                means[level] += displacement_metrics(batch[i], noisy[i]).mean_displacement;
            means[level] /= static_cast<double>(batch.size());
        }
        CHECK(means[0] < means[1]);
        CHECK(means[1] < means[2]);
    }
}

TEST_CASE("batch application is thread-count independent") {
    std::vector<Trajectory> batch;
    for (std::uint64_t seed = 700; seed < 706; ++seed) batch.push_back(sample_trajectory(seed));
    const NoiseSpec spec{NoiseFamily::kComposite2, NoiseIntensity::kMed, 3};
    const auto a = apply_noise(batch, spec, 1);
    const auto b = apply_noise(batch, spec, 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(to_jsonl_line(a[i]) == to_jsonl_line(b[i]));
}
