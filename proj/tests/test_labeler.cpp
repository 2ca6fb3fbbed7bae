#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "trapkit/labeler.hpp"
#include "trapkit/trajectory.hpp"

using namespace trapkit;

namespace {

// Minimal trajectory builders; only the channels a detector reads are filled.
Trajectory straight_traj(int len, double speed = 10.0) {
    Trajectory traj;
    traj.id = "synthetic";
    for (int t = 0; t < len; ++t) {
        TimeStep step;
        step.t = t;
        step.state.heading = {1.0, 0.0};
        step.state.speed = speed;
        step.obs.lidar.assign(24, 1.0);
        traj.steps.push_back(std::move(step));
    }
    return traj;
}

std::vector<Vec2> rotating_headings(int n, double omega, double dt) {
    std::vector<Vec2> headings;
    for (int i = 0; i < n; ++i) headings.push_back(heading_from_angle(omega * i * dt));
    return headings;
}

int total_flagged(const std::vector<Interval>& intervals) {
    int total = 0;
    for (const auto& [a, b] : intervals) total += b - a;
    return total;
}

bool contained_in_some(const Interval& inner, const std::vector<Interval>& outer) {
    for (const auto& [a, b] : outer)
        if (a <= inner.first && inner.second <= b) return true;
    return false;
}

}  // namespace

TEST_CASE("config validation rejects bad settings") {
    CHECK_NOTHROW(validate_config(LabelerConfig{}));
    LabelerConfig cfg;
    cfg.braking_window = 4;  // even
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
    cfg = {};
    cfg.zigzag_window = 1;
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
    cfg = {};
    cfg.turn_threshold = 0.0;
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
    cfg = {};
    cfg.lane_window = 0;
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
    cfg = {};
    cfg.dt = 0.0;
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
}

TEST_CASE("curvature of a constant heading is zero via the guard") {
    std::vector<Vec2> headings(50, Vec2{1.0, 0.0});
    const auto k = curvature_series(headings, 2);
    REQUIRE(k.size() == 46);
    for (double v : k) CHECK(v == 0.0);
}

TEST_CASE("curvature of constant rotation approaches 1") {
    // For heading angle growing at rate omega, the finite-difference curvature
    // has the closed form 2 / (1 + cos(omega*dt*w)) — derived by expanding the
    // central differences of a rotating unit vector.
    const int w = 2;
    for (double omega_dt : {0.05, 0.025}) {
        const auto headings = rotating_headings(200, omega_dt, 1.0);
        const auto k = curvature_series(headings, w);
        const double expected = 2.0 / (1.0 + std::cos(omega_dt * w));
        for (double v : k) CHECK(v == doctest::Approx(expected).epsilon(1e-9));
        CHECK(std::abs(k[10] - 1.0) < 0.02);  // within 2% of the analytic limit
    }
    // Convergence: halving the step halves the error (quadratically, in fact).
    const auto coarse = curvature_series(rotating_headings(100, 0.05, 1.0), w);
    const auto fine = curvature_series(rotating_headings(100, 0.025, 1.0), w);
    CHECK(std::abs(fine[10] - 1.0) < std::abs(coarse[10] - 1.0));
}

TEST_CASE("curvature rejects too-short input") {
    std::vector<Vec2> headings(4, Vec2{1.0, 0.0});
    CHECK_THROWS_AS(curvature_series(headings, 2), std::invalid_argument);
}

TEST_CASE("zigzag: straight drive is clean, oscillating heading is flagged") {
    LabelerConfig cfg;
    CHECK(detect_zigzag(straight_traj(200), cfg).empty());

    // Heading angle oscillating +-0.3 rad with a 20-step period.
    Trajectory traj = straight_traj(200);
    for (int t = 0; t < 200; ++t)
        traj.steps[t].state.heading = heading_from_angle(0.3 * std::sin(2.0 * M_PI * t / 20.0));
    const auto intervals = detect_zigzag(traj, cfg);
    REQUIRE_FALSE(intervals.empty());
    CHECK(total_flagged(intervals) > 100);
}

TEST_CASE("zigzag: a single isolated kink stays below the fraction rule") {
    LabelerConfig cfg;
    Trajectory traj = straight_traj(120);
    for (int t = 60; t < 120; ++t) traj.steps[t].state.heading = heading_from_angle(0.5);
    // Only ~2*w steps around the kink can be marked: fraction <= 4/40 <= 0.10.
    CHECK(detect_zigzag(traj, cfg).empty());
}

TEST_CASE("braking: the linear-deceleration formula case") {
    // V = 20 - 2t m/s with dt = 0.1: per-index speed 20 - 0.2*i, smoothed
    // deceleration exactly -2.0 m/s^2 on the interior.
    LabelerConfig cfg;
    Trajectory traj = straight_traj(30);
    for (int t = 0; t < 30; ++t) traj.steps[t].state.speed = 20.0 - 0.2 * t;

    CHECK(detect_sudden_braking(traj, cfg).empty());  // -2.0 not below -3.0

    cfg.braking_threshold = -1.5;
    const auto intervals = detect_sudden_braking(traj, cfg);
    REQUIRE(intervals.size() == 1);
    // With w_b = 5 and len 30, SA is defined for i in [5, 24] (two
    // half-window passes shave 5 indices off each end).
    CHECK(intervals[0].first == 5);
    CHECK(intervals[0].second == 25);

    // Pin the interior value: flips exactly around -2.0.
    cfg.braking_threshold = -2.0 + 1e-9;
    CHECK_FALSE(detect_sudden_braking(traj, cfg).empty());
    cfg.braking_threshold = -2.0 - 1e-9;
    CHECK(detect_sudden_braking(traj, cfg).empty());
}

TEST_CASE("braking: constant speed is clean") {
    CHECK(detect_sudden_braking(straight_traj(50), LabelerConfig{}).empty());
}

TEST_CASE("braking: dt comes from trajectory meta when present") {
    LabelerConfig cfg;
    cfg.braking_threshold = -1.5;
    Trajectory traj = straight_traj(30);
    for (int t = 0; t < 30; ++t) traj.steps[t].state.speed = 20.0 - 0.2 * t;
    CHECK_FALSE(detect_sudden_braking(traj, cfg).empty());
    traj.meta["dt"] = 0.2;  // halves the implied deceleration to -1.0
    CHECK(detect_sudden_braking(traj, cfg).empty());
}

TEST_CASE("braking: threshold monotonicity") {
    // Mixed profile: cruise, brake hard, recover.
    Trajectory traj = straight_traj(80);
    double v = 18.0;
    for (int t = 0; t < 80; ++t) {
        traj.steps[t].state.speed = v;
        if (t >= 30 && t < 45) v -= 0.45;         // -4.5 m/s^2
        else if (t >= 45 && v < 18.0) v += 0.1;
    }
    LabelerConfig strict, loose;
    strict.braking_threshold = -4.0;
    loose.braking_threshold = -2.0;
    const auto narrow = detect_sudden_braking(traj, strict);
    const auto wide = detect_sudden_braking(traj, loose);
    REQUIRE_FALSE(narrow.empty());
    CHECK(total_flagged(narrow) <= total_flagged(wide));
    for (const auto& interval : narrow) CHECK(contained_in_some(interval, wide));
}

TEST_CASE("turns: perpendicular heading change evaluates to 10*pi") {
    LabelerConfig cfg;
    Trajectory traj = straight_traj(3, 2.0);
    traj.steps[1].state.heading = {0.0, 1.0};
    traj.steps[2].state.heading = {0.0, 1.0};
    const auto intervals = detect_sudden_turns(traj, cfg);
    REQUIRE(intervals.size() == 1);
    CHECK(intervals[0] == Interval{1, 2});

    // The flag flips exactly at tau = (pi/2)/0.1 * 2 = 10*pi.
    cfg.turn_threshold = 10.0 * M_PI - 1e-9;
    CHECK_FALSE(detect_sudden_turns(traj, cfg).empty());
    cfg.turn_threshold = 10.0 * M_PI + 1e-9;
    CHECK(detect_sudden_turns(traj, cfg).empty());
}

TEST_CASE("turns: identical headings produce nothing") {
    CHECK(detect_sudden_turns(straight_traj(20), LabelerConfig{}).empty());
}

TEST_CASE("turns: slightly non-unit headings are clipped, not fatal") {
    Trajectory traj = straight_traj(5);
    for (auto& step : traj.steps) step.state.heading = {1.0 + 2e-10, 0.0};
    CHECK_NOTHROW(detect_sudden_turns(traj, LabelerConfig{}));
    CHECK(detect_sudden_turns(traj, LabelerConfig{}).empty());
}

TEST_CASE("turns: raising the threshold never adds intervals") {
    Trajectory traj = straight_traj(60);
    for (int t = 0; t < 60; ++t)
        traj.steps[t].state.heading = heading_from_angle(0.05 * std::sin(0.4 * t));
    LabelerConfig low, high;
    low.turn_threshold = 0.8;
    high.turn_threshold = 2.0;
    const auto wide = detect_sudden_turns(traj, low);
    const auto narrow = detect_sudden_turns(traj, high);
    CHECK(total_flagged(narrow) <= total_flagged(wide));
    for (const auto& interval : narrow) CHECK(contained_in_some(interval, wide));
}

TEST_CASE("weaving: all-zero crossings are clean") {
    CHECK(detect_lane_weaving(straight_traj(100), LabelerConfig{}).empty());
}

TEST_CASE("weaving: the all-ones convolution case") {
    // len 50, w_l 5: M = 1 at all 46 valid positions; one interval of length
    // 46 > tau = 30, mapped to window centers [2, 48).
    LabelerConfig cfg;
    cfg.lane_window = 5;
    Trajectory traj = straight_traj(50);
    for (auto& step : traj.steps) step.obs.crossed_lane_line = true;
    const auto intervals = detect_lane_weaving(traj, cfg);
    REQUIRE(intervals.size() == 1);
    CHECK(intervals[0].first == 2);
    CHECK(intervals[0].second == 48);
    CHECK(intervals[0].second - intervals[0].first == 46);
}

TEST_CASE("weaving: sparse crossings stay below the mode threshold") {
    LabelerConfig cfg;  // w_l = 20
    Trajectory traj = straight_traj(200);
    for (int t = 0; t < 200; t += 10) traj.steps[t].obs.crossed_lane_line = true;
    // Max windowed mean is 2/20 = 0.1 <= 0.5.
    CHECK(detect_lane_weaving(traj, cfg).empty());
}

TEST_CASE("weaving: an exact 0.5 mean does not qualify (strict threshold)") {
    LabelerConfig cfg;  // w_l = 20
    Trajectory traj = straight_traj(200);
    for (int t = 0; t < 200; t += 2) traj.steps[t].obs.crossed_lane_line = true;
    CHECK(detect_lane_weaving(traj, cfg).empty());
}

TEST_CASE("tailgating: clear road, short bursts, and sustained proximity") {
    LabelerConfig cfg;
    CHECK(detect_tailgating(straight_traj(100), cfg).empty());

    // 2 m forward reading (2/50 = 0.04 normalized) sustained for 25 steps.
    Trajectory traj = straight_traj(100);
    for (int t = 40; t < 65; ++t) traj.steps[t].obs.lidar[0] = 0.04;
    auto intervals = detect_tailgating(traj, cfg);
    REQUIRE(intervals.size() == 1);
    CHECK(intervals[0] == Interval{40, 65});

    // The same reading for 5 steps is below the duration requirement.
    traj = straight_traj(100);
    for (int t = 40; t < 45; ++t) traj.steps[t].obs.lidar[0] = 0.04;
    CHECK(detect_tailgating(traj, cfg).empty());

    // Exactly 20 steps is long enough ("shorter than" is discarded).
    traj = straight_traj(100);
    for (int t = 40; t < 60; ++t) traj.steps[t].obs.lidar[0] = 0.04;
    CHECK(detect_tailgating(traj, cfg).size() == 1);
}

TEST_CASE("tailgating: only the +-30 degree cone counts") {
    LabelerConfig cfg;
    // 24 beams at 15-degree spacing: beams 0,1,2 and 22,23 are in the cone.
    Trajectory traj = straight_traj(100);
    for (int t = 0; t < 50; ++t) traj.steps[t].obs.lidar[3] = 0.02;  // 45 degrees
    CHECK(detect_tailgating(traj, cfg).empty());
    for (int t = 0; t < 50; ++t) traj.steps[t].obs.lidar[12] = 0.02;  // rear
    CHECK(detect_tailgating(traj, cfg).empty());
    for (int t = 0; t < 50; ++t) traj.steps[t].obs.lidar[2] = 0.02;  // 30 degrees
    CHECK(detect_tailgating(traj, cfg).size() == 1);
    Trajectory other = straight_traj(100);
    for (int t = 0; t < 50; ++t) other.steps[t].obs.lidar[22] = 0.02;  // -30 degrees
    CHECK(detect_tailgating(other, cfg).size() == 1);
}

TEST_CASE("tailgating: range conversion uses the meta lidar_range") {
    LabelerConfig cfg;
    Trajectory traj = straight_traj(100);
    // 0.04 normalized is 2 m at range 50 but 8 m at range 200.
    for (int t = 0; t < 40; ++t) traj.steps[t].obs.lidar[0] = 0.04;
    CHECK_FALSE(detect_tailgating(traj, cfg).empty());
    traj.meta["lidar_range"] = 200.0;
    CHECK(detect_tailgating(traj, cfg).empty());
}

TEST_CASE("label_trajectory combines detectors and the crash group") {
    LabelerConfig cfg;
    Trajectory quiet = straight_traj(100);
    auto labels = label_trajectory(quiet, cfg);
    CHECK_FALSE(labels.is_anomalous());

    Trajectory crash = straight_traj(100);
    crash.wct = WctEvent{WctKind::kCrash, 99};
    crash.wct_label = 1;
    labels = label_trajectory(crash, cfg);
    REQUIRE(labels.group(AnomalyGroup::kCrash).size() == 1);
    CHECK(labels.group(AnomalyGroup::kCrash)[0] == Interval{99, 100});
    CHECK(labels.is_anomalous());

    Trajectory offroad = straight_traj(100);
    offroad.wct = WctEvent{WctKind::kOffRoad, 99};
    offroad.wct_label = 1;
    labels = label_trajectory(offroad, cfg);
    CHECK(labels.group(AnomalyGroup::kCrash).empty());
}

TEST_CASE("labeling is pure: same input gives identical output") {
    LabelerConfig cfg;
    Trajectory traj = straight_traj(120);
    for (int t = 0; t < 120; ++t) {
        traj.steps[t].state.heading = heading_from_angle(0.2 * std::sin(0.3 * t));
        traj.steps[t].state.speed = 12.0 + 3.0 * std::sin(0.05 * t);
    }
    const auto a = label_trajectory(traj, cfg);
    const auto b = label_trajectory(traj, cfg);
    CHECK(a.intervals == b.intervals);
}
