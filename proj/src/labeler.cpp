#include "trapkit/labeler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace trapkit {

namespace {

double trajectory_dt(const Trajectory& traj, const LabelerConfig& cfg) {
    return meta_number(traj.meta, "dt", cfg.dt);
}

double trajectory_lidar_range(const Trajectory& traj) {
    return meta_number(traj.meta, "lidar_range", 50.0);
}

// Maximal contiguous runs of set flags, as half-open intervals.
std::vector<Interval> intervals_from_flags(const std::vector<char>& flags) {
    std::vector<Interval> out;
    const int n = static_cast<int>(flags.size());
    int start = -1;
    for (int i = 0; i < n; ++i) {
        if (flags[i] && start < 0) start = i;
        if (!flags[i] && start >= 0) {
            out.emplace_back(start, i);
            start = -1;
        }
    }
    if (start >= 0) out.emplace_back(start, n);
    return out;
}

}  // namespace

void validate_config(const LabelerConfig& cfg) {
    auto fail = [](const char* what) { throw std::invalid_argument(what); };
    if (cfg.zigzag_window < 2) fail("zigzag_window must be >= 2");
    if (cfg.zigzag_deriv_window < 1) fail("zigzag_deriv_window must be >= 1");
    if (!(cfg.zigzag_curvature_threshold > 0.0) || !std::isfinite(cfg.zigzag_curvature_threshold))
        fail("zigzag_curvature_threshold must be finite and positive");
    if (!(cfg.zigzag_fraction > 0.0) || cfg.zigzag_fraction > 1.0)
        fail("zigzag_fraction must be in (0,1]");
    if (cfg.braking_window < 2) fail("braking_window must be >= 2");
    if (cfg.braking_window % 2 == 0) fail("braking_window must be odd");
    if (!std::isfinite(cfg.braking_threshold)) fail("braking_threshold must be finite");
    if (!(cfg.turn_threshold > 0.0) || !std::isfinite(cfg.turn_threshold))
        fail("turn_threshold must be positive");
    if (cfg.lane_window < 2) fail("lane_window must be >= 2");
    if (cfg.lane_interval_threshold < 1) fail("lane_interval_threshold must be >= 1");
    if (!(cfg.proximity_threshold > 0.0) || !std::isfinite(cfg.proximity_threshold))
        fail("proximity_threshold must be positive");
    if (cfg.proximity_duration < 1) fail("proximity_duration must be >= 1");
    if (!(cfg.dt > 0.0)) fail("dt must be positive");
}

std::vector<double> curvature_series(std::span<const Vec2> headings, int window) {
    const int n = static_cast<int>(headings.size());
    const int w = window;
    if (w < 1) throw std::invalid_argument("curvature window must be >= 1");
    if (n < 2 * w + 1) throw std::invalid_argument("too few headings for curvature window");

    std::vector<double> out;
    out.reserve(n - 2 * w);
    for (int i = w; i < n - w; ++i) {
        // First and second central differences; the dt factors cancel in k,
        // so steps are treated as unit-spaced.
        const Vec2 d1 = (headings[i + w] - headings[i - w]) * (1.0 / (2.0 * w));
        const Vec2 d2 = (headings[i + w] - headings[i] * 2.0 + headings[i - w]) *
                        (1.0 / (double(w) * w));
        const double speed_sq = d1.dot(d1);
        const double denom = speed_sq * std::sqrt(speed_sq);
        if (denom < 1e-9) {
            out.push_back(0.0);
            continue;
        }
        out.push_back(std::abs(d1.cross(d2)) / denom);
    }
    return out;
}

std::vector<Interval> detect_zigzag(const Trajectory& traj, const LabelerConfig& cfg) {
    const int n = traj.length();
    const int w = cfg.zigzag_deriv_window;
    if (n < 2 * w + 1 || n < cfg.zigzag_window) return {};

    std::vector<Vec2> headings;
    headings.reserve(n);
    for (const TimeStep& step : traj.steps) headings.push_back(step.state.heading);
    const std::vector<double> k = curvature_series(headings, w);

    std::vector<int> marked(n + 1, 0);  // prefix sums of the marked indicator
    for (int i = 0; i < n; ++i) {
        const bool hit =
            i >= w && i < n - w && k[i - w] > cfg.zigzag_curvature_threshold;
        marked[i + 1] = marked[i] + (hit ? 1 : 0);
    }

    // Union of all qualifying sliding windows, merging as we sweep.
    std::vector<Interval> out;
    const int wz = cfg.zigzag_window;
    for (int j = 0; j + wz <= n; ++j) {
        const double fraction = double(marked[j + wz] - marked[j]) / wz;
        if (fraction <= cfg.zigzag_fraction) continue;
        if (!out.empty() && j <= out.back().second) {
            out.back().second = j + wz;
        } else {
            out.emplace_back(j, j + wz);
        }
    }
    return out;
}

std::vector<Interval> detect_sudden_braking(const Trajectory& traj, const LabelerConfig& cfg) {
    const int n = traj.length();
    const int wb = cfg.braking_window;
    if (n <= wb) return {};
    const double dt = trajectory_dt(traj, cfg);
    const int hw = (wb - 1) / 2;

    // Half-window speed difference: V at the half-integer offsets i +- w/2 is
    // linearly interpolated between the neighboring samples.
    std::vector<double> accel(n, std::numeric_limits<double>::quiet_NaN());
    for (int i = hw + 1; i + hw + 1 < n; ++i) {
        const double ahead = 0.5 * (traj.steps[i + hw].state.speed +
                                    traj.steps[i + hw + 1].state.speed);
        const double behind = 0.5 * (traj.steps[i - hw].state.speed +
                                     traj.steps[i - hw - 1].state.speed);
        accel[i] = (ahead - behind) / (wb * dt);
    }

    // Centered moving average over w_b, defined where the full window is.
    std::vector<char> flags(n, 0);
    for (int i = 0; i < n; ++i) {
        if (i - hw < 0 || i + hw >= n) continue;
        double sum = 0.0;
        bool defined = true;
        for (int j = i - hw; j <= i + hw; ++j) {
            if (std::isnan(accel[j])) {
                defined = false;
                break;
            }
            sum += accel[j];
        }
        if (!defined) continue;
        const double smoothed = sum / wb;
        flags[i] = smoothed < cfg.braking_threshold;
    }
    return intervals_from_flags(flags);
}

std::vector<Interval> detect_sudden_turns(const Trajectory& traj, const LabelerConfig& cfg) {
    const int n = traj.length();
    if (n < 3) return {};
    const double dt = trajectory_dt(traj, cfg);

    std::vector<char> flags(n, 0);
    for (int i = 1; i + 1 < n; ++i) {
        const Vec2 prev = traj.steps[i - 1].state.heading.normalized();
        const Vec2 curr = traj.steps[i].state.heading.normalized();
        const double dot = std::clamp(prev.dot(curr), -1.0, 1.0);
        const double dtheta = std::acos(dot);
        const double a_lat = (dtheta / dt) * traj.steps[i + 1].state.speed;
        flags[i] = std::abs(a_lat) > cfg.turn_threshold;
    }
    return intervals_from_flags(flags);
}

std::vector<Interval> detect_lane_weaving(const Trajectory& traj, const LabelerConfig& cfg) {
    const int n = traj.length();
    const int wl = cfg.lane_window;
    if (n < wl) return {};

    std::vector<int> prefix(n + 1, 0);
    for (int i = 0; i < n; ++i)
        prefix[i + 1] = prefix[i] + (traj.steps[i].obs.crossed_lane_line ? 1 : 0);

    // Valid-mode convolution with the length-w_l averaging kernel.
    const int m = n - wl + 1;
    std::vector<char> over(m, 0);
    for (int j = 0; j < m; ++j) {
        const double mean = double(prefix[j + wl] - prefix[j]) / wl;
        over[j] = mean > 0.5;
    }

    std::vector<Interval> out;
    for (Interval run : intervals_from_flags(over)) {
        if (run.second - run.first <= cfg.lane_interval_threshold) continue;
        // Map convolution indices back to the step indices of window centers.
        out.emplace_back(run.first + wl / 2, run.second + wl / 2);
    }
    return out;
}

std::vector<Interval> detect_tailgating(const Trajectory& traj, const LabelerConfig& cfg) {
    const int n = traj.length();
    if (n == 0 || traj.steps[0].obs.lidar.empty()) return {};
    const double range = trajectory_lidar_range(traj);
    const int beam_count = static_cast<int>(traj.steps[0].obs.lidar.size());

    // Beams within +-30 degrees of straight ahead (beam k at 2*pi*k/n).
    std::vector<int> cone;
    for (int k = 0; k < beam_count; ++k) {
        double angle = 2.0 * M_PI * k / beam_count;
        if (angle > M_PI) angle -= 2.0 * M_PI;
        if (std::abs(angle) <= M_PI / 6.0 + 1e-12) cone.push_back(k);
    }
    if (cone.empty()) return {};

    std::vector<char> flags(n, 0);
    for (int i = 0; i < n; ++i) {
        const auto& lidar = traj.steps[i].obs.lidar;
        double nearest = std::numeric_limits<double>::infinity();
        for (int k : cone)
            if (k < static_cast<int>(lidar.size())) nearest = std::min(nearest, lidar[k]);
        flags[i] = nearest * range < cfg.proximity_threshold;
    }

    std::vector<Interval> out;
    for (Interval run : intervals_from_flags(flags))
        if (run.second - run.first >= cfg.proximity_duration) out.push_back(run);
    return out;
}

AnomalyLabelSet label_trajectory(const Trajectory& traj, const LabelerConfig& cfg) {
    AnomalyLabelSet labels;
    labels.group(AnomalyGroup::kZigzag) = detect_zigzag(traj, cfg);
    labels.group(AnomalyGroup::kSuddenBraking) = detect_sudden_braking(traj, cfg);
    labels.group(AnomalyGroup::kSuddenTurn) = detect_sudden_turns(traj, cfg);
    labels.group(AnomalyGroup::kLaneWeaving) = detect_lane_weaving(traj, cfg);
    labels.group(AnomalyGroup::kTailgating) = detect_tailgating(traj, cfg);
    if (traj.wct && traj.wct->kind == WctKind::kCrash && traj.length() > 0) {
        labels.group(AnomalyGroup::kCrash) = {{traj.length() - 1, traj.length()}};
    }
    return labels;
}

}  // namespace trapkit
