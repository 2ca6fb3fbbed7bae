// Rule-based anomaly labeling over finished trajectories.
//
// Labels are evaluation ground truth only; nothing downstream trains on them.
// All detectors are pure functions of (trajectory, config); the step duration
// dt is taken from the trajectory's meta when present, else from the config.

#pragma once

#include <span>
#include <vector>

#include "trapkit/geometry.hpp"
#include "trapkit/trajectory.hpp"

namespace trapkit {

struct LabelerConfig {
    // Zigzag: curvature of the heading curve, marked-step fraction rule.
    int zigzag_window = 40;                    // sliding fraction window w_z
    double zigzag_curvature_threshold = 0.5;   // k_thr
    double zigzag_fraction = 0.10;
    int zigzag_deriv_window = 2;               // finite-difference half-window for k

    // Sudden braking: smoothed half-window speed differences.
    int braking_window = 5;                    // w_b, odd
    double braking_threshold = -3.0;           // m/s^2

    // Sudden turns: per-step angular change times speed.
    double turn_threshold = 0.8;               // m/s^2

    // Lane weaving: convolved lane-crossing flags.
    int lane_window = 20;                      // w_l
    int lane_interval_threshold = 30;          // steps

    // Tailgating: forward-cone proximity.
    double proximity_threshold = 3.0;          // meters
    int proximity_duration = 20;               // steps

    double dt = 0.1;                           // fallback when meta carries no dt
};

// Throws std::invalid_argument when an invariant fails (e.g. even w_b).
void validate_config(const LabelerConfig& cfg);

// Curvature k_i of the heading curve by central finite differences over
// `window` steps; defined for indices [window, n - window) (boundaries
// omitted), 0 where the denominator falls below 1e-9.  The step duration
// cancels out of the ratio, so none is taken.  Throws std::invalid_argument
// for fewer than 2*window + 1 headings.
std::vector<double> curvature_series(std::span<const Vec2> headings, int window);

std::vector<Interval> detect_zigzag(const Trajectory& traj, const LabelerConfig& cfg);
std::vector<Interval> detect_sudden_braking(const Trajectory& traj, const LabelerConfig& cfg);
std::vector<Interval> detect_sudden_turns(const Trajectory& traj, const LabelerConfig& cfg);
std::vector<Interval> detect_lane_weaving(const Trajectory& traj, const LabelerConfig& cfg);
std::vector<Interval> detect_tailgating(const Trajectory& traj, const LabelerConfig& cfg);

// Runs all five detectors and adds the crash group ([len-1, len)) when the
// trajectory terminates in a crash.
AnomalyLabelSet label_trajectory(const Trajectory& traj, const LabelerConfig& cfg);

}  // namespace trapkit
