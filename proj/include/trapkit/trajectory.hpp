// Core trajectory data model shared by every module.
//
// All types are immutable value data once constructed; they carry no behavior
// beyond small accessors, so they are safe to copy, share, and move between
// threads.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "trapkit/geometry.hpp"

namespace trapkit {

struct KinematicState {
    Vec2 position;        // meters
    Vec2 heading;         // unit vector (hx, hy)
    double speed = 0.0;   // m/s, >= 0
    int lane_index = 0;
};

struct Observation {
    std::vector<double> lidar;  // normalized distances in [0,1]
    std::vector<double> lane;   // lane-line detectors, normalized
    std::vector<double> side;   // road-boundary detectors, normalized
    bool crossed_lane_line = false;
};

struct Action {
    double steer = 0.0;  // [-1, 1]
    double accel = 0.0;  // [-1, 1]
};

struct TimeStep {
    int t = 0;
    Observation obs;
    KinematicState state;
    Action action;
    std::optional<double> reward;  // inferred reward, present once annotated
};

enum class WctKind { kCrash, kOffRoad };

std::string_view wct_kind_name(WctKind kind);
std::optional<WctKind> wct_kind_from_name(std::string_view name);

struct WctEvent {
    WctKind kind = WctKind::kCrash;
    int step = 0;
};

// Half-open step intervals [start, end).
using Interval = std::pair<int, int>;

enum class AnomalyGroup : int {
    kZigzag = 0,
    kSuddenBraking,
    kSuddenTurn,
    kLaneWeaving,
    kTailgating,
    kCrash,
};

inline constexpr int kAnomalyGroupCount = 6;
inline constexpr std::array<std::string_view, kAnomalyGroupCount> kAnomalyGroupNames = {
    "zigzag", "sudden_braking", "sudden_turn", "lane_weaving", "tailgating", "crash"};

struct AnomalyLabelSet {
    std::array<std::vector<Interval>, kAnomalyGroupCount> intervals;

    const std::vector<Interval>& group(AnomalyGroup g) const {
        return intervals[static_cast<int>(g)];
    }
    std::vector<Interval>& group(AnomalyGroup g) { return intervals[static_cast<int>(g)]; }

    bool is_anomalous() const {
        for (const auto& list : intervals)
            if (!list.empty()) return true;
        return false;
    }
};

// Scenario metadata values are numbers or short tags (e.g. the mix kind).
using MetaValue = std::variant<double, std::string>;
using MetaMap = std::map<std::string, MetaValue>;

double meta_number(const MetaMap& meta, const std::string& key, double fallback);
std::string meta_string(const MetaMap& meta, const std::string& key, std::string fallback);

struct Trajectory {
    std::string id;
    std::uint64_t seed = 0;
    std::vector<TimeStep> steps;
    std::optional<WctEvent> wct;
    int wct_label = 0;
    AnomalyLabelSet anomaly_labels;
    MetaMap meta;

    // Provenance, set only on dataset items derived from a source trajectory.
    std::optional<std::string> src;
    std::optional<int> prefix_len;

    int length() const { return static_cast<int>(steps.size()); }
    bool is_dataset_item() const { return prefix_len.has_value(); }
};

// Returns a list of human-readable invariant violations; empty means valid.
// Dataset items (prefix_len set) may carry wct_label = 1 without the terminal
// event, since prefix expansion drops the terminus step by construction.
std::vector<std::string> validate(const Trajectory& traj);

}  // namespace trapkit
