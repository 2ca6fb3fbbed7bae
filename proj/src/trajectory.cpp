#include "trapkit/trajectory.hpp"

#include <cmath>
#include <sstream>

namespace trapkit {

std::string_view wct_kind_name(WctKind kind) {
    return kind == WctKind::kCrash ? "crash" : "off-road";
}

std::optional<WctKind> wct_kind_from_name(std::string_view name) {
    if (name == "crash") return WctKind::kCrash;
    if (name == "off-road") return WctKind::kOffRoad;
    return std::nullopt;
}

double meta_number(const MetaMap& meta, const std::string& key, double fallback) {
    const auto it = meta.find(key);
    if (it == meta.end()) return fallback;
    if (const double* v = std::get_if<double>(&it->second)) return *v;
    return fallback;
}

std::string meta_string(const MetaMap& meta, const std::string& key, std::string fallback) {
    const auto it = meta.find(key);
    if (it == meta.end()) return fallback;
    if (const std::string* v = std::get_if<std::string>(&it->second)) return *v;
    return fallback;
}

namespace {

bool in_unit_interval(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

void check_sensor(const std::vector<double>& values, const char* name, int t,
                  std::size_t expected, std::vector<std::string>& out) {
    if (values.size() != expected) {
        std::ostringstream msg;
        msg << "step " << t << ": obs." << name << " length " << values.size()
            << " != " << expected;
        out.push_back(msg.str());
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!in_unit_interval(values[i])) {
            std::ostringstream msg;
            msg << "step " << t << ": obs." << name << "[" << i << "] = " << values[i]
                << " outside [0,1]";
            out.push_back(msg.str());
        }
    }
}

}  // namespace

std::vector<std::string> validate(const Trajectory& traj) {
    std::vector<std::string> violations;
    auto add = [&violations](const std::string& msg) { violations.push_back(msg); };

    if (traj.steps.empty()) {
        add("steps: empty");
        return violations;
    }
    const int len = traj.length();

    // Sensor lengths must be consistent; meta pins them when present.
    const auto expect = [&](const char* key, std::size_t observed) {
        const double v = meta_number(traj.meta, key, static_cast<double>(observed));
        return static_cast<std::size_t>(v);
    };
    const std::size_t lidar_n = expect("lidar_beam_count", traj.steps[0].obs.lidar.size());
    const std::size_t lane_n = expect("lane_detector_count", traj.steps[0].obs.lane.size());
    const std::size_t side_n = expect("side_detector_count", traj.steps[0].obs.side.size());

    for (int i = 0; i < len; ++i) {
        const TimeStep& step = traj.steps[i];
        if (step.t != i) {
            add("step " + std::to_string(i) + ": t = " + std::to_string(step.t) +
                " != position " + std::to_string(i));
        }
        check_sensor(step.obs.lidar, "lidar", i, lidar_n, violations);
        check_sensor(step.obs.lane, "lane", i, lane_n, violations);
        check_sensor(step.obs.side, "side", i, side_n, violations);

        const double hnorm = step.state.heading.norm();
        if (!std::isfinite(hnorm) || std::abs(hnorm - 1.0) > 1e-6) {
            std::ostringstream msg;
            msg << "step " << i << ": state.heading norm " << hnorm << " != 1";
            add(msg.str());
        }
        if (!std::isfinite(step.state.speed) || step.state.speed < 0.0) {
            add("step " + std::to_string(i) + ": state.speed negative");
        }
        if (!std::isfinite(step.action.steer) || std::abs(step.action.steer) > 1.0 + 1e-12) {
            add("step " + std::to_string(i) + ": action.steer outside [-1,1]");
        }
        if (!std::isfinite(step.action.accel) || std::abs(step.action.accel) > 1.0 + 1e-12) {
            add("step " + std::to_string(i) + ": action.accel outside [-1,1]");
        }
        if (step.reward && !std::isfinite(*step.reward)) {
            add("step " + std::to_string(i) + ": reward not finite");
        }
    }

    if (traj.wct) {
        // Dataset items trimmed for evaluation keep the source's terminal
        // event as bookkeeping even though its step lies past the kept range.
        const bool trimmed_tail = traj.is_dataset_item() && traj.wct->step >= len;
        if (traj.wct->step != len - 1 && !trimmed_tail) {
            add("wct.step " + std::to_string(traj.wct->step) + " != final step " +
                std::to_string(len - 1));
        }
        if (traj.wct_label != 1) add("wct present but wct_label = 0");
    } else if (traj.wct_label != 0 && !traj.is_dataset_item()) {
        add("wct_label = 1 but wct absent");
    }
    if (traj.wct_label != 0 && traj.wct_label != 1) add("wct_label not binary");

    for (int g = 0; g < kAnomalyGroupCount; ++g) {
        const auto& list = traj.anomaly_labels.intervals[g];
        int prev_end = -1;
        for (const auto& [start, end] : list) {
            const std::string tag = std::string(kAnomalyGroupNames[g]);
            if (start < 0 || end > len || start >= end) {
                add("anomaly_labels." + tag + ": interval [" + std::to_string(start) + "," +
                    std::to_string(end) + ") outside [0," + std::to_string(len) + ")");
            }
            if (start < prev_end) add("anomaly_labels." + tag + ": overlapping intervals");
            prev_end = end;
        }
    }
    return violations;
}

}  // namespace trapkit
