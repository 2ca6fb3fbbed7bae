#include "trapkit/trajectory_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace trapkit {

std::string format_number(double value) {
    if (!std::isfinite(value)) throw IoError("cannot serialize non-finite number");
    if (value == 0.0) return "0";  // folds -0
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", value);
    return buf;
}

namespace {

void append_string(std::string& out, const std::string& s) {
    out += '"';
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    out += '"';
}

void append_number_array(std::string& out, const std::vector<double>& values) {
    out += '[';
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += format_number(values[i]);
    }
    out += ']';
}

using nlohmann::json;

[[noreturn]] void fail(const std::string& what) { throw IoError(what); }

double number_field(const json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end() || !it->is_number()) fail(std::string("missing numeric field ") + key);
    return it->get<double>();
}

std::vector<double> number_array(const json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end() || !it->is_array()) fail(std::string("missing array field ") + key);
    std::vector<double> out;
    out.reserve(it->size());
    for (const auto& v : *it) {
        if (!v.is_number()) fail(std::string("non-numeric entry in ") + key);
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace

std::string to_jsonl_line(const Trajectory& traj) {
    std::string out;
    out.reserve(256 + traj.steps.size() * 512);

    out += "{\"id\":";
    append_string(out, traj.id);
    out += ",\"seed\":" + std::to_string(traj.seed);

    out += ",\"meta\":{";
    bool first = true;
    for (const auto& [key, value] : traj.meta) {  // std::map: sorted, canonical
        if (!first) out += ',';
        first = false;
        append_string(out, key);
        out += ':';
        if (const double* num = std::get_if<double>(&value)) {
            out += format_number(*num);
        } else {
            append_string(out, std::get<std::string>(value));
        }
    }
    out += '}';

    out += ",\"wct\":";
    if (traj.wct) {
        out += "{\"kind\":";
        append_string(out, std::string(wct_kind_name(traj.wct->kind)));
        out += ",\"step\":" + std::to_string(traj.wct->step) + "}";
    } else {
        out += "null";
    }
    out += ",\"wct_label\":" + std::to_string(traj.wct_label);

    out += ",\"anomaly_labels\":{";
    for (int g = 0; g < kAnomalyGroupCount; ++g) {
        if (g) out += ',';
        append_string(out, std::string(kAnomalyGroupNames[g]));
        out += ":[";
        const auto& list = traj.anomaly_labels.intervals[g];
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (i) out += ',';
            out += '[' + std::to_string(list[i].first) + ',' + std::to_string(list[i].second) + ']';
        }
        out += ']';
    }
    out += '}';

    if (traj.src) {
        out += ",\"src\":";
        append_string(out, *traj.src);
    }
    if (traj.prefix_len) out += ",\"prefix_len\":" + std::to_string(*traj.prefix_len);

    out += ",\"steps\":[";
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
        const TimeStep& step = traj.steps[i];
        if (i) out += ',';
        out += "{\"t\":" + std::to_string(step.t);
        out += ",\"obs\":{\"lidar\":";
        append_number_array(out, step.obs.lidar);
        out += ",\"lane\":";
        append_number_array(out, step.obs.lane);
        out += ",\"side\":";
        append_number_array(out, step.obs.side);
        out += ",\"crossed\":";
        out += step.obs.crossed_lane_line ? "true" : "false";
        out += "},\"state\":{\"x\":" + format_number(step.state.position.x);
        out += ",\"y\":" + format_number(step.state.position.y);
        out += ",\"hx\":" + format_number(step.state.heading.x);
        out += ",\"hy\":" + format_number(step.state.heading.y);
        out += ",\"v\":" + format_number(step.state.speed);
        out += ",\"lane\":" + std::to_string(step.state.lane_index);
        out += "},\"action\":{\"steer\":" + format_number(step.action.steer);
        out += ",\"accel\":" + format_number(step.action.accel);
        out += "},\"reward\":";
        out += step.reward ? format_number(*step.reward) : "null";
        out += '}';
    }
    out += "]}";
    return out;
}

Trajectory trajectory_from_jsonl_line(const std::string& line) {
    json root = json::parse(line);  // throws json::parse_error on bad input
    if (!root.is_object()) fail("record is not an object");

    Trajectory traj;
    if (!root.contains("id") || !root["id"].is_string()) fail("missing string field id");
    traj.id = root["id"].get<std::string>();
    if (!root.contains("seed") || !root["seed"].is_number()) fail("missing numeric field seed");
    traj.seed = root["seed"].get<std::uint64_t>();

    if (root.contains("meta") && root["meta"].is_object()) {
        for (const auto& [key, value] : root["meta"].items()) {
            if (value.is_number()) {
                traj.meta[key] = value.get<double>();
            } else if (value.is_string()) {
                traj.meta[key] = value.get<std::string>();
            } else {
                fail("meta." + key + " is neither number nor string");
            }
        }
    }

    if (root.contains("wct") && !root["wct"].is_null()) {
        const json& w = root["wct"];
        if (!w.is_object() || !w.contains("kind") || !w.contains("step")) fail("malformed wct");
        const auto kind = wct_kind_from_name(w["kind"].get<std::string>());
        if (!kind) fail("unknown wct kind " + w["kind"].get<std::string>());
        traj.wct = WctEvent{*kind, w["step"].get<int>()};
    }
    traj.wct_label = static_cast<int>(number_field(root, "wct_label"));

    if (root.contains("anomaly_labels") && root["anomaly_labels"].is_object()) {
        const json& labels = root["anomaly_labels"];
        for (int g = 0; g < kAnomalyGroupCount; ++g) {
            const std::string name(kAnomalyGroupNames[g]);
            if (!labels.contains(name)) continue;
            for (const auto& pair : labels[name]) {
                if (!pair.is_array() || pair.size() != 2) fail("malformed interval in " + name);
                traj.anomaly_labels.intervals[g].emplace_back(pair[0].get<int>(),
                                                              pair[1].get<int>());
            }
        }
    }

    if (root.contains("src") && root["src"].is_string()) traj.src = root["src"].get<std::string>();
    if (root.contains("prefix_len") && root["prefix_len"].is_number())
        traj.prefix_len = root["prefix_len"].get<int>();

    if (!root.contains("steps") || !root["steps"].is_array()) fail("missing array field steps");
    traj.steps.reserve(root["steps"].size());
    for (const json& s : root["steps"]) {
        TimeStep step;
        step.t = static_cast<int>(number_field(s, "t"));
        if (!s.contains("obs") || !s["obs"].is_object()) fail("missing obs");
        const json& obs = s["obs"];
        step.obs.lidar = number_array(obs, "lidar");
        step.obs.lane = number_array(obs, "lane");
        step.obs.side = number_array(obs, "side");
        if (!obs.contains("crossed") || !obs["crossed"].is_boolean()) fail("missing obs.crossed");
        step.obs.crossed_lane_line = obs["crossed"].get<bool>();

        if (!s.contains("state") || !s["state"].is_object()) fail("missing state");
        const json& st = s["state"];
        step.state.position = {number_field(st, "x"), number_field(st, "y")};
        step.state.heading = {number_field(st, "hx"), number_field(st, "hy")};
        step.state.speed = number_field(st, "v");
        step.state.lane_index = static_cast<int>(number_field(st, "lane"));

        if (!s.contains("action") || !s["action"].is_object()) fail("missing action");
        step.action.steer = number_field(s["action"], "steer");
        step.action.accel = number_field(s["action"], "accel");

        if (s.contains("reward") && !s["reward"].is_null()) {
            if (!s["reward"].is_number()) fail("reward is not a number");
            step.reward = s["reward"].get<double>();
        }
        traj.steps.push_back(std::move(step));
    }
    return traj;
}

std::size_t write_trajectories(const std::string& path, std::span<const Trajectory> trajs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const Trajectory& traj : trajs) {
        out << to_jsonl_line(traj) << '\n';
        if (!out) throw IoError("write failure: " + path);
    }
    out.flush();
    if (!out) throw IoError("write failure: " + path);
    return trajs.size();
}

std::vector<Trajectory> read_trajectories(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::vector<Trajectory> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            Trajectory traj = trajectory_from_jsonl_line(line);
            const auto violations = validate(traj);
            if (!violations.empty()) {
                throw IoError("line " + std::to_string(line_no) + ": invariant violation: " +
                              violations.front());
            }
            out.push_back(std::move(traj));
        } catch (const IoError& e) {
            const std::string what = e.what();
            if (what.rfind("line ", 0) == 0) throw;
            throw IoError("line " + std::to_string(line_no) + ": " + what);
        } catch (const nlohmann::json::exception& e) {
            throw IoError("line " + std::to_string(line_no) + ": parse error: " + e.what());
        }
    }
    return out;
}

}  // namespace trapkit
