#include "trapkit/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string_view>

#include <json.hpp>

namespace trapkit {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const char* section,
                std::initializer_list<std::string_view> allowed) {
    for (const auto& item : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            throw std::invalid_argument("run config: unknown key \"" + item.key() + "\" in " +
                                        section);
    }
}

const json& section(const json& root, const char* name) {
    const json& obj = root.at(name);
    if (!obj.is_object())
        throw std::invalid_argument(std::string("run config: section ") + name +
                                    " must be an object");
    return obj;
}

template <typename T>
T field(const json& obj, const char* section_name, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument(std::string("run config: bad value for ") + section_name +
                                    "." + key);
    }
}

void parse_simulate(const json& obj, SimulateConfig& out) {
    check_keys(obj, "simulate",
               {"expert_count", "test_count", "epsilon_ladder", "test_clean_fraction",
                "scripted_kind"});
    out.expert_count = field(obj, "simulate", "expert_count", out.expert_count);
    out.test_count = field(obj, "simulate", "test_count", out.test_count);
    out.epsilon_ladder =
        field<std::vector<double>>(obj, "simulate", "epsilon_ladder", out.epsilon_ladder);
    out.test_clean_fraction =
        field(obj, "simulate", "test_clean_fraction", out.test_clean_fraction);
    if (obj.contains("scripted_kind")) {
        const auto name = field<std::string>(obj, "simulate", "scripted_kind", "");
        const auto kind = schedule_kind_from_name(name);
        if (!kind)
            throw std::invalid_argument("run config: unknown scripted_kind \"" + name + "\"");
        out.scripted_kind = *kind;
    }
}

void parse_scenario(const json& obj, ScenarioConfig& out) {
    check_keys(obj, "scenario",
               {"lane_count", "lane_width", "road_length", "traffic_count", "dt", "max_steps",
                "lidar_beam_count", "lidar_range", "lane_detector_count", "side_detector_count",
                "expert_action_noise"});
    out.lane_count = field(obj, "scenario", "lane_count", out.lane_count);
    out.lane_width = field(obj, "scenario", "lane_width", out.lane_width);
    out.road_length = field(obj, "scenario", "road_length", out.road_length);
    out.traffic_count = field(obj, "scenario", "traffic_count", out.traffic_count);
    out.dt = field(obj, "scenario", "dt", out.dt);
    out.max_steps = field(obj, "scenario", "max_steps", out.max_steps);
    out.lidar_beam_count = field(obj, "scenario", "lidar_beam_count", out.lidar_beam_count);
    out.lidar_range = field(obj, "scenario", "lidar_range", out.lidar_range);
    out.lane_detector_count =
        field(obj, "scenario", "lane_detector_count", out.lane_detector_count);
    out.side_detector_count =
        field(obj, "scenario", "side_detector_count", out.side_detector_count);
    out.expert_action_noise =
        field(obj, "scenario", "expert_action_noise", out.expert_action_noise);
}

void parse_labeler(const json& obj, LabelerConfig& out) {
    check_keys(obj, "labeler",
               {"zigzag_window", "zigzag_curvature_threshold", "zigzag_fraction",
                "zigzag_deriv_window", "braking_window", "braking_threshold", "turn_threshold",
                "lane_window", "lane_interval_threshold", "proximity_threshold",
                "proximity_duration", "dt"});
    out.zigzag_window = field(obj, "labeler", "zigzag_window", out.zigzag_window);
    out.zigzag_curvature_threshold =
        field(obj, "labeler", "zigzag_curvature_threshold", out.zigzag_curvature_threshold);
    out.zigzag_fraction = field(obj, "labeler", "zigzag_fraction", out.zigzag_fraction);
    out.zigzag_deriv_window =
        field(obj, "labeler", "zigzag_deriv_window", out.zigzag_deriv_window);
    out.braking_window = field(obj, "labeler", "braking_window", out.braking_window);
    out.braking_threshold = field(obj, "labeler", "braking_threshold", out.braking_threshold);
    out.turn_threshold = field(obj, "labeler", "turn_threshold", out.turn_threshold);
    out.lane_window = field(obj, "labeler", "lane_window", out.lane_window);
    out.lane_interval_threshold =
        field(obj, "labeler", "lane_interval_threshold", out.lane_interval_threshold);
    out.proximity_threshold =
        field(obj, "labeler", "proximity_threshold", out.proximity_threshold);
    out.proximity_duration = field(obj, "labeler", "proximity_duration", out.proximity_duration);
    out.dt = field(obj, "labeler", "dt", out.dt);
}

NoiseSpec parse_noise(const json& obj) {
    check_keys(obj, "noise", {"family", "intensity"});
    NoiseSpec spec;
    const auto family_name = field<std::string>(obj, "noise", "family", "gaussian");
    const auto family = noise_family_from_name(family_name);
    if (!family)
        throw std::invalid_argument("run config: unknown noise family \"" + family_name + "\"");
    spec.family = *family;
    const auto intensity_name = field<std::string>(obj, "noise", "intensity", "low");
    const auto intensity = noise_intensity_from_name(intensity_name);
    if (!intensity)
        throw std::invalid_argument("run config: unknown noise intensity \"" + intensity_name +
                                    "\"");
    spec.intensity = *intensity;
    return spec;
}

void parse_reward(const json& obj, RewardTrainConfig& out) {
    check_keys(obj, "reward",
               {"batch_pairs", "steps", "learning_rate", "snippets", "snippet_len"});
    out.batch_pairs = field(obj, "reward", "batch_pairs", out.batch_pairs);
    out.steps = field(obj, "reward", "steps", out.steps);
    out.learning_rate = field(obj, "reward", "learning_rate", out.learning_rate);
    out.snippets = field(obj, "reward", "snippets", out.snippets);
    out.snippet_len = field(obj, "reward", "snippet_len", out.snippet_len);
}

void parse_sampler(const json& obj, SamplerConfig& out) {
    check_keys(obj, "sampler", {"max_clip_length", "expansions"});
    out.max_clip_length = field(obj, "sampler", "max_clip_length", out.max_clip_length);
    out.expansions = field(obj, "sampler", "expansions", out.expansions);
}

void parse_classifier(const json& obj, ClassifierTrainConfig& out) {
    check_keys(obj, "classifier", {"batch", "epochs", "learning_rate", "val_fraction"});
    out.batch = field(obj, "classifier", "batch", out.batch);
    out.epochs = field(obj, "classifier", "epochs", out.epochs);
    out.learning_rate = field(obj, "classifier", "learning_rate", out.learning_rate);
    out.val_fraction = field(obj, "classifier", "val_fraction", out.val_fraction);
}

void parse_evaluation(const json& obj, EvalConfig& out) {
    check_keys(obj, "evaluation", {"threshold", "trim_steps", "ground_truth"});
    out.threshold = field(obj, "evaluation", "threshold", out.threshold);
    out.trim_steps = field(obj, "evaluation", "trim_steps", out.trim_steps);
    out.ground_truth = field(obj, "evaluation", "ground_truth", out.ground_truth);
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("run config: ") + e.what());
    }
    if (!root.is_object()) throw std::invalid_argument("run config: top level must be an object");
    check_keys(root, "run config",
               {"seed", "threads", "out_dir", "simulate", "scenario", "labeler", "noise",
                "reward", "sampler", "classifier", "evaluation"});

    RunConfig cfg;
    cfg.seed = field<std::uint64_t>(root, "run config", "seed", cfg.seed);
    cfg.threads = field(root, "run config", "threads", cfg.threads);
    cfg.out_dir = field<std::string>(root, "run config", "out_dir", cfg.out_dir);
    if (root.contains("simulate")) parse_simulate(section(root, "simulate"), cfg.simulate);
    if (root.contains("scenario")) parse_scenario(section(root, "scenario"), cfg.scenario);
    if (root.contains("labeler")) parse_labeler(section(root, "labeler"), cfg.labeler);
    if (root.contains("noise")) cfg.noise = parse_noise(section(root, "noise"));
    if (root.contains("reward")) parse_reward(section(root, "reward"), cfg.reward);
    if (root.contains("sampler")) parse_sampler(section(root, "sampler"), cfg.sampler);
    if (root.contains("classifier")) parse_classifier(section(root, "classifier"), cfg.classifier);
    if (root.contains("evaluation")) parse_evaluation(section(root, "evaluation"), cfg.evaluation);

    validate_run_config(cfg);
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("run config: cannot open " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str());
}

void validate_run_config(const RunConfig& cfg) {
    auto fail = [](const std::string& what) {
        throw std::invalid_argument("run config: " + what);
    };
    if (cfg.threads < 0) fail("threads must be >= 0");
    if (cfg.out_dir.empty()) fail("out_dir must be nonempty");
    if (cfg.simulate.expert_count < 2) fail("simulate.expert_count must be >= 2");
    if (cfg.simulate.test_count < 1) fail("simulate.test_count must be >= 1");
    if (cfg.simulate.epsilon_ladder.empty()) fail("simulate.epsilon_ladder must be nonempty");
    for (double eps : cfg.simulate.epsilon_ladder)
        if (!(eps >= 0.0 && eps <= 1.0)) fail("epsilon ladder entries must lie in [0, 1]");
    if (std::set<double>(cfg.simulate.epsilon_ladder.begin(),
                         cfg.simulate.epsilon_ladder.end())
            .size() < 2)
        fail("epsilon ladder needs at least two distinct levels");
    if (!(cfg.simulate.test_clean_fraction >= 0.0 && cfg.simulate.test_clean_fraction <= 1.0))
        fail("simulate.test_clean_fraction must lie in [0, 1]");
    validate_config(cfg.scenario);
    validate_config(cfg.labeler);
    if (cfg.reward.batch_pairs < 1) fail("reward.batch_pairs must be >= 1");
    if (cfg.reward.steps < 1) fail("reward.steps must be >= 1");
    if (!(cfg.reward.learning_rate > 0.0)) fail("reward.learning_rate must be > 0");
    if (cfg.reward.snippets && cfg.reward.snippet_len < 2)
        fail("reward.snippet_len must be >= 2");
    validate_sampler(cfg.sampler);
    if (cfg.classifier.batch < 1) fail("classifier.batch must be >= 1");
    if (cfg.classifier.epochs < 1) fail("classifier.epochs must be >= 1");
    if (!(cfg.classifier.learning_rate > 0.0)) fail("classifier.learning_rate must be > 0");
    if (!(cfg.classifier.val_fraction >= 0.0 && cfg.classifier.val_fraction < 1.0))
        fail("classifier.val_fraction must lie in [0, 1)");
    if (!(cfg.evaluation.threshold > 0.0 && cfg.evaluation.threshold < 1.0))
        fail("evaluation.threshold must lie in (0, 1)");
    if (cfg.evaluation.trim_steps < 0) fail("evaluation.trim_steps must be >= 0");
    if (cfg.evaluation.ground_truth != "or" && cfg.evaluation.ground_truth != "labels" &&
        cfg.evaluation.ground_truth != "wct")
        fail("evaluation.ground_truth must be \"or\", \"labels\", or \"wct\"");
}

}  // namespace trapkit
