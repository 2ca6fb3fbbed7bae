#include "trapkit/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "trapkit/classifier.hpp"
#include "trapkit/evaluation.hpp"
#include "trapkit/labeler.hpp"
#include "trapkit/log.hpp"
#include "trapkit/reward_learning.hpp"
#include "trapkit/rng.hpp"
#include "trapkit/simulator.hpp"
#include "trapkit/threading.hpp"
#include "trapkit/trajectory_io.hpp"
#include "trapkit/wct_dataset.hpp"

namespace trapkit {
namespace {

// Fixed artifact names under out_dir.
constexpr const char* kDemos = "demos.jsonl";
constexpr const char* kTest = "test.jsonl";
constexpr const char* kDemosLabeled = "demos_labeled.jsonl";
constexpr const char* kTestLabeled = "test_labeled.jsonl";
constexpr const char* kTestNoisy = "test_noisy.jsonl";
constexpr const char* kDisplacement = "displacement.csv";
constexpr const char* kRewardModel = "reward.json";
constexpr const char* kDemosAnnotated = "demos_annotated.jsonl";
constexpr const char* kTestAnnotated = "test_annotated.jsonl";
constexpr const char* kDataset = "dataset.jsonl";
constexpr const char* kClassifierModel = "classifier.json";
constexpr const char* kScores = "scores.csv";
constexpr const char* kMetrics = "metrics.json";
constexpr const char* kRoc = "roc.csv";
constexpr const char* kGroups = "groups.csv";

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << content;
    if (!out) throw IoError("write failed for " + path);
}

std::string format_summary(const char* fmt, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return std::string(buf);
}

MixSpec mix_from_name(const RunConfig& cfg, const std::string& name) {
    MixSpec mix;
    mix.epsilon_ladder = cfg.simulate.epsilon_ladder;
    mix.scripted_kind = cfg.simulate.scripted_kind;
    mix.test_clean_fraction = cfg.simulate.test_clean_fraction;
    if (name == "expert")
        mix.mode = MixSpec::Mode::kExpert;
    else if (name == "scripted")
        mix.mode = MixSpec::Mode::kScripted;
    else if (name == "test")
        mix.mode = MixSpec::Mode::kTest;
    else
        throw std::invalid_argument("unknown mix \"" + name + "\" (expert|scripted|test)");
    return mix;
}

// Stage seed bases keep clear of uint64 wraparound for any sane count.
std::uint64_t stage_seed(const RunConfig& cfg, std::string_view stage) {
    return derive_seed(cfg.seed, stage) & 0x7fffffffffffffffULL;
}

int truth_of(const Trajectory& traj, const std::string& mode) {
    if (mode == "labels") return traj.anomaly_labels.is_anomalous() ? 1 : 0;
    if (mode == "wct") return traj.wct_label;
    return traj.anomaly_labels.is_anomalous() || traj.wct_label == 1 ? 1 : 0;
}

// Scoring input: the terminal trim_steps are withheld when possible.
Trajectory eval_view(const Trajectory& traj, int trim_steps) {
    if (trim_steps < 1 || traj.length() <= trim_steps) return traj;
    return trim_for_eval(traj, trim_steps);
}

}  // namespace

std::string artifact_path(const RunConfig& cfg, const std::string& name) {
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text) {
    const auto sep = text.find("..");
    if (sep == std::string::npos)
        throw std::invalid_argument("seed range must look like A..B, got \"" + text + "\"");
    auto parse_part = [&](std::size_t begin, std::size_t end) {
        std::uint64_t value = 0;
        const char* first = text.data() + begin;
        const char* last = text.data() + end;
        const auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr != last || first == last)
            throw std::invalid_argument("bad seed range \"" + text + "\"");
        return value;
    };
    const std::uint64_t a = parse_part(0, sep);
    const std::uint64_t b = parse_part(sep + 2, text.size());
    if (a > b) throw std::invalid_argument("seed range must satisfy A <= B, got \"" + text + "\"");
    return {a, b};
}

std::string simulate_to_file(const RunConfig& cfg, std::uint64_t seed_begin,
                             std::uint64_t seed_end, const std::string& mix,
                             const std::string& out) {
    const MixSpec spec = mix_from_name(cfg, mix);
    log_debug("simulate: seeds [" + std::to_string(seed_begin) + ", " +
              std::to_string(seed_end) + ") -> " + out);
    const std::vector<Trajectory> trajs =
        seed_begin == seed_end
            ? std::vector<Trajectory>{}
            : generate_dataset(seed_begin, seed_end, cfg.scenario, spec, cfg.threads);
    std::ostringstream text;
    for (const Trajectory& traj : trajs) text << to_jsonl_line(traj) << "\n";
    write_text_file(out, text.str());
    return format_summary("simulate: %zu %s trajectories -> %s", trajs.size(), mix.c_str(),
                          out.c_str());
}

std::string label_file(const RunConfig& cfg, const std::string& in, const std::string& out) {
    std::vector<Trajectory> trajs = read_trajectories(in);
    parallel_for(trajs.size(), cfg.threads, [&](std::size_t i) {
        trajs[i].anomaly_labels = label_trajectory(trajs[i], cfg.labeler);
    });
    std::size_t anomalous = 0;
    for (const Trajectory& traj : trajs)
        if (traj.anomaly_labels.is_anomalous()) ++anomalous;
    write_trajectories(out, trajs);
    return format_summary("label: %zu/%zu trajectories anomalous -> %s", anomalous, trajs.size(),
                          out.c_str());
}

std::string noise_file(const RunConfig& cfg, const NoiseSpec& spec, const std::string& in,
                       const std::string& out, const std::string& displacement_out) {
    const std::vector<Trajectory> clean = read_trajectories(in);
    const std::vector<Trajectory> noisy = apply_noise(clean, spec, cfg.threads);
    std::vector<DisplacementReport> reports(clean.size());
    parallel_for(clean.size(), cfg.threads,
                 [&](std::size_t i) { reports[i] = displacement_metrics(clean[i], noisy[i]); });
    DisplacementReport mean;
    for (const DisplacementReport& r : reports) {
        mean.mse += r.mse;
        mean.mae += r.mae;
        mean.mean_displacement += r.mean_displacement;
        mean.dtw_distance += r.dtw_distance;
    }
    if (!reports.empty()) {
        const double n = static_cast<double>(reports.size());
        mean.mse /= n;
        mean.mae /= n;
        mean.mean_displacement /= n;
        mean.dtw_distance /= n;
    }
    write_trajectories(out, noisy);
    std::ostringstream csv;
    csv << "family,intensity,mse,mae,mean_displacement,dtw_distance\n";
    csv << noise_family_name(spec.family) << "," << noise_intensity_name(spec.intensity) << ","
        << format_number(mean.mse) << "," << format_number(mean.mae) << ","
        << format_number(mean.mean_displacement) << "," << format_number(mean.dtw_distance)
        << "\n";
    write_text_file(displacement_out, csv.str());
    return format_summary("noise: %s/%s over %zu trajectories, mean displacement %.4f -> %s",
                          std::string(noise_family_name(spec.family)).c_str(),
                          std::string(noise_intensity_name(spec.intensity)).c_str(), clean.size(),
                          mean.mean_displacement, out.c_str());
}

std::string train_reward_file(const RunConfig& cfg, const std::string& demos,
                              const std::string& out) {
    const std::vector<Trajectory> rollouts = read_trajectories(demos);
    const RankedDemos ranked = rank_rollouts(rollouts);
    RewardTrainConfig rcfg = cfg.reward;
    rcfg.seed = stage_seed(cfg, "train-reward");
    const RewardTrainResult result = train_reward(ranked, rcfg);
    write_text_file(out, reward_net_to_json(result.net));
    return format_summary("train-reward: loss %.4f -> %.4f over %d steps (%zu demos) -> %s",
                          result.initial_loss, result.final_loss, rcfg.steps, rollouts.size(),
                          out.c_str());
}

std::string annotate_file(const RunConfig& cfg, const std::string& in,
                          const std::string& reward_model, const std::string& out) {
    const RewardNet net = reward_net_from_json(read_text_file(reward_model));
    std::vector<Trajectory> trajs = read_trajectories(in);
    annotate_rewards(net, trajs, cfg.threads);
    write_trajectories(out, trajs);
    return format_summary("annotate: %zu trajectories -> %s", trajs.size(), out.c_str());
}

std::string build_dataset_file(const RunConfig& cfg, const std::string& in,
                               const std::string& out) {
    const std::vector<Trajectory> trajs = read_trajectories(in);
    SamplerConfig scfg = cfg.sampler;
    scfg.seed = stage_seed(cfg, "build-dataset");
    const WctDataset dataset = build_dataset(trajs, scfg, cfg.threads);
    write_trajectories(out, dataset.items);
    return format_summary("build-dataset: %zu items (%d positive / %d negative) from %zu -> %s",
                          dataset.items.size(), dataset.positives, dataset.negatives,
                          trajs.size(), out.c_str());
}

std::string train_classifier_file(const RunConfig& cfg, const std::string& data,
                                  const std::string& reward_model, const std::string& out) {
    const RewardNet net = reward_net_from_json(read_text_file(reward_model));
    WctDataset dataset;
    dataset.items = read_trajectories(data);
    // Re-annotation is idempotent: rewards are a pure function of the net.
    annotate_rewards(net, dataset.items, cfg.threads);
    for (const Trajectory& item : dataset.items)
        (item.wct_label == 1 ? dataset.positives : dataset.negatives) += 1;
    ClassifierTrainConfig ccfg = cfg.classifier;
    ccfg.seed = stage_seed(cfg, "train-classifier");
    const ClassifierTrainResult result = train_classifier(dataset, ccfg);
    write_text_file(out, classifier_to_json(result.model));
    return format_summary("train-classifier: best val F1 %.4f at epoch %d (%zu items) -> %s",
                          result.best_val_f1, result.best_epoch, dataset.items.size(),
                          out.c_str());
}

std::string score_file(const RunConfig& cfg, const std::string& model, const std::string& in,
                       const std::string& out) {
    const SequenceClassifier classifier = classifier_from_json(read_text_file(model));
    const std::vector<Trajectory> trajs = read_trajectories(in);
    const std::vector<double> scores = score_trajectories(classifier, trajs, cfg.threads);
    std::ostringstream csv;
    csv << "id,score\n";
    for (std::size_t i = 0; i < trajs.size(); ++i)
        csv << trajs[i].id << "," << format_number(scores[i]) << "\n";
    write_text_file(out, csv.str());
    return format_summary("score: %zu trajectories -> %s", trajs.size(), out.c_str());
}

std::string stage_simulate(const RunConfig& cfg) {
    const std::uint64_t expert_base = stage_seed(cfg, "simulate-expert");
    simulate_to_file(cfg, expert_base,
                     expert_base + static_cast<std::uint64_t>(cfg.simulate.expert_count),
                     "expert", artifact_path(cfg, kDemos));
    const std::uint64_t test_base = stage_seed(cfg, "simulate-test");
    simulate_to_file(cfg, test_base,
                     test_base + static_cast<std::uint64_t>(cfg.simulate.test_count), "test",
                     artifact_path(cfg, kTest));
    return format_summary("simulate: %d expert + %d test trajectories -> %s", //
                          cfg.simulate.expert_count, cfg.simulate.test_count,
                          cfg.out_dir.c_str());
}

std::string stage_label(const RunConfig& cfg) {
    const std::string a =
        label_file(cfg, artifact_path(cfg, kDemos), artifact_path(cfg, kDemosLabeled));
    const std::string b =
        label_file(cfg, artifact_path(cfg, kTest), artifact_path(cfg, kTestLabeled));
    return a + "; " + b;
}

std::string stage_noise(const RunConfig& cfg) {
    if (!cfg.noise) return "noise: skipped (no noise section)";
    NoiseSpec spec = *cfg.noise;
    spec.seed = stage_seed(cfg, "noise");
    return noise_file(cfg, spec, artifact_path(cfg, kTestLabeled),
                      artifact_path(cfg, kTestNoisy), artifact_path(cfg, kDisplacement));
}

std::string stage_train_reward(const RunConfig& cfg) {
    return train_reward_file(cfg, artifact_path(cfg, kDemosLabeled),
                             artifact_path(cfg, kRewardModel));
}

std::string stage_annotate(const RunConfig& cfg) {
    const std::string a = annotate_file(cfg, artifact_path(cfg, kDemosLabeled),
                                        artifact_path(cfg, kRewardModel),
                                        artifact_path(cfg, kDemosAnnotated));
    const std::string test_in = artifact_path(cfg, cfg.noise ? kTestNoisy : kTestLabeled);
    const std::string b = annotate_file(cfg, test_in, artifact_path(cfg, kRewardModel),
                                        artifact_path(cfg, kTestAnnotated));
    return a + "; " + b;
}

std::string stage_build_dataset(const RunConfig& cfg) {
    return build_dataset_file(cfg, artifact_path(cfg, kDemosAnnotated),
                              artifact_path(cfg, kDataset));
}

std::string stage_train_classifier(const RunConfig& cfg) {
    return train_classifier_file(cfg, artifact_path(cfg, kDataset),
                                 artifact_path(cfg, kRewardModel),
                                 artifact_path(cfg, kClassifierModel));
}

std::string stage_score(const RunConfig& cfg) {
    return score_file(cfg, artifact_path(cfg, kClassifierModel),
                      artifact_path(cfg, kTestAnnotated), artifact_path(cfg, kScores));
}

std::string stage_evaluate(const RunConfig& cfg) {
    const SequenceClassifier model =
        classifier_from_json(read_text_file(artifact_path(cfg, kClassifierModel)));
    const std::vector<Trajectory> test = read_trajectories(artifact_path(cfg, kTestAnnotated));
    const std::vector<Trajectory> train = read_trajectories(artifact_path(cfg, kDemosAnnotated));
    const EvalConfig& ev = cfg.evaluation;
    if (test.empty()) throw std::invalid_argument("evaluate: empty test set");

    std::vector<Trajectory> trimmed;
    trimmed.reserve(test.size());
    for (const Trajectory& traj : test) trimmed.push_back(eval_view(traj, ev.trim_steps));

    const std::vector<double> scores = score_trajectories(model, trimmed, cfg.threads);
    std::vector<int> pred(test.size()), truth(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        pred[i] = scores[i] > ev.threshold ? 1 : 0;
        truth[i] = truth_of(test[i], ev.ground_truth);
    }

    MetricsReport report = confusion_metrics(pred, truth);
    const bool has_pos = std::find(truth.begin(), truth.end(), 1) != truth.end();
    const bool has_neg = std::find(truth.begin(), truth.end(), 0) != truth.end();
    if (has_pos && has_neg) {
        report.auc = roc_auc(scores, truth, &report.roc_points);
    } else {
        report.zero_denominator = true;
        log_info("evaluate: single-class truth, AUC recorded as 0");
    }

    std::map<std::string, int> pred_map;
    std::map<std::string, AnomalyLabelSet> label_map;
    for (std::size_t i = 0; i < test.size(); ++i) {
        pred_map[test[i].id] = pred[i];
        label_map[test[i].id] = test[i].anomaly_labels;
    }
    report.per_group_recall = per_group_recall(pred_map, label_map);

    // Lead time over WCT test trajectories, from full-trajectory prefix scores.
    std::vector<std::size_t> wct_index;
    for (std::size_t i = 0; i < test.size(); ++i)
        if (test[i].wct_label == 1 && test[i].wct && test[i].wct->step >= 2 &&
            test[i].length() >= 3)
            wct_index.push_back(i);
    std::vector<std::optional<int>> leads(wct_index.size());
    parallel_for(wct_index.size(), cfg.threads, [&](std::size_t j) {
        const Trajectory& traj = test[wct_index[j]];
        const std::vector<double> prefix = prefix_scores(model, traj);
        std::vector<double> aligned(static_cast<std::size_t>(traj.length()), 0.0);
        for (int k = 2; k <= traj.length(); ++k)
            aligned[static_cast<std::size_t>(k - 1)] = prefix[static_cast<std::size_t>(k - 2)];
        leads[j] = lead_time(aligned, traj.wct->step, ev.threshold);
    });
    std::vector<int> detected;
    for (const std::optional<int>& lead : leads)
        if (lead) detected.push_back(*lead);
    std::sort(detected.begin(), detected.end());
    report.lead_time_count = static_cast<int>(detected.size());
    if (!detected.empty()) {
        double sum = 0.0;
        for (int lead : detected) sum += lead;
        report.lead_time_mean = sum / static_cast<double>(detected.size());
        const std::size_t n = detected.size();
        report.lead_time_median =
            n % 2 == 1 ? detected[n / 2] : (detected[n / 2 - 1] + detected[n / 2]) / 2.0;
    }

    std::vector<int> train_truth(train.size());
    for (std::size_t i = 0; i < train.size(); ++i)
        train_truth[i] = truth_of(train[i], ev.ground_truth);
    const BaselineResult baseline = baseline_reward_threshold(train, train_truth, trimmed);
    const MetricsReport baseline_report = confusion_metrics(baseline.test_pred, truth);

    std::ostringstream metrics;
    metrics << "{\"classifier\":" << metrics_to_json(report);
    metrics << ",\"baseline\":{\"f1\":" << format_number(baseline_report.f1)
            << ",\"precision\":" << format_number(baseline_report.precision)
            << ",\"recall\":" << format_number(baseline_report.recall)
            << ",\"accuracy\":" << format_number(baseline_report.accuracy)
            << ",\"mcc\":" << format_number(baseline_report.mcc)
            << ",\"threshold\":" << format_number(baseline.threshold)
            << ",\"train_f1\":" << format_number(baseline.train_f1)
            << ",\"degenerate\":" << (baseline.degenerate ? "true" : "false") << "}";
    metrics << ",\"protocol\":{\"ground_truth\":\"" << ev.ground_truth << "\""
            << ",\"threshold\":" << format_number(ev.threshold)
            << ",\"trim_steps\":" << ev.trim_steps << ",\"test_count\":" << test.size() << "}}";
    write_text_file(artifact_path(cfg, kMetrics), metrics.str());
    write_text_file(artifact_path(cfg, kRoc), roc_to_csv(report.roc_points));
    write_text_file(artifact_path(cfg, kGroups), groups_to_csv(report.per_group_recall));

    return format_summary(
        "evaluate: F1 %.4f (baseline %.4f) AUC %.4f recall %.4f lead median %.1f "
        "(%d/%zu detected) -> %s",
        report.f1, baseline_report.f1, report.auc, report.recall, report.lead_time_median,
        report.lead_time_count, wct_index.size(), artifact_path(cfg, kMetrics).c_str());
}

std::vector<std::string> run_pipeline(const RunConfig& cfg, std::ostream* progress) {
    using Stage = std::string (*)(const RunConfig&);
    constexpr Stage stages[] = {stage_simulate,         stage_label,      stage_noise,
                                stage_train_reward,     stage_annotate,   stage_build_dataset,
                                stage_train_classifier, stage_score,      stage_evaluate};
    std::vector<std::string> summaries;
    summaries.reserve(std::size(stages));
    for (Stage stage : stages) {
        summaries.push_back(stage(cfg));
        if (progress) *progress << summaries.back() << "\n" << std::flush;
    }
    return summaries;
}

}  // namespace trapkit
