#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "trapkit/log.hpp"
#include "trapkit/noise.hpp"
#include "trapkit/pipeline.hpp"
#include "trapkit/run_config.hpp"

namespace {

struct Flags {
    std::string config;
    int threads = -1;  // -1 keeps the config value
    std::string seeds;
    std::string mix = "expert";
    std::string in;
    std::string out;
    std::string model;
    std::string data;
    std::string reward;
    std::string demos;
    std::string family;
    std::string intensity;
    std::uint64_t seed = 0;
    double threshold = 0.0;
};

void add_common(CLI::App* cmd, Flags& flags) {
    cmd->add_option("--config", flags.config, "Run configuration JSON file");
    cmd->add_option("--threads", flags.threads, "Worker thread cap (0 = hardware count)");
}

trapkit::RunConfig load_config(const Flags& flags) {
    trapkit::RunConfig cfg = flags.config.empty() ? trapkit::RunConfig{}
                                                  : trapkit::load_run_config(flags.config);
    if (flags.threads >= 0) cfg.threads = flags.threads;
    return cfg;
}

// Ad-hoc flag forms need all their paths or none (stage mode).
bool adhoc_mode(std::initializer_list<const std::string*> paths, const char* usage) {
    std::size_t given = 0;
    for (const std::string* path : paths)
        if (!path->empty()) ++given;
    if (given == 0) return false;
    if (given == paths.size()) return true;
    throw std::invalid_argument(std::string("provide all of ") + usage + " or none");
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* env = std::getenv("TRAPKIT_LOG")) {
        const auto level = trapkit::log_level_from_name(env);
        if (!level) {
            std::cerr << "error: TRAPKIT_LOG must be one of error, info, debug\n";
            return 1;
        }
        trapkit::set_log_level(*level);
    }

    CLI::App app{"trapkit: seeded lane-world simulation, reward learning, and "
                 "worst-case-terminus classification"};
    app.require_subcommand(1);

    Flags simulate, label, noise, train_reward, annotate, build_dataset, train_classifier,
        score, evaluate, pipeline;

    CLI::App* cmd = app.add_subcommand("simulate", "Generate trajectories");
    add_common(cmd, simulate);
    cmd->add_option("--seeds", simulate.seeds, "Seed range A..B (half-open)");
    cmd->add_option("--out", simulate.out, "Output JSONL path");
    cmd->add_option("--mix", simulate.mix, "expert | scripted | test");
    cmd->callback([&] {
        const trapkit::RunConfig cfg = load_config(simulate);
        if (adhoc_mode({&simulate.seeds, &simulate.out}, "--seeds/--out")) {
            const auto [a, b] = trapkit::parse_seed_range(simulate.seeds);
            std::cout << trapkit::simulate_to_file(cfg, a, b, simulate.mix, simulate.out)
                      << "\n";
        } else {
            std::cout << trapkit::stage_simulate(cfg) << "\n";
        }
    });

    cmd = app.add_subcommand("label", "Attach rule-based anomaly labels");
    add_common(cmd, label);
    cmd->add_option("--in", label.in, "Input JSONL path");
    cmd->add_option("--out", label.out, "Output JSONL path");
    cmd->callback([&] {
        const trapkit::RunConfig cfg = load_config(label);
        if (adhoc_mode({&label.in, &label.out}, "--in/--out"))
            std::cout << trapkit::label_file(cfg, label.in, label.out) << "\n";
        else
            std::cout << trapkit::stage_label(cfg) << "\n";
    });

    cmd = app.add_subcommand("noise", "Corrupt lidar readings");
    add_common(cmd, noise);
    cmd->add_option("--family", noise.family, "Noise family name");
    cmd->add_option("--intensity", noise.intensity, "low | med | high");
    cmd->add_option("--seed", noise.seed, "Noise seed");
    cmd->add_option("--in", noise.in, "Input JSONL path");
    cmd->add_option("--out", noise.out, "Output JSONL path");
    cmd->callback([&] {
        const trapkit::RunConfig cfg = load_config(noise);
        if (adhoc_mode({&noise.family, &noise.intensity, &noise.in, &noise.out},
                       "--family/--intensity/--in/--out")) {
            trapkit::NoiseSpec spec;
            const auto family = trapkit::noise_family_from_name(noise.family);
            if (!family)
                throw std::invalid_argument("unknown noise family \"" + noise.family + "\"");
            const auto intensity = trapkit::noise_intensity_from_name(noise.intensity);
            if (!intensity)
                throw std::invalid_argument("unknown noise intensity \"" + noise.intensity +
                                            "\"");
            spec.family = *family;
            spec.intensity = *intensity;
            spec.seed = noise.seed;
            std::cout << trapkit::noise_file(cfg, spec, noise.in, noise.out,
                                             noise.out + ".displacement.csv")
                      << "\n";
        } else {
            std::cout << trapkit::stage_noise(cfg) << "\n";
        }
    });

    cmd = app.add_subcommand("train-reward", "Fit the reward net on ranked rollouts");
    add_common(cmd, train_reward);
    cmd->add_option("--demos", train_reward.demos, "Expert rollout JSONL path");
    cmd->add_option("--out", train_reward.out, "Reward model JSON path");
    cmd->callback([&] {
        const trapkit::RunConfig cfg = load_config(train_reward);
        if (adhoc_mode({&train_reward.demos, &train_reward.out}, "--demos/--out"))
            std::cout << trapkit::train_reward_file(cfg, train_reward.demos, train_reward.out)
                      << "\n";
        else
            std::cout << trapkit::stage_train_reward(cfg) << "\n";
    });

    cmd = app.add_subcommand("annotate", "Write per-step rewards from a reward model");
    add_common(cmd, annotate);
    cmd->add_option("--in", annotate.in, "Input JSONL path");
    cmd->add_option("--model", annotate.model, "Reward model JSON path");
    cmd->add_option("--out", annotate.out, "Output JSONL path");
    cmd->callback([&] {
        const trapkit::RunConfig cfg = load_config(annotate);
        if (adhoc_mode({&annotate.in, &annotate.model, &annotate.out}, "--in/--model/--out"))
            std::cout << trapkit::annotate_file(cfg, annotate.in, annotate.model, annotate.out)
                      << "\n";
        else
            std::cout << trapkit::stage_annotate(cfg) << "\n";
    });

    cmd = app.add_subcommand("build-dataset", "End-clip and prefix-expand trajectories");
    add_common(cmd, build_dataset);
    cmd->add_option("--in", build_dataset.in, "Annotated JSONL path");
    cmd->add_option("--out", build_dataset.out, "Dataset JSONL path");
    cmd->callback([&] {
        const trapkit::RunConfig cfg = load_config(build_dataset);
        if (adhoc_mode({&build_dataset.in, &build_dataset.out}, "--in/--out"))
            std::cout << trapkit::build_dataset_file(cfg, build_dataset.in, build_dataset.out)
                      << "\n";
        else
            std::cout << trapkit::stage_build_dataset(cfg) << "\n";
    });

    cmd = app.add_subcommand("train-classifier", "Fit the sequence classifier");
    add_common(cmd, train_classifier);
    cmd->add_option("--data", train_classifier.data, "Dataset JSONL path");
    cmd->add_option("--reward", train_classifier.reward, "Reward model JSON path");
    cmd->add_option("--out", train_classifier.out, "Classifier JSON path");
    cmd->callback([&] {
        const trapkit::RunConfig cfg = load_config(train_classifier);
        if (adhoc_mode({&train_classifier.data, &train_classifier.reward, &train_classifier.out},
                       "--data/--reward/--out"))
            std::cout << trapkit::train_classifier_file(cfg, train_classifier.data,
                                                        train_classifier.reward,
                                                        train_classifier.out)
                      << "\n";
        else
            std::cout << trapkit::stage_train_classifier(cfg) << "\n";
    });

    cmd = app.add_subcommand("score", "Score trajectories with a trained classifier");
    add_common(cmd, score);
    cmd->add_option("--model", score.model, "Classifier JSON path");
    cmd->add_option("--in", score.in, "Input JSONL path");
    cmd->add_option("--out", score.out, "Scores CSV path");
    cmd->callback([&] {
        const trapkit::RunConfig cfg = load_config(score);
        if (adhoc_mode({&score.model, &score.in, &score.out}, "--model/--in/--out"))
            std::cout << trapkit::score_file(cfg, score.model, score.in, score.out) << "\n";
        else
            std::cout << trapkit::stage_score(cfg) << "\n";
    });

    cmd = app.add_subcommand("evaluate", "Compute metrics and the baseline comparison");
    add_common(cmd, evaluate);
    CLI::Option* threshold_opt =
        cmd->add_option("--threshold", evaluate.threshold, "Decision threshold override");
    cmd->callback([&] {
        trapkit::RunConfig cfg = load_config(evaluate);
        if (threshold_opt->count() > 0) cfg.evaluation.threshold = evaluate.threshold;
        trapkit::validate_run_config(cfg);
        std::cout << trapkit::stage_evaluate(cfg) << "\n";
    });

    cmd = app.add_subcommand("pipeline", "Run every stage from one config");
    add_common(cmd, pipeline);
    cmd->add_option("--out", pipeline.out, "Output directory override");
    cmd->callback([&] {
        trapkit::RunConfig cfg = load_config(pipeline);
        if (!pipeline.out.empty()) cfg.out_dir = pipeline.out;
        trapkit::run_pipeline(cfg, &std::cout);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    } catch (const std::exception& e) {
        trapkit::log_error(e.what());
        return 1;
    }
    return 0;
}
