// Toy attention-based sequence classifier for worst-case-terminus prediction.
//
// Each reward-annotated timestep is projected to a d_model token; the token
// sequence (plus sinusoidal position encodings) passes through one two-head
// self-attention encoder layer with residuals and a tanh feed-forward block,
// is mean-pooled, and a linear head emits the logit.  All gradients are
// hand-derived; training is single-threaded and bit-deterministic in the seed.

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trapkit/trajectory.hpp"
#include "trapkit/wct_dataset.hpp"

namespace trapkit {

inline constexpr int kDModel = 64;
inline constexpr int kProjectionHidden = 128;
inline constexpr int kAttentionHeads = 2;
inline constexpr int kHeadDim = 32;  // kAttentionHeads * kHeadDim == kDModel
inline constexpr int kFfnWidth = 128;
inline constexpr int kTokenCap = 128;

struct SequenceClassifier {
    int input_dim = 52;  // flattened obs (incl. crossed flag) + [steer, accel] + [reward]
    std::uint64_t seed = 0;
    int token_cap = kTokenCap;
    Eigen::MatrixXd p_w1, p_w2;          // projection (128,in), (64,128)
    Eigen::VectorXd p_b1, p_b2;
    Eigen::MatrixXd wq, wk, wv, wo;      // attention, all (64,64); heads are row blocks
    Eigen::VectorXd bq, bk, bv, bo;
    Eigen::MatrixXd f_w1, f_w2;          // feed-forward (128,64), (64,128)
    Eigen::VectorXd f_b1, f_b2;
    Eigen::VectorXd head_w;              // logit head (64)
    Eigen::VectorXd head_b;              // (1)
    // Per-dimension input standardization applied before the projection;
    // identity on a fresh model, fitted on the training split by
    // train_classifier so the low-variance reward/action channels condition
    // well under the fixed learning rate.
    Eigen::VectorXd in_shift, in_scale;  // x_hat = (x - in_shift) .* in_scale
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, deterministic
// in seed.
SequenceClassifier make_classifier(int input_dim, std::uint64_t seed);

// Concatenated [lidar | lane | side | crossed | steer, accel | reward] column.
// Throws std::invalid_argument when the reward annotation is missing.
Eigen::VectorXd step_input(const TimeStep& step);

// Sinusoidal encodings, one column per position.
Eigen::MatrixXd positional_encoding(int d_model, int count);

// The per-step embedding token (no position encoding applied).
Eigen::VectorXd project(const SequenceClassifier& model, const TimeStep& step);

// Step inputs as columns, strided to at most token_cap columns
// (stride = ceil(len / token_cap)).
Eigen::MatrixXd subsampled_inputs(const Trajectory& traj, int token_cap);

// Raw logit / sigmoid probability for a whole trajectory.
double classify_logit(const SequenceClassifier& model, const Trajectory& traj);
double encode_and_classify(const SequenceClassifier& model, const Trajectory& traj);

// Probability per trajectory, parallel across trajectories.
std::vector<double> score_trajectories(const SequenceClassifier& model,
                                       std::span<const Trajectory> trajs, int threads = 1);

// p_k = encode_and_classify(prefix of length k) for k = 2..len (len-1 values).
std::vector<double> prefix_scores(const SequenceClassifier& model, const Trajectory& traj);

// Drops the final m steps; terminal-event metadata and label are retained for
// evaluation bookkeeping, anomaly intervals are clipped, provenance recorded.
// Throws std::invalid_argument when len <= m.
Trajectory trim_for_eval(const Trajectory& traj, int m = 5);

struct ClassifierGradients {
    Eigen::MatrixXd p_w1, p_w2, wq, wk, wv, wo, f_w1, f_w2;
    Eigen::VectorXd p_b1, p_b2, bq, bk, bv, bo, f_b1, f_b2, head_w, head_b;
};

// Zero-filled gradient buffers shaped like the model's parameters.
ClassifierGradients zero_classifier_gradients(const SequenceClassifier& model);

// Binary cross-entropy of one token-input matrix (columns = steps) against
// label in {0,1}; accumulates analytic parameter gradients when given.
double classifier_loss(const SequenceClassifier& model, const Eigen::MatrixXd& inputs, int label,
                       ClassifierGradients* grads);

struct ClassifierTrainConfig {
    int batch = 16;
    int epochs = 10;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    double val_fraction = 0.1;  // held out by source trajectory
};

struct ClassifierTrainResult {
    SequenceClassifier model;  // parameters at the best validation epoch
    double best_val_f1 = -1.0;
    int best_epoch = -1;
    std::vector<double> epoch_train_loss;
    std::vector<double> epoch_val_f1;
};

// Mini-batch Adam over the dataset items; model snapshot with the best
// validation F1 wins (earliest epoch on ties).  Throws std::invalid_argument
// when the data carries a single class.
ClassifierTrainResult train_classifier(const WctDataset& data, const ClassifierTrainConfig& cfg);

// JSON round-trip of the parameters.
std::string classifier_to_json(const SequenceClassifier& model);
SequenceClassifier classifier_from_json(const std::string& text);

}  // namespace trapkit
