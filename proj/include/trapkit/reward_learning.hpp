// Reward learning from noise-ranked rollouts.
//
// A small tanh MLP maps one observation (flattened lidar+lane+side) to a
// scalar reward; trajectory return is the per-state sum.  Training minimizes
// the pairwise cross-entropy of preference_prob against the epsilon ordering
// (lower action noise preferred), with hand-derived gradients.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trapkit/trajectory.hpp"

namespace trapkit {

struct RewardNet {
    int input_dim = 48;
    std::uint64_t seed = 0;
    Eigen::MatrixXd w1, w2, w3;  // (64,in) (64,64) (1,64)
    Eigen::VectorXd b1, b2, b3;  // (64) (64) (1)
};

inline constexpr int kRewardHidden = 64;

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization, deterministic in seed.
RewardNet make_reward_net(int input_dim, std::uint64_t seed);

// Observations as a (input_dim x len) matrix, rows ordered lidar, lane, side.
Eigen::MatrixXd observation_matrix(const Trajectory& traj);

// Per-column scalar reward.
Eigen::VectorXd reward_forward(const RewardNet& net, const Eigen::MatrixXd& states);

// Sum of per-state rewards over the whole trajectory.  Throws
// std::invalid_argument when observation width differs from net.input_dim.
double trajectory_return(const RewardNet& net, const Trajectory& traj);

// P(tau_j preferred over tau_i) = sigmoid(J_j - J_i), evaluated in log space.
double preference_prob(double j_i, double j_j);

// Rollouts sorted worst-first (descending epsilon).  Sorting is stable, so
// equal-epsilon rollouts keep their input order.
struct RankedDemos {
    std::vector<Trajectory> trajs;
    std::vector<double> epsilons;
};

// Reads each rollout's epsilon from meta; throws when absent.
RankedDemos rank_rollouts(std::vector<Trajectory> demos);

// All (worse, better) index pairs with strictly different epsilon; ties are
// never paired.
std::vector<std::pair<int, int>> admissible_pairs(const RankedDemos& ranked);

struct RewardGradients {
    Eigen::MatrixXd w1, w2, w3;
    Eigen::VectorXd b1, b2, b3;
};

// Zero-filled gradient buffers shaped like the net's parameters.
RewardGradients zero_gradients(const RewardNet& net);

// Cross-entropy of preference_prob(J_worse, J_better) against the ordering;
// accumulates analytic parameter gradients into *grads when given.  States
// are passed as observation matrices.
double pair_loss(const RewardNet& net, const Eigen::MatrixXd& worse,
                 const Eigen::MatrixXd& better, RewardGradients* grads);

struct RewardTrainConfig {
    int batch_pairs = 16;
    int steps = 2000;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    bool snippets = false;  // compare uniform contiguous windows instead of full sums
    int snippet_len = 50;
};

struct RewardTrainResult {
    RewardNet net;
    double initial_loss = 0.0;  // mean batch loss at the first step
    double final_loss = 0.0;    // mean batch loss at the last step
};

// Adam over mini-batches of preference pairs; bit-deterministic given the
// config seed.  Throws std::invalid_argument without two distinct ranks.
RewardTrainResult train_reward(const RankedDemos& ranked, const RewardTrainConfig& cfg);

// Fills every step's reward with the per-observation net output.
void annotate_rewards(const RewardNet& net, std::vector<Trajectory>& trajs, int threads = 1);

// JSON round-trip of the parameters (canonical field order and numbers).
std::string reward_net_to_json(const RewardNet& net);
RewardNet reward_net_from_json(const std::string& text);

}  // namespace trapkit
