#include "trapkit/reward_learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "trapkit/rng.hpp"
#include "trapkit/threading.hpp"
#include "trapkit/trajectory_io.hpp"

namespace trapkit {

namespace {

Eigen::MatrixXd init_matrix(int rows, int cols, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
    return m;
}

struct Forward {
    Eigen::MatrixXd x, h1, h2;
    Eigen::RowVectorXd y;
};

Forward run_forward(const RewardNet& net, const Eigen::MatrixXd& states) {
    if (states.rows() != net.input_dim)
        throw std::invalid_argument("observation width differs from reward net input");
    Forward f;
    f.x = states;
    f.h1 = ((net.w1 * states).colwise() + net.b1).array().tanh().matrix();
    f.h2 = ((net.w2 * f.h1).colwise() + net.b2).array().tanh().matrix();
    f.y = ((net.w3 * f.h2).row(0).array() + net.b3(0)).matrix();
    return f;
}

// Backward pass for J = sum(y) scaled by upstream dJ; accumulates into grads.
void accumulate_backward(const RewardNet& net, const Forward& f, double upstream,
                         RewardGradients& grads) {
    const Eigen::Index n = f.x.cols();
    const Eigen::RowVectorXd dy = Eigen::RowVectorXd::Constant(n, upstream);
    grads.w3.noalias() += dy * f.h2.transpose();
    grads.b3(0) += dy.sum();
    const Eigen::MatrixXd dh2 = net.w3.transpose() * dy;
    const Eigen::MatrixXd dz2 = (dh2.array() * (1.0 - f.h2.array().square())).matrix();
    grads.w2.noalias() += dz2 * f.h1.transpose();
    grads.b2.noalias() += dz2.rowwise().sum();
    const Eigen::MatrixXd dh1 = net.w2.transpose() * dz2;
    const Eigen::MatrixXd dz1 = (dh1.array() * (1.0 - f.h1.array().square())).matrix();
    grads.w1.noalias() += dz1 * f.x.transpose();
    grads.b1.noalias() += dz1.rowwise().sum();
}

// Adam state per tensor.
struct Adam {
    Eigen::MatrixXd mw1, vw1, mw2, vw2, mw3, vw3;
    Eigen::VectorXd mb1, vb1, mb2, vb2, mb3, vb3;
    long t = 0;

    explicit Adam(const RewardNet& net) {
        const RewardGradients z = zero_gradients(net);
        mw1 = vw1 = z.w1;
        mw2 = vw2 = z.w2;
        mw3 = vw3 = z.w3;
        mb1 = vb1 = z.b1;
        mb2 = vb2 = z.b2;
        mb3 = vb3 = z.b3;
    }

    template <typename T>
    void update_one(T& param, const T& grad, T& m, T& v, double lr, double bc1, double bc2) {
        m.array() = 0.9 * m.array() + 0.1 * grad.array();
        v.array() = 0.999 * v.array() + 0.001 * grad.array().square();
        param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + 1e-8);
    }

    void step(RewardNet& net, const RewardGradients& g, double lr) {
        ++t;
        const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(t));
        update_one(net.w1, g.w1, mw1, vw1, lr, bc1, bc2);
        update_one(net.w2, g.w2, mw2, vw2, lr, bc1, bc2);
        update_one(net.w3, g.w3, mw3, vw3, lr, bc1, bc2);
        update_one(net.b1, g.b1, mb1, vb1, lr, bc1, bc2);
        update_one(net.b2, g.b2, mb2, vb2, lr, bc1, bc2);
        update_one(net.b3, g.b3, mb3, vb3, lr, bc1, bc2);
    }
};

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const char* name) {
    if (!j.is_array() || j.empty())
        throw std::invalid_argument(std::string("reward net: bad matrix ") + name);
    const std::size_t cols = j[0].size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (j[r].size() != cols)
            throw std::invalid_argument(std::string("reward net: ragged matrix ") + name);
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j, const char* name) {
    if (!j.is_array())
        throw std::invalid_argument(std::string("reward net: bad vector ") + name);
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

}  // namespace

RewardGradients zero_gradients(const RewardNet& net) {
    RewardGradients g;
    g.w1 = Eigen::MatrixXd::Zero(net.w1.rows(), net.w1.cols());
    g.w2 = Eigen::MatrixXd::Zero(net.w2.rows(), net.w2.cols());
    g.w3 = Eigen::MatrixXd::Zero(net.w3.rows(), net.w3.cols());
    g.b1 = Eigen::VectorXd::Zero(net.b1.size());
    g.b2 = Eigen::VectorXd::Zero(net.b2.size());
    g.b3 = Eigen::VectorXd::Zero(net.b3.size());
    return g;
}

RewardNet make_reward_net(int input_dim, std::uint64_t seed) {
    if (input_dim < 1) throw std::invalid_argument("reward net input_dim must be positive");
    Rng rng(derive_seed(seed, "reward-init"));
    RewardNet net;
    net.input_dim = input_dim;
    net.seed = seed;
    net.w1 = init_matrix(kRewardHidden, input_dim, rng);
    net.b1 = Eigen::VectorXd::Zero(kRewardHidden);
    net.w2 = init_matrix(kRewardHidden, kRewardHidden, rng);
    net.b2 = Eigen::VectorXd::Zero(kRewardHidden);
    net.w3 = init_matrix(1, kRewardHidden, rng);
    net.b3 = Eigen::VectorXd::Zero(1);
    return net;
}

Eigen::MatrixXd observation_matrix(const Trajectory& traj) {
    if (traj.steps.empty()) throw std::invalid_argument("empty trajectory");
    const auto& first = traj.steps.front().obs;
    const Eigen::Index dim =
        static_cast<Eigen::Index>(first.lidar.size() + first.lane.size() + first.side.size());
    Eigen::MatrixXd m(dim, static_cast<Eigen::Index>(traj.steps.size()));
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        const Observation& obs = traj.steps[t].obs;
        if (static_cast<Eigen::Index>(obs.lidar.size() + obs.lane.size() + obs.side.size()) !=
            dim)
            throw std::invalid_argument("inconsistent observation width");
        Eigen::Index r = 0;
        for (double v : obs.lidar) m(r++, t) = v;
        for (double v : obs.lane) m(r++, t) = v;
        for (double v : obs.side) m(r++, t) = v;
    }
    return m;
}

Eigen::VectorXd reward_forward(const RewardNet& net, const Eigen::MatrixXd& states) {
    return run_forward(net, states).y.transpose();
}

double trajectory_return(const RewardNet& net, const Trajectory& traj) {
    return run_forward(net, observation_matrix(traj)).y.sum();
}

double preference_prob(double j_i, double j_j) {
    const double x = j_j - j_i;
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

RankedDemos rank_rollouts(std::vector<Trajectory> demos) {
    if (demos.empty()) throw std::invalid_argument("rank_rollouts: no demos");
    std::vector<double> eps(demos.size());
    for (std::size_t i = 0; i < demos.size(); ++i) {
        const auto it = demos[i].meta.find("epsilon");
        if (it == demos[i].meta.end() || !std::holds_alternative<double>(it->second))
            throw std::invalid_argument("rank_rollouts: rollout lacks an epsilon");
        eps[i] = std::get<double>(it->second);
    }
    std::vector<std::size_t> order(demos.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return eps[a] > eps[b]; });
    RankedDemos ranked;
    ranked.trajs.reserve(demos.size());
    ranked.epsilons.reserve(demos.size());
    for (std::size_t idx : order) {
        ranked.trajs.push_back(std::move(demos[idx]));
        ranked.epsilons.push_back(eps[idx]);
    }
    return ranked;
}

std::vector<std::pair<int, int>> admissible_pairs(const RankedDemos& ranked) {
    std::vector<std::pair<int, int>> pairs;
    const int n = static_cast<int>(ranked.trajs.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (ranked.epsilons[i] > ranked.epsilons[j]) pairs.emplace_back(i, j);
    return pairs;
}

double pair_loss(const RewardNet& net, const Eigen::MatrixXd& worse,
                 const Eigen::MatrixXd& better, RewardGradients* grads) {
    const Forward fw = run_forward(net, worse);
    const Forward fb = run_forward(net, better);
    const double j_worse = fw.y.sum();
    const double j_better = fb.y.sum();
    const double p = preference_prob(j_worse, j_better);

    // L = -log sigmoid(J_better - J_worse); log-space for large gaps.
    const double x = j_better - j_worse;
    const double loss = x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));

    if (grads) {
        accumulate_backward(net, fb, -(1.0 - p), *grads);
        accumulate_backward(net, fw, 1.0 - p, *grads);
    }
    return loss;
}

RewardTrainResult train_reward(const RankedDemos& ranked, const RewardTrainConfig& cfg) {
    if (cfg.batch_pairs < 1 || cfg.steps < 1 || cfg.learning_rate <= 0.0)
        throw std::invalid_argument("invalid reward training config");
    const auto pairs = admissible_pairs(ranked);
    if (pairs.empty())
        throw std::invalid_argument("train_reward: need at least two distinct ranks");

    std::vector<Eigen::MatrixXd> obs;
    obs.reserve(ranked.trajs.size());
    for (const Trajectory& traj : ranked.trajs) obs.push_back(observation_matrix(traj));
    const int input_dim = static_cast<int>(obs.front().rows());
    for (const auto& m : obs)
        if (m.rows() != input_dim)
            throw std::invalid_argument("train_reward: inconsistent observation widths");

    RewardTrainResult result;
    result.net = make_reward_net(input_dim, cfg.seed);
    Adam adam(result.net);
    Rng rng(derive_seed(cfg.seed, "reward-train"));

    auto snippet = [&](const Eigen::MatrixXd& m) -> Eigen::MatrixXd {
        const int len = static_cast<int>(m.cols());
        const int w = std::min(cfg.snippet_len, len);
        const int start = static_cast<int>(rng.uniform_int(0, len - w));
        return m.middleCols(start, w);
    };

    for (int step = 0; step < cfg.steps; ++step) {
        RewardGradients grads = zero_gradients(result.net);
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch_pairs; ++b) {
            const auto& [wi, bi] =
                pairs[rng.uniform_int(0, static_cast<std::int64_t>(pairs.size()) - 1)];
            if (cfg.snippets)
                batch_loss += pair_loss(result.net, snippet(obs[wi]), snippet(obs[bi]), &grads);
            else
                batch_loss += pair_loss(result.net, obs[wi], obs[bi], &grads);
        }
        batch_loss /= cfg.batch_pairs;
        const double scale = 1.0 / cfg.batch_pairs;
        grads.w1 *= scale;
        grads.w2 *= scale;
        grads.w3 *= scale;
        grads.b1 *= scale;
        grads.b2 *= scale;
        grads.b3 *= scale;
        adam.step(result.net, grads, cfg.learning_rate);
        if (step == 0) result.initial_loss = batch_loss;
        if (step == cfg.steps - 1) result.final_loss = batch_loss;
    }
    return result;
}

void annotate_rewards(const RewardNet& net, std::vector<Trajectory>& trajs, int threads) {
    parallel_for(trajs.size(), threads, [&](std::size_t i) {
        const Eigen::VectorXd rewards = reward_forward(net, observation_matrix(trajs[i]));
        for (std::size_t t = 0; t < trajs[i].steps.size(); ++t)
            trajs[i].steps[t].reward = rewards(static_cast<Eigen::Index>(t));
    });
}

std::string reward_net_to_json(const RewardNet& net) {
    nlohmann::json j;
    j["input_dim"] = net.input_dim;
    j["seed"] = net.seed;
    j["w1"] = matrix_to_json(net.w1);
    j["b1"] = vector_to_json(net.b1);
    j["w2"] = matrix_to_json(net.w2);
    j["b2"] = vector_to_json(net.b2);
    j["w3"] = matrix_to_json(net.w3);
    j["b3"] = vector_to_json(net.b3);
    return j.dump();
}

RewardNet reward_net_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("reward net: bad JSON: ") + e.what());
    }
    RewardNet net;
    net.input_dim = j.at("input_dim").get<int>();
    net.seed = j.at("seed").get<std::uint64_t>();
    net.w1 = matrix_from_json(j.at("w1"), "w1");
    net.b1 = vector_from_json(j.at("b1"), "b1");
    net.w2 = matrix_from_json(j.at("w2"), "w2");
    net.b2 = vector_from_json(j.at("b2"), "b2");
    net.w3 = matrix_from_json(j.at("w3"), "w3");
    net.b3 = vector_from_json(j.at("b3"), "b3");
    if (net.w1.cols() != net.input_dim || net.w1.rows() != net.b1.size() ||
        net.w2.rows() != net.b2.size() || net.w3.rows() != 1 || net.b3.size() != 1 ||
        net.w2.cols() != net.w1.rows() || net.w3.cols() != net.w2.rows())
        throw std::invalid_argument("reward net: inconsistent shapes");
    return net;
}

}  // namespace trapkit
