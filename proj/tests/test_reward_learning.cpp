#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "trapkit/evaluation.hpp"
#include "trapkit/reward_learning.hpp"
#include "trapkit/rng.hpp"
#include "trapkit/trajectory.hpp"
#include "test_util.hpp"

using namespace trapkit;
using trapkit::testutil::close;

namespace {

// Synthetic ranked rollout whose lidar channels carry the epsilon signal plus
// jitter, so a learned reward can separate noise levels.
Trajectory demo_rollout(double eps, int index, int len = 12) {
    Rng rng(mix_seed(derive_seed(7777, "reward-demo"), static_cast<std::uint64_t>(index)));
    Trajectory traj;
    traj.id = "demo-" + std::to_string(index);
    traj.seed = static_cast<std::uint64_t>(index);
    traj.meta["epsilon"] = eps;
    for (int t = 0; t < len; ++t) {
        TimeStep step;
        step.t = t;
        for (int b = 0; b < 8; ++b)
            step.obs.lidar.push_back(std::clamp(eps + rng.uniform(-0.05, 0.05), 0.0, 1.0));
        for (int b = 0; b < 4; ++b) step.obs.lane.push_back(rng.uniform());
        for (int b = 0; b < 4; ++b) step.obs.side.push_back(rng.uniform());
        step.state.position = {static_cast<double>(t), 0.0};
        step.state.heading = {1.0, 0.0};
        step.state.speed = 10.0;
        traj.steps.push_back(std::move(step));
    }
    return traj;
}

// Plain-loop forward pass, independent of the Eigen implementation.
double oracle_return(const RewardNet& net, const Trajectory& traj) {
    const int hidden = static_cast<int>(net.b1.size());
    double total = 0.0;
    for (const TimeStep& step : traj.steps) {
        std::vector<double> x;
        x.insert(x.end(), step.obs.lidar.begin(), step.obs.lidar.end());
        x.insert(x.end(), step.obs.lane.begin(), step.obs.lane.end());
        x.insert(x.end(), step.obs.side.begin(), step.obs.side.end());
        std::vector<double> h1(hidden), h2(hidden);
        for (int i = 0; i < hidden; ++i) {
            double z = net.b1(i);
            for (std::size_t k = 0; k < x.size(); ++k) z += net.w1(i, static_cast<int>(k)) * x[k];
            h1[i] = std::tanh(z);
        }
        for (int i = 0; i < hidden; ++i) {
            double z = net.b2(i);
            for (int k = 0; k < hidden; ++k) z += net.w2(i, k) * h1[k];
            h2[i] = std::tanh(z);
        }
        double y = net.b3(0);
        for (int k = 0; k < hidden; ++k) y += net.w3(0, k) * h2[k];
        total += y;
    }
    return total;
}

// Flat (pointer, count) views over all parameters, in a fixed tensor order.
std::vector<std::pair<double*, long>> param_views(RewardNet& net) {
    return {{net.w1.data(), static_cast<long>(net.w1.size())},
            {net.b1.data(), static_cast<long>(net.b1.size())},
            {net.w2.data(), static_cast<long>(net.w2.size())},
            {net.b2.data(), static_cast<long>(net.b2.size())},
            {net.w3.data(), static_cast<long>(net.w3.size())},
            {net.b3.data(), static_cast<long>(net.b3.size())}};
}

std::vector<std::pair<const double*, long>> grad_views(const RewardGradients& g) {
    return {{g.w1.data(), static_cast<long>(g.w1.size())},
            {g.b1.data(), static_cast<long>(g.b1.size())},
            {g.w2.data(), static_cast<long>(g.w2.size())},
            {g.b2.data(), static_cast<long>(g.b2.size())},
            {g.w3.data(), static_cast<long>(g.w3.size())},
            {g.b3.data(), static_cast<long>(g.b3.size())}};
}

Eigen::MatrixXd random_states(Rng& rng, int dim, int len) {
    Eigen::MatrixXd m(dim, len);
    for (int c = 0; c < len; ++c)
        for (int r = 0; r < dim; ++r) m(r, c) = rng.uniform();
    return m;
}

}  // namespace

TEST_CASE("preference probability matches the logistic form") {
    CHECK(preference_prob(0.0, 0.0) == 0.5);
    CHECK(preference_prob(3.25, 3.25) == 0.5);
    CHECK(close(preference_prob(1.0, 2.0), 1.0 / (1.0 + std::exp(-1.0)), 1e-12));
    CHECK(std::abs(preference_prob(1.0, 2.0) - 0.731059) < 1e-6);
    // Large gaps saturate without overflowing.
    CHECK(preference_prob(1000.0, 0.0) >= 0.0);
    CHECK(preference_prob(1000.0, 0.0) < 1e-300);
    CHECK(preference_prob(0.0, 1000.0) == 1.0);
    CHECK(std::isfinite(preference_prob(-1e9, 1e9)));

    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
        const double a = rng.uniform(-30.0, 30.0);
        const double b = rng.uniform(-30.0, 30.0);
        CHECK(close(preference_prob(a, b) + preference_prob(b, a), 1.0, 1e-12));
    }
}

TEST_CASE("reward net initialization is shaped, bounded, and seeded") {
    const RewardNet net = make_reward_net(48, 5);
    CHECK(net.input_dim == 48);
    CHECK(net.w1.rows() == kRewardHidden);
    CHECK(net.w1.cols() == 48);
    CHECK(net.w2.rows() == kRewardHidden);
    CHECK(net.w2.cols() == kRewardHidden);
    CHECK(net.w3.rows() == 1);
    CHECK(net.w3.cols() == kRewardHidden);
    CHECK(net.b1.isZero(0.0));
    CHECK(net.b2.isZero(0.0));
    CHECK(net.b3.isZero(0.0));
    CHECK(net.w1.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(48.0));
    CHECK(net.w2.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(64.0));
    CHECK(net.w3.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(64.0));
    CHECK(net.w1.cwiseAbs().maxCoeff() > 0.0);

    const RewardNet again = make_reward_net(48, 5);
    CHECK(net.w1 == again.w1);
    CHECK(net.w2 == again.w2);
    CHECK(net.w3 == again.w3);
    const RewardNet other = make_reward_net(48, 6);
    CHECK(net.w1 != other.w1);
    CHECK_THROWS_AS(make_reward_net(0, 1), std::invalid_argument);
}

TEST_CASE("observation matrix stacks lidar, lane, side per column") {
    const Trajectory traj = demo_rollout(0.3, 0, 5);
    const Eigen::MatrixXd m = observation_matrix(traj);
    REQUIRE(m.rows() == 16);
    REQUIRE(m.cols() == 5);
    for (int t = 0; t < 5; ++t) {
        const Observation& obs = traj.steps[t].obs;
        for (int b = 0; b < 8; ++b) CHECK(m(b, t) == obs.lidar[b]);
        for (int b = 0; b < 4; ++b) CHECK(m(8 + b, t) == obs.lane[b]);
        for (int b = 0; b < 4; ++b) CHECK(m(12 + b, t) == obs.side[b]);
    }

    Trajectory empty;
    CHECK_THROWS_AS(observation_matrix(empty), std::invalid_argument);
    Trajectory ragged = traj;
    ragged.steps[2].obs.side.push_back(0.5);
    CHECK_THROWS_AS(observation_matrix(ragged), std::invalid_argument);
}

TEST_CASE("trajectory return matches a plain-loop oracle") {
    Rng rng(101);
    for (int i = 0; i < 5; ++i) {
        Trajectory traj = testutil::make_random_trajectory(rng, i);
        const RewardNet net = make_reward_net(16, 400 + static_cast<std::uint64_t>(i));
        CHECK(close(trajectory_return(net, traj), oracle_return(net, traj), 1e-9));
    }

    RewardNet zero = make_reward_net(16, 3);
    zero.w1.setZero();
    zero.w2.setZero();
    zero.w3.setZero();
    const Trajectory traj = demo_rollout(0.4, 1, 7);
    CHECK(trajectory_return(zero, traj) == 0.0);
    zero.b3(0) = 1.0;  // constant unit reward per state
    CHECK(close(trajectory_return(zero, traj), 7.0, 1e-12));

    const RewardNet wide = make_reward_net(48, 3);
    CHECK_THROWS_AS(trajectory_return(wide, traj), std::invalid_argument);
}

TEST_CASE("pair loss equals the preference cross-entropy") {
    Rng rng(77);
    const RewardNet net = make_reward_net(10, 9);
    const Eigen::MatrixXd a = random_states(rng, 10, 6);
    const Eigen::MatrixXd b = random_states(rng, 10, 4);
    const double ja = reward_forward(net, a).sum();
    const double jb = reward_forward(net, b).sum();
    CHECK(close(pair_loss(net, a, b, nullptr), -std::log(preference_prob(ja, jb)), 1e-12));

    // Identical members: p = 1/2, gradients cancel exactly.
    RewardGradients g = zero_gradients(net);
    const double loss = pair_loss(net, a, a, &g);
    CHECK(close(loss, std::log(2.0), 1e-12));
    CHECK(g.w1.isZero(0.0));
    CHECK(g.w2.isZero(0.0));
    CHECK(g.w3.isZero(0.0));
    CHECK(g.b1.isZero(0.0));
    CHECK(g.b2.isZero(0.0));
    CHECK(g.b3.isZero(0.0));
}

TEST_CASE("analytic gradients match central finite differences") {
    // L2-relative error across every parameter, a handful of random instances.
    const double h = 1e-5;
    for (int instance = 0; instance < 3; ++instance) {
        Rng rng(500 + static_cast<std::uint64_t>(instance));
        RewardNet net = make_reward_net(6, 900 + static_cast<std::uint64_t>(instance));
        const Eigen::MatrixXd worse = random_states(rng, 6, 3);
        const Eigen::MatrixXd better = random_states(rng, 6, 4);

        RewardGradients grads = zero_gradients(net);
        pair_loss(net, worse, better, &grads);

        const auto params = param_views(net);
        const auto analytic = grad_views(grads);
        double diff_sq = 0.0;
        double fd_sq = 0.0;
        for (std::size_t tensor = 0; tensor < params.size(); ++tensor) {
            auto [data, count] = params[tensor];
            for (long k = 0; k < count; ++k) {
                const double saved = data[k];
                data[k] = saved + h;
                const double up = pair_loss(net, worse, better, nullptr);
                data[k] = saved - h;
                const double down = pair_loss(net, worse, better, nullptr);
                data[k] = saved;
                const double fd = (up - down) / (2.0 * h);
                const double an = analytic.at(tensor).first[k];
                diff_sq += (an - fd) * (an - fd);
                fd_sq += fd * fd;
            }
        }
        const double rel = std::sqrt(diff_sq) / std::max(std::sqrt(fd_sq), 1e-12);
        CHECK(rel <= 1e-4);
    }
}

TEST_CASE("equal-length preferences are invariant to constant reward shifts") {
    Rng rng(31);
    RewardNet net = make_reward_net(8, 21);
    const Eigen::MatrixXd a = random_states(rng, 8, 5);
    const Eigen::MatrixXd b = random_states(rng, 8, 5);
    const double p0 = preference_prob(reward_forward(net, a).sum(), reward_forward(net, b).sum());
    const double l0 = pair_loss(net, a, b, nullptr);
    net.b3(0) += 3.7;  // shifts every per-state reward by the same constant
    const double p1 = preference_prob(reward_forward(net, a).sum(), reward_forward(net, b).sum());
    CHECK(close(p0, p1, 1e-12));
    CHECK(close(l0, pair_loss(net, a, b, nullptr), 1e-12));
}

TEST_CASE("rank_rollouts sorts worst-first and is stable") {
    std::vector<Trajectory> demos;
    demos.push_back(demo_rollout(0.4, 0));
    demos.push_back(demo_rollout(0.0, 1));
    demos.push_back(demo_rollout(0.2, 2));
    const RankedDemos ranked = rank_rollouts(demos);
    REQUIRE(ranked.epsilons == std::vector<double>{0.4, 0.2, 0.0});
    CHECK(ranked.trajs[0].id == "demo-0");
    CHECK(ranked.trajs[1].id == "demo-2");
    CHECK(ranked.trajs[2].id == "demo-1");

    // Equal epsilons keep input order.
    std::vector<Trajectory> ties;
    ties.push_back(demo_rollout(0.2, 10));
    ties.push_back(demo_rollout(0.2, 11));
    ties.push_back(demo_rollout(0.6, 12));
    const RankedDemos tied = rank_rollouts(ties);
    CHECK(tied.trajs[0].id == "demo-12");
    CHECK(tied.trajs[1].id == "demo-10");
    CHECK(tied.trajs[2].id == "demo-11");

    std::vector<Trajectory> missing;
    missing.push_back(demo_rollout(0.1, 20));
    missing[0].meta.erase("epsilon");
    CHECK_THROWS_AS(rank_rollouts(missing), std::invalid_argument);
    missing[0].meta["epsilon"] = std::string("0.1");
    CHECK_THROWS_AS(rank_rollouts(missing), std::invalid_argument);
    CHECK_THROWS_AS(rank_rollouts({}), std::invalid_argument);
}

TEST_CASE("admissible pairs skip ties and order worse before better") {
    std::vector<Trajectory> demos;
    int index = 0;
    for (double eps : {0.0, 0.1, 0.2, 0.4, 0.8})
        for (int k = 0; k < 4; ++k) demos.push_back(demo_rollout(eps, index++));
    const RankedDemos ranked = rank_rollouts(demos);
    const auto pairs = admissible_pairs(ranked);
    // C(20,2) minus 5 * C(4,2) same-level pairs.
    CHECK(pairs.size() == 160);
    for (const auto& [worse, better] : pairs) {
        CHECK(worse < better);  // worst-first ordering
        CHECK(ranked.epsilons[worse] > ranked.epsilons[better]);
    }

    std::vector<Trajectory> equal;
    for (int k = 0; k < 3; ++k) equal.push_back(demo_rollout(0.2, 30 + k));
    CHECK(admissible_pairs(rank_rollouts(equal)).empty());
}

TEST_CASE("training separates noise levels and is bit-deterministic") {
    std::vector<Trajectory> demos;
    int index = 0;
    for (double eps : {0.0, 0.1, 0.2, 0.4, 0.8})
        for (int k = 0; k < 6; ++k) demos.push_back(demo_rollout(eps, index++));
    const RankedDemos ranked = rank_rollouts(demos);

    RewardTrainConfig cfg;
    cfg.batch_pairs = 8;
    cfg.steps = 150;
    cfg.seed = 42;
    const RewardTrainResult result = train_reward(ranked, cfg);
    CHECK(result.final_loss < result.initial_loss);

    const RewardTrainResult repeat = train_reward(ranked, cfg);
    CHECK(reward_net_to_json(result.net) == reward_net_to_json(repeat.net));

    std::vector<double> returns(ranked.trajs.size());
    std::vector<double> neg_eps(ranked.trajs.size());
    for (std::size_t i = 0; i < ranked.trajs.size(); ++i) {
        returns[i] = trajectory_return(result.net, ranked.trajs[i]);
        neg_eps[i] = -ranked.epsilons[i];
    }
    const auto pairs = admissible_pairs(ranked);
    int correct = 0;
    for (const auto& [worse, better] : pairs)
        if (returns[better] > returns[worse]) ++correct;
    CHECK(static_cast<double>(correct) / static_cast<double>(pairs.size()) >= 0.85);
    CHECK(kendall_tau(neg_eps, returns) >= 0.8);

    // Annotated rewards echo the separation: clean mean above noisy mean.
    std::vector<Trajectory> extremes;
    extremes.push_back(demo_rollout(0.0, 900));
    extremes.push_back(demo_rollout(0.8, 901));
    annotate_rewards(result.net, extremes);
    auto mean_reward = [](const Trajectory& traj) {
        double sum = 0.0;
        for (const TimeStep& step : traj.steps) sum += step.reward.value();
        return sum / static_cast<double>(traj.steps.size());
    };
    CHECK(mean_reward(extremes[0]) > mean_reward(extremes[1]));
}

TEST_CASE("training validates its inputs") {
    std::vector<Trajectory> equal;
    for (int k = 0; k < 4; ++k) equal.push_back(demo_rollout(0.3, 40 + k));
    CHECK_THROWS_AS(train_reward(rank_rollouts(equal), RewardTrainConfig{}),
                    std::invalid_argument);

    std::vector<Trajectory> demos;
    demos.push_back(demo_rollout(0.0, 50));
    demos.push_back(demo_rollout(0.4, 51));
    RewardTrainConfig bad;
    bad.steps = 0;
    CHECK_THROWS_AS(train_reward(rank_rollouts(demos), bad), std::invalid_argument);
    bad = RewardTrainConfig{};
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(train_reward(rank_rollouts(demos), bad), std::invalid_argument);
}

TEST_CASE("snippet training runs deterministically on short windows") {
    std::vector<Trajectory> demos;
    demos.push_back(demo_rollout(0.0, 60, 20));
    demos.push_back(demo_rollout(0.2, 61, 20));
    demos.push_back(demo_rollout(0.8, 62, 9));  // shorter than the window
    RewardTrainConfig cfg;
    cfg.batch_pairs = 4;
    cfg.steps = 10;
    cfg.seed = 7;
    cfg.snippets = true;
    cfg.snippet_len = 12;
    const RankedDemos ranked = rank_rollouts(demos);
    const RewardTrainResult a = train_reward(ranked, cfg);
    const RewardTrainResult b = train_reward(ranked, cfg);
    CHECK(std::isfinite(a.initial_loss));
    CHECK(std::isfinite(a.final_loss));
    CHECK(reward_net_to_json(a.net) == reward_net_to_json(b.net));
    CHECK(a.initial_loss == b.initial_loss);
    CHECK(a.final_loss == b.final_loss);
}

TEST_CASE("annotate_rewards writes per-step outputs and nothing else") {
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 4; ++i) trajs.push_back(demo_rollout(0.1 * i, 70 + i, 8 + i));
    std::vector<Trajectory> copy = trajs;

    RewardNet zero = make_reward_net(16, 1);
    zero.w3.setZero();
    annotate_rewards(zero, trajs);
    for (const Trajectory& traj : trajs)
        for (const TimeStep& step : traj.steps) CHECK(step.reward.value() == 0.0);

    const RewardNet net = make_reward_net(16, 8);
    annotate_rewards(net, trajs);
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        CHECK(trajs[i].id == copy[i].id);
        REQUIRE(trajs[i].steps.size() == copy[i].steps.size());
        for (std::size_t t = 0; t < trajs[i].steps.size(); ++t) {
            CHECK(trajs[i].steps[t].obs.lidar == copy[i].steps[t].obs.lidar);
            CHECK(trajs[i].steps[t].state.position.x == copy[i].steps[t].state.position.x);
            CHECK(trajs[i].steps[t].action.steer == copy[i].steps[t].action.steer);
        }
    }
}

TEST_CASE("annotate_rewards agrees with trajectory_return and threads") {
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 6; ++i) trajs.push_back(demo_rollout(0.15 * i, 80 + i, 6 + i));
    const RewardNet net = make_reward_net(16, 8);

    std::vector<Trajectory> serial = trajs;
    annotate_rewards(net, serial, 1);
    std::vector<Trajectory> parallel = trajs;
    annotate_rewards(net, parallel, 3);

    for (std::size_t i = 0; i < trajs.size(); ++i) {
        double sum = 0.0;
        for (std::size_t t = 0; t < serial[i].steps.size(); ++t) {
            sum += serial[i].steps[t].reward.value();
            CHECK(serial[i].steps[t].reward.value() == parallel[i].steps[t].reward.value());
            CHECK(serial[i].steps[t].obs.lidar == trajs[i].steps[t].obs.lidar);
        }
        CHECK(close(sum, trajectory_return(net, trajs[i]), 1e-9));
    }
}

TEST_CASE("reward net JSON round-trips exactly") {
    const RewardNet net = make_reward_net(12, 99);
    const std::string text = reward_net_to_json(net);
    const RewardNet back = reward_net_from_json(text);
    CHECK(back.input_dim == net.input_dim);
    CHECK(back.seed == net.seed);
    CHECK(back.w1 == net.w1);
    CHECK(back.b1 == net.b1);
    CHECK(back.w2 == net.w2);
    CHECK(back.b2 == net.b2);
    CHECK(back.w3 == net.w3);
    CHECK(back.b3 == net.b3);
    CHECK(reward_net_to_json(back) == text);

    Rng rng(6);
    const Eigen::MatrixXd states = random_states(rng, 12, 5);
    CHECK(reward_forward(net, states) == reward_forward(back, states));

    CHECK_THROWS_AS(reward_net_from_json("not json"), std::invalid_argument);
    CHECK_THROWS_AS(reward_net_from_json("{}"), std::exception);
    std::string tampered = text;
    const auto pos = tampered.find("\"input_dim\":12");
    REQUIRE(pos != std::string::npos);
    tampered.replace(pos, 14, "\"input_dim\":13");
    CHECK_THROWS_AS(reward_net_from_json(tampered), std::invalid_argument);
}
