#include "trapkit/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

#include <nlohmann/json.hpp>

#include "trapkit/evaluation.hpp"
#include "trapkit/rng.hpp"
#include "trapkit/threading.hpp"

namespace trapkit {

namespace {

Eigen::MatrixXd init_matrix(int rows, int cols, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
    return m;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

int stride_for(int len, int token_cap) {
    return len <= token_cap ? 1 : (len + token_cap - 1) / token_cap;
}

struct Forward {
    Eigen::MatrixXd x;        // (in, n)
    Eigen::MatrixXd proj_h;   // (128, n)
    Eigen::MatrixXd tokens;   // (64, n), projection output plus position encodings
    std::array<Eigen::MatrixXd, kAttentionHeads> q, k, v;  // (32, n) each
    std::array<Eigen::MatrixXd, kAttentionHeads> attn;     // (n, n), rows are queries
    Eigen::MatrixXd heads;    // (64, n), concatenated head outputs
    Eigen::MatrixXd z;        // (64, n), tokens + attention output (residual)
    Eigen::MatrixXd ffn_h;    // (128, n)
    Eigen::MatrixXd encoded;  // (64, n), z + feed-forward output (residual)
    Eigen::VectorXd pooled;   // (64)
    double logit = 0.0;
};

Forward run_forward(const SequenceClassifier& model, const Eigen::MatrixXd& inputs) {
    if (inputs.rows() != model.input_dim)
        throw std::invalid_argument("classifier: input width differs from model input_dim");
    if (inputs.cols() < 1) throw std::invalid_argument("classifier: no tokens");
    const Eigen::Index n = inputs.cols();
    Forward f;
    // f.x holds the standardized inputs; the p_w1 gradient below uses it too.
    f.x = ((inputs.colwise() - model.in_shift).array().colwise() * model.in_scale.array())
              .matrix();
    f.proj_h = ((model.p_w1 * f.x).colwise() + model.p_b1).array().tanh().matrix();
    f.tokens = ((model.p_w2 * f.proj_h).colwise() + model.p_b2) +
               positional_encoding(kDModel, static_cast<int>(n));

    const double scale = 1.0 / std::sqrt(static_cast<double>(kHeadDim));
    const Eigen::MatrixXd qa = (model.wq * f.tokens).colwise() + model.bq;
    const Eigen::MatrixXd ka = (model.wk * f.tokens).colwise() + model.bk;
    const Eigen::MatrixXd va = (model.wv * f.tokens).colwise() + model.bv;
    f.heads.resize(kDModel, n);
    for (int h = 0; h < kAttentionHeads; ++h) {
        f.q[h] = qa.middleRows(h * kHeadDim, kHeadDim);
        f.k[h] = ka.middleRows(h * kHeadDim, kHeadDim);
        f.v[h] = va.middleRows(h * kHeadDim, kHeadDim);
        Eigen::MatrixXd scores = f.q[h].transpose() * f.k[h] * scale;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::RowVectorXd row = scores.row(i);
            const Eigen::RowVectorXd e = (row.array() - row.maxCoeff()).exp().matrix();
            scores.row(i) = e / e.sum();
        }
        f.attn[h] = std::move(scores);
        f.heads.middleRows(h * kHeadDim, kHeadDim) = f.v[h] * f.attn[h].transpose();
    }
    f.z = f.tokens + ((model.wo * f.heads).colwise() + model.bo);
    f.ffn_h = ((model.f_w1 * f.z).colwise() + model.f_b1).array().tanh().matrix();
    f.encoded = f.z + ((model.f_w2 * f.ffn_h).colwise() + model.f_b2);
    f.pooled = f.encoded.rowwise().mean();
    f.logit = model.head_w.dot(f.pooled) + model.head_b(0);
    return f;
}

void accumulate_backward(const SequenceClassifier& model, const Forward& f, double dlogit,
                         ClassifierGradients& g) {
    const Eigen::Index n = f.x.cols();
    g.head_w.noalias() += dlogit * f.pooled;
    g.head_b(0) += dlogit;
    const Eigen::VectorXd dpooled = dlogit * model.head_w;
    const Eigen::MatrixXd dencoded =
        (dpooled / static_cast<double>(n)) * Eigen::RowVectorXd::Ones(n);

    // Feed-forward block: encoded = z + f_w2 * tanh(f_w1 * z + f_b1) + f_b2.
    g.f_w2.noalias() += dencoded * f.ffn_h.transpose();
    g.f_b2.noalias() += dencoded.rowwise().sum();
    const Eigen::MatrixXd dffn_h = model.f_w2.transpose() * dencoded;
    const Eigen::MatrixXd dffn_z = (dffn_h.array() * (1.0 - f.ffn_h.array().square())).matrix();
    g.f_w1.noalias() += dffn_z * f.z.transpose();
    g.f_b1.noalias() += dffn_z.rowwise().sum();
    const Eigen::MatrixXd dz = dencoded + model.f_w1.transpose() * dffn_z;

    // Attention output: z = tokens + wo * heads + bo.
    g.wo.noalias() += dz * f.heads.transpose();
    g.bo.noalias() += dz.rowwise().sum();
    const Eigen::MatrixXd dheads = model.wo.transpose() * dz;
    Eigen::MatrixXd dtokens = dz;

    const double scale = 1.0 / std::sqrt(static_cast<double>(kHeadDim));
    Eigen::MatrixXd dqa(kDModel, n), dka(kDModel, n), dva(kDModel, n);
    for (int h = 0; h < kAttentionHeads; ++h) {
        const Eigen::MatrixXd dO = dheads.middleRows(h * kHeadDim, kHeadDim);
        const Eigen::MatrixXd& A = f.attn[h];
        const Eigen::MatrixXd dV = dO * A;
        const Eigen::MatrixXd dA = dO.transpose() * f.v[h];
        Eigen::MatrixXd dS(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double dot = dA.row(i).dot(A.row(i));
            dS.row(i) = (A.row(i).array() * (dA.row(i).array() - dot)).matrix();
        }
        dqa.middleRows(h * kHeadDim, kHeadDim) = f.k[h] * dS.transpose() * scale;
        dka.middleRows(h * kHeadDim, kHeadDim) = f.q[h] * dS * scale;
        dva.middleRows(h * kHeadDim, kHeadDim) = dV;
    }
    g.wq.noalias() += dqa * f.tokens.transpose();
    g.bq.noalias() += dqa.rowwise().sum();
    g.wk.noalias() += dka * f.tokens.transpose();
    g.bk.noalias() += dka.rowwise().sum();
    g.wv.noalias() += dva * f.tokens.transpose();
    g.bv.noalias() += dva.rowwise().sum();
    dtokens += model.wq.transpose() * dqa + model.wk.transpose() * dka +
               model.wv.transpose() * dva;

    // Projection: tokens = p_w2 * tanh(p_w1 * x + p_b1) + p_b2 + PE (constant).
    g.p_w2.noalias() += dtokens * f.proj_h.transpose();
    g.p_b2.noalias() += dtokens.rowwise().sum();
    const Eigen::MatrixXd dproj_h = model.p_w2.transpose() * dtokens;
    const Eigen::MatrixXd dproj_z =
        (dproj_h.array() * (1.0 - f.proj_h.array().square())).matrix();
    g.p_w1.noalias() += dproj_z * f.x.transpose();
    g.p_b1.noalias() += dproj_z.rowwise().sum();
}

std::vector<Eigen::MatrixXd*> matrix_params(SequenceClassifier& m) {
    return {&m.p_w1, &m.p_w2, &m.wq, &m.wk, &m.wv, &m.wo, &m.f_w1, &m.f_w2};
}
std::vector<const Eigen::MatrixXd*> matrix_grads(const ClassifierGradients& g) {
    return {&g.p_w1, &g.p_w2, &g.wq, &g.wk, &g.wv, &g.wo, &g.f_w1, &g.f_w2};
}
std::vector<Eigen::VectorXd*> vector_params(SequenceClassifier& m) {
    return {&m.p_b1, &m.p_b2, &m.bq, &m.bk, &m.bv, &m.bo, &m.f_b1, &m.f_b2, &m.head_w, &m.head_b};
}
std::vector<const Eigen::VectorXd*> vector_grads(const ClassifierGradients& g) {
    return {&g.p_b1, &g.p_b2, &g.bq, &g.bk, &g.bv, &g.bo, &g.f_b1, &g.f_b2, &g.head_w, &g.head_b};
}
std::vector<Eigen::MatrixXd*> matrix_grads_mutable(ClassifierGradients& g) {
    return {&g.p_w1, &g.p_w2, &g.wq, &g.wk, &g.wv, &g.wo, &g.f_w1, &g.f_w2};
}
std::vector<Eigen::VectorXd*> vector_grads_mutable(ClassifierGradients& g) {
    return {&g.p_b1, &g.p_b2, &g.bq, &g.bk, &g.bv, &g.bo, &g.f_b1, &g.f_b2, &g.head_w, &g.head_b};
}

struct Adam {
    std::vector<Eigen::MatrixXd> mw, vw;
    std::vector<Eigen::VectorXd> mb, vb;
    long t = 0;

    explicit Adam(SequenceClassifier& model) {
        for (const Eigen::MatrixXd* p : matrix_params(model)) {
            mw.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
            vw.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
        }
        for (const Eigen::VectorXd* p : vector_params(model)) {
            mb.push_back(Eigen::VectorXd::Zero(p->size()));
            vb.push_back(Eigen::VectorXd::Zero(p->size()));
        }
    }

    template <typename T>
    void update_one(T& param, const T& grad, T& m, T& v, double lr, double bc1, double bc2) {
        m.array() = 0.9 * m.array() + 0.1 * grad.array();
        v.array() = 0.999 * v.array() + 0.001 * grad.array().square();
        param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + 1e-8);
    }

    void step(SequenceClassifier& model, const ClassifierGradients& g, double lr) {
        ++t;
        const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(t));
        const auto pm = matrix_params(model);
        const auto gm = matrix_grads(g);
        for (std::size_t i = 0; i < pm.size(); ++i)
            update_one(*pm[i], *gm[i], mw[i], vw[i], lr, bc1, bc2);
        const auto pv = vector_params(model);
        const auto gv = vector_grads(g);
        for (std::size_t i = 0; i < pv.size(); ++i)
            update_one(*pv[i], *gv[i], mb[i], vb[i], lr, bc1, bc2);
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
        throw std::invalid_argument(std::string("classifier: bad matrix ") + name);
    const std::size_t cols = j[0].size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (j[r].size() != cols)
            throw std::invalid_argument(std::string("classifier: ragged matrix ") + name);
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j, const char* name) {
    if (!j.is_array())
        throw std::invalid_argument(std::string("classifier: bad vector ") + name);
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

}  // namespace

SequenceClassifier make_classifier(int input_dim, std::uint64_t seed) {
    if (input_dim < 1) throw std::invalid_argument("classifier input_dim must be positive");
    static_assert(kAttentionHeads * kHeadDim == kDModel);
    Rng rng(derive_seed(seed, "classifier-init"));
    SequenceClassifier m;
    m.input_dim = input_dim;
    m.seed = seed;
    m.p_w1 = init_matrix(kProjectionHidden, input_dim, rng);
    m.p_b1 = Eigen::VectorXd::Zero(kProjectionHidden);
    m.p_w2 = init_matrix(kDModel, kProjectionHidden, rng);
    m.p_b2 = Eigen::VectorXd::Zero(kDModel);
    m.wq = init_matrix(kDModel, kDModel, rng);
    m.bq = Eigen::VectorXd::Zero(kDModel);
    m.wk = init_matrix(kDModel, kDModel, rng);
    m.bk = Eigen::VectorXd::Zero(kDModel);
    m.wv = init_matrix(kDModel, kDModel, rng);
    m.bv = Eigen::VectorXd::Zero(kDModel);
    m.wo = init_matrix(kDModel, kDModel, rng);
    m.bo = Eigen::VectorXd::Zero(kDModel);
    m.f_w1 = init_matrix(kFfnWidth, kDModel, rng);
    m.f_b1 = Eigen::VectorXd::Zero(kFfnWidth);
    m.f_w2 = init_matrix(kDModel, kFfnWidth, rng);
    m.f_b2 = Eigen::VectorXd::Zero(kDModel);
    m.head_w = init_matrix(kDModel, 1, rng).col(0);
    m.head_b = Eigen::VectorXd::Zero(1);
    m.in_shift = Eigen::VectorXd::Zero(input_dim);
    m.in_scale = Eigen::VectorXd::Ones(input_dim);
    return m;
}

Eigen::VectorXd step_input(const TimeStep& step) {
    if (!step.reward) throw std::invalid_argument("classifier: step lacks reward annotation");
    const std::size_t obs =
        step.obs.lidar.size() + step.obs.lane.size() + step.obs.side.size();
    Eigen::VectorXd x(static_cast<Eigen::Index>(obs) + 4);
    Eigen::Index r = 0;
    for (double v : step.obs.lidar) x(r++) = v;
    for (double v : step.obs.lane) x(r++) = v;
    for (double v : step.obs.side) x(r++) = v;
    x(r++) = step.obs.crossed_lane_line ? 1.0 : 0.0;
    x(r++) = step.action.steer;
    x(r++) = step.action.accel;
    x(r++) = *step.reward;
    return x;
}

Eigen::MatrixXd positional_encoding(int d_model, int count) {
    Eigen::MatrixXd pe(d_model, count);
    for (int pos = 0; pos < count; ++pos) {
        for (int r = 0; r < d_model; ++r) {
            const double exponent = static_cast<double>(r - r % 2) / d_model;
            const double angle = pos / std::pow(10000.0, exponent);
            pe(r, pos) = r % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

Eigen::VectorXd project(const SequenceClassifier& model, const TimeStep& step) {
    const Eigen::VectorXd raw = step_input(step);
    if (raw.size() != model.input_dim)
        throw std::invalid_argument("classifier: input width differs from model input_dim");
    const Eigen::VectorXd x =
        ((raw - model.in_shift).array() * model.in_scale.array()).matrix();
    const Eigen::VectorXd h = ((model.p_w1 * x) + model.p_b1).array().tanh().matrix();
    return model.p_w2 * h + model.p_b2;
}

Eigen::MatrixXd subsampled_inputs(const Trajectory& traj, int token_cap) {
    if (traj.steps.empty()) throw std::invalid_argument("classifier: empty trajectory");
    if (token_cap < 1) throw std::invalid_argument("classifier: token_cap must be positive");
    const int len = traj.length();
    const int stride = stride_for(len, token_cap);
    const int count = (len + stride - 1) / stride;
    Eigen::MatrixXd out;
    for (int i = 0; i < count; ++i) {
        const Eigen::VectorXd col = step_input(traj.steps[static_cast<std::size_t>(i) * stride]);
        if (i == 0) out.resize(col.size(), count);
        if (col.size() != out.rows())
            throw std::invalid_argument("classifier: inconsistent observation width");
        out.col(i) = col;
    }
    return out;
}

double classify_logit(const SequenceClassifier& model, const Trajectory& traj) {
    return run_forward(model, subsampled_inputs(traj, model.token_cap)).logit;
}

double encode_and_classify(const SequenceClassifier& model, const Trajectory& traj) {
    return sigmoid(classify_logit(model, traj));
}

std::vector<double> score_trajectories(const SequenceClassifier& model,
                                       std::span<const Trajectory> trajs, int threads) {
    std::vector<double> scores(trajs.size());
    parallel_for(trajs.size(), threads,
                 [&](std::size_t i) { scores[i] = encode_and_classify(model, trajs[i]); });
    return scores;
}

std::vector<double> prefix_scores(const SequenceClassifier& model, const Trajectory& traj) {
    if (traj.length() < 2) throw std::invalid_argument("prefix_scores: need at least 2 steps");
    Eigen::MatrixXd full(model.input_dim, traj.length());
    for (int t = 0; t < traj.length(); ++t) {
        const Eigen::VectorXd col = step_input(traj.steps[t]);
        if (col.size() != model.input_dim)
            throw std::invalid_argument("classifier: input width differs from model input_dim");
        full.col(t) = col;
    }
    std::vector<double> scores;
    scores.reserve(static_cast<std::size_t>(traj.length()) - 1);
    for (int k = 2; k <= traj.length(); ++k) {
        const int stride = stride_for(k, model.token_cap);
        const int count = (k + stride - 1) / stride;
        Eigen::MatrixXd sub(model.input_dim, count);
        for (int i = 0; i < count; ++i) sub.col(i) = full.col(i * stride);
        scores.push_back(sigmoid(run_forward(model, sub).logit));
    }
    return scores;
}

Trajectory trim_for_eval(const Trajectory& traj, int m) {
    if (m < 1) throw std::invalid_argument("trim_for_eval: m must be positive");
    if (traj.length() <= m)
        throw std::invalid_argument("trim_for_eval: trajectory not longer than the trim");
    const int keep = traj.length() - m;
    Trajectory out;
    out.id = traj.id + "/trim";
    out.seed = traj.seed;
    out.steps.assign(traj.steps.begin(), traj.steps.begin() + keep);
    out.wct = traj.wct;  // bookkeeping: step index stays in source coordinates
    out.wct_label = traj.wct_label;
    for (int g = 0; g < kAnomalyGroupCount; ++g) {
        for (const auto& [start, end] : traj.anomaly_labels.intervals[g]) {
            const int hi = std::min(end, keep);
            if (start < hi) out.anomaly_labels.intervals[g].emplace_back(start, hi);
        }
    }
    out.meta = traj.meta;
    out.src = traj.id;
    out.prefix_len = keep;
    return out;
}

ClassifierGradients zero_classifier_gradients(const SequenceClassifier& model) {
    ClassifierGradients g;
    g.p_w1 = Eigen::MatrixXd::Zero(model.p_w1.rows(), model.p_w1.cols());
    g.p_w2 = Eigen::MatrixXd::Zero(model.p_w2.rows(), model.p_w2.cols());
    g.wq = Eigen::MatrixXd::Zero(kDModel, kDModel);
    g.wk = Eigen::MatrixXd::Zero(kDModel, kDModel);
    g.wv = Eigen::MatrixXd::Zero(kDModel, kDModel);
    g.wo = Eigen::MatrixXd::Zero(kDModel, kDModel);
    g.f_w1 = Eigen::MatrixXd::Zero(model.f_w1.rows(), model.f_w1.cols());
    g.f_w2 = Eigen::MatrixXd::Zero(model.f_w2.rows(), model.f_w2.cols());
    g.p_b1 = Eigen::VectorXd::Zero(model.p_b1.size());
    g.p_b2 = Eigen::VectorXd::Zero(model.p_b2.size());
    g.bq = Eigen::VectorXd::Zero(kDModel);
    g.bk = Eigen::VectorXd::Zero(kDModel);
    g.bv = Eigen::VectorXd::Zero(kDModel);
    g.bo = Eigen::VectorXd::Zero(kDModel);
    g.f_b1 = Eigen::VectorXd::Zero(model.f_b1.size());
    g.f_b2 = Eigen::VectorXd::Zero(model.f_b2.size());
    g.head_w = Eigen::VectorXd::Zero(model.head_w.size());
    g.head_b = Eigen::VectorXd::Zero(1);
    return g;
}

double classifier_loss(const SequenceClassifier& model, const Eigen::MatrixXd& inputs, int label,
                       ClassifierGradients* grads) {
    if (label != 0 && label != 1)
        throw std::invalid_argument("classifier: label must be 0 or 1");
    const Forward f = run_forward(model, inputs);
    const double z = f.logit;
    const double loss = std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
    if (grads) accumulate_backward(model, f, sigmoid(z) - label, *grads);
    return loss;
}

ClassifierTrainResult train_classifier(const WctDataset& data, const ClassifierTrainConfig& cfg) {
    if (cfg.batch < 1 || cfg.epochs < 1 || cfg.learning_rate <= 0.0 || cfg.val_fraction < 0.0 ||
        cfg.val_fraction >= 1.0)
        throw std::invalid_argument("invalid classifier training config");
    if (data.positives == 0 || data.negatives == 0)
        throw std::invalid_argument("train_classifier: both classes required");

    const DatasetSplit split = split_by_source(data, cfg.val_fraction, cfg.seed);
    if (split.train.empty())
        throw std::invalid_argument("train_classifier: empty training split");

    auto prepare = [](const std::vector<Trajectory>& items, std::vector<Eigen::MatrixXd>& inputs,
                      std::vector<int>& labels) {
        inputs.reserve(items.size());
        labels.reserve(items.size());
        for (const Trajectory& item : items) {
            inputs.push_back(subsampled_inputs(item, kTokenCap));
            labels.push_back(item.wct_label);
        }
    };
    std::vector<Eigen::MatrixXd> train_inputs, val_inputs;
    std::vector<int> train_labels, val_labels;
    prepare(split.train, train_inputs, train_labels);
    prepare(split.val, val_inputs, val_labels);
    const Eigen::Index input_dim = train_inputs.front().rows();
    for (const Eigen::MatrixXd& m : train_inputs)
        if (m.rows() != input_dim)
            throw std::invalid_argument("train_classifier: inconsistent observation widths");

    ClassifierTrainResult result;
    result.model = make_classifier(static_cast<int>(input_dim), cfg.seed);
    {
        // Per-dimension standardization fitted on the training tokens; frozen
        // constants thereafter (never updated by Adam, serialized with the
        // model).  Near-constant dimensions keep unit scale.
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(input_dim);
        Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(input_dim);
        double count = 0.0;
        for (const Eigen::MatrixXd& m : train_inputs) {
            sum += m.rowwise().sum();
            sum_sq += m.array().square().matrix().rowwise().sum();
            count += static_cast<double>(m.cols());
        }
        const Eigen::ArrayXd mean = sum.array() / count;
        const Eigen::ArrayXd var = (sum_sq.array() / count - mean.square()).max(0.0);
        result.model.in_shift = mean.matrix();
        result.model.in_scale =
            (var.sqrt() >= 1e-6).select(1.0 / var.sqrt().max(1e-6), 1.0).matrix();
    }
    SequenceClassifier best = result.model;
    Adam adam(result.model);
    Rng rng(derive_seed(cfg.seed, "classifier-train"));

    std::vector<std::size_t> order(train_inputs.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            const auto j = rng.uniform_int(0, static_cast<std::int64_t>(i) - 1);
            std::swap(order[i - 1], order[static_cast<std::size_t>(j)]);
        }
        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch) {
            const std::size_t end = std::min(begin + cfg.batch, order.size());
            ClassifierGradients grads = zero_classifier_gradients(result.model);
            double batch_loss = 0.0;
            for (std::size_t i = begin; i < end; ++i)
                batch_loss +=
                    classifier_loss(result.model, train_inputs[order[i]],
                                    train_labels[order[i]], &grads);
            const double inv = 1.0 / static_cast<double>(end - begin);
            for (Eigen::MatrixXd* gm : matrix_grads_mutable(grads)) *gm *= inv;
            for (Eigen::VectorXd* gv : vector_grads_mutable(grads)) *gv *= inv;
            epoch_loss += batch_loss;
            adam.step(result.model, grads, cfg.learning_rate);
        }
        result.epoch_train_loss.push_back(epoch_loss / static_cast<double>(order.size()));

        if (!val_inputs.empty()) {
            std::vector<int> pred(val_inputs.size());
            for (std::size_t i = 0; i < val_inputs.size(); ++i)
                pred[i] = run_forward(result.model, val_inputs[i]).logit > 0.0 ? 1 : 0;
            const double f1 = confusion_metrics(pred, val_labels).f1;
            result.epoch_val_f1.push_back(f1);
            if (f1 > result.best_val_f1) {
                result.best_val_f1 = f1;
                result.best_epoch = epoch;
                best = result.model;
            }
        }
    }
    if (!val_inputs.empty()) result.model = best;
    return result;
}

std::string classifier_to_json(const SequenceClassifier& model) {
    nlohmann::json j;
    j["input_dim"] = model.input_dim;
    j["seed"] = model.seed;
    j["token_cap"] = model.token_cap;
    j["p_w1"] = matrix_to_json(model.p_w1);
    j["p_b1"] = vector_to_json(model.p_b1);
    j["p_w2"] = matrix_to_json(model.p_w2);
    j["p_b2"] = vector_to_json(model.p_b2);
    j["wq"] = matrix_to_json(model.wq);
    j["bq"] = vector_to_json(model.bq);
    j["wk"] = matrix_to_json(model.wk);
    j["bk"] = vector_to_json(model.bk);
    j["wv"] = matrix_to_json(model.wv);
    j["bv"] = vector_to_json(model.bv);
    j["wo"] = matrix_to_json(model.wo);
    j["bo"] = vector_to_json(model.bo);
    j["f_w1"] = matrix_to_json(model.f_w1);
    j["f_b1"] = vector_to_json(model.f_b1);
    j["f_w2"] = matrix_to_json(model.f_w2);
    j["f_b2"] = vector_to_json(model.f_b2);
    j["head_w"] = vector_to_json(model.head_w);
    j["head_b"] = vector_to_json(model.head_b);
    j["in_shift"] = vector_to_json(model.in_shift);
    j["in_scale"] = vector_to_json(model.in_scale);
    return j.dump();
}

SequenceClassifier classifier_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("classifier: bad JSON: ") + e.what());
    }
    SequenceClassifier m;
    m.input_dim = j.at("input_dim").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.token_cap = j.at("token_cap").get<int>();
    m.p_w1 = matrix_from_json(j.at("p_w1"), "p_w1");
    m.p_b1 = vector_from_json(j.at("p_b1"), "p_b1");
    m.p_w2 = matrix_from_json(j.at("p_w2"), "p_w2");
    m.p_b2 = vector_from_json(j.at("p_b2"), "p_b2");
    m.wq = matrix_from_json(j.at("wq"), "wq");
    m.bq = vector_from_json(j.at("bq"), "bq");
    m.wk = matrix_from_json(j.at("wk"), "wk");
    m.bk = vector_from_json(j.at("bk"), "bk");
    m.wv = matrix_from_json(j.at("wv"), "wv");
    m.bv = vector_from_json(j.at("bv"), "bv");
    m.wo = matrix_from_json(j.at("wo"), "wo");
    m.bo = vector_from_json(j.at("bo"), "bo");
    m.f_w1 = matrix_from_json(j.at("f_w1"), "f_w1");
    m.f_b1 = vector_from_json(j.at("f_b1"), "f_b1");
    m.f_w2 = matrix_from_json(j.at("f_w2"), "f_w2");
    m.f_b2 = vector_from_json(j.at("f_b2"), "f_b2");
    m.head_w = vector_from_json(j.at("head_w"), "head_w");
    m.head_b = vector_from_json(j.at("head_b"), "head_b");
    m.in_shift = vector_from_json(j.at("in_shift"), "in_shift");
    m.in_scale = vector_from_json(j.at("in_scale"), "in_scale");
    const bool shapes_ok =
        m.token_cap >= 1 && m.p_w1.rows() == kProjectionHidden && m.p_w1.cols() == m.input_dim &&
        m.p_b1.size() == kProjectionHidden && m.p_w2.rows() == kDModel &&
        m.p_w2.cols() == kProjectionHidden && m.p_b2.size() == kDModel &&
        m.wq.rows() == kDModel && m.wq.cols() == kDModel && m.bq.size() == kDModel &&
        m.wk.rows() == kDModel && m.wk.cols() == kDModel && m.bk.size() == kDModel &&
        m.wv.rows() == kDModel && m.wv.cols() == kDModel && m.bv.size() == kDModel &&
        m.wo.rows() == kDModel && m.wo.cols() == kDModel && m.bo.size() == kDModel &&
        m.f_w1.rows() == kFfnWidth && m.f_w1.cols() == kDModel && m.f_b1.size() == kFfnWidth &&
        m.f_w2.rows() == kDModel && m.f_w2.cols() == kFfnWidth && m.f_b2.size() == kDModel &&
        m.head_w.size() == kDModel && m.head_b.size() == 1 &&
        m.in_shift.size() == m.input_dim && m.in_scale.size() == m.input_dim;
    if (!shapes_ok) throw std::invalid_argument("classifier: inconsistent shapes");
    return m;
}

}  // namespace trapkit
