#include "trapkit/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "trapkit/trajectory_io.hpp"

namespace trapkit {

namespace {

double guarded_ratio(double num, double denom, bool* flag) {
    if (denom == 0.0) {
        *flag = true;
        return 0.0;
    }
    return num / denom;
}

}  // namespace

MetricsReport confusion_metrics(std::span<const int> pred, std::span<const int> truth) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("confusion_metrics: length mismatch");
    if (pred.empty()) throw std::invalid_argument("confusion_metrics: empty input");

    MetricsReport report;
    ConfusionCounts& c = report.counts;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != 0, t = truth[i] != 0;
        if (p && t)
            ++c.tp;
        else if (p && !t)
            ++c.fp;
        else if (!p && t)
            ++c.fn;
        else
            ++c.tn;
    }
    bool* flag = &report.zero_denominator;
    const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    const double fn = static_cast<double>(c.fn), tn = static_cast<double>(c.tn);
    report.precision = guarded_ratio(tp, tp + fp, flag);
    report.recall = guarded_ratio(tp, tp + fn, flag);
    report.f1 =
        guarded_ratio(2.0 * report.precision * report.recall,
                      report.precision + report.recall, flag);
    report.accuracy = (tp + tn) / static_cast<double>(pred.size());
    const double denom_sq = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    report.mcc = guarded_ratio(tp * tn - fp * fn, std::sqrt(denom_sq), flag);
    return report;
}

double roc_auc(std::span<const double> scores, std::span<const int> truth,
               std::vector<RocPoint>* points) {
    if (scores.size() != truth.size())
        throw std::invalid_argument("roc_auc: length mismatch");
    const long pos = std::count_if(truth.begin(), truth.end(), [](int t) { return t != 0; });
    const long neg = static_cast<long>(truth.size()) - pos;
    if (pos == 0 || neg == 0)
        throw std::invalid_argument("roc_auc: both classes required");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<RocPoint> curve;
    curve.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        // Consume the whole tie group before emitting a point.
        while (i < order.size() && scores[order[i]] == s) {
            if (truth[order[i]] != 0)
                ++tp;
            else
                ++fp;
            ++i;
        }
        curve.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos, s});
    }

    double auc = 0.0;
    for (std::size_t k = 1; k < curve.size(); ++k)
        auc += (curve[k].fpr - curve[k - 1].fpr) * (curve[k].tpr + curve[k - 1].tpr) / 2.0;
    if (points) *points = std::move(curve);
    return auc;
}

std::map<std::string, double> per_group_recall(
    const std::map<std::string, int>& preds,
    const std::map<std::string, AnomalyLabelSet>& labels) {
    if (preds.size() != labels.size())
        throw std::invalid_argument("per_group_recall: key sets differ");
    for (const auto& [id, _] : preds)
        if (labels.find(id) == labels.end())
            throw std::invalid_argument("per_group_recall: key sets differ");

    std::array<int, kAnomalyGroupCount> present{}, detected{};
    for (const auto& [id, label_set] : labels) {
        const int pred = preds.at(id);
        for (int g = 0; g < kAnomalyGroupCount; ++g) {
            if (label_set.intervals[g].empty()) continue;
            ++present[g];
            if (pred != 0) ++detected[g];
        }
    }
    std::map<std::string, double> out;
    for (int g = 0; g < kAnomalyGroupCount; ++g)
        if (present[g] > 0)
            out[std::string(kAnomalyGroupNames[g])] =
                static_cast<double>(detected[g]) / present[g];
    return out;
}

std::optional<int> lead_time(std::span<const double> prefix_scores, int wct_step,
                             double threshold) {
    for (std::size_t k = 0; k < prefix_scores.size(); ++k)
        if (prefix_scores[k] > threshold) return wct_step - static_cast<int>(k);
    return std::nullopt;
}

double min_window_mean_reward(const Trajectory& traj, int width) {
    if (width < 1) throw std::invalid_argument("window width must be positive");
    const int n = traj.length();
    if (n == 0) throw std::invalid_argument("empty trajectory");
    std::vector<double> rewards(n);
    for (int i = 0; i < n; ++i) {
        if (!traj.steps[i].reward)
            throw std::invalid_argument("trajectory lacks reward annotations");
        rewards[i] = *traj.steps[i].reward;
    }
    const int w = std::min(width, n);
    double window = std::accumulate(rewards.begin(), rewards.begin() + w, 0.0);
    double best = window;
    for (int i = w; i < n; ++i) {
        window += rewards[i] - rewards[i - w];
        best = std::min(best, window);
    }
    return best / w;
}

BaselineResult baseline_reward_threshold(std::span<const Trajectory> train,
                                         std::span<const int> train_truth,
                                         std::span<const Trajectory> test) {
    if (train.size() != train_truth.size())
        throw std::invalid_argument("baseline: train length mismatch");
    if (train.empty()) throw std::invalid_argument("baseline: empty train set");
    const bool has_pos = std::any_of(train_truth.begin(), train_truth.end(),
                                     [](int t) { return t != 0; });
    const bool has_neg = std::any_of(train_truth.begin(), train_truth.end(),
                                     [](int t) { return t == 0; });
    if (!has_pos || !has_neg)
        throw std::invalid_argument("baseline: train needs both classes");

    std::vector<double> train_scores(train.size());
    for (std::size_t i = 0; i < train.size(); ++i)
        train_scores[i] = min_window_mean_reward(train[i]);

    const auto [lo_it, hi_it] = std::minmax_element(train_scores.begin(), train_scores.end());
    const double lo = *lo_it, hi = *hi_it;

    BaselineResult result;
    if (lo == hi) {
        result.degenerate = true;
        result.threshold = lo;
    } else {
        double best_f1 = -1.0;
        for (int k = 0; k < 100; ++k) {
            const double tau = lo + (hi - lo) * k / 99.0;
            std::vector<int> pred(train.size());
            for (std::size_t i = 0; i < train.size(); ++i)
                pred[i] = train_scores[i] < tau ? 1 : 0;
            const double f1 = confusion_metrics(pred, train_truth).f1;
            if (f1 > best_f1) {  // strict: ties keep the lowest candidate
                best_f1 = f1;
                result.threshold = tau;
            }
        }
    }

    result.train_pred.resize(train.size());
    for (std::size_t i = 0; i < train.size(); ++i)
        result.train_pred[i] = train_scores[i] < result.threshold ? 1 : 0;
    result.train_f1 = confusion_metrics(result.train_pred, train_truth).f1;

    result.test_pred.resize(test.size());
    for (std::size_t i = 0; i < test.size(); ++i)
        result.test_pred[i] = min_window_mean_reward(test[i]) < result.threshold ? 1 : 0;
    return result;
}

double kendall_tau(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw std::invalid_argument("kendall_tau: length mismatch");
    if (a.size() < 2)
        throw std::invalid_argument("kendall_tau: need at least 2 entries");
    long concordant = 0;
    long discordant = 0;
    long ties_a = 0;
    long ties_b = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const double da = a[i] - a[j];
            const double db = b[i] - b[j];
            if (da == 0.0 && db == 0.0) {
                ++ties_a;
                ++ties_b;
            } else if (da == 0.0) {
                ++ties_a;
            } else if (db == 0.0) {
                ++ties_b;
            } else if ((da > 0.0) == (db > 0.0)) {
                ++concordant;
            } else {
                ++discordant;
            }
        }
    }
    const long n0 = static_cast<long>(a.size()) * (static_cast<long>(a.size()) - 1) / 2;
    const double denom =
        std::sqrt(static_cast<double>(n0 - ties_a) * static_cast<double>(n0 - ties_b));
    if (denom == 0.0) return 0.0;
    return static_cast<double>(concordant - discordant) / denom;
}

std::string metrics_to_json(const MetricsReport& report) {
    std::ostringstream out;
    out << "{";
    out << "\"f1\":" << format_number(report.f1);
    out << ",\"precision\":" << format_number(report.precision);
    out << ",\"recall\":" << format_number(report.recall);
    out << ",\"accuracy\":" << format_number(report.accuracy);
    out << ",\"mcc\":" << format_number(report.mcc);
    out << ",\"auc\":" << format_number(report.auc);
    out << ",\"counts\":{\"tp\":" << report.counts.tp << ",\"fp\":" << report.counts.fp
        << ",\"fn\":" << report.counts.fn << ",\"tn\":" << report.counts.tn << "}";
    out << ",\"per_group_recall\":{";
    bool first = true;
    for (const auto& [group, value] : report.per_group_recall) {
        if (!first) out << ",";
        first = false;
        out << "\"" << group << "\":" << format_number(value);
    }
    out << "}";
    out << ",\"lead_time_mean\":" << format_number(report.lead_time_mean);
    out << ",\"lead_time_median\":" << format_number(report.lead_time_median);
    out << ",\"lead_time_count\":" << report.lead_time_count;
    out << ",\"zero_denominator\":" << (report.zero_denominator ? "true" : "false");
    out << "}";
    return out.str();
}

std::string roc_to_csv(std::span<const RocPoint> points) {
    std::ostringstream out;
    out << "fpr,tpr,threshold\n";
    for (const RocPoint& p : points) {
        out << format_number(p.fpr) << "," << format_number(p.tpr) << ",";
        if (std::isinf(p.threshold))
            out << "inf";
        else
            out << format_number(p.threshold);
        out << "\n";
    }
    return out.str();
}

std::string groups_to_csv(const std::map<std::string, double>& recall) {
    std::ostringstream out;
    out << "group,recall\n";
    for (const auto& [group, value] : recall)
        out << group << "," << format_number(value) << "\n";
    return out.str();
}

}  // namespace trapkit
