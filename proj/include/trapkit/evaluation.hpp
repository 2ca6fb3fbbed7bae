// Classification metrics, ROC/AUC, per-group recall, lead time, and the
// grid-searched reward-threshold baseline.

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trapkit/trajectory.hpp"

namespace trapkit {

struct ConfusionCounts {
    long tp = 0, fp = 0, fn = 0, tn = 0;
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

struct MetricsReport {
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double accuracy = 0.0;
    double mcc = 0.0;
    double auc = 0.0;
    std::vector<RocPoint> roc_points;
    std::map<std::string, double> per_group_recall;
    double lead_time_mean = 0.0;
    double lead_time_median = 0.0;
    int lead_time_count = 0;  // WCT trajectories with a detection
    ConfusionCounts counts;
    bool zero_denominator = false;  // some metric hit a 0/0 guard
};

// Standard confusion-matrix metrics; any zero denominator yields 0 for that
// metric and sets the report flag.  Entries must be 0/1.  Throws
// std::invalid_argument on empty input or length mismatch.
MetricsReport confusion_metrics(std::span<const int> pred, std::span<const int> truth);

// Trapezoidal ROC AUC with thresholds at every distinct score; fills `points`
// (sorted by descending threshold) when given.  Equals the concordance
// statistic P(s+ > s-) + P(s+ = s-)/2.  Throws std::invalid_argument unless
// both classes are present.
double roc_auc(std::span<const double> scores, std::span<const int> truth,
               std::vector<RocPoint>* points = nullptr);

// Fraction of trajectories carrying each anomaly group that were predicted
// anomalous; groups absent from `labels` are omitted.  Keys of the two maps
// must match exactly.
std::map<std::string, double> per_group_recall(
    const std::map<std::string, int>& preds,
    const std::map<std::string, AnomalyLabelSet>& labels);

// First index k with prefix_scores[k] > threshold gives lead wct_step - k;
// absent when no prefix crosses.  Scores are aligned with step indices.
std::optional<int> lead_time(std::span<const double> prefix_scores, int wct_step,
                             double threshold);

// Minimum over width-sized sliding windows of the mean per-step reward; the
// whole trajectory forms one window when shorter than width.  Requires
// annotated rewards on every step.
double min_window_mean_reward(const Trajectory& traj, int width = 10);

struct BaselineResult {
    double threshold = 0.0;
    bool degenerate = false;  // constant train scores; threshold at midpoint
    double train_f1 = 0.0;
    std::vector<int> train_pred;
    std::vector<int> test_pred;
};

// Grid search over 100 evenly spaced thresholds spanning the train score
// range, maximizing train F1 (ties resolved to the lowest candidate);
// prediction is score < threshold.  Train must contain both classes.
BaselineResult baseline_reward_threshold(std::span<const Trajectory> train,
                                         std::span<const int> train_truth,
                                         std::span<const Trajectory> test);

// Kendall tau-b rank correlation (tie-adjusted), O(n^2).  Throws
// std::invalid_argument on length mismatch or fewer than 2 entries; returns 0
// when either sequence is constant.
double kendall_tau(std::span<const double> a, std::span<const double> b);

// Canonical serializations (stable field order, %.9g floats) for emitted
// artifacts; deterministic across runs.
std::string metrics_to_json(const MetricsReport& report);
std::string roc_to_csv(std::span<const RocPoint> points);
std::string groups_to_csv(const std::map<std::string, double>& recall);

}  // namespace trapkit
