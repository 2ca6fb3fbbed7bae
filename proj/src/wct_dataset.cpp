#include "trapkit/wct_dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

#include "trapkit/rng.hpp"
#include "trapkit/threading.hpp"

namespace trapkit {

namespace {

bool fully_annotated(const Trajectory& traj) {
    for (const TimeStep& step : traj.steps)
        if (!step.reward) return false;
    return true;
}

Trajectory make_prefix(const Trajectory& src, int length, const std::string& id) {
    Trajectory out;
    out.id = id;
    out.seed = src.seed;
    out.steps.assign(src.steps.begin(), src.steps.begin() + length);
    if (src.wct && src.wct->step < length) out.wct = src.wct;
    out.wct_label = src.wct_label;
    for (int g = 0; g < kAnomalyGroupCount; ++g) {
        for (const auto& [start, end] : src.anomaly_labels.intervals[g]) {
            const int hi = std::min(end, length);
            if (start < hi) out.anomaly_labels.intervals[g].emplace_back(start, hi);
        }
    }
    out.meta = src.meta;
    out.src = src.id;
    out.prefix_len = length;
    return out;
}

}  // namespace

void validate_sampler(const SamplerConfig& cfg) {
    if (cfg.max_clip_length < 2)
        throw std::invalid_argument("sampler: max_clip_length must be >= 2");
    if (cfg.expansions < 1) throw std::invalid_argument("sampler: expansions must be >= 1");
}

Trajectory end_clip(const Trajectory& traj, int dataset_min_length, const SamplerConfig& cfg,
                    Rng& rng) {
    const int len = traj.length();
    const int lower = std::min(dataset_min_length, cfg.max_clip_length);
    const int keep = len >= lower ? static_cast<int>(rng.uniform_int(lower, len)) : len;
    return make_prefix(traj, keep, traj.id + "/clip");
}

std::vector<Trajectory> expand_prefixes(const Trajectory& traj, const SamplerConfig& cfg,
                                        Rng& rng) {
    if (traj.wct_label != 1)
        throw std::invalid_argument("expand_prefixes: source must carry a positive label");
    const int len = traj.length();
    std::vector<Trajectory> out;
    if (len < 3) return out;
    std::vector<int> pool(static_cast<std::size_t>(len) - 2);
    std::iota(pool.begin(), pool.end(), 2);  // candidate lengths {2, ..., len-1}
    const int count = std::min(cfg.expansions, len - 2);
    for (int i = 0; i < count; ++i) {
        const auto j = rng.uniform_int(i, static_cast<std::int64_t>(pool.size()) - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
        const int k = pool[static_cast<std::size_t>(i)];
        out.push_back(make_prefix(traj, k, traj.id + "/p" + std::to_string(k)));
    }
    return out;
}

WctDataset build_dataset(std::span<const Trajectory> trajs, const SamplerConfig& cfg,
                         int threads) {
    validate_sampler(cfg);
    std::set<std::string> ids;
    int min_len = std::numeric_limits<int>::max();
    for (const Trajectory& traj : trajs) {
        if (traj.length() < 2)
            throw std::invalid_argument("build_dataset: trajectory " + traj.id +
                                        " shorter than 2 steps");
        if (!fully_annotated(traj))
            throw std::invalid_argument("build_dataset: trajectory " + traj.id +
                                        " lacks reward annotation");
        if (!ids.insert(traj.id).second)
            throw std::invalid_argument("build_dataset: duplicate trajectory id " + traj.id);
        min_len = std::min(min_len, traj.length());
    }
    WctDataset dataset;
    if (trajs.empty()) return dataset;

    std::vector<Trajectory> clipped(trajs.size());
    std::vector<std::vector<Trajectory>> expanded(trajs.size());
    parallel_for(trajs.size(), threads, [&](std::size_t i) {
        Rng rng(mix_seed(derive_seed(cfg.seed, "wct-sampler"), i));
        clipped[i] = end_clip(trajs[i], min_len, cfg, rng);
        if (trajs[i].wct_label == 1) expanded[i] = expand_prefixes(trajs[i], cfg, rng);
    });

    for (std::size_t i = 0; i < trajs.size(); ++i) dataset.items.push_back(std::move(clipped[i]));
    for (std::size_t i = 0; i < trajs.size(); ++i)
        for (Trajectory& item : expanded[i]) dataset.items.push_back(std::move(item));

    Rng shuffle_rng(derive_seed(cfg.seed, "wct-shuffle"));
    for (std::size_t i = dataset.items.size(); i > 1; --i) {
        const auto j = shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1);
        std::swap(dataset.items[i - 1], dataset.items[static_cast<std::size_t>(j)]);
    }

    for (const Trajectory& item : dataset.items)
        (item.wct_label == 1 ? dataset.positives : dataset.negatives) += 1;
    return dataset;
}

DatasetSplit split_by_source(const WctDataset& dataset, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction >= 0.0) || val_fraction >= 1.0)
        throw std::invalid_argument("split_by_source: val_fraction must lie in [0, 1)");
    std::set<std::string> unique;
    for (const Trajectory& item : dataset.items) unique.insert(item.src.value_or(item.id));
    std::vector<std::string> sources(unique.begin(), unique.end());  // sorted, then shuffled
    Rng rng(derive_seed(seed, "split"));
    for (std::size_t i = sources.size(); i > 1; --i) {
        const auto j = rng.uniform_int(0, static_cast<std::int64_t>(i) - 1);
        std::swap(sources[i - 1], sources[static_cast<std::size_t>(j)]);
    }
    std::size_t val_count =
        static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(sources.size())));
    if (val_fraction > 0.0 && sources.size() >= 2)
        val_count = std::clamp<std::size_t>(val_count, 1, sources.size() - 1);
    else if (sources.size() < 2)
        val_count = 0;
    const std::set<std::string> val_sources(sources.begin(),
                                            sources.begin() + static_cast<long>(val_count));

    DatasetSplit split;
    for (const Trajectory& item : dataset.items) {
        if (val_sources.count(item.src.value_or(item.id)))
            split.val.push_back(item);
        else
            split.train.push_back(item);
    }
    return split;
}

}  // namespace trapkit
