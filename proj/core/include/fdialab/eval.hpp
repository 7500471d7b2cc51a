#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fdialab/linalg.hpp"

namespace fdialab {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
    void add(bool truth, bool predicted);
    ConfusionCounts& operator+=(const ConfusionCounts& o);
};

ConfusionCounts count_confusion(const std::vector<std::uint8_t>& truth,
                                const std::vector<std::uint8_t>& predicted);

struct DetectionMetrics {
    double dr = 0.0;  // TP/(TP+FN)
    double fa = 0.0;  // FP/(FP+TN)
    double f1 = 0.0;  // 2TP/(2TP+FP+FN)
};

/// Standard ratios with the all-negative conventions: a perfectly predicted
/// all-negative truth scores (1, 0, 1); an all-negative truth with any
/// false alarm scores (0, 1, 0).
DetectionMetrics dr_fa_f1(const ConfusionCounts& counts);

/// (TP+TN)/total; no special conventions.
double accuracy(const ConfusionCounts& counts);

struct BoxStats {
    double q1 = 0.0, q2 = 0.0, q3 = 0.0;
    double lw = 0.0, uw = 0.0;  // Tukey whiskers clipped to data
    std::vector<double> outliers;
};

/// Quartiles by linear interpolation between closest ranks; whiskers at
/// Q1 - 1.5 IQR and Q3 + 1.5 IQR clipped to the data range.
BoxStats box_stats(std::vector<double> values);

struct LocalizationSummary {
    std::vector<double> f1;   // percent, one per sample (SW) or per bus (NW)
    std::vector<double> acc;  // percent, same axis
    BoxStats f1_box;
    double ratio_low = 0.0;   // fraction with F1 <= 5%
    double ratio_high = 0.0;  // fraction with F1 >= 95%
};

/// Sample-wise localization: each sample scored over its n node labels at
/// probability threshold 0.5.
LocalizationSummary sample_wise_eval(const std::vector<Vec>& node_probs,
                                     const std::vector<std::vector<std::uint8_t>>& node_labels,
                                     double threshold = 0.5);

/// Node-wise localization: each bus scored over its label sequence across
/// samples.
LocalizationSummary node_wise_eval(const std::vector<Vec>& node_probs,
                                   const std::vector<std::vector<std::uint8_t>>& node_labels,
                                   double threshold = 0.5);

struct TimingStats {
    double mean_ms = 0.0;
    double p95_ms = 0.0;
    std::size_t samples = 0;
};

/// Wall-clock per-call latency of `fn` over `count` calls, first `warmup`
/// calls excluded.
TimingStats timing_benchmark(const std::function<void(std::size_t)>& fn, std::size_t count,
                             std::size_t warmup = 10);

}  // namespace fdialab
