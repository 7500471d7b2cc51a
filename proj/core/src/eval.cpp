#include "fdialab/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

namespace fdialab {

void ConfusionCounts::add(bool truth, bool predicted) {
    if (truth && predicted) {
        ++tp;
    } else if (!truth && predicted) {
        ++fp;
    } else if (truth && !predicted) {
        ++fn;
    } else {
        ++tn;
    }
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
}

ConfusionCounts count_confusion(const std::vector<std::uint8_t>& truth,
                                const std::vector<std::uint8_t>& predicted) {
    if (truth.size() != predicted.size()) {
        throw ContractError("count_confusion: length mismatch");
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) c.add(truth[i] != 0, predicted[i] != 0);
    return c;
}

DetectionMetrics dr_fa_f1(const ConfusionCounts& counts) {
    DetectionMetrics m;
    if (counts.tp + counts.fn == 0) {
        // no positive labels at all: perfect negatives score (1,0,1), any
        // mismatch scores (0,1,0)
        if (counts.fp == 0) {
            m.dr = 1.0;
            m.fa = 0.0;
            m.f1 = 1.0;
        } else {
            m.dr = 0.0;
            m.fa = 1.0;
            m.f1 = 0.0;
        }
        return m;
    }
    m.dr = static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fn);
    m.fa = counts.fp + counts.tn == 0
               ? 0.0
               : static_cast<double>(counts.fp) / static_cast<double>(counts.fp + counts.tn);
    m.f1 = static_cast<double>(2 * counts.tp) /
           static_cast<double>(2 * counts.tp + counts.fp + counts.fn);
    return m;
}

double accuracy(const ConfusionCounts& counts) {
    if (counts.total() == 0) throw ContractError("accuracy: empty counts");
    return static_cast<double>(counts.tp + counts.tn) / static_cast<double>(counts.total());
}

namespace {

double interpolated_quantile(const std::vector<double>& sorted, double p) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = p * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double w = h - static_cast<double>(lo);
    return sorted[lo] + w * (sorted[hi] - sorted[lo]);
}

}  // namespace

BoxStats box_stats(std::vector<double> values) {
    if (values.empty()) throw ContractError("box_stats: empty input");
    std::sort(values.begin(), values.end());
    BoxStats b;
    b.q1 = interpolated_quantile(values, 0.25);
    b.q2 = interpolated_quantile(values, 0.50);
    b.q3 = interpolated_quantile(values, 0.75);
    const double iqr = b.q3 - b.q1;
    const double lw_bound = b.q1 - 1.5 * iqr;
    const double uw_bound = b.q3 + 1.5 * iqr;
    b.lw = b.q1;
    b.uw = b.q3;
    for (double v : values) {
        if (v >= lw_bound) {
            b.lw = v;  // smallest datum above the bound (values sorted)
            break;
        }
    }
    for (auto it = values.rbegin(); it != values.rend(); ++it) {
        if (*it <= uw_bound) {
            b.uw = *it;
            break;
        }
    }
    for (double v : values) {
        if (v < lw_bound || v > uw_bound) b.outliers.push_back(v);
    }
    return b;
}

namespace {

LocalizationSummary summarize(const std::vector<ConfusionCounts>& per_axis) {
    LocalizationSummary s;
    s.f1.reserve(per_axis.size());
    s.acc.reserve(per_axis.size());
    std::size_t low = 0, high = 0;
    for (const auto& c : per_axis) {
        const double f1 = dr_fa_f1(c).f1 * 100.0;
        s.f1.push_back(f1);
        s.acc.push_back(accuracy(c) * 100.0);
        if (f1 <= 5.0) ++low;
        if (f1 >= 95.0) ++high;
    }
    s.f1_box = box_stats(s.f1);
    s.ratio_low = static_cast<double>(low) / static_cast<double>(per_axis.size());
    s.ratio_high = static_cast<double>(high) / static_cast<double>(per_axis.size());
    return s;
}

void validate_eval_inputs(const std::vector<Vec>& node_probs,
                          const std::vector<std::vector<std::uint8_t>>& node_labels) {
    if (node_probs.empty() || node_probs.size() != node_labels.size()) {
        throw ContractError("localization eval: prediction/label count mismatch");
    }
    for (std::size_t i = 0; i < node_probs.size(); ++i) {
        if (node_probs[i].size() != node_labels[i].size() ||
            node_probs[i].size() != node_probs[0].size()) {
            throw ContractError("localization eval: ragged inputs");
        }
    }
}

}  // namespace

LocalizationSummary sample_wise_eval(const std::vector<Vec>& node_probs,
                                     const std::vector<std::vector<std::uint8_t>>& node_labels,
                                     double threshold) {
    validate_eval_inputs(node_probs, node_labels);
    std::vector<ConfusionCounts> per_sample(node_probs.size());
    for (std::size_t s = 0; s < node_probs.size(); ++s) {
        for (std::size_t i = 0; i < node_probs[s].size(); ++i) {
            per_sample[s].add(node_labels[s][i] != 0, node_probs[s][i] > threshold);
        }
    }
    return summarize(per_sample);
}

LocalizationSummary node_wise_eval(const std::vector<Vec>& node_probs,
                                   const std::vector<std::vector<std::uint8_t>>& node_labels,
                                   double threshold) {
    validate_eval_inputs(node_probs, node_labels);
    const std::size_t n = node_probs[0].size();
    std::vector<ConfusionCounts> per_node(n);
    for (std::size_t s = 0; s < node_probs.size(); ++s) {
        for (std::size_t i = 0; i < n; ++i) {
            per_node[i].add(node_labels[s][i] != 0, node_probs[s][i] > threshold);
        }
    }
    return summarize(per_node);
}

TimingStats timing_benchmark(const std::function<void(std::size_t)>& fn, std::size_t count,
                             std::size_t warmup) {
    if (count == 0) throw ContractError("timing_benchmark: empty batch");
    for (std::size_t i = 0; i < warmup; ++i) fn(i % count);
    std::vector<double> ms;
    ms.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn(i);
        const auto t1 = std::chrono::steady_clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    TimingStats stats;
    stats.samples = count;
    double sum = 0.0;
    for (double v : ms) sum += v;
    stats.mean_ms = sum / static_cast<double>(count);
    std::sort(ms.begin(), ms.end());
    stats.p95_ms = interpolated_quantile(ms, 0.95);
    return stats;
}

}  // namespace fdialab
