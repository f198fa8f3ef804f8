#include "fusionsearch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace fusionsearch {

namespace {

void check_sizes(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw MetricError("scores and labels must have equal length");
    }
    if (scores.empty()) {
        throw MetricError("metric over an empty sample is undefined");
    }
}

}  // namespace

Confusion confusion(std::span<const double> scores, std::span<const int> labels,
                    double threshold) {
    check_sizes(scores, labels);
    Confusion c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (labels[i]) {
            (predicted ? c.tp : c.fn) += 1;
        } else {
            (predicted ? c.fp : c.tn) += 1;
        }
    }
    return c;
}

double mcc(const Confusion& c) {
    const double tp = static_cast<double>(c.tp);
    const double fp = static_cast<double>(c.fp);
    const double tn = static_cast<double>(c.tn);
    const double fn = static_cast<double>(c.fn);
    const double denom = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
    if (denom == 0.0) return 0.0;
    return (tp * tn - fp * fn) / denom;
}

double f1_score(const Confusion& c) {
    const double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
    if (denom == 0.0) return 0.0;
    return 2.0 * static_cast<double>(c.tp) / denom;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    check_sizes(scores, labels);

    std::size_t n_pos = 0;
    for (int y : labels) {
        if (y) ++n_pos;
    }
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw MetricError("AUC needs at least one positive and one negative");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Midranks: every member of a tie group gets the group's average rank.
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) pos_rank_sum += midrank;
        }
        i = j;
    }

    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double aupr(std::span<const double> scores, std::span<const int> labels) {
    check_sizes(scores, labels);

    std::size_t n_pos = 0;
    for (int y : labels) {
        if (y) ++n_pos;
    }
    if (n_pos == 0) {
        throw MetricError("AUPR needs at least one positive");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    // Step summation: area += (recall_i - recall_{i-1}) * precision_i, one
    // step per distinct score value so ties cannot split a group.
    double area = 0.0;
    double prev_recall = 0.0;
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) {
                ++tp;
            } else {
                ++fp;
            }
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return area;
}

}  // namespace fusionsearch
