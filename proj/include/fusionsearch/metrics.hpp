#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>

namespace fusionsearch {

// Binary classification counts at a fixed threshold. scores[i] >= threshold
// predicts the positive class.
struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
};

class MetricError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

Confusion confusion(std::span<const double> scores, std::span<const int> labels,
                    double threshold);

// Matthews correlation coefficient; 0 when the denominator vanishes.
double mcc(const Confusion& c);

// F1 = 2tp / (2tp + fp + fn); 0 when there are no positives on either side.
double f1_score(const Confusion& c);

// Area under the ROC curve via the rank-sum formulation with ties averaged.
// Throws MetricError when either class is absent.
double auc(std::span<const double> scores, std::span<const int> labels);

// Area under the precision-recall curve. Thresholds sweep the distinct score
// values in descending order; equal scores enter as one atomic group.
// Throws MetricError when there are no positives.
double aupr(std::span<const double> scores, std::span<const int> labels);

}  // namespace fusionsearch
