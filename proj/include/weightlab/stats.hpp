#pragma once

#include <utility>
#include <vector>

#include "weightlab/network.hpp"

namespace weightlab {

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::size_t total() const { return tp + fp + tn + fn; }
};

/// One row in the Tables-4..8 layout.
struct MetricsReport {
    double auprc = 0.0;
    double balanced_accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f_score = 0.0;
    double mcc = 0.0;
    std::pair<double, double> mcc_ci{0.0, 0.0};
    double threshold = 0.5;
    std::size_t n = 0;
};

/// The SE / delta-MCC / delta-SE / Z / p chain for one model pair.
struct SignificanceResult {
    double se1 = 0.0, se2 = 0.0;
    double delta_mcc = 0.0;
    double delta_se = 0.0;
    double z = 0.0;
    double p_two_tailed = 1.0;
    bool significant = false;  // p < 0.05
};

/// Threshold (over midpoints of adjacent distinct sorted scores plus {0,1})
/// maximizing the F-score; ties break toward the lowest threshold.
/// Requires at least one positive and one negative label.
double optimal_threshold(const std::vector<double>& scores, const std::vector<int>& labels);

/// Counts with the decision rule: predict positive iff score >= threshold.
ConfusionCounts confusion(const std::vector<double>& scores, const std::vector<int>& labels,
                          double threshold);

struct BasicMetrics {
    double balanced_accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f_score = 0.0;
    double mcc = 0.0;
};

/// Standard definitions; any zero denominator yields 0 for that metric.
BasicMetrics metrics(const ConfusionCounts& counts);

/// Step-wise average precision (sum of delta-recall x precision over ranked
/// positives, score ties grouped). Requires both classes present.
double auprc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Exact binomial interval via the Beta-quantile characterization.
std::pair<double, double> clopper_pearson(std::size_t k, std::size_t n, double level = 0.95);

/// Clopper-Pearson interval for an MCC value through the affine map
/// p = (mcc + 1) / 2, k = round(p * n), bounds mapped back by b -> 2b - 1.
std::pair<double, double> mcc_ci(double mcc, std::size_t n, double level = 0.95);

/// SE = (CI_upper - CI_lower) / (2 * 1.96) per model, then
/// z = (mcc2 - mcc1) / sqrt(se1^2 + se2^2) with a two-tailed normal p.
SignificanceResult significance(double mcc1, std::pair<double, double> ci1, double mcc2,
                                std::pair<double, double> ci2);

/// 1-D Wasserstein-1 distance between the empirical distributions of the
/// flattened parameters.
double emd_1d(const WeightSet& weights_a, const WeightSet& weights_b);

double emd_1d_samples(std::vector<double> a, std::vector<double> b);

/// Pearson correlation of position-paired flattened parameters.
double weight_correlation(const WeightSet& weights_a, const WeightSet& weights_b);

/// Per-class score histograms over [0, 1], normalized to unit integral.
struct SoftmaxHistogram {
    int bins = 50;
    std::vector<double> positive_density;
    std::vector<double> negative_density;
    bool positive_empty = false;
    bool negative_empty = false;
};

SoftmaxHistogram softmax_histogram(const std::vector<double>& scores,
                                   const std::vector<int>& labels, int bins = 50);

/// Full Tables-4..8 row at a fixed threshold.
MetricsReport evaluate_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                              double threshold);

std::vector<double> flatten_weights(const WeightSet& w);

}  // namespace weightlab
