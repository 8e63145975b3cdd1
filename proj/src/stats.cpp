#include "weightlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>

namespace weightlab {

namespace {

void check_scores_labels(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw std::invalid_argument("scores and labels must be non-empty and equal length");
    }
    for (double s : scores) {
        if (!std::isfinite(s)) throw std::invalid_argument("non-finite score");
    }
    for (int l : labels) {
        if (l != 0 && l != 1) throw std::invalid_argument("labels must be 0/1");
    }
}

std::size_t count_positives(const std::vector<int>& labels) {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

double f_score_of(const ConfusionCounts& c) {
    double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
    return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / denom;
}

}  // namespace

double optimal_threshold(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_scores_labels(scores, labels);
    std::size_t pos = count_positives(labels);
    if (pos == 0 || pos == labels.size()) {
        throw std::invalid_argument("optimal_threshold: needs both classes present");
    }

    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    std::vector<double> candidates{0.0, 1.0};
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
    }
    std::sort(candidates.begin(), candidates.end());

    double best_theta = candidates.front();
    double best_f = -1.0;
    for (double theta : candidates) {
        double f = f_score_of(confusion(scores, labels, theta));
        if (f > best_f) {  // strict: ties keep the lowest threshold
            best_f = f;
            best_theta = theta;
        }
    }
    return best_theta;
}

ConfusionCounts confusion(const std::vector<double>& scores, const std::vector<int>& labels,
                          double threshold) {
    check_scores_labels(scores, labels);
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw std::invalid_argument("confusion: threshold must lie in [0, 1]");
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        bool pred = scores[i] >= threshold;
        if (labels[i] == 1) {
            pred ? ++c.tp : ++c.fn;
        } else {
            pred ? ++c.fp : ++c.tn;
        }
    }
    return c;
}

BasicMetrics metrics(const ConfusionCounts& c) {
    auto ratio = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
    double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
    BasicMetrics m;
    double tpr = ratio(tp, tp + fn);
    double tnr = ratio(tn, tn + fp);
    m.balanced_accuracy = 0.5 * (tpr + tnr);
    m.precision = ratio(tp, tp + fp);
    m.recall = tpr;
    m.f_score = f_score_of(c);
    double denom = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
    m.mcc = denom == 0.0 ? 0.0 : (tp * tn - fp * fn) / denom;
    return m;
}

double auprc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_scores_labels(scores, labels);
    std::size_t pos = count_positives(labels);
    if (pos == 0 || pos == labels.size()) {
        throw std::invalid_argument("auprc: needs both classes present");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double ap = 0.0;
    double prev_recall = 0.0;
    std::size_t cum_tp = 0, cum_all = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        // group equal scores
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) {
            cum_tp += static_cast<std::size_t>(labels[order[k]] == 1);
        }
        cum_all += j - i;
        double recall = static_cast<double>(cum_tp) / static_cast<double>(pos);
        double precision = static_cast<double>(cum_tp) / static_cast<double>(cum_all);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return ap;
}

std::pair<double, double> clopper_pearson(std::size_t k, std::size_t n, double level) {
    if (n < 1 || k > n) throw std::invalid_argument("clopper_pearson: need 0 <= k <= n, n >= 1");
    if (!(level > 0.0 && level < 1.0)) {
        throw std::invalid_argument("clopper_pearson: level must lie in (0, 1)");
    }
    double alpha = 1.0 - level;
    double lower = 0.0, upper = 1.0;
    double kk = static_cast<double>(k), nn = static_cast<double>(n);
    if (k > 0) {
        lower = boost::math::ibeta_inv(kk, nn - kk + 1.0, alpha / 2.0);
    }
    if (k < n) {
        upper = boost::math::ibeta_inv(kk + 1.0, nn - kk, 1.0 - alpha / 2.0);
    }
    return {lower, upper};
}

std::pair<double, double> mcc_ci(double mcc, std::size_t n, double level) {
    if (!(mcc >= -1.0 && mcc <= 1.0)) throw std::invalid_argument("mcc_ci: mcc must lie in [-1, 1]");
    if (n < 1) throw std::invalid_argument("mcc_ci: n must be >= 1");
    double p = (mcc + 1.0) / 2.0;
    auto k = static_cast<std::size_t>(std::llround(p * static_cast<double>(n)));
    k = std::min(k, n);
    auto [lo, hi] = clopper_pearson(k, n, level);
    return {2.0 * lo - 1.0, 2.0 * hi - 1.0};
}

SignificanceResult significance(double mcc1, std::pair<double, double> ci1, double mcc2,
                                std::pair<double, double> ci2) {
    if (ci1.second < ci1.first || ci2.second < ci2.first) {
        throw std::invalid_argument("significance: CI bounds must be ordered");
    }
    SignificanceResult r;
    r.se1 = (ci1.second - ci1.first) / (2.0 * 1.96);
    r.se2 = (ci2.second - ci2.first) / (2.0 * 1.96);
    r.delta_mcc = mcc2 - mcc1;
    r.delta_se = std::sqrt(r.se1 * r.se1 + r.se2 * r.se2);
    if (r.delta_se == 0.0) {
        throw std::invalid_argument("significance: degenerate confidence intervals (delta SE = 0)");
    }
    r.z = r.delta_mcc / r.delta_se;
    r.p_two_tailed = std::erfc(std::abs(r.z) / std::sqrt(2.0));
    r.significant = r.p_two_tailed < 0.05;
    return r;
}

std::vector<double> flatten_weights(const WeightSet& w) {
    std::vector<double> flat;
    flat.reserve(w.parameter_count());
    for (const auto& e : w.entries) {
        flat.insert(flat.end(), e.kernel.values.begin(), e.kernel.values.end());
        flat.insert(flat.end(), e.bias.values.begin(), e.bias.values.end());
    }
    return flat;
}

double emd_1d_samples(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("emd_1d: empty sample set");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());

    // Integral of |CDF_a - CDF_b| over the merged support.
    double dist = 0.0;
    std::size_t ia = 0, ib = 0;
    double prev = std::min(a.front(), b.front());
    double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    while (ia < a.size() || ib < b.size()) {
        double x;
        if (ib >= b.size() || (ia < a.size() && a[ia] <= b[ib])) {
            x = a[ia];
        } else {
            x = b[ib];
        }
        dist += std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb) * (x - prev);
        prev = x;
        while (ia < a.size() && a[ia] == x) ++ia;
        while (ib < b.size() && b[ib] == x) ++ib;
    }
    return dist;
}

double emd_1d(const WeightSet& weights_a, const WeightSet& weights_b) {
    return emd_1d_samples(flatten_weights(weights_a), flatten_weights(weights_b));
}

double weight_correlation(const WeightSet& weights_a, const WeightSet& weights_b) {
    if (!same_shapes(weights_a, weights_b)) {
        throw std::invalid_argument("weight_correlation: weight sets must be shape-congruent");
    }
    std::vector<double> a = flatten_weights(weights_a);
    std::vector<double> b = flatten_weights(weights_b);
    double n = static_cast<double>(a.size());
    double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / n;
    double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double da = a[i] - mean_a, db = b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0) {
        throw std::invalid_argument("weight_correlation: zero-variance weight set");
    }
    return cov / std::sqrt(var_a * var_b);
}

SoftmaxHistogram softmax_histogram(const std::vector<double>& scores,
                                   const std::vector<int>& labels, int bins) {
    check_scores_labels(scores, labels);
    if (bins < 2) throw std::invalid_argument("softmax_histogram: bins must be >= 2");
    for (double s : scores) {
        if (s < 0.0 || s > 1.0) throw std::invalid_argument("softmax_histogram: score outside [0,1]");
    }
    SoftmaxHistogram h;
    h.bins = bins;
    std::vector<std::size_t> pos_counts(static_cast<std::size_t>(bins), 0);
    std::vector<std::size_t> neg_counts(static_cast<std::size_t>(bins), 0);
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        auto bin = static_cast<std::size_t>(scores[i] * bins);
        if (bin >= static_cast<std::size_t>(bins)) bin = static_cast<std::size_t>(bins) - 1;
        if (labels[i] == 1) {
            ++pos_counts[bin];
            ++n_pos;
        } else {
            ++neg_counts[bin];
            ++n_neg;
        }
    }
    double width = 1.0 / bins;
    h.positive_empty = n_pos == 0;
    h.negative_empty = n_neg == 0;
    if (!h.positive_empty) {
        h.positive_density.resize(static_cast<std::size_t>(bins));
        for (int b = 0; b < bins; ++b) {
            h.positive_density[static_cast<std::size_t>(b)] =
                static_cast<double>(pos_counts[static_cast<std::size_t>(b)]) /
                (static_cast<double>(n_pos) * width);
        }
    }
    if (!h.negative_empty) {
        h.negative_density.resize(static_cast<std::size_t>(bins));
        for (int b = 0; b < bins; ++b) {
            h.negative_density[static_cast<std::size_t>(b)] =
                static_cast<double>(neg_counts[static_cast<std::size_t>(b)]) /
                (static_cast<double>(n_neg) * width);
        }
    }
    return h;
}

MetricsReport evaluate_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                              double threshold) {
    MetricsReport r;
    ConfusionCounts c = confusion(scores, labels, threshold);
    BasicMetrics m = metrics(c);
    r.auprc = auprc(scores, labels);
    r.balanced_accuracy = m.balanced_accuracy;
    r.precision = m.precision;
    r.recall = m.recall;
    r.f_score = m.f_score;
    r.mcc = m.mcc;
    r.n = scores.size();
    r.mcc_ci = mcc_ci(m.mcc, r.n);
    r.threshold = threshold;
    return r;
}

}  // namespace weightlab
