#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "test_helpers.hpp"
#include "weightlab/stats.hpp"

using namespace weightlab;
using namespace weightlab::testing;

namespace {

// ---------------------------------------------------------------------------
// Independent oracles
// ---------------------------------------------------------------------------

// Exhaustive threshold scan over every candidate value (not just midpoints):
// for each candidate theta in a fine sweep over the observed scores and
// their midpoints, compute F directly.
double oracle_best_f_and_theta(const std::vector<double>& scores, const std::vector<int>& labels,
                               double* theta_out) {
    std::vector<double> candidates{0.0, 1.0};
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        candidates.push_back((sorted[i] + sorted[i + 1]) / 2.0);
    }
    std::sort(candidates.begin(), candidates.end());
    double best_f = -1.0, best_theta = 0.0;
    for (double theta : candidates) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            bool pred = scores[i] >= theta;
            if (labels[i] == 1 && pred) ++tp;
            if (labels[i] == 1 && !pred) ++fn;
            if (labels[i] == 0 && pred) ++fp;
        }
        double f = (2 * tp + fp + fn) == 0 ? 0.0
                                           : 2.0 * static_cast<double>(tp) /
                                                 static_cast<double>(2 * tp + fp + fn);
        if (f > best_f) {
            best_f = f;
            best_theta = theta;
        }
    }
    if (theta_out != nullptr) *theta_out = best_theta;
    return best_f;
}

double binomial_cdf(std::size_t k, std::size_t n, double p) {
    // sum_{i=0}^{k} C(n,i) p^i (1-p)^(n-i), evaluated in log space
    if (p <= 0.0) return 1.0;
    if (p >= 1.0) return k == n ? 1.0 : 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i <= k; ++i) {
        double log_c = std::lgamma(static_cast<double>(n) + 1) -
                       std::lgamma(static_cast<double>(i) + 1) -
                       std::lgamma(static_cast<double>(n - i) + 1);
        total += std::exp(log_c + static_cast<double>(i) * std::log(p) +
                          static_cast<double>(n - i) * std::log1p(-p));
    }
    return std::min(total, 1.0);
}

// Clopper-Pearson via direct bisection on the binomial tail probabilities.
std::pair<double, double> oracle_clopper_pearson(std::size_t k, std::size_t n, double level) {
    double alpha = 1.0 - level;
    double lower = 0.0, upper = 1.0;
    if (k > 0) {
        // largest p with P(X >= k | p) <= alpha/2  <=>  P(X <= k-1 | p) >= 1 - alpha/2
        double lo = 0.0, hi = 1.0;
        for (int iter = 0; iter < 200; ++iter) {
            double mid = 0.5 * (lo + hi);
            double tail = 1.0 - binomial_cdf(k - 1, n, mid);
            if (tail > alpha / 2.0) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lower = 0.5 * (lo + hi);
    }
    if (k < n) {
        double lo = 0.0, hi = 1.0;
        for (int iter = 0; iter < 200; ++iter) {
            double mid = 0.5 * (lo + hi);
            double tail = binomial_cdf(k, n, mid);
            if (tail < alpha / 2.0) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        upper = 0.5 * (lo + hi);
    }
    return {lower, upper};
}

}  // namespace

TEST_CASE("optimal_threshold: perfect separation yields F=1 at the lowest maximizer") {
    std::vector<double> scores = {0.1, 0.15, 0.2, 0.8, 0.9, 0.95};
    std::vector<int> labels = {0, 0, 0, 1, 1, 1};
    double theta = optimal_threshold(scores, labels);
    ConfusionCounts c = confusion(scores, labels, theta);
    BasicMetrics m = metrics(c);
    CHECK(m.f_score == 1.0);
    // the lowest maximizer is the first midpoint achieving F = 1
    CHECK(theta == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("optimal_threshold: constant scores predict everything positive") {
    std::vector<double> scores(10, 0.4);
    std::vector<int> labels = {1, 0, 0, 1, 0, 0, 0, 1, 0, 0};  // prevalence 0.3
    double theta = optimal_threshold(scores, labels);
    CHECK(theta == 0.0);
    BasicMetrics m = metrics(confusion(scores, labels, theta));
    double p = 0.3;
    CHECK(m.f_score == doctest::Approx(2 * p / (p + 1)).epsilon(1e-12));
}

TEST_CASE("optimal_threshold: six-sample case matches the exhaustive scan") {
    std::vector<double> scores = {0.2, 0.5, 0.5, 0.6, 0.7, 0.9};
    std::vector<int> labels = {0, 1, 0, 0, 1, 1};
    double theta = optimal_threshold(scores, labels);
    double oracle_theta = 0.0;
    double oracle_f = oracle_best_f_and_theta(scores, labels, &oracle_theta);
    BasicMetrics m = metrics(confusion(scores, labels, theta));
    CHECK(m.f_score == doctest::Approx(oracle_f).epsilon(1e-12));
    CHECK(theta == doctest::Approx(oracle_theta).epsilon(1e-12));
}

TEST_CASE("optimal_threshold equals brute force on random instances up to n=50") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 2 + static_cast<std::size_t>(rng.below(49));
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        bool has0 = false, has1 = false;
        for (std::size_t i = 0; i < n; ++i) {
            // quantize so score ties actually happen
            scores[i] = static_cast<double>(rng.below(11)) / 10.0;
            labels[i] = static_cast<int>(rng.below(2));
            has0 = has0 || labels[i] == 0;
            has1 = has1 || labels[i] == 1;
        }
        if (!has0 || !has1) continue;
        double theta = optimal_threshold(scores, labels);
        double oracle_theta = 0.0;
        double oracle_f = oracle_best_f_and_theta(scores, labels, &oracle_theta);
        BasicMetrics m = metrics(confusion(scores, labels, theta));
        CHECK(m.f_score == doctest::Approx(oracle_f).epsilon(1e-12));
        CHECK(theta == doctest::Approx(oracle_theta).epsilon(1e-12));
    }
}

TEST_CASE("optimal_threshold rejects single-class labels") {
    std::vector<double> scores = {0.1, 0.2};
    CHECK_THROWS_AS(optimal_threshold(scores, {1, 1}), std::invalid_argument);
}

TEST_CASE("metrics: perfect and degenerate examples") {
    BasicMetrics perfect = metrics({5, 0, 5, 0});
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f_score == 1.0);
    CHECK(perfect.mcc == 1.0);

    BasicMetrics degenerate = metrics({0, 0, 5, 5});
    CHECK(degenerate.recall == 0.0);
    CHECK(degenerate.mcc == 0.0);
}

TEST_CASE("metrics match an independent formula recomputation on random counts") {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        ConfusionCounts c{rng.below(50), rng.below(50), rng.below(50), rng.below(50)};
        if (c.total() == 0) continue;
        BasicMetrics m = metrics(c);
        double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
        double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);

        double tpr = tp + fn == 0 ? 0.0 : tp / (tp + fn);
        double tnr = tn + fp == 0 ? 0.0 : tn / (tn + fp);
        CHECK(std::abs(m.balanced_accuracy - 0.5 * (tpr + tnr)) < 1e-12);
        CHECK(std::abs(m.precision - (tp + fp == 0 ? 0.0 : tp / (tp + fp))) < 1e-12);
        CHECK(std::abs(m.recall - tpr) < 1e-12);
        double fd = 2 * tp + fp + fn;
        CHECK(std::abs(m.f_score - (fd == 0 ? 0.0 : 2 * tp / fd)) < 1e-12);
        double denom = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
        double mcc = denom == 0 ? 0.0 : (tp * tn - fp * fn) / denom;
        CHECK(std::abs(m.mcc - mcc) < 1e-12);
    }
}

TEST_CASE("metrics are invariant under sample permutation") {
    std::vector<double> scores = {0.2, 0.9, 0.5, 0.7, 0.1, 0.6};
    std::vector<int> labels = {0, 1, 0, 1, 0, 1};
    ConfusionCounts a = confusion(scores, labels, 0.55);

    std::vector<std::size_t> perm = {3, 0, 5, 2, 4, 1};
    std::vector<double> ps(6);
    std::vector<int> pl(6);
    for (std::size_t i = 0; i < 6; ++i) {
        ps[i] = scores[perm[i]];
        pl[i] = labels[perm[i]];
    }
    ConfusionCounts b = confusion(ps, pl, 0.55);
    CHECK(a.tp == b.tp);
    CHECK(a.fp == b.fp);
    CHECK(a.tn == b.tn);
    CHECK(a.fn == b.fn);
}

TEST_CASE("auprc: perfect ranking gives exactly 1") {
    std::vector<double> scores = {0.9, 0.8, 0.7, 0.2, 0.1};
    std::vector<int> labels = {1, 1, 1, 0, 0};
    CHECK(auprc(scores, labels) == 1.0);
}

TEST_CASE("auprc: constant scores give the prevalence exactly") {
    std::vector<double> scores(8, 0.5);
    std::vector<int> labels = {1, 0, 0, 0, 1, 0, 0, 0};
    CHECK(auprc(scores, labels) == 0.25);
}

TEST_CASE("auprc: eight-sample case matches a rank-by-rank hand computation") {
    std::vector<double> scores = {0.95, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3};
    std::vector<int> labels = {1, 0, 1, 1, 0, 0, 1, 0};
    // ranked: 1,0,1,1,0,0,1,0 with distinct scores; positives at ranks 1,3,4,7
    double expect = 0.25 * (1.0 / 1.0) + 0.25 * (2.0 / 3.0) + 0.25 * (3.0 / 4.0) +
                    0.25 * (4.0 / 7.0);
    CHECK(auprc(scores, labels) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("auprc groups tied scores") {
    std::vector<double> scores = {0.9, 0.5, 0.5, 0.1};
    std::vector<int> labels = {1, 1, 0, 0};
    // after the tie group at 0.5: recall 1, precision 2/3
    double expect = 0.5 * 1.0 + 0.5 * (2.0 / 3.0);
    CHECK(auprc(scores, labels) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("clopper_pearson: closed form at k=0 and boundary at k=n") {
    auto [lo0, hi0] = clopper_pearson(0, 10);
    CHECK(lo0 == 0.0);
    CHECK(std::abs(hi0 - (1.0 - std::pow(0.025, 1.0 / 10.0))) < 1e-12);

    auto [lon, hin] = clopper_pearson(10, 10);
    CHECK(hin == 1.0);
    CHECK(lon > 0.0);
}

TEST_CASE("clopper_pearson matches the binomial-tail bisection oracle for n <= 30") {
    for (std::size_t n = 1; n <= 30; ++n) {
        for (std::size_t k = 0; k <= n; ++k) {
            auto [lo, hi] = clopper_pearson(k, n);
            auto [olo, ohi] = oracle_clopper_pearson(k, n, 0.95);
            CHECK(std::abs(lo - olo) < 1e-9);
            CHECK(std::abs(hi - ohi) < 1e-9);
            double phat = static_cast<double>(k) / static_cast<double>(n);
            CHECK(lo <= phat + 1e-15);
            CHECK(hi >= phat - 1e-15);
        }
    }
}

TEST_CASE("clopper_pearson rejects invalid input") {
    CHECK_THROWS_AS(clopper_pearson(5, 4), std::invalid_argument);
    CHECK_THROWS_AS(clopper_pearson(0, 0), std::invalid_argument);
}

TEST_CASE("mcc_ci boundary and symmetry behavior") {
    auto [lo1, hi1] = mcc_ci(1.0, 50);
    CHECK(hi1 == 1.0);

    auto [lo0, hi0] = mcc_ci(0.0, 100);
    CHECK(std::abs((hi0 + lo0) / 2.0) < 0.02);  // roughly centered on 0

    double prev_width = 10.0;
    for (std::size_t n : {10, 20, 40, 80, 160, 320}) {
        auto [lo, hi] = mcc_ci(0.3, n);
        CHECK(hi - lo < prev_width);
        prev_width = hi - lo;
    }
}

TEST_CASE("significance on the published partial-data pair gives z near 8.26") {
    SignificanceResult r =
        significance(0.6204, {0.6073, 0.6335}, 0.6964, {0.6840, 0.7088});
    CHECK(r.z > 8.1);
    CHECK(r.z < 8.4);
    CHECK(r.p_two_tailed < 0.00001);
    CHECK(r.significant);
    CHECK(std::abs(r.se1 - 0.0262 / 3.92) < 1e-6);
    CHECK(std::abs(r.se2 - 0.0248 / 3.92) < 1e-6);
}

TEST_CASE("significance on the full-data random-vs-pretrained pairs is all p < 0.00001") {
    struct Pair {
        double m1, l1, u1, m2, l2, u2;
    };
    for (const Pair& p : {Pair{0.6650, 0.6523, 0.6777, 0.7187, 0.7066, 0.7308},
                          Pair{0.6267, 0.6137, 0.6397, 0.7258, 0.7138, 0.7378},
                          Pair{0.6431, 0.6302, 0.6560, 0.7150, 0.7028, 0.7272}}) {
        SignificanceResult r = significance(p.m1, {p.l1, p.u1}, p.m2, {p.l2, p.u2});
        CHECK(r.p_two_tailed < 0.00001);
        CHECK(r.significant);
    }
}

TEST_CASE("significance of identical rows is z=0, p=1") {
    SignificanceResult r = significance(0.5, {0.45, 0.55}, 0.5, {0.45, 0.55});
    CHECK(r.z == 0.0);
    CHECK(r.p_two_tailed == 1.0);
    CHECK(!r.significant);
}

TEST_CASE("significance with degenerate intervals throws") {
    CHECK_THROWS_AS(significance(0.5, {0.5, 0.5}, 0.6, {0.6, 0.6}), std::invalid_argument);
}

TEST_CASE("emd_1d basic values and metric properties") {
    CHECK(emd_1d_samples({0.0, 1.0}, {0.0, 1.0}) == 0.0);
    CHECK(emd_1d_samples({0.0, 1.0}, {1.0, 2.0}) == doctest::Approx(1.0).epsilon(1e-12));

    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        auto draw = [&](std::size_t n) {
            std::vector<double> v(n);
            for (double& x : v) x = rng.uniform(-2.0, 2.0);
            return v;
        };
        std::vector<double> a = draw(5 + rng.below(20));
        std::vector<double> b = draw(5 + rng.below(20));
        std::vector<double> c = draw(5 + rng.below(20));
        double ab = emd_1d_samples(a, b);
        double ba = emd_1d_samples(b, a);
        double ac = emd_1d_samples(a, c);
        double cb = emd_1d_samples(c, b);
        CHECK(ab >= 0.0);
        CHECK(std::abs(ab - ba) < 1e-12);
        CHECK(ab <= ac + cb + 1e-9);
    }
}

TEST_CASE("emd_1d on weight sets is zero iff the flattened multisets agree") {
    NetworkSpec spec = default_network_spec();
    WeightSet a = random_weights(spec, 1);
    CHECK(emd_1d(a, a) == 0.0);
    WeightSet b = a;
    b.entries[0].kernel.values[0] += 0.5;
    CHECK(emd_1d(a, b) > 0.0);
}

TEST_CASE("weight_correlation: exact at +-1, matches the covariance formula") {
    NetworkSpec spec = default_network_spec();
    WeightSet a = random_weights(spec, 2);
    CHECK(weight_correlation(a, a) == 1.0);

    WeightSet neg = a;
    neg.for_each([](double& v) { v = -v; });
    CHECK(weight_correlation(a, neg) == -1.0);

    WeightSet b = random_weights(spec, 3);
    double got = weight_correlation(a, b);
    std::vector<double> fa = flatten_weights(a), fb = flatten_weights(b);
    double n = static_cast<double>(fa.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) {
        ma += fa[i];
        mb += fb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) {
        cov += (fa[i] - ma) * (fb[i] - mb);
        va += (fa[i] - ma) * (fa[i] - ma);
        vb += (fb[i] - mb) * (fb[i] - mb);
    }
    CHECK(std::abs(got - cov / std::sqrt(va * vb)) < 1e-12);

    WeightSet zero = zero_weights(spec);
    CHECK_THROWS_AS(weight_correlation(zero, a), std::invalid_argument);
}

TEST_CASE("softmax_histogram: mass placement and normalization") {
    std::vector<double> scores = {1.0, 1.0, 1.0, 0.2, 0.3};
    std::vector<int> labels = {1, 1, 1, 0, 0};
    SoftmaxHistogram h = softmax_histogram(scores, labels, 10);
    REQUIRE(!h.positive_empty);
    REQUIRE(!h.negative_empty);
    // all positive mass in the last bin
    for (int b = 0; b + 1 < h.bins; ++b) CHECK(h.positive_density[static_cast<std::size_t>(b)] == 0.0);
    CHECK(h.positive_density.back() > 0.0);

    double width = 1.0 / h.bins;
    double pos_integral = 0.0, neg_integral = 0.0;
    for (int b = 0; b < h.bins; ++b) {
        pos_integral += h.positive_density[static_cast<std::size_t>(b)] * width;
        neg_integral += h.negative_density[static_cast<std::size_t>(b)] * width;
    }
    CHECK(std::abs(pos_integral - 1.0) < 1e-9);
    CHECK(std::abs(neg_integral - 1.0) < 1e-9);
}

TEST_CASE("softmax_histogram matches a direct counting oracle") {
    Rng rng(17);
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 500; ++i) {
        scores.push_back(rng.uniform01());
        labels.push_back(static_cast<int>(rng.below(2)));
    }
    const int bins = 20;
    SoftmaxHistogram h = softmax_histogram(scores, labels, bins);

    std::vector<std::size_t> pos(bins, 0), neg(bins, 0);
    std::size_t np = 0, nn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        int b = std::min(static_cast<int>(scores[i] * bins), bins - 1);
        if (labels[i] == 1) {
            ++pos[static_cast<std::size_t>(b)];
            ++np;
        } else {
            ++neg[static_cast<std::size_t>(b)];
            ++nn;
        }
    }
    for (int b = 0; b < bins; ++b) {
        CHECK(std::abs(h.positive_density[static_cast<std::size_t>(b)] -
                       static_cast<double>(pos[static_cast<std::size_t>(b)]) * bins /
                           static_cast<double>(np)) < 1e-12);
        CHECK(std::abs(h.negative_density[static_cast<std::size_t>(b)] -
                       static_cast<double>(neg[static_cast<std::size_t>(b)]) * bins /
                           static_cast<double>(nn)) < 1e-12);
    }
}

TEST_CASE("softmax_histogram flags an empty class") {
    std::vector<double> scores = {0.5, 0.6};
    std::vector<int> labels = {1, 1};
    SoftmaxHistogram h = softmax_histogram(scores, labels, 5);
    CHECK(h.negative_empty);
    CHECK(!h.positive_empty);
}

TEST_CASE("evaluate_scores assembles the full report row") {
    std::vector<double> scores = {0.9, 0.8, 0.3, 0.2, 0.7, 0.1};
    std::vector<int> labels = {1, 1, 0, 0, 1, 0};
    double theta = optimal_threshold(scores, labels);
    MetricsReport r = evaluate_scores(scores, labels, theta);
    CHECK(r.n == 6);
    CHECK(r.f_score == 1.0);
    CHECK(r.auprc == 1.0);
    CHECK(r.mcc == 1.0);
    CHECK(r.mcc_ci.second == 1.0);
    CHECK(r.threshold == theta);
}
