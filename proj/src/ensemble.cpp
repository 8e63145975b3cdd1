#include "weightlab/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>

#include "weightlab/rng.hpp"
#include "weightlab/softmax.hpp"
#include "weightlab/stats.hpp"

namespace weightlab {

void SimplexFactors::validate() const {
    if (factors.empty()) throw std::invalid_argument("SimplexFactors: empty");
    double sum = 0.0;
    for (double f : factors) {
        if (!(f >= 0.0 && f <= 1.0)) {
            throw std::invalid_argument("SimplexFactors: factor outside [0, 1]");
        }
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw std::invalid_argument("SimplexFactors: factors must sum to 1 within 1e-6");
    }
}

WeightSet weighted_average(const std::vector<WeightSet>& models, const SimplexFactors& factors) {
    if (models.empty()) throw std::invalid_argument("weighted_average: no models");
    if (factors.factors.size() != models.size()) {
        throw std::invalid_argument("weighted_average: factor count must equal model count");
    }
    factors.validate();
    for (std::size_t i = 1; i < models.size(); ++i) {
        if (!same_shapes(models[0], models[i])) {
            throw std::invalid_argument("weighted_average: models must be shape-congruent");
        }
    }
    WeightSet out = models[0];
    for (auto& e : out.entries) {
        for (double& v : e.kernel.values) v *= factors.factors[0];
        for (double& v : e.bias.values) v *= factors.factors[0];
    }
    for (std::size_t i = 1; i < models.size(); ++i) {
        double f = factors.factors[i];
        for (std::size_t e = 0; e < out.entries.size(); ++e) {
            auto& dst_k = out.entries[e].kernel.values;
            const auto& src_k = models[i].entries[e].kernel.values;
            for (std::size_t j = 0; j < dst_k.size(); ++j) dst_k[j] += f * src_k[j];
            auto& dst_b = out.entries[e].bias.values;
            const auto& src_b = models[i].entries[e].bias.values;
            for (std::size_t j = 0; j < dst_b.size(); ++j) dst_b[j] += f * src_b[j];
        }
    }
    return out;
}

WeightSet ewa(const std::vector<WeightSet>& models) {
    if (models.size() < 2) throw std::invalid_argument("ewa: needs at least 2 models");
    SimplexFactors uniform;
    uniform.factors.assign(models.size(), 1.0 / static_cast<double>(models.size()));
    return weighted_average(models, uniform);
}

namespace {

// 1 - max_theta F(theta) over the candidate thresholds; degenerate F
// denominators count as 0, with a one-time warning when the validation set
// has no actual positives.
double error_from_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                         bool* warned) {
    bool any_pos = std::any_of(labels.begin(), labels.end(), [](int l) { return l == 1; });
    if (!any_pos && warned != nullptr && !*warned) {
        std::cerr << "fslsqp: validation set has no positive labels; F treated as 0\n";
        *warned = true;
    }
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<double> candidates{0.0, 1.0};
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
    }
    double best_f = 0.0;
    for (double theta : candidates) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            bool pred = scores[i] >= theta;
            if (labels[i] == 1) {
                pred ? ++tp : ++fn;
            } else if (pred) {
                ++fp;
            }
        }
        double denom = static_cast<double>(2 * tp + fp + fn);
        double f = denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
        best_f = std::max(best_f, f);
    }
    return 1.0 - best_f;
}

struct NmPoint {
    std::vector<double> z;
    double value = 0.0;
};

}  // namespace

double ensemble_validation_error(const std::vector<WeightSet>& models, const SimplexFactors& f,
                                 const NetworkSpec& spec, const Dataset& val_set) {
    WeightSet avg = weighted_average(models, f);
    std::vector<double> scores = predict_scores(spec, avg, val_set);
    std::vector<int> labels = dataset_labels(val_set);
    return error_from_scores(scores, labels, nullptr);
}

EnsembleResult fslsqp(const std::vector<WeightSet>& models, const NetworkSpec& spec,
                      const Dataset& val_set, int restarts, std::uint64_t seed) {
    if (models.size() < 2) throw std::invalid_argument("fslsqp: needs at least 2 models");
    if (val_set.size() == 0) throw std::invalid_argument("fslsqp: empty validation set");
    if (restarts < 1) throw std::invalid_argument("fslsqp: restarts must be >= 1");
    const std::size_t k = models.size();

    std::vector<int> labels = dataset_labels(val_set);
    bool warned = false;

    double best_error = std::numeric_limits<double>::infinity();
    SimplexFactors best_factors;

    auto consider = [&](const SimplexFactors& f, double error) {
        if (error < best_error) {  // strict: earliest candidate wins ties
            best_error = error;
            best_factors = f;
        }
    };

    auto score_factors = [&](const SimplexFactors& f) {
        WeightSet avg = weighted_average(models, f);
        std::vector<double> scores = predict_scores(spec, avg, val_set);
        double error = error_from_scores(scores, labels, &warned);
        consider(f, error);
        return error;
    };

    auto factors_from_z = [&](const std::vector<double>& z) {
        SimplexFactors f;
        f.factors = softmax(std::span<const double>(z.data(), z.size()));
        return f;
    };

    auto objective_z = [&](const std::vector<double>& z) { return score_factors(factors_from_z(z)); };

    // Restart start points in softmax coordinates: vertices, the uniform
    // point, then random simplex draws.
    Rng rng(seed);
    std::vector<std::vector<double>> starts;
    for (std::size_t v = 0; v < k && static_cast<int>(starts.size()) < restarts; ++v) {
        std::vector<double> z(k, 0.0);
        z[v] = 25.0;
        starts.push_back(std::move(z));
    }
    if (static_cast<int>(starts.size()) < restarts) starts.emplace_back(k, 0.0);
    while (static_cast<int>(starts.size()) < restarts) {
        std::vector<double> z(k);
        for (double& zi : z) {
            double e = -std::log(1.0 - rng.uniform01());
            zi = std::log(std::max(e, 1e-300));
        }
        starts.push_back(std::move(z));
    }

    // The exact vertices are always candidates, whatever the restart budget.
    for (std::size_t v = 0; v < k; ++v) {
        SimplexFactors f;
        f.factors.assign(k, 0.0);
        f.factors[v] = 1.0;
        score_factors(f);
    }

    // Nelder-Mead per restart. The objective is piecewise constant in the
    // factors, so runs terminate on simplex collapse or the eval budget.
    constexpr int kMaxEvals = 20;
    constexpr double kDiamTol = 1e-4;
    for (const auto& start : starts) {
        int evals = 0;
        std::vector<NmPoint> simplex;
        simplex.reserve(k + 1);
        {
            NmPoint p{start, 0.0};
            p.value = objective_z(p.z);
            ++evals;
            simplex.push_back(std::move(p));
        }
        for (std::size_t d = 0; d < k; ++d) {
            NmPoint p{start, 0.0};
            p.z[d] += 1.0;
            p.value = objective_z(p.z);
            ++evals;
            simplex.push_back(std::move(p));
        }

        while (evals < kMaxEvals) {
            std::stable_sort(simplex.begin(), simplex.end(),
                             [](const NmPoint& a, const NmPoint& b) { return a.value < b.value; });
            double diam = 0.0;
            for (std::size_t d = 0; d < k; ++d) {
                for (std::size_t i = 1; i < simplex.size(); ++i) {
                    diam = std::max(diam, std::abs(simplex[i].z[d] - simplex[0].z[d]));
                }
            }
            if (diam < kDiamTol) break;

            std::vector<double> centroid(k, 0.0);
            for (std::size_t i = 0; i + 1 < simplex.size(); ++i) {
                for (std::size_t d = 0; d < k; ++d) centroid[d] += simplex[i].z[d];
            }
            for (double& c : centroid) c /= static_cast<double>(k);

            const NmPoint& worst = simplex.back();
            std::vector<double> refl(k);
            for (std::size_t d = 0; d < k; ++d) refl[d] = centroid[d] + (centroid[d] - worst.z[d]);
            double refl_val = objective_z(refl);
            ++evals;

            if (refl_val < simplex.front().value) {
                std::vector<double> exp_z(k);
                for (std::size_t d = 0; d < k; ++d) {
                    exp_z[d] = centroid[d] + 2.0 * (centroid[d] - worst.z[d]);
                }
                double exp_val = objective_z(exp_z);
                ++evals;
                if (exp_val < refl_val) {
                    simplex.back() = {std::move(exp_z), exp_val};
                } else {
                    simplex.back() = {std::move(refl), refl_val};
                }
            } else if (refl_val < simplex[simplex.size() - 2].value) {
                simplex.back() = {std::move(refl), refl_val};
            } else {
                std::vector<double> contr(k);
                for (std::size_t d = 0; d < k; ++d) {
                    contr[d] = centroid[d] + 0.5 * (worst.z[d] - centroid[d]);
                }
                double contr_val = objective_z(contr);
                ++evals;
                if (contr_val < worst.value) {
                    simplex.back() = {std::move(contr), contr_val};
                } else {
                    for (std::size_t i = 1; i < simplex.size(); ++i) {
                        for (std::size_t d = 0; d < k; ++d) {
                            simplex[i].z[d] = simplex[0].z[d] + 0.5 * (simplex[i].z[d] - simplex[0].z[d]);
                        }
                        if (evals >= kMaxEvals) break;
                        simplex[i].value = objective_z(simplex[i].z);
                        ++evals;
                    }
                }
            }
        }
    }

    EnsembleResult result;
    result.factors = best_factors;
    result.weights = weighted_average(models, best_factors);
    result.validation_error = best_error;
    result.restarts_run = static_cast<int>(starts.size());
    return result;
}

}  // namespace weightlab
