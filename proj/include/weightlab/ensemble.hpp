#pragma once

#include <cstdint>
#include <vector>

#include "weightlab/train.hpp"

namespace weightlab {

/// Mixing factors on the probability simplex: each in [0, 1], summing to 1
/// within 1e-6.
struct SimplexFactors {
    std::vector<double> factors;

    void validate() const;
};

struct EnsembleResult {
    SimplexFactors factors;
    WeightSet weights;
    double validation_error = 0.0;  // 1 - best validation F-score at the optimum
    int restarts_run = 0;
};

/// Elementwise convex combination: out[p] = sum_i factors[i] * models[i][p].
WeightSet weighted_average(const std::vector<WeightSet>& models, const SimplexFactors& factors);

/// Equal Weight Averaging: weighted_average with uniform factors 1/k.
WeightSet ewa(const std::vector<WeightSet>& models);

/// Constrained search for the simplex mixing factors minimizing
/// 1 - F_validation of the weight-averaged model, scored at the
/// validation-optimal threshold. Each restart runs a seeded Nelder-Mead in
/// softmax coordinates; the restart set always contains the exact simplex
/// vertices and the uniform point, padded with seeded random simplex points
/// up to `restarts` total. Deterministic in seed; ties break toward the
/// earliest restart.
EnsembleResult fslsqp(const std::vector<WeightSet>& models, const NetworkSpec& spec,
                      const Dataset& val_set, int restarts = 100, std::uint64_t seed = 0);

/// The Eq.-style ensemble objective: 1 - best achievable F on the dataset.
double ensemble_validation_error(const std::vector<WeightSet>& models, const SimplexFactors& f,
                                 const NetworkSpec& spec, const Dataset& val_set);

}  // namespace weightlab
