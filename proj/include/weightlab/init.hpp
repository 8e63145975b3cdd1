#pragma once

#include <cstdint>

#include "weightlab/train.hpp"

namespace weightlab {

/// Shrink-and-perturb parameters: w' = alpha * w + n, n ~ Normal(0, beta_scale^2).
struct ShrinkParams {
    double alpha = 0.5;
    double beta_scale = 0.01;
    std::uint64_t noise_seed = 0;

    void validate() const;
};

/// Glorot-uniform kernels, zero biases. Deterministic in seed.
WeightSet cold_init(const NetworkSpec& spec, std::uint64_t seed);

/// Exact copy of a converged checkpoint's weights, validated against the
/// target spec.
WeightSet warm_init(const NetworkSpec& spec, const Checkpoint& checkpoint);

/// Applies w' = alpha*w + noise to every parameter, biases included.
/// With beta_scale == 0 this is exact scalar multiplication.
WeightSet shrink_perturb(const WeightSet& weights, const ShrinkParams& params);

/// Desk-scale stand-in for large-corpus pretrained initialization: trains
/// from a cold start on a pretext task (same input geometry, different
/// labeling rule) and returns the best checkpoint's weights.
WeightSet pretrain_surrogate(const NetworkSpec& spec, const Dataset& pretext_train,
                             const Dataset& pretext_val, const TrainConfig& config);

}  // namespace weightlab
