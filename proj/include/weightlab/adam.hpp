#pragma once

#include <cstdint>

#include "weightlab/network.hpp"

namespace weightlab {

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment accumulators, shape-congruent with the parameters
/// they track.
struct AdamState {
    WeightSet m;
    WeightSet v;
    std::int64_t t = 0;
};

/// Zeroed state congruent with `like`.
AdamState make_adam_state(const WeightSet& like);

/// Standard bias-corrected Adam update, applied elementwise in place.
/// Throws on shape mismatch between weights, grads, and state.
void adam_step(WeightSet& weights, const WeightSet& grads, AdamState& state,
               const AdamConfig& config);

}  // namespace weightlab
