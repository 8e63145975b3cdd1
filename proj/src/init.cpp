#include "weightlab/init.hpp"

#include <cmath>
#include <stdexcept>

#include "weightlab/rng.hpp"

namespace weightlab {

void ShrinkParams::validate() const {
    if (!(alpha >= 0.1 && alpha <= 0.9) && alpha != 1.0) {
        // alpha = 1.0 is admitted for the identity case; the search space is [0.1, 0.9].
        throw std::invalid_argument("ShrinkParams: alpha must lie in [0.1, 0.9]");
    }
    if (!(beta_scale >= 0.0)) throw std::invalid_argument("ShrinkParams: beta_scale must be >= 0");
}

WeightSet cold_init(const NetworkSpec& spec, std::uint64_t seed) {
    validate_spec(spec);
    WeightSet w = zero_weights(spec);
    Rng rng(seed);
    for (WeightEntry& e : w.entries) {
        // Conv kernel (oc, ic, k, k): fan_in = ic*k*k, fan_out = oc*k*k.
        // Dense kernel (out, in): fan_in = in, fan_out = out.
        double fan_in, fan_out;
        if (e.kernel.shape.size() == 4) {
            double rf = static_cast<double>(e.kernel.shape[2] * e.kernel.shape[3]);
            fan_in = static_cast<double>(e.kernel.shape[1]) * rf;
            fan_out = static_cast<double>(e.kernel.shape[0]) * rf;
        } else {
            fan_in = static_cast<double>(e.kernel.shape[1]);
            fan_out = static_cast<double>(e.kernel.shape[0]);
        }
        double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& v : e.kernel.values) v = rng.uniform(-limit, limit);
        // biases stay zero
    }
    return w;
}

WeightSet warm_init(const NetworkSpec& spec, const Checkpoint& checkpoint) {
    validate_weights(spec, checkpoint.weights);
    return checkpoint.weights;
}

WeightSet shrink_perturb(const WeightSet& weights, const ShrinkParams& params) {
    params.validate();
    WeightSet out = weights;
    if (params.beta_scale == 0.0) {
        out.for_each([&](double& v) { v = params.alpha * v; });
        return out;
    }
    Rng rng(params.noise_seed);
    out.for_each([&](double& v) {
        v = std::fma(params.alpha, v, rng.normal(0.0, params.beta_scale));
    });
    return out;
}

WeightSet pretrain_surrogate(const NetworkSpec& spec, const Dataset& pretext_train,
                             const Dataset& pretext_val, const TrainConfig& config) {
    WeightSet start = cold_init(spec, config.rng_seed);
    TrainResult r = train(spec, start, pretext_train, pretext_val, config);
    return r.best.weights;
}

}  // namespace weightlab
