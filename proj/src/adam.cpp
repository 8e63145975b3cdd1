#include "weightlab/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace weightlab {

AdamState make_adam_state(const WeightSet& like) {
    AdamState s;
    s.m = like;
    s.v = like;
    s.m.for_each([](double& x) { x = 0.0; });
    s.v.for_each([](double& x) { x = 0.0; });
    return s;
}

namespace {

void step_array(std::vector<double>& w, const std::vector<double>& g, std::vector<double>& m,
                std::vector<double>& v, const AdamConfig& c, double bc1, double bc2) {
    for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
        double mhat = m[i] / bc1;
        double vhat = v[i] / bc2;
        w[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
    }
}

}  // namespace

void adam_step(WeightSet& weights, const WeightSet& grads, AdamState& state,
               const AdamConfig& config) {
    if (!same_shapes(weights, grads) || !same_shapes(weights, state.m) ||
        !same_shapes(weights, state.v)) {
        throw std::invalid_argument("adam_step: weights, grads, and state must be congruent");
    }
    state.t += 1;
    double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < weights.entries.size(); ++i) {
        step_array(weights.entries[i].kernel.values, grads.entries[i].kernel.values,
                   state.m.entries[i].kernel.values, state.v.entries[i].kernel.values, config,
                   bc1, bc2);
        step_array(weights.entries[i].bias.values, grads.entries[i].bias.values,
                   state.m.entries[i].bias.values, state.v.entries[i].bias.values, config, bc1,
                   bc2);
    }
}

}  // namespace weightlab
