#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <utility>
#include <vector>

namespace weightlab {

struct Observation {
    double alpha = 0.0;
    double objective = 0.0;
};

struct BOConfig {
    double lower = 0.1;
    double upper = 0.9;
    int n_calls = 100;
    int n_random_starts = 30;
    std::uint64_t seed = 0;
    double kernel_length_scale = 0.2;  // quarter of the default interval
    double noise_variance = 1e-6;

    void validate() const;
};

/// 1-D Gaussian process with a Matern-5/2 kernel and fixed hyperparameters.
/// The prior mean is the sample mean of the observations.
struct GPState {
    std::vector<Observation> observations;
    double length_scale = 0.2;
    double signal_variance = 1.0;
    double noise_variance = 1e-6;
};

/// Posterior (mean, variance) at a query point. Singular covariance is
/// retried with 10x diagonal jitter, giving up after 3 escalations.
std::pair<double, double> gp_posterior(const GPState& state, double alpha);

/// Expected improvement below best_observed under the posterior at alpha.
double expected_improvement(const GPState& state, double alpha, double best_observed);

enum class ProposalPhase { Random, ExpectedImprovement };

struct TracePoint {
    double alpha = 0.0;
    double objective = 0.0;
    int call_index = 0;
    ProposalPhase phase = ProposalPhase::Random;
    bool penalized = false;  // objective was non-finite, recorded as 1e6
};

struct MinimizeResult {
    double best_alpha = 0.0;
    double best_value = 0.0;
    std::vector<TracePoint> trace;
};

/// Gaussian-process minimization over [lower, upper]: n_random_starts
/// seeded uniform evaluations, then EI-argmax proposals over a dense
/// 512-point grid until exactly n_calls evaluations have been made.
MinimizeResult minimize(const std::function<double(double)>& objective, const BOConfig& config);

/// CSV with columns alpha, objective, call_index, phase(random|ei).
void write_trace_csv(const std::filesystem::path& path, const std::vector<TracePoint>& trace);

}  // namespace weightlab
