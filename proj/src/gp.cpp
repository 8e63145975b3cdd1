#include "weightlab/gp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "weightlab/rng.hpp"
#include "weightlab/weight_io.hpp"

namespace weightlab {

void BOConfig::validate() const {
    if (!(lower < upper)) throw std::invalid_argument("BOConfig: lower must be < upper");
    if (n_calls < 1) throw std::invalid_argument("BOConfig: n_calls must be >= 1");
    if (n_random_starts < 1 || n_random_starts > n_calls) {
        throw std::invalid_argument("BOConfig: need 1 <= n_random_starts <= n_calls");
    }
    if (!(kernel_length_scale > 0.0)) {
        throw std::invalid_argument("BOConfig: kernel_length_scale must be > 0");
    }
    if (!(noise_variance >= 0.0)) {
        throw std::invalid_argument("BOConfig: noise_variance must be >= 0");
    }
}

namespace {

double matern52(double r, double length_scale, double signal_variance) {
    double s = std::sqrt(5.0) * std::abs(r) / length_scale;
    return signal_variance * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

struct Posterior {
    double mean;
    double variance;
};

// One Cholesky factorization reused across many posterior queries.
class FittedGP {
  public:
    explicit FittedGP(const GPState& state) : state_(state) {
        const auto& obs = state.observations;
        if (obs.empty()) {
            throw std::invalid_argument("gp_posterior: needs at least one observation");
        }
        const auto n = static_cast<Eigen::Index>(obs.size());
        for (const Observation& o : obs) mean0_ += o.objective;
        mean0_ /= static_cast<double>(obs.size());

        Eigen::MatrixXd K(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                K(i, j) = matern52(obs[static_cast<std::size_t>(i)].alpha -
                                       obs[static_cast<std::size_t>(j)].alpha,
                                   state.length_scale, state.signal_variance);
            }
        }
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            y(i) = obs[static_cast<std::size_t>(i)].objective - mean0_;
        }

        double jitter = state.noise_variance;
        for (int attempt = 0;; ++attempt) {
            Eigen::MatrixXd Kj = K;
            Kj.diagonal().array() += jitter;
            llt_.compute(Kj);
            if (llt_.info() == Eigen::Success) {
                weights_ = llt_.solve(y);
                return;
            }
            if (attempt >= 3) {
                throw std::runtime_error(
                    "gp_posterior: covariance not positive definite after jitter escalation");
            }
            jitter = jitter == 0.0 ? 1e-12 : jitter * 10.0;
        }
    }

    Posterior posterior(double alpha) const {
        const auto& obs = state_.observations;
        const auto n = static_cast<Eigen::Index>(obs.size());
        Eigen::VectorXd k_star(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            k_star(i) = matern52(alpha - obs[static_cast<std::size_t>(i)].alpha,
                                 state_.length_scale, state_.signal_variance);
        }
        Eigen::VectorXd v = llt_.solve(k_star);
        double mean = mean0_ + k_star.dot(weights_);
        double var = state_.signal_variance - k_star.dot(v);
        return {mean, std::max(var, 0.0)};
    }

  private:
    const GPState& state_;
    double mean0_ = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd weights_;
};

double ei_from_posterior(const Posterior& p, double best_observed);

constexpr int kEiGridSize = 512;
constexpr double kPenalty = 1e6;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
}

double ei_from_posterior(const Posterior& p, double best_observed) {
    double sigma = std::sqrt(p.variance);
    double gap = best_observed - p.mean;
    if (sigma < 1e-15) return std::max(gap, 0.0);
    double z = gap / sigma;
    return gap * normal_cdf(z) + sigma * normal_pdf(z);
}

}  // namespace

std::pair<double, double> gp_posterior(const GPState& state, double alpha) {
    Posterior p = FittedGP(state).posterior(alpha);
    return {p.mean, p.variance};
}

double expected_improvement(const GPState& state, double alpha, double best_observed) {
    return ei_from_posterior(FittedGP(state).posterior(alpha), best_observed);
}

MinimizeResult minimize(const std::function<double(double)>& objective, const BOConfig& config) {
    config.validate();
    Rng rng(config.seed);

    MinimizeResult result;
    GPState state;
    state.length_scale = config.kernel_length_scale;
    state.noise_variance = config.noise_variance;

    auto evaluate = [&](double alpha, ProposalPhase phase, int call_index) {
        double value = objective(alpha);
        TracePoint tp;
        tp.alpha = alpha;
        tp.call_index = call_index;
        tp.phase = phase;
        if (!std::isfinite(value)) {
            tp.objective = kPenalty;
            tp.penalized = true;
        } else {
            tp.objective = value;
        }
        result.trace.push_back(tp);
        state.observations.push_back({alpha, tp.objective});
    };

    for (int call = 0; call < config.n_random_starts && call < config.n_calls; ++call) {
        evaluate(rng.uniform(config.lower, config.upper), ProposalPhase::Random, call);
    }

    // Signal variance is pinned to the spread of the random-start phase.
    double mean = 0.0;
    for (const auto& o : state.observations) mean += o.objective;
    mean /= static_cast<double>(state.observations.size());
    double var = 0.0;
    for (const auto& o : state.observations) {
        var += (o.objective - mean) * (o.objective - mean);
    }
    var /= static_cast<double>(state.observations.size());
    state.signal_variance = std::max(var, 1e-8);

    for (int call = config.n_random_starts; call < config.n_calls; ++call) {
        double best = result.trace.front().objective;
        for (const TracePoint& tp : result.trace) best = std::min(best, tp.objective);

        FittedGP fit(state);
        double best_alpha = config.lower;
        double best_ei = -1.0;
        for (int g = 0; g < kEiGridSize; ++g) {
            double alpha = config.lower + (config.upper - config.lower) *
                                              static_cast<double>(g) / (kEiGridSize - 1);
            bool observed = false;
            for (const auto& o : state.observations) {
                if (std::abs(o.alpha - alpha) < 1e-12) {
                    observed = true;
                    break;
                }
            }
            if (observed) continue;  // keeps observation alphas distinct
            double ei = ei_from_posterior(fit.posterior(alpha), best);
            if (ei > best_ei) {  // strict: ties keep the lowest alpha
                best_ei = ei;
                best_alpha = alpha;
            }
        }
        evaluate(best_alpha, ProposalPhase::ExpectedImprovement, call);
    }

    const TracePoint* best_tp = &result.trace.front();
    for (const TracePoint& tp : result.trace) {
        if (tp.objective < best_tp->objective) best_tp = &tp;
    }
    result.best_alpha = best_tp->alpha;
    result.best_value = best_tp->objective;
    return result;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TracePoint>& trace) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << "alpha,objective,call_index,phase\n";
    for (const TracePoint& tp : trace) {
        f << format_double(tp.alpha) << ',' << format_double(tp.objective) << ','
          << tp.call_index << ',' << (tp.phase == ProposalPhase::Random ? "random" : "ei")
          << '\n';
    }
}

}  // namespace weightlab
