#pragma once

// Bootstrap particle filter with an unbiased (in the density domain)
// likelihood estimate.  Particles propagate through the model's transition
// simulator between observation times, are weighted by the observation
// density, and are resampled after every observation step (unconditional
// resampling keeps the estimator inside the standard unbiasedness proofs).
// Weights live in the log domain throughout; the per-step contribution is
// log-mean-exp of the log-weights.  Declared cost is m x (number of
// observation intervals), matching the cost-proportional-to-m model that
// makes sigma^2 ~ c/m.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "psmrwm/math/stats.hpp"
#include "psmrwm/rng.hpp"

namespace psmrwm {

template <class State, class Params, class Obs>
struct StateSpaceModel {
  std::function<State(const Params&, RngStream&)> sample_initial;
  // Advances one latent trajectory from time t0 to t1.
  std::function<State(const State&, double t0, double t1, const Params&, RngStream&)> advance;
  std::function<double(const Obs&, const State&, const Params&)> observation_log_density;
  std::vector<double> observation_times;
  std::vector<Obs> observations;
  double initial_time = 0.0;

  void validate() const {
    if (observation_times.size() != observations.size())
      throw std::invalid_argument(
          "StateSpaceModel: observation count must equal observation-time count");
    double prev = initial_time;
    for (double t : observation_times) {
      if (!(t > prev))
        throw std::invalid_argument("StateSpaceModel: observation times must be increasing");
      prev = t;
    }
  }
};

enum class ResamplingScheme { multinomial, systematic };

struct ParticleFilterConfig {
  std::size_t particle_count;
  ResamplingScheme resampling = ResamplingScheme::systematic;
  std::uint64_t seed = 0;

  void validate() const {
    if (particle_count < 1)
      throw std::invalid_argument("ParticleFilterConfig: requires at least one particle");
  }
};

struct LogLikelihoodEstimate {
  double log_value;
  double cost;
};

namespace detail {

// Ancestor indices from normalized weights.  Systematic: one uniform strides
// the cumulative table; multinomial: independent lookups.  Both emit indices
// in a deterministic order given the stream.
inline void resample_indices(const std::vector<double>& cumulative, ResamplingScheme scheme,
                             RngStream& rng, std::vector<std::size_t>& ancestors) {
  const std::size_t m = ancestors.size();
  if (scheme == ResamplingScheme::systematic) {
    const double u0 = rng.uniform();
    std::size_t j = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const double u = (static_cast<double>(i) + u0) / static_cast<double>(m);
      while (j + 1 < m && cumulative[j] < u) ++j;
      ancestors[i] = j;
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      const double u = rng.uniform();
      const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
      ancestors[i] = std::min<std::size_t>(it - cumulative.begin(), m - 1);
    }
  }
}

}  // namespace detail

/// Runs the bootstrap filter and returns the log-likelihood estimate with
/// its declared cost.  If every particle weight vanishes at some step the
/// estimate is -inf (a legitimate certain-reject value), returned early.
template <class State, class Params, class Obs>
LogLikelihoodEstimate bootstrap_log_likelihood(const StateSpaceModel<State, Params, Obs>& model,
                                               const Params& params,
                                               const ParticleFilterConfig& config,
                                               RngStream& rng) {
  model.validate();
  config.validate();
  const std::size_t m = config.particle_count;
  const std::size_t n_obs = model.observation_times.size();
  const double total_cost = static_cast<double>(m) * static_cast<double>(n_obs);

  std::vector<State> particles;
  particles.reserve(m);
  for (std::size_t i = 0; i < m; ++i) particles.push_back(model.sample_initial(params, rng));

  std::vector<State> propagated(particles);
  std::vector<double> log_weights(m);
  std::vector<double> cumulative(m);
  std::vector<std::size_t> ancestors(m);

  double log_likelihood = 0.0;
  double t_prev = model.initial_time;
  for (std::size_t k = 0; k < n_obs; ++k) {
    const double t_next = model.observation_times[k];
    for (std::size_t i = 0; i < m; ++i)
      propagated[i] = model.advance(particles[i], t_prev, t_next, params, rng);
    for (std::size_t i = 0; i < m; ++i)
      log_weights[i] =
          model.observation_log_density(model.observations[k], propagated[i], params);

    const double step_log_mean = log_mean_exp(log_weights);
    if (!(step_log_mean > -std::numeric_limits<double>::infinity()))
      return {-std::numeric_limits<double>::infinity(), total_cost};
    log_likelihood += step_log_mean;

    // Normalize in the log domain and resample every step.
    const double log_norm = step_log_mean + std::log(static_cast<double>(m));
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      acc += std::exp(log_weights[i] - log_norm);
      cumulative[i] = acc;
    }
    cumulative[m - 1] = 1.0;
    detail::resample_indices(cumulative, config.resampling, rng, ancestors);
    for (std::size_t i = 0; i < m; ++i) particles[i] = propagated[ancestors[i]];
    t_prev = t_next;
  }
  return {log_likelihood, total_cost};
}

/// Convenience entry point seeding a fresh stream from config.seed.
template <class State, class Params, class Obs>
LogLikelihoodEstimate bootstrap_log_likelihood(const StateSpaceModel<State, Params, Obs>& model,
                                               const Params& params,
                                               const ParticleFilterConfig& config) {
  RngStream rng(config.seed);
  return bootstrap_log_likelihood(model, params, config, rng);
}

}  // namespace psmrwm
