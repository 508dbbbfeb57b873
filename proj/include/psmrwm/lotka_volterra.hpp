#pragma once

// Predator-prey Markov jump process and its particle-marginal posterior.
//
// State u = (u1, u2) = (predators, prey).  Transitions and rates:
//   (u1, u2) --x1*u1*u2--> (u1+1, u2-1)   predation
//   (u1, u2) --x2*u1---->  (u1-1, u2)     predator death
//   (u1, u2) --x3*u2---->  (u1,   u2+1)   prey birth
// All other rates are zero; states with zero total rate are absorbing.
// Observations are Y(t) ~ N(u(t), diag(x4, x5)) at a regular time grid.
// Inference runs on theta = log x with independent Unif[-8, 8] priors.
//
// The filter-facing transition accepts a population cap: once u1 + u2
// reaches it, event simulation stops and the state freezes until the
// interval ends.  Any such particle's observation weight has already
// underflowed to exactly zero (residual >> 190 observation sds), so the cap
// cannot change a single accept/reject decision -- it only prevents
// explosive-rate parameter proposals from consuming unbounded CPU time.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "psmrwm/math/normal.hpp"
#include "psmrwm/particle_filter.hpp"
#include "psmrwm/psm_sampler.hpp"
#include "psmrwm/rng.hpp"

namespace psmrwm {

using LVState = std::array<std::int64_t, 2>;
using LVObservation = std::array<double, 2>;

struct LVParams {
  double x1;  // predation rate coefficient
  double x2;  // predator death rate
  double x3;  // prey birth rate
  double x4;  // observation variance, predator coordinate
  double x5;  // observation variance, prey coordinate

  // Observation variances must be positive; rate coefficients may be zero
  // (degenerate chains such as pure-death are legitimate simulation
  // targets).  Inference-path parameters always come through from_log,
  // which additionally enforces the prior support.
  void validate() const {
    if (!(x1 >= 0.0) || !(x2 >= 0.0) || !(x3 >= 0.0))
      throw std::invalid_argument("LVParams: rate coefficients must be >= 0");
    if (!(x4 > 0.0) || !(x5 > 0.0))
      throw std::invalid_argument("LVParams: observation variances must be positive");
  }

  static LVParams from_log(std::span<const double> theta, double lo = -8.0, double hi = 8.0) {
    if (theta.size() != 5) throw std::invalid_argument("LVParams: theta must have length 5");
    for (double t : theta)
      if (!(t >= lo) || !(t <= hi))
        throw std::invalid_argument("LVParams: log-parameter outside prior support");
    LVParams p{std::exp(theta[0]), std::exp(theta[1]), std::exp(theta[2]),
               std::exp(theta[3]), std::exp(theta[4])};
    p.validate();
    return p;
  }
};

/// Exact event-by-event simulation over a time interval of given length.
inline LVState gillespie_advance(LVState state, const LVParams& params, double duration,
                                 RngStream& rng,
                                 std::int64_t max_population = 1'000'000) {
  if (!(duration >= 0.0))
    throw std::invalid_argument("gillespie_advance: requires duration >= 0");
  double t = 0.0;
  while (true) {
    if (state[0] + state[1] >= max_population) return state;
    const double u1 = static_cast<double>(state[0]);
    const double u2 = static_cast<double>(state[1]);
    const double r_predation = params.x1 * u1 * u2;
    const double r_predator_death = params.x2 * u1;
    const double r_prey_birth = params.x3 * u2;
    const double total = r_predation + r_predator_death + r_prey_birth;
    if (!(total > 0.0)) return state;  // absorbing
    t += rng.exponential(total);
    if (t > duration) return state;
    const double pick = rng.uniform() * total;
    if (pick < r_predation) {
      state[0] += 1;
      state[1] -= 1;
    } else if (pick < r_predation + r_predator_death) {
      state[0] -= 1;
    } else {
      state[1] += 1;
    }
  }
}

inline double lv_observation_logpdf(const LVObservation& y, const LVState& u,
                                    const LVParams& params) {
  const double r1 = y[0] - static_cast<double>(u[0]);
  const double r2 = y[1] - static_cast<double>(u[1]);
  return -0.5 * (std::log(params.x4) + r1 * r1 / params.x4 + kLog2Pi) -
         0.5 * (std::log(params.x5) + r2 * r2 / params.x5 + kLog2Pi);
}

using LVModel = StateSpaceModel<LVState, LVParams, LVObservation>;

/// Assembles the filter-facing model for a known initial state and a fixed
/// data set.  filter_population_cap bounds the per-particle Gillespie work
/// (see header note; it cannot affect likelihood values).
inline LVModel make_lv_model(LVState u0, std::vector<double> observation_times,
                             std::vector<LVObservation> observations,
                             std::int64_t filter_population_cap = 10'000) {
  LVModel model;
  model.sample_initial = [u0](const LVParams&, RngStream&) { return u0; };
  model.advance = [filter_population_cap](const LVState& s, double t0, double t1,
                                          const LVParams& p, RngStream& rng) {
    return gillespie_advance(s, p, t1 - t0, rng, filter_population_cap);
  };
  model.observation_log_density = [](const LVObservation& y, const LVState& s,
                                     const LVParams& p) {
    return lv_observation_logpdf(y, s, p);
  };
  model.observation_times = std::move(observation_times);
  model.observations = std::move(observations);
  model.validate();
  return model;
}

struct LVSynthesis {
  LVModel model;
  std::vector<LVState> latent;  // true states at the observation times
  LVState u0;
  LVParams params;
};

/// Simulates one latent path from u0 and observes it with Gaussian error at
/// t = dt, 2dt, ..., up to t_max.
inline LVSynthesis lv_synthesize_data(const LVParams& params, LVState u0, double t_max,
                                      double dt, RngStream& rng) {
  params.validate();
  if (!(dt > 0.0) || !(t_max >= dt))
    throw std::invalid_argument("lv_synthesize_data: requires 0 < dt <= t_max");
  const auto n_obs = static_cast<std::size_t>(std::floor(t_max / dt + 1e-9));
  std::vector<double> times(n_obs);
  std::vector<LVObservation> observations(n_obs);
  std::vector<LVState> latent(n_obs);
  LVState state = u0;
  const double sd1 = std::sqrt(params.x4), sd2 = std::sqrt(params.x5);
  for (std::size_t k = 0; k < n_obs; ++k) {
    state = gillespie_advance(state, params, dt, rng);
    times[k] = dt * static_cast<double>(k + 1);
    latent[k] = state;
    observations[k] = {static_cast<double>(state[0]) + sd1 * rng.normal(),
                       static_cast<double>(state[1]) + sd2 * rng.normal()};
  }
  return {make_lv_model(u0, std::move(times), std::move(observations)), std::move(latent),
          u0, params};
}

/// Noisy log-posterior over theta = log x: bootstrap-filter log-likelihood
/// plus the flat-prior constant on the support box, -inf outside (returned
/// without running the filter).
inline LogTargetEstimator pmrwm_log_posterior_estimator(LVModel model,
                                                        ParticleFilterConfig config,
                                                        double support_lo = -8.0,
                                                        double support_hi = 8.0) {
  model.validate();
  config.validate();
  if (!(support_hi > support_lo))
    throw std::invalid_argument("pmrwm_log_posterior_estimator: empty prior support");
  const double log_prior = -5.0 * std::log(support_hi - support_lo);
  LogTargetEstimator est;
  est.dimension = 5;
  est.evaluate = [model = std::move(model), config, support_lo, support_hi,
                  log_prior](std::span<const double> theta, RngStream& rng) -> Evaluation {
    for (double t : theta)
      if (!(t >= support_lo && t <= support_hi))
        return {-std::numeric_limits<double>::infinity(), 0.0};
    const LVParams params = LVParams::from_log(theta, support_lo, support_hi);
    const LogLikelihoodEstimate ll = bootstrap_log_likelihood(model, params, config, rng);
    return {ll.log_value + log_prior, ll.cost};
  };
  return est;
}

}  // namespace psmrwm
