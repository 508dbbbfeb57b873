#pragma once

// One-dimensional linear-Gaussian state-space model with its exact marginal
// likelihood (Kalman recursions).  Serves as the ground-truth oracle for
// particle-filter unbiasedness and variance-scaling checks.
//
// Convention: the latent state starts at X_0 ~ N(prior_mean, prior_var) at
// time 0, one AR(1) transition X_k = a X_{k-1} + N(0, q) happens per unit
// interval, and Y_k = c X_k + N(0, r) is observed at times 1..n.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "psmrwm/math/normal.hpp"
#include "psmrwm/particle_filter.hpp"
#include "psmrwm/rng.hpp"

namespace psmrwm {

struct LinearGaussianModel {
  double prior_mean = 0.0;
  double prior_var = 1.0;
  double coeff_a = 0.9;
  double noise_var_q = 0.25;
  double obs_coeff_c = 1.0;
  double obs_var_r = 1.0;

  void validate() const {
    if (!(prior_var > 0.0) || !(noise_var_q > 0.0) || !(obs_var_r > 0.0))
      throw std::invalid_argument("LinearGaussianModel: variances must be positive");
  }
};

/// Exact log p(y_1..y_n) by sequential prediction/update.
inline double kalman_log_likelihood(const LinearGaussianModel& spec,
                                    std::span<const double> observations) {
  spec.validate();
  double m = spec.prior_mean;
  double p = spec.prior_var;
  double log_lik = 0.0;
  for (double y : observations) {
    const double m_pred = spec.coeff_a * m;
    const double p_pred = spec.coeff_a * spec.coeff_a * p + spec.noise_var_q;
    const double innovation_var =
        spec.obs_coeff_c * spec.obs_coeff_c * p_pred + spec.obs_var_r;
    const double resid = y - spec.obs_coeff_c * m_pred;
    log_lik += -0.5 * (std::log(innovation_var) + resid * resid / innovation_var + kLog2Pi);
    const double gain = p_pred * spec.obs_coeff_c / innovation_var;
    m = m_pred + gain * resid;
    p = (1.0 - gain * spec.obs_coeff_c) * p_pred;
  }
  return log_lik;
}

/// Simulates n observations (latent path optionally returned).
inline std::vector<double> simulate_linear_gaussian(const LinearGaussianModel& spec,
                                                    std::size_t n, RngStream& rng,
                                                    std::vector<double>* latent = nullptr) {
  spec.validate();
  std::vector<double> ys(n);
  double x = spec.prior_mean + std::sqrt(spec.prior_var) * rng.normal();
  if (latent) latent->clear();
  for (std::size_t k = 0; k < n; ++k) {
    x = spec.coeff_a * x + std::sqrt(spec.noise_var_q) * rng.normal();
    if (latent) latent->push_back(x);
    ys[k] = spec.obs_coeff_c * x + std::sqrt(spec.obs_var_r) * rng.normal();
  }
  return ys;
}

/// Wraps the model and a data vector as a StateSpaceModel for the bootstrap
/// filter (observation times 1..n, one AR transition per unit interval).
inline StateSpaceModel<double, LinearGaussianModel, double> make_linear_gaussian_ssm(
    std::vector<double> observations) {
  StateSpaceModel<double, LinearGaussianModel, double> model;
  model.sample_initial = [](const LinearGaussianModel& p, RngStream& rng) {
    return p.prior_mean + std::sqrt(p.prior_var) * rng.normal();
  };
  model.advance = [](const double& x, double t0, double t1, const LinearGaussianModel& p,
                     RngStream& rng) {
    double state = x;
    const auto steps = static_cast<std::size_t>(std::llround(t1 - t0));
    for (std::size_t s = 0; s < steps; ++s)
      state = p.coeff_a * state + std::sqrt(p.noise_var_q) * rng.normal();
    return state;
  };
  model.observation_log_density = [](const double& y, const double& x,
                                     const LinearGaussianModel& p) {
    const double resid = y - p.obs_coeff_c * x;
    return -0.5 * (std::log(p.obs_var_r) + resid * resid / p.obs_var_r + kLog2Pi);
  };
  model.observations = std::move(observations);
  model.observation_times.resize(model.observations.size());
  for (std::size_t k = 0; k < model.observation_times.size(); ++k)
    model.observation_times[k] = static_cast<double>(k + 1);
  return model;
}

}  // namespace psmrwm
