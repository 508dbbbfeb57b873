#pragma once

// Diagnostics for the noise in the estimated log-target at a fixed anchor
// point: recentred W* samples, the variance-versus-particle-count
// regression (theoretical slope -1), normal QQ data, and the moment-
// generating-function identity estimators
//   M1(t) = (1/n1) sum exp(t (Lhat_i + shift))
//   M2(t) = M1(t) / [(1/n2) sum exp((t+1) w*_j)],
// which recovers the MGF of the exact log-likelihood when the noise is
// independent of the position.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "psmrwm/math/normal.hpp"
#include "psmrwm/math/stats.hpp"
#include "psmrwm/psm_sampler.hpp"
#include "psmrwm/rng.hpp"

namespace psmrwm {

/// Recentres log-noise draws so the sample mean of e^w is exactly 1.
inline std::vector<double> recentre_log_noise(std::span<const double> draws) {
  if (draws.empty()) throw std::invalid_argument("recentre_log_noise: empty input");
  const double shift = log_mean_exp(draws);
  std::vector<double> out(draws.begin(), draws.end());
  for (double& w : out) w -= shift;
  return out;
}

struct NoiseSample {
  std::vector<double> w_star_draws;  // recentred: (1/n) sum e^{w*} == 1
  std::size_t m = 0;                 // particle count behind the estimator (0 if n/a)
  std::vector<double> anchor_point;
  double recentre_shift = 0.0;       // log-mean-exp of the raw draws
  std::optional<double> exact_log_target;  // exact W* = w* + shift - exact when known
};

/// n fresh estimator evaluations at the anchor.  Draws are recentred; when
/// the exact log-target value at the anchor is known it is recorded so the
/// un-recentred noise can be reconstructed.
inline NoiseSample collect_noise_sample(const LogTargetEstimator& estimator,
                                        std::span<const double> anchor,
                                        std::optional<double> exact_log_target_at_anchor,
                                        std::size_t n, RngStream& rng,
                                        std::size_t m_label = 0) {
  if (n < 100) throw std::invalid_argument("collect_noise_sample: requires n >= 100");
  if (anchor.size() != estimator.dimension)
    throw std::invalid_argument("collect_noise_sample: anchor/estimator dimension mismatch");
  std::vector<double> raw(n);
  for (double& v : raw) {
    const Evaluation e = estimator.evaluate(anchor, rng);
    if (!std::isfinite(e.log_value))
      throw std::runtime_error(
          "collect_noise_sample: estimator returned a non-finite value at the anchor");
    v = e.log_value;
  }
  NoiseSample s;
  s.recentre_shift = log_mean_exp(raw);
  s.w_star_draws = std::move(raw);
  for (double& w : s.w_star_draws) w -= s.recentre_shift;
  s.m = m_label;
  s.anchor_point.assign(anchor.begin(), anchor.end());
  s.exact_log_target = exact_log_target_at_anchor;
  return s;
}

/// OLS of log sample-variance on log particle count; independent estimates
/// give slope -1.
inline OlsFit variance_vs_m_slope(std::span<const NoiseSample> samples) {
  std::vector<double> log_m, log_var;
  for (const auto& s : samples) {
    if (s.m < 1)
      throw std::invalid_argument("variance_vs_m_slope: sample without particle count m");
    log_m.push_back(std::log(static_cast<double>(s.m)));
    log_var.push_back(std::log(variance(s.w_star_draws)));
  }
  std::vector<double> distinct = log_m;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3)
    throw std::invalid_argument("variance_vs_m_slope: need >= 3 distinct m values");
  return ols_fit(log_m, log_var);
}

struct MGFCurves {
  std::vector<double> t_grid;
  std::vector<double> m1;
  std::vector<double> m2;
  double shift = 0.0;
};

class MgfOverflowError : public std::runtime_error {
 public:
  MgfOverflowError(double t, const std::string& which)
      : std::runtime_error("mgf_curves: empirical average overflowed at t = " +
                           std::to_string(t) + " (" + which + ")"),
        t(t) {}
  double t;
};

/// 21 points on [-1, 1]; empirical MGFs of heavy-tailed samples are not
/// trustworthy much beyond |t| = 1.
inline std::vector<double> default_mgf_t_grid() {
  std::vector<double> t(21);
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = -1.0 + 2.0 * static_cast<double>(i) / 20.0;
  return t;
}

/// M1 from noisy log-likelihood draws (shift configurable; 0 default) and
/// the ratio estimator M2 using the noise sample.
inline MGFCurves mgf_curves(std::span<const double> l_hat_draws, const NoiseSample& noise,
                            std::span<const double> t_grid, double shift = 0.0) {
  if (l_hat_draws.empty() || t_grid.empty())
    throw std::invalid_argument("mgf_curves: empty inputs");
  MGFCurves curves;
  curves.t_grid.assign(t_grid.begin(), t_grid.end());
  curves.shift = shift;
  curves.m1.reserve(t_grid.size());
  curves.m2.reserve(t_grid.size());
  for (double t : t_grid) {
    double m1 = 0.0;
    for (double l : l_hat_draws) m1 += std::exp(t * (l + shift));
    m1 /= static_cast<double>(l_hat_draws.size());
    if (!std::isfinite(m1)) throw MgfOverflowError(t, "M1 numerator");
    double denom = 0.0;
    for (double w : noise.w_star_draws) denom += std::exp((t + 1.0) * w);
    denom /= static_cast<double>(noise.w_star_draws.size());
    if (!std::isfinite(denom) || denom <= 0.0) throw MgfOverflowError(t, "M2 denominator");
    curves.m1.push_back(m1);
    curves.m2.push_back(m1 / denom);
  }
  return curves;
}

/// Percentile bootstrap bands (default 200 resamples, central 95%) for the
/// M2 curve; resamples both inputs.
struct MGFBands {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<double> std_error;
};

inline MGFBands mgf_m2_bootstrap_bands(std::span<const double> l_hat_draws,
                                       const NoiseSample& noise,
                                       std::span<const double> t_grid, double shift,
                                       RngStream& rng, std::size_t n_resamples = 200) {
  if (n_resamples < 20)
    throw std::invalid_argument("mgf_m2_bootstrap_bands: too few resamples");
  std::vector<std::vector<double>> m2_replicates(n_resamples);
  std::vector<double> l_res(l_hat_draws.size());
  NoiseSample noise_res = noise;
  for (std::size_t b = 0; b < n_resamples; ++b) {
    for (double& v : l_res) v = l_hat_draws[rng.uniform_int(l_hat_draws.size())];
    for (double& w : noise_res.w_star_draws)
      w = noise.w_star_draws[rng.uniform_int(noise.w_star_draws.size())];
    m2_replicates[b] = mgf_curves(l_res, noise_res, t_grid, shift).m2;
  }
  MGFBands bands;
  const std::size_t nt = t_grid.size();
  bands.lo.resize(nt);
  bands.hi.resize(nt);
  bands.std_error.resize(nt);
  std::vector<double> column(n_resamples);
  for (std::size_t j = 0; j < nt; ++j) {
    for (std::size_t b = 0; b < n_resamples; ++b) column[b] = m2_replicates[b][j];
    std::sort(column.begin(), column.end());
    const auto lo_idx = static_cast<std::size_t>(0.025 * static_cast<double>(n_resamples));
    const auto hi_idx = static_cast<std::size_t>(0.975 * static_cast<double>(n_resamples));
    bands.lo[j] = column[lo_idx];
    bands.hi[j] = column[std::min(hi_idx, n_resamples - 1)];
    bands.std_error[j] = std::sqrt(variance(column));
  }
  return bands;
}

/// Standardized empirical quantiles against normal quantiles at plotting
/// positions (i - 0.5)/n.
inline std::vector<std::pair<double, double>> qq_against_gaussian(const NoiseSample& sample) {
  const auto& xs = sample.w_star_draws;
  if (xs.size() < 100)
    throw std::invalid_argument("qq_against_gaussian: requires at least 100 draws");
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  const double mu = mean(sorted);
  const double sd = std::sqrt(variance(sorted));
  const double n = static_cast<double>(sorted.size());
  std::vector<std::pair<double, double>> pairs(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double p = (static_cast<double>(i) + 0.5) / n;
    pairs[i] = {normal_quantile(p), (sorted[i] - mu) / sd};
  }
  return pairs;
}

}  // namespace psmrwm
