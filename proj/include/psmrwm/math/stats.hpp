#pragma once

// Small statistics toolkit shared by the theory, sampler, and diagnostics
// layers: moments, log-sum-exp, least squares, Geyer's initial-positive-
// sequence ESS, batch-means standard errors, and a one-sample KS distance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace psmrwm {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean: empty input");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

/// Unbiased sample variance (two-pass).
inline double variance(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("variance: need at least 2 points");
  const double mu = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - mu) * (x - mu);
  return s / static_cast<double>(xs.size() - 1);
}

inline double std_error_of_mean(std::span<const double> xs) {
  return std::sqrt(variance(xs) / static_cast<double>(xs.size()));
}

inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : xs) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;  // all -inf (or a stray +inf/NaN propagates)
  double s = 0.0;
  for (double x : xs) s += std::exp(x - hi);
  return hi + std::log(s);
}

inline double log_mean_exp(std::span<const double> xs) {
  return log_sum_exp(xs) - std::log(static_cast<double>(xs.size()));
}

struct OlsFit {
  double slope;
  double intercept;
};

inline OlsFit ols_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("ols_fit: need matching inputs with >= 2 points");
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("ols_fit: degenerate abscissae");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

/// Effective sample size by Geyer's initial-positive-sequence truncation:
/// sum autocovariance pairs Gamma_k = gamma_{2k} + gamma_{2k+1} while they
/// stay positive.  A (near-)constant series carries no information and
/// reports ESS = 1.
inline double geyer_ess(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 4) return static_cast<double>(n > 0 ? 1 : 0);
  const double mu = mean(xs);
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = xs[i] - mu;
  auto gamma = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += centered[i] * centered[i + lag];
    return s / static_cast<double>(n);
  };
  const double g0 = gamma(0);
  // variance at the rounding floor of the mean's magnitude is noise, not signal
  if (!(g0 > 1e-28 * mu * mu)) return 1.0;
  double tau = g0;  // running sum gamma_0 + 2*sum_{k>=1} gamma_k, in pairs
  for (std::size_t k = 1; k + 1 < n; k += 2) {
    const double pair = gamma(k) + gamma(k + 1);
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  const double ess = static_cast<double>(n) * g0 / tau;
  return std::clamp(ess, 1.0, static_cast<double>(n));
}

/// Standard error of the mean of a (possibly autocorrelated) series via
/// non-overlapping batch means.
inline double batch_means_se(std::span<const double> xs, std::size_t batch_size = 1000) {
  if (batch_size < 2) throw std::invalid_argument("batch_means_se: batch_size too small");
  const std::size_t n_batches = xs.size() / batch_size;
  if (n_batches < 2)
    throw std::invalid_argument("batch_means_se: fewer than 2 complete batches");
  std::vector<double> means(n_batches);
  for (std::size_t b = 0; b < n_batches; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < batch_size; ++i) s += xs[b * batch_size + i];
    means[b] = s / static_cast<double>(batch_size);
  }
  return std::sqrt(variance(means) / static_cast<double>(n_batches));
}

/// One-sample Kolmogorov-Smirnov distance sup_x |F_n(x) - F(x)| against a
/// reference CDF (callable).  Sorts a copy of the sample.
template <class Cdf>
double ks_distance(std::span<const double> sample, Cdf&& reference_cdf) {
  if (sample.empty()) throw std::invalid_argument("ks_distance: empty sample");
  std::vector<double> xs(sample.begin(), sample.end());
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = reference_cdf(xs[i]);
    d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

}  // namespace psmrwm
