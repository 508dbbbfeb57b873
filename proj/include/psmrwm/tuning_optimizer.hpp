#pragma once

// Optima of the efficiency surfaces.
//
// In the Gaussian standard asymptotic regime the efficiency
//   Eff(ell, sigma^2) = tau^2 ell^2 Phi(-u/2),  u = sqrt(ell^2 + tau^2),
// tau^2 = 2 sigma^2, is symmetric in (ell^2, tau^2).  Conditional optima
// solve the stationarity condition
//   ell^2 = 4 u M(u/2)        (M = Mills ratio),
// a rearrangement of  Phi(-u/2) = (ell^2/4) phi(u/2)/u  that stays stable
// arbitrarily deep in the tail (both sides of the raw condition underflow
// past u ~ 80; the Mills form never does).  The joint optimum sits on the
// diagonal tau^2 = ell^2, reducing to maximizing sigma^4 Phi(-sigma).

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include <json.hpp>

#include "psmrwm/limit_theory.hpp"
#include "psmrwm/math/normal.hpp"
#include "psmrwm/math/optimize.hpp"

namespace psmrwm {

struct OptimumReport {
  double ell_opt;
  double sigma2_opt;
  double alpha_at_opt;
  double eff_at_opt;
  std::size_t iterations;
  bool converged;
};

inline nlohmann::json to_json(const OptimumReport& r) {
  return {{"ell_opt", r.ell_opt},       {"sigma2_opt", r.sigma2_opt},
          {"alpha_opt", r.alpha_at_opt}, {"eff_opt", r.eff_at_opt},
          {"iterations", r.iterations},  {"converged", r.converged}};
}

namespace detail {

// Root of x = 4 u M(u/2) with u = sqrt(x + other), solved for x in (0, cap].
// With other = tau^2 this yields the optimal ell^2; by symmetry with
// other = ell^2 it yields the optimal tau^2.
inline double conditional_square_root_solve(double other, double tol) {
  auto g = [other](double x) {
    const double u = std::sqrt(x + other);
    return x - 4.0 * u * mills_ratio(0.5 * u);
  };
  return brent_root(g, 1e-12, 400.0, tol);
}

}  // namespace detail

/// Conditional optimum of J (equivalently Eff) over ell at fixed sigma^2.
inline double optimize_ell_given_sigma2(double sigma2, double tol = 1e-12) {
  if (!(sigma2 >= 0.0))
    throw std::invalid_argument("optimize_ell_given_sigma2: requires sigma2 >= 0");
  return std::sqrt(detail::conditional_square_root_solve(2.0 * sigma2, tol));
}

/// Conditional optimum of Eff over sigma^2 at fixed ell (the tau^2 = ell^2
/// mirror of the condition above).
inline double optimize_sigma2_given_ell(double ell, double tol = 1e-12) {
  if (!(ell > 0.0)) throw std::invalid_argument("optimize_sigma2_given_ell: requires ell > 0");
  return 0.5 * detail::conditional_square_root_solve(ell * ell, tol);
}

/// Joint SAR optimum.  A golden-section pass on the 1-D diagonal reduction
/// sigma^4 Phi(-sigma) seeds alternating conditional-root sweeps, which
/// converge to the stationary point of the full 2-D surface.
inline OptimumReport optimize_sar_joint(double tol = 1e-9) {
  if (!(tol > 0.0) || tol > 1e-6)
    throw std::invalid_argument("optimize_sar_joint: requires 0 < tol <= 1e-6");
  auto neg_diag = [](double sigma) {
    const double s2 = sigma * sigma;
    return -s2 * s2 * normal_sf(sigma);
  };
  const MinimizeResult seed = golden_section_minimize(neg_diag, 0.5, 5.0, 1e-8);
  double sigma2 = seed.x * seed.x;
  double ell = std::sqrt(2.0 * sigma2);
  std::size_t sweeps = 0;
  bool converged = false;
  for (; sweeps < 200; ++sweeps) {
    const double ell_next = optimize_ell_given_sigma2(sigma2, tol * 1e-3);
    const double sigma2_next = optimize_sigma2_given_ell(ell_next, tol * 1e-3);
    const double delta =
        std::fabs(ell_next - ell) + std::fabs(sigma2_next - sigma2);
    ell = ell_next;
    sigma2 = sigma2_next;
    if (delta < tol) {
      converged = true;
      ++sweeps;
      break;
    }
  }
  OptimumReport r{};
  r.ell_opt = ell;
  r.sigma2_opt = sigma2;
  r.alpha_at_opt = limiting_acceptance(ell, NoiseModel::gaussian(sigma2)).value;
  r.eff_at_opt = sar_efficiency(ell, sigma2);
  r.iterations = seed.iterations + sweeps;
  r.converged = converged && seed.converged;
  return r;
}

namespace detail {

// Coordinate descent (golden section per coordinate) for 2-D efficiency
// surfaces over the documented brackets ell in [1e-3, 20], sigma^2 in
// [1e-3, 50].  Objective is called as f(ell, sigma2) to be maximized.
template <class F>
OptimumReport coordinate_descent_2d(F&& objective, double ell0, double sigma20, double tol) {
  constexpr double ell_lo = 1e-3, ell_hi = 20.0;
  constexpr double s2_lo = 1e-3, s2_hi = 50.0;
  double ell = ell0, sigma2 = sigma20;
  std::size_t sweeps = 0;
  bool converged = false;
  for (; sweeps < 100; ++sweeps) {
    const auto along_ell = [&](double l) { return -objective(l, sigma2); };
    const double ell_next = golden_section_minimize(along_ell, ell_lo, ell_hi, 1e-10).x;
    const auto along_s2 = [&](double s2) { return -objective(ell_next, s2); };
    const double s2_next = golden_section_minimize(along_s2, s2_lo, s2_hi, 1e-10).x;
    const double delta = std::fabs(ell_next - ell) + std::fabs(s2_next - sigma2);
    ell = ell_next;
    sigma2 = s2_next;
    // floor at 1e-6: comparison-based line searches cannot localize the
    // optimum below ~sqrt(eps) (about 5e-8 here), where successive sweeps
    // enter a small 2-cycle instead of contracting further
    if (delta < std::max(tol, 1e-6)) {
      converged = true;
      ++sweeps;
      break;
    }
  }
  OptimumReport r{};
  r.ell_opt = ell;
  r.sigma2_opt = sigma2;
  r.eff_at_opt = objective(ell, sigma2);
  r.iterations = sweeps;
  r.converged = converged;
  return r;
}

}  // namespace detail

/// Joint optimum of J_{sigma^2}(ell)/(1 + t_rat/sigma^2).  The optimal
/// acceptance decreases from 23.4% (t_rat -> 0: likelihood evaluations are
/// free, so drive the noise to zero) to 7.0% (t_rat -> infinity: the SAR
/// cost model dominates).
inline OptimumReport optimize_with_overhead(double t_rat, double tol = 1e-9) {
  if (!(t_rat >= 0.0))
    throw std::invalid_argument("optimize_with_overhead: requires t_rat >= 0");
  auto objective = [t_rat](double ell, double sigma2) {
    return sar_efficiency_with_overhead(ell, sigma2, t_rat);
  };
  OptimumReport r = detail::coordinate_descent_2d(objective, 2.562, 3.283, tol);
  r.alpha_at_opt =
      limiting_acceptance(r.ell_opt, NoiseModel::gaussian(r.sigma2_opt)).value;
  return r;
}

/// Joint optimum of sigma^2 * ESJD(lambda, d) for the exact d-dimensional
/// Gaussian target, reported in the ell = lambda sqrt(d) parametrization.
inline OptimumReport optimize_finite_d(std::size_t d, double tol = 1e-7) {
  if (d < 1) throw std::invalid_argument("optimize_finite_d: requires d >= 1");
  const double sqrt_d = std::sqrt(static_cast<double>(d));
  auto objective = [d, sqrt_d](double ell, double sigma2) {
    return sigma2 * finite_d_gaussian(ell / sqrt_d, d, sigma2).esjd;
  };
  OptimumReport r = detail::coordinate_descent_2d(objective, 2.59, 3.23, tol);
  r.alpha_at_opt = finite_d_gaussian(r.ell_opt / sqrt_d, d, r.sigma2_opt).acceptance;
  return r;
}

}  // namespace psmrwm
