#pragma once

// Derivative-free 1-D minimization (golden section with a parabolic polish)
// and a bracketing root finder (Brent).  Both assume the caller supplies a
// valid bracket; these are building blocks, not global optimizers.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>

namespace psmrwm {

struct MinimizeResult {
  double x;
  double fx;
  std::size_t iterations;
  bool converged;
};

/// Minimize a unimodal f on [a, b] to an x-tolerance.  After the golden
/// bracket collapses, one parabolic interpolation through the final three
/// points sharpens the last digits.
template <class F>
MinimizeResult golden_section_minimize(F&& f, double a, double b, double x_tol = 1e-10,
                                       std::size_t max_iter = 300) {
  if (!(b > a)) throw std::invalid_argument("golden_section_minimize: empty bracket");
  constexpr double inv_phi = 0.6180339887498948482;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  std::size_t it = 0;
  while (b - a > x_tol && it < max_iter) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
    ++it;
  }
  double x = (f1 < f2) ? x1 : x2;
  double fx = std::min(f1, f2);
  // Parabola through (a, m, b) with m the best interior point.
  const double m = x;
  const double fa = f(a), fb = f(b);
  const double denom = (m - a) * (fx - fb) - (m - b) * (fx - fa);
  if (denom != 0.0) {
    const double cand =
        m - 0.5 * ((m - a) * (m - a) * (fx - fb) - (m - b) * (m - b) * (fx - fa)) / denom;
    if (cand > a && cand < b) {
      const double fc = f(cand);
      if (fc < fx) {
        x = cand;
        fx = fc;
      }
    }
  }
  return {x, fx, it, b - a <= x_tol};
}

/// Brent's method for a root of f in [a, b]; requires a sign change.
template <class F>
double brent_root(F&& f, double a, double b, double x_tol = 1e-13,
                  std::size_t max_iter = 200) {
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0.0) == (fb > 0.0))
    throw std::invalid_argument("brent_root: endpoints do not bracket a sign change");
  double c = a, fc = fa;
  double d = b - a, e = d;
  for (std::size_t it = 0; it < max_iter; ++it) {
    if (std::fabs(fc) < std::fabs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol = 2.0 * std::numeric_limits<double>::epsilon() * std::fabs(b) + 0.5 * x_tol;
    const double mid = 0.5 * (c - b);
    if (std::fabs(mid) <= tol || fb == 0.0) return b;
    if (std::fabs(e) >= tol && std::fabs(fa) > std::fabs(fb)) {
      // Secant / inverse quadratic step.
      const double s = fb / fa;
      double p, q;
      if (a == c) {
        p = 2.0 * mid * s;
        q = 1.0 - s;
      } else {
        const double qa = fa / fc, r = fb / fc;
        p = s * (2.0 * mid * qa * (qa - r) - (b - a) * (r - 1.0));
        q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::fabs(p);
      if (2.0 * p < std::min(3.0 * mid * q - std::fabs(tol * q), std::fabs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = mid;
        e = d;
      }
    } else {
      d = mid;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::fabs(d) > tol) ? d : (mid > 0.0 ? tol : -tol);
    fb = f(b);
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = b - a;
      e = d;
    }
  }
  throw std::runtime_error("brent_root: iteration cap reached");
}

}  // namespace psmrwm
