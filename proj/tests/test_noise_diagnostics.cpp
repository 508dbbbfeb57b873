#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "psmrwm/math/normal.hpp"
#include "psmrwm/math/stats.hpp"
#include "psmrwm/noise_diagnostics.hpp"
#include "psmrwm/psm_sampler.hpp"
#include "psmrwm/rng.hpp"

using namespace psmrwm;
using Catch::Approx;

namespace {

// Position-independent Gaussian log-noise around a constant target: draws
// are -sigma^2/2 + sigma Z, so the density-domain mean is one.
LogTargetEstimator noisy_constant_estimator(std::size_t d, double sigma2) {
  LogTargetEstimator est;
  est.dimension = d;
  const double sd = std::sqrt(sigma2);
  est.evaluate = [sigma2, sd](std::span<const double>, RngStream& rng) -> Evaluation {
    return {-0.5 * sigma2 + sd * rng.normal(), 1.0};
  };
  return est;
}

NoiseSample sample_from_raw(const std::vector<double>& raw, std::size_t m = 0) {
  NoiseSample s;
  s.recentre_shift = log_mean_exp(raw);
  s.w_star_draws = recentre_log_noise(raw);
  s.m = m;
  return s;
}

std::vector<double> gaussian_noise(double sigma2, std::size_t n, RngStream& rng) {
  std::vector<double> w(n);
  const double sd = std::sqrt(sigma2);
  for (double& v : w) v = -0.5 * sigma2 + sd * rng.normal();
  return w;
}

}  // namespace

TEST_CASE("recentring pins the density-domain mean at one") {
  RngStream rng(6100);
  std::vector<double> raw(500);
  for (double& v : raw) v = 0.7 + 1.3 * rng.normal();

  const std::vector<double> centred = recentre_log_noise(raw);
  double s = 0.0;
  for (double w : centred) s += std::exp(w);
  REQUIRE(s / static_cast<double>(centred.size()) == Approx(1.0).margin(1e-12));

  // Recentring already-centred draws is a no-op up to rounding.
  const std::vector<double> twice = recentre_log_noise(centred);
  for (std::size_t i = 0; i < centred.size(); ++i)
    REQUIRE(twice[i] == Approx(centred[i]).margin(1e-12));

  REQUIRE_THROWS_AS(recentre_log_noise(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("collected noise reflects the estimator that produced it") {
  const double sigma2 = 1.0;
  const LogTargetEstimator est = noisy_constant_estimator(2, sigma2);
  const std::vector<double> anchor{0.1, -0.3};
  RngStream rng(6200);

  const std::size_t n = 20000;
  const NoiseSample sample = collect_noise_sample(est, anchor, -1.25, n, rng, 64);
  REQUIRE(sample.w_star_draws.size() == n);
  REQUIRE(sample.m == 64);
  REQUIRE(sample.anchor_point == anchor);
  REQUIRE(sample.exact_log_target.has_value());
  REQUIRE(*sample.exact_log_target == Approx(-1.25).margin(0.0));

  double s = 0.0;
  for (double w : sample.w_star_draws) s += std::exp(w);
  REQUIRE(s / static_cast<double>(n) == Approx(1.0).margin(1e-12));

  // Sample variance of the recentred draws estimates sigma^2; the chi-square
  // standard error is sigma^2 sqrt(2/(n-1)).
  const double var = variance(sample.w_star_draws);
  REQUIRE(std::fabs(var - sigma2) <=
          4.0 * sigma2 * std::sqrt(2.0 / static_cast<double>(n - 1)));

  // The raw draws already average to one in the density domain, so the
  // recentring shift is a small-sample fluctuation around zero.
  const double shift_se = std::sqrt((std::exp(sigma2) - 1.0) / static_cast<double>(n));
  REQUIRE(std::fabs(sample.recentre_shift) <= 4.0 * shift_se);

  RngStream err_rng(6201);
  REQUIRE_THROWS_AS(collect_noise_sample(est, anchor, {}, 99, err_rng),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(collect_noise_sample(est, std::vector<double>{0.0}, {}, 200, err_rng),
                    std::invalid_argument);

  LogTargetEstimator broken = est;
  broken.evaluate = [](std::span<const double>, RngStream&) -> Evaluation {
    return {-std::numeric_limits<double>::infinity(), 1.0};
  };
  REQUIRE_THROWS_AS(collect_noise_sample(broken, anchor, {}, 200, err_rng),
                    std::runtime_error);
}

TEST_CASE("variance regression identifies noise that scales like one over m") {
  RngStream rng(6300);
  const double c = 4.0;
  std::vector<NoiseSample> scaled, flat;
  for (std::size_t m : {25, 50, 100, 200, 400}) {
    scaled.push_back(
        sample_from_raw(gaussian_noise(c / static_cast<double>(m), 4000, rng), m));
    flat.push_back(sample_from_raw(gaussian_noise(0.8, 4000, rng), m));
  }

  const OlsFit inverse_fit = variance_vs_m_slope(scaled);
  INFO("slope=" << inverse_fit.slope);
  REQUIRE(inverse_fit.slope == Approx(-1.0).margin(0.1));
  // Intercept recovers log c for sigma^2 = c/m noise.
  REQUIRE(inverse_fit.intercept == Approx(std::log(c)).margin(0.15));

  const OlsFit flat_fit = variance_vs_m_slope(flat);
  REQUIRE(flat_fit.slope == Approx(0.0).margin(0.05));

  auto unlabeled = scaled;
  unlabeled[2].m = 0;
  REQUIRE_THROWS_AS(variance_vs_m_slope(unlabeled), std::invalid_argument);

  std::vector<NoiseSample> two_distinct{scaled[0], scaled[1], scaled[1]};
  REQUIRE_THROWS_AS(variance_vs_m_slope(two_distinct), std::invalid_argument);
}

TEST_CASE("MGF ratio estimator recovers the exact-likelihood MGF") {
  // Synthetic stationary draws: exact log-likelihood L ~ N(0, s2) plus
  // noise carried by the chain, which is the tilted version of the
  // proposal-time noise (Gaussian tilts to mean +sigma^2/2).  The ratio
  // curve M2 divides out the noise factor and should land on
  // E[exp(t L)] = exp(t^2 s2 / 2).
  const double s2 = 0.25;
  const double sigma2 = 1.0;
  const double sd = std::sqrt(sigma2);
  RngStream rng(6400);

  const std::size_t n = 1000000;
  std::vector<double> l_hat(n);
  for (double& v : l_hat)
    v = std::sqrt(s2) * rng.normal() + (0.5 * sigma2 + sd * rng.normal());
  const NoiseSample noise = sample_from_raw(gaussian_noise(sigma2, n, rng));

  std::vector<double> t_grid;
  for (double t = -0.5; t <= 0.5001; t += 0.125) t_grid.push_back(t);
  const MGFCurves curves = mgf_curves(l_hat, noise, t_grid);
  REQUIRE(curves.t_grid == t_grid);
  REQUIRE(curves.shift == 0.0);

  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    const double t = t_grid[j];
    const double target = std::exp(0.5 * t * t * s2);
    INFO("t=" << t << " m2=" << curves.m2[j] << " target=" << target);
    REQUIRE(curves.m2[j] == Approx(target).epsilon(0.02));
  }

  // t = 0 is exact by construction: both averages are means of ones.
  const std::size_t zero_idx = 4;
  REQUIRE(t_grid[zero_idx] == 0.0);
  REQUIRE(curves.m1[zero_idx] == 1.0);
  REQUIRE(curves.m2[zero_idx] == Approx(1.0).margin(1e-10));

  // A shift moves M1 by exp(t shift) and M2 with it.
  const MGFCurves shifted = mgf_curves(l_hat, noise, t_grid, 2.0);
  for (std::size_t j = 0; j < t_grid.size(); ++j)
    REQUIRE(shifted.m1[j] ==
            Approx(curves.m1[j] * std::exp(2.0 * t_grid[j])).epsilon(1e-12));

  REQUIRE_THROWS_AS(mgf_curves(std::vector<double>{}, noise, t_grid),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(mgf_curves(l_hat, noise, std::vector<double>{}),
                    std::invalid_argument);
}

TEST_CASE("MGF estimation error shrinks with the sample size") {
  const double s2 = 0.25;
  const double sigma2 = 1.0;
  const double sd = std::sqrt(sigma2);
  RngStream rng(6500);

  std::vector<double> t_grid{-0.5, -0.25, 0.25, 0.5};
  auto max_error = [&](std::size_t n) {
    std::vector<double> l_hat(n);
    for (double& v : l_hat)
      v = std::sqrt(s2) * rng.normal() + (0.5 * sigma2 + sd * rng.normal());
    const NoiseSample noise = sample_from_raw(gaussian_noise(sigma2, n, rng));
    const MGFCurves curves = mgf_curves(l_hat, noise, t_grid);
    double err = 0.0;
    for (std::size_t j = 0; j < t_grid.size(); ++j)
      err = std::max(err, std::fabs(curves.m2[j] - std::exp(0.5 * t_grid[j] * t_grid[j] * s2)));
    return err;
  };

  const double err_small = max_error(10000);
  const double err_large = max_error(1000000);
  INFO("err(1e4)=" << err_small << " err(1e6)=" << err_large);
  REQUIRE(err_large < err_small);
  REQUIRE(err_large < 0.01);
}

TEST_CASE("M2 curve is invariant to the noise level behind the estimates") {
  const double s2 = 0.25;
  RngStream rng(6600);
  const std::vector<double> t_grid{-0.5, -0.25, 0.0, 0.25, 0.5};
  const std::size_t n = 30000;

  struct Curve {
    std::vector<double> m2;
    std::vector<double> se;
  };
  auto curve_for = [&](double sigma2) {
    const double sd = std::sqrt(sigma2);
    std::vector<double> l_hat(n);
    for (double& v : l_hat)
      v = std::sqrt(s2) * rng.normal() + (0.5 * sigma2 + sd * rng.normal());
    const NoiseSample noise = sample_from_raw(gaussian_noise(sigma2, n, rng));
    const MGFCurves curves = mgf_curves(l_hat, noise, t_grid);
    RngStream boot_rng(rng.substream(977).seed());
    const MGFBands bands = mgf_m2_bootstrap_bands(l_hat, noise, t_grid, 0.0, boot_rng, 100);
    return Curve{curves.m2, bands.std_error};
  };

  const Curve low = curve_for(1.0);
  const Curve high = curve_for(2.5);
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    const double se =
        std::sqrt(low.se[j] * low.se[j] + high.se[j] * high.se[j]);
    INFO("t=" << t_grid[j] << " low=" << low.m2[j] << " high=" << high.m2[j]
              << " comb se=" << se);
    REQUIRE(std::fabs(low.m2[j] - high.m2[j]) <= 4.0 * std::max(se, 1e-12));
  }
}

TEST_CASE("bootstrap bands bracket the point estimate") {
  const double sigma2 = 1.0;
  RngStream rng(6700);
  const std::size_t n = 5000;
  std::vector<double> l_hat(n);
  const double sd = std::sqrt(sigma2);
  for (double& v : l_hat) v = 0.5 * sigma2 + sd * rng.normal();
  const NoiseSample noise = sample_from_raw(gaussian_noise(sigma2, n, rng));

  const std::vector<double> t_grid{-0.5, 0.0, 0.5};
  const MGFCurves curves = mgf_curves(l_hat, noise, t_grid);
  RngStream boot_a(6701), boot_b(6701);
  const MGFBands bands = mgf_m2_bootstrap_bands(l_hat, noise, t_grid, 0.0, boot_a, 200);
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    REQUIRE(bands.lo[j] < bands.hi[j]);
    REQUIRE(bands.std_error[j] > 0.0);
    REQUIRE(curves.m2[j] >= bands.lo[j] - 4.0 * bands.std_error[j]);
    REQUIRE(curves.m2[j] <= bands.hi[j] + 4.0 * bands.std_error[j]);
  }

  // Same stream, same bands.
  const MGFBands again = mgf_m2_bootstrap_bands(l_hat, noise, t_grid, 0.0, boot_b, 200);
  REQUIRE(bands.lo == again.lo);
  REQUIRE(bands.hi == again.hi);

  RngStream boot_c(6702);
  REQUIRE_THROWS_AS(mgf_m2_bootstrap_bands(l_hat, noise, t_grid, 0.0, boot_c, 19),
                    std::invalid_argument);
}

TEST_CASE("overflow reporting names the offending expansion point") {
  NoiseSample noise = sample_from_raw({0.1, -0.1, 0.05, -0.05});
  const std::vector<double> t_grid{0.0, 1.0};

  try {
    mgf_curves(std::vector<double>{1e4, 1e4}, noise, t_grid);
    FAIL("expected MgfOverflowError");
  } catch (const MgfOverflowError& e) {
    REQUIRE(e.t == 1.0);
    REQUIRE(std::string(e.what()).find("M1 numerator") != std::string::npos);
  }

  // exp(500) is still finite, so the t = 0 column survives and the failure
  // is pinned to t = 1 where the exponent doubles.
  NoiseSample huge;
  huge.w_star_draws = {500.0, -500.0};
  try {
    mgf_curves(std::vector<double>{0.0, 0.0}, huge, t_grid);
    FAIL("expected MgfOverflowError");
  } catch (const MgfOverflowError& e) {
    REQUIRE(e.t == 1.0);
    REQUIRE(std::string(e.what()).find("M2 denominator") != std::string::npos);
  }
}

TEST_CASE("default MGF grid spans minus one to one") {
  const std::vector<double> t = default_mgf_t_grid();
  REQUIRE(t.size() == 21);
  REQUIRE(t.front() == Approx(-1.0).margin(0.0));
  REQUIRE(t.back() == Approx(1.0).margin(1e-15));
  REQUIRE(t[10] == Approx(0.0).margin(1e-15));
  for (std::size_t i = 1; i < t.size(); ++i) REQUIRE(t[i] > t[i - 1]);
}

TEST_CASE("QQ data standardizes the sample against normal plotting positions") {
  RngStream rng(6800);
  const std::size_t n = 5000;

  const NoiseSample gaussian = sample_from_raw(gaussian_noise(1.0, n, rng));
  const auto pairs = qq_against_gaussian(gaussian);
  REQUIRE(pairs.size() == n);
  REQUIRE(pairs.front().first ==
          Approx(normal_quantile(0.5 / static_cast<double>(n))).margin(1e-12));

  std::vector<double> emp(n);
  for (std::size_t i = 0; i < n; ++i) {
    emp[i] = pairs[i].second;
    if (i > 0) {
      REQUIRE(pairs[i].first > pairs[i - 1].first);
      REQUIRE(pairs[i].second >= pairs[i - 1].second);
    }
  }
  REQUIRE(mean(emp) == Approx(0.0).margin(1e-10));
  REQUIRE(variance(emp) == Approx(1.0).margin(1e-3));

  // For a genuinely Gaussian sample the central quantiles hug the diagonal.
  double central_dev = 0.0;
  for (const auto& [q_theory, q_emp] : pairs)
    if (std::fabs(q_theory) < 1.65) central_dev = std::max(central_dev, std::fabs(q_emp - q_theory));
  REQUIRE(central_dev < 0.12);

  // A right-skewed sample bends both ends of the plot upward: short left
  // tail, long right tail.
  std::vector<double> skewed(n);
  for (double& v : skewed) v = rng.exponential(1.0) - 1.0;
  const auto skew_pairs = qq_against_gaussian(sample_from_raw(skewed));
  REQUIRE(skew_pairs.front().second > skew_pairs.front().first + 0.5);
  REQUIRE(skew_pairs.back().second > skew_pairs.back().first + 0.5);

  NoiseSample tiny;
  tiny.w_star_draws.assign(99, 0.0);
  REQUIRE_THROWS_AS(qq_against_gaussian(tiny), std::invalid_argument);
}
