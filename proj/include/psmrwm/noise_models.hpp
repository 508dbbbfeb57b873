#pragma once

// Noise models for the estimated log-target.
//
// W* is the additive noise in log pi-hat at a proposed point, distributed as
// g*.  At stationarity the retained noise W follows the exponentially tilted
// density e^w g*(w), and B = W* - W (independent draws) drives the perturbed
// acceptance ratio.  Every variant is normalized so E[e^{W*}] = 1:
//   none      W* == 0
//   gaussian  W* ~ N(-sigma^2/2, sigma^2)
//   laplace   W* ~ Laplace(log(1 - sigma^2/2), sigma/sqrt(2)), sigma^2 < 2
//   empirical recentred draws, resampled with weights e^w for the tilt

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "psmrwm/math/normal.hpp"
#include "psmrwm/math/stats.hpp"
#include "psmrwm/rng.hpp"

namespace psmrwm {

enum class NoiseKind { none, gaussian, laplace, empirical };

inline std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::none: return "none";
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::laplace: return "laplace";
    case NoiseKind::empirical: return "empirical";
  }
  return "?";
}

class NoiseModel {
 public:
  static NoiseModel none() { return NoiseModel(NoiseKind::none, 0.0); }

  static NoiseModel gaussian(double sigma2) {
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2))
      throw std::invalid_argument("NoiseModel: gaussian requires sigma2 >= 0");
    return NoiseModel(NoiseKind::gaussian, sigma2);
  }

  static NoiseModel laplace(double sigma2) {
    if (!(sigma2 > 0.0) || !(sigma2 < 2.0))
      throw std::invalid_argument(
          "NoiseModel: laplace requires 0 < sigma2 < 2 (location log(1 - sigma2/2) "
          "undefined otherwise)");
    return NoiseModel(NoiseKind::laplace, sigma2);
  }

  /// Builds the empirical model from raw w* draws; recentres once so the
  /// sample mean of e^{w*} is exactly 1.
  static NoiseModel empirical(std::vector<double> raw_samples, std::string source_path = {}) {
    if (raw_samples.empty())
      throw std::invalid_argument("NoiseModel: empirical requires at least one sample");
    for (double w : raw_samples)
      if (!std::isfinite(w))
        throw std::invalid_argument("NoiseModel: empirical samples must be finite");
    NoiseModel m(NoiseKind::empirical, 0.0);
    m.raw_samples_ = std::move(raw_samples);
    m.recentre_shift_ = log_mean_exp(m.raw_samples_);
    m.samples_ = m.raw_samples_;
    for (double& w : m.samples_) w -= m.recentre_shift_;
    m.sigma2_ = m.samples_.size() > 1 ? variance(m.samples_) : 0.0;
    m.source_path_ = std::move(source_path);
    // Tilted resampling weights e^{w_i}, as a cumulative table.
    m.tilt_cdf_.resize(m.samples_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < m.samples_.size(); ++i) {
      acc += std::exp(m.samples_[i]);
      m.tilt_cdf_[i] = acc;
    }
    for (double& c : m.tilt_cdf_) c /= acc;
    m.tilt_cdf_.back() = 1.0;
    return m;
  }

  NoiseKind kind() const { return kind_; }

  /// Noise variance parameter; for the empirical variant this is the sample
  /// variance of the recentred draws (descriptive, not a model parameter).
  double sigma2() const { return sigma2_; }

  bool has_closed_form() const {
    return kind_ == NoiseKind::none || kind_ == NoiseKind::gaussian;
  }

  const std::vector<double>& samples() const { return samples_; }
  const std::vector<double>& raw_samples() const { return raw_samples_; }
  double recentre_shift() const { return recentre_shift_; }

  /// Laplace location log(1 - sigma^2/2) and scale sigma/sqrt(2).
  double laplace_location() const { return std::log(1.0 - 0.5 * sigma2_); }
  double laplace_scale() const { return std::sqrt(0.5 * sigma2_); }

  static NoiseModel from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "none") return none();
    if (kind == "gaussian") return gaussian(j.at("sigma2").get<double>());
    if (kind == "laplace") return laplace(j.at("sigma2").get<double>());
    if (kind == "empirical") {
      const std::string path = j.at("samples_path").get<std::string>();
      return empirical(load_samples_csv(path), path);
    }
    throw std::invalid_argument("NoiseModel: unknown kind '" + kind + "'");
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["kind"] = to_string(kind_);
    j["sigma2"] = sigma2_;
    if (kind_ == NoiseKind::empirical) {
      if (source_path_.empty())
        throw std::logic_error(
            "NoiseModel: empirical model built in memory has no samples_path to serialize");
      j["samples_path"] = source_path_;
    }
    return j;
  }

  /// One w* value per line; '#' lines and an optional non-numeric header
  /// are skipped.
  static std::vector<double> load_samples_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("NoiseModel: cannot open samples file " + path);
    std::vector<double> xs;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      try {
        std::size_t pos = 0;
        const double v = std::stod(line, &pos);
        xs.push_back(v);
      } catch (const std::exception&) {
        if (xs.empty()) continue;  // header row
        throw std::runtime_error("NoiseModel: malformed line in " + path + ": " + line);
      }
    }
    if (xs.empty()) throw std::runtime_error("NoiseModel: no samples in " + path);
    return xs;
  }

  // Used by the samplers below.
  const std::vector<double>& tilt_cdf() const { return tilt_cdf_; }

 private:
  NoiseModel(NoiseKind kind, double sigma2) : kind_(kind), sigma2_(sigma2) {}

  NoiseKind kind_;
  double sigma2_;
  std::vector<double> raw_samples_;
  std::vector<double> samples_;
  std::vector<double> tilt_cdf_;
  double recentre_shift_ = 0.0;
  std::string source_path_;
};

struct NoiseDifferenceSample {
  double b;
  double w_star;
  double w;
};

namespace detail {

inline double sample_laplace(double location, double scale, RngStream& rng) {
  const double u = rng.uniform() - 0.5;
  return location - scale * std::copysign(std::log1p(-2.0 * std::fabs(u)), u);
}

// Inverse CDF of the tilted Laplace density h(w) proportional to
// e^w Laplace(w; mu, b) with b < 1.  Both branches stay exponential:
// normalizing yields P(W <= mu) = (1 - b)/2, and rates 1/b + 1 (left),
// 1/b - 1 (right).
inline double sample_tilted_laplace(double location, double scale, RngStream& rng) {
  const double b = scale;
  const double p_left = 0.5 * (1.0 - b);
  const double u = rng.uniform();
  if (u <= p_left) return location + std::log(u / p_left) / (1.0 / b + 1.0);
  return location - std::log1p(-(u - p_left) / (0.5 * (1.0 + b))) / (1.0 / b - 1.0);
}

inline double sample_empirical_tilted(const NoiseModel& model, RngStream& rng) {
  const auto& cdf = model.tilt_cdf();
  const double u = rng.uniform();
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
  const std::size_t idx = static_cast<std::size_t>(it - cdf.begin());
  return model.samples()[std::min(idx, cdf.size() - 1)];
}

}  // namespace detail

/// n iid draws of W* ~ g*.
inline std::vector<double> sample_proposal_noise(const NoiseModel& model, RngStream& rng,
                                                 std::size_t n) {
  if (n == 0) throw std::invalid_argument("sample_proposal_noise: n must be >= 1");
  std::vector<double> out(n);
  switch (model.kind()) {
    case NoiseKind::none:
      std::fill(out.begin(), out.end(), 0.0);
      break;
    case NoiseKind::gaussian: {
      const double sd = std::sqrt(model.sigma2());
      const double mu = -0.5 * model.sigma2();
      for (double& w : out) w = mu + sd * rng.normal();
      break;
    }
    case NoiseKind::laplace: {
      const double mu = model.laplace_location(), b = model.laplace_scale();
      for (double& w : out) w = detail::sample_laplace(mu, b, rng);
      break;
    }
    case NoiseKind::empirical: {
      const auto& xs = model.samples();
      for (double& w : out) w = xs[rng.uniform_int(xs.size())];
      break;
    }
  }
  return out;
}

/// n iid draws of W from the stationary (exponentially tilted) law e^w g*(w).
inline std::vector<double> sample_stationary_noise(const NoiseModel& model, RngStream& rng,
                                                   std::size_t n) {
  if (n == 0) throw std::invalid_argument("sample_stationary_noise: n must be >= 1");
  std::vector<double> out(n);
  switch (model.kind()) {
    case NoiseKind::none:
      std::fill(out.begin(), out.end(), 0.0);
      break;
    case NoiseKind::gaussian: {
      // Tilting a N(-s/2, s) by e^w shifts the mean to +s/2.
      const double sd = std::sqrt(model.sigma2());
      const double mu = 0.5 * model.sigma2();
      for (double& w : out) w = mu + sd * rng.normal();
      break;
    }
    case NoiseKind::laplace: {
      const double mu = model.laplace_location(), b = model.laplace_scale();
      for (double& w : out) w = detail::sample_tilted_laplace(mu, b, rng);
      break;
    }
    case NoiseKind::empirical:
      for (double& w : out) w = detail::sample_empirical_tilted(model, rng);
      break;
  }
  return out;
}

/// n iid draws of (w*, w, b = w* - w) with W* and W independent.
inline std::vector<NoiseDifferenceSample> sample_noise_difference(const NoiseModel& model,
                                                                  RngStream& rng,
                                                                  std::size_t n) {
  const std::vector<double> w_star = sample_proposal_noise(model, rng, n);
  const std::vector<double> w = sample_stationary_noise(model, rng, n);
  std::vector<NoiseDifferenceSample> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {w_star[i] - w[i], w_star[i], w[i]};
  return out;
}

/// Both sides of the detailed-balance-like identity rho(b) = e^{-b} rho(-b)
/// for the density of B.  Closed form exists for gaussian (B ~ N(-s, 2s))
/// and trivially for none (degenerate at 0).
inline std::pair<double, double> b_density_ratio_check(const NoiseModel& model, double b) {
  auto gaussian_b_pdf = [&](double x) {
    const double s = model.sigma2();
    const double sd = std::sqrt(2.0 * s);
    return normal_pdf((x + s) / sd) / sd;
  };
  switch (model.kind()) {
    case NoiseKind::gaussian:
      if (model.sigma2() == 0.0) return {b == 0.0 ? 1.0 : 0.0, b == 0.0 ? 1.0 : 0.0};
      return {gaussian_b_pdf(b), std::exp(-b) * gaussian_b_pdf(-b)};
    case NoiseKind::none:
      return {b == 0.0 ? 1.0 : 0.0, b == 0.0 ? 1.0 : 0.0};
    default:
      throw std::invalid_argument(
          "b_density_ratio_check: closed-form B density available only for gaussian/none");
  }
}

}  // namespace psmrwm
