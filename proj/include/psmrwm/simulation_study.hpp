#pragma once

// Orchestration for the two batch experiments.
//
// theory_grid sweeps the limiting quantities over an (ell, sigma^2) grid
// per noise family.  run_simulation_study drives the PMRWM sampler over a
// grid of particle counts m and proposal-scale multipliers gamma with
// proposal covariance gamma^2 (2.56^2/d) VarHat, collects per-cell
// acceptance/ESJD/ESS-per-cost, and per-m noise samples from gamma = 0
// runs (the chain pinned at the anchor).  Cells execute on a small worker
// pool; every cell owns the RNG substream indexed by its grid position, so
// results are independent of scheduling, and the report is assembled in
// index order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "psmrwm/limit_theory.hpp"
#include "psmrwm/noise_diagnostics.hpp"
#include "psmrwm/noise_models.hpp"
#include "psmrwm/psm_sampler.hpp"
#include "psmrwm/rng.hpp"

namespace psmrwm {

// ---------------------------------------------------------------------------
// Theory grid

struct TheoryGridConfig {
  std::vector<double> ell_values;
  std::vector<double> sigma2_values;
  std::vector<NoiseKind> families = {NoiseKind::gaussian, NoiseKind::laplace};
  std::size_t mc_budget = 1'000'000;  // for families without closed forms
  double roughness_i = 1.0;
};

struct TheoryGridRow {
  NoiseKind family;
  double ell = 0.0;
  double sigma2 = 0.0;
  double alpha = 0.0;
  double esjd = 0.0;
  double j_rel = 0.0;
  double eff = 0.0;
  bool skipped = false;
  std::string note;
};

/// Sweeps the limiting quantities; invalid grid points (laplace sigma^2 >= 2)
/// become skipped rows carrying a warning note instead of failing the sweep.
inline std::vector<TheoryGridRow> theory_grid(const TheoryGridConfig& config,
                                              RngStream& rng) {
  if (config.ell_values.empty() || config.sigma2_values.empty())
    throw std::invalid_argument("theory_grid: empty grid");
  std::vector<TheoryGridRow> rows;
  rows.reserve(config.families.size() * config.sigma2_values.size() *
               config.ell_values.size());
  std::size_t cell = 0;
  for (NoiseKind family : config.families) {
    for (double sigma2 : config.sigma2_values) {
      for (double ell : config.ell_values) {
        TheoryGridRow row;
        row.family = family;
        row.ell = ell;
        row.sigma2 = sigma2;
        RngStream cell_rng = rng.substream(cell++);
        try {
          NoiseModel noise = [&] {
            // sigma^2 = 0 is the no-noise row for every family.
            if (sigma2 == 0.0) return NoiseModel::none();
            switch (family) {
              case NoiseKind::none: return NoiseModel::none();
              case NoiseKind::gaussian: return NoiseModel::gaussian(sigma2);
              case NoiseKind::laplace: return NoiseModel::laplace(sigma2);
              default:
                throw std::invalid_argument(
                    "theory_grid: empirical noise needs explicit samples, not a grid");
            }
          }();
          const LimitReport report =
              limit_report({ell, sigma2, noise}, config.roughness_i, config.mc_budget,
                           cell_rng);
          row.alpha = report.alpha;
          row.esjd = report.esjd;
          row.j_rel = report.j_rel;
          row.eff = report.eff;
        } catch (const std::invalid_argument& e) {
          row.skipped = true;
          row.note = e.what();
        }
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Simulation study

/// Produces the log-target estimator for a given particle count (or, for
/// synthetic surrogates, the noise level implied by it).
struct StudyEstimatorFactory {
  std::size_t dimension;
  std::function<LogTargetEstimator(std::size_t m)> make;
};

struct SimulationStudyConfig {
  std::vector<std::size_t> m_grid;
  std::vector<double> gamma_grid;
  std::size_t iterations = 20'000;
  // Per-m iteration overrides: cells with cheap estimators can afford longer
  // runs without dominating the total budget.
  std::vector<std::pair<std::size_t, std::size_t>> iterations_by_m;
  std::size_t thin = 10;
  std::vector<double> theta0;     // chain start and noise-sample anchor
  std::vector<double> pilot_var;  // row-major d x d VarHat; empty -> identity
  std::size_t noise_sample_size = 500;
  std::size_t threads = 1;

  std::size_t iterations_for(std::size_t m) const {
    for (const auto& [mm, it] : iterations_by_m)
      if (mm == m) return it;
    return iterations;
  }

  void validate(std::size_t dimension) const {
    if (m_grid.empty() || gamma_grid.empty())
      throw std::invalid_argument("SimulationStudyConfig: empty m or gamma grid");
    for (double g : gamma_grid)
      if (!(g > 0.0))
        throw std::invalid_argument("SimulationStudyConfig: gamma values must be > 0");
    if (iterations < 100)
      throw std::invalid_argument("SimulationStudyConfig: iterations too small");
    if (theta0.size() != dimension)
      throw std::invalid_argument("SimulationStudyConfig: theta0 dimension mismatch");
    if (!pilot_var.empty() && pilot_var.size() != dimension * dimension)
      throw std::invalid_argument("SimulationStudyConfig: pilot_var must be d x d");
  }
};

struct StudyCellResult {
  std::size_t m = 0;
  double gamma = 0.0;
  double acceptance = 0.0;
  double esjd = 0.0;
  double min_ess = 0.0;
  double total_cost = 0.0;
  double ess_per_cost = 0.0;
};

struct StudyReport {
  std::vector<StudyCellResult> cells;       // index order: m-major, gamma-minor
  std::vector<NoiseSample> noise_samples;   // one per m (gamma = 0 runs)
  std::vector<double> sigma2_hat_per_m;     // variance of each noise sample
  std::optional<OlsFit> variance_slope;     // log Var(W*) vs log m (>= 3 m values)
  bool identity_proposal_fallback = false;  // no pilot VarHat supplied
};

namespace detail {

/// Dense lower-triangular Cholesky factor of a row-major SPD matrix.
inline std::vector<double> cholesky_lower(std::span<const double> a, std::size_t d) {
  std::vector<double> l(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * d + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * d + k] * l[j * d + k];
      if (i == j) {
        if (!(s > 0.0))
          throw std::invalid_argument("cholesky_lower: matrix is not positive definite");
        l[i * d + i] = std::sqrt(s);
      } else {
        l[i * d + j] = s / l[j * d + j];
      }
    }
  }
  return l;
}

template <class Work>
void run_indexed_parallel(std::size_t n_tasks, std::size_t threads, Work&& work) {
  threads = std::max<std::size_t>(1, std::min(threads, n_tasks));
  if (threads == 1) {
    for (std::size_t i = 0; i < n_tasks; ++i) work(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n_tasks; i += threads) work(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace detail

/// Runs the full (m, gamma) grid plus per-m gamma = 0 noise collection.
/// Substream layout: cell (mi, gi) uses substream(mi * |gamma| + gi); noise
/// run for m index mi uses substream(|cells| + mi).
inline StudyReport run_simulation_study(const SimulationStudyConfig& config,
                                        const StudyEstimatorFactory& factory,
                                        RngStream& rng) {
  config.validate(factory.dimension);
  const std::size_t d = factory.dimension;
  const std::size_t n_gamma = config.gamma_grid.size();
  const std::size_t n_cells = config.m_grid.size() * n_gamma;

  StudyReport report;
  report.identity_proposal_fallback = config.pilot_var.empty();
  std::vector<double> root;
  if (!config.pilot_var.empty())
    root = detail::cholesky_lower(config.pilot_var, d);

  report.cells.resize(n_cells);
  auto run_cell = [&](std::size_t index) {
    const std::size_t mi = index / n_gamma;
    const std::size_t gi = index % n_gamma;
    const std::size_t m = config.m_grid[mi];
    const double gamma = config.gamma_grid[gi];
    const double lambda = gamma * 2.56 / std::sqrt(static_cast<double>(d));
    const LogTargetEstimator estimator = factory.make(m);
    const ProposalSpec proposal =
        root.empty() ? ProposalSpec(lambda, d) : ProposalSpec(lambda, d, root);
    RngStream cell_rng = rng.substream(index);
    const RunStatistics stats =
        run_chain(config.theta0, estimator, proposal, config.iterations_for(m), {},
                  cell_rng, /*record=*/true, config.thin);
    StudyCellResult& cell = report.cells[index];
    cell.m = m;
    cell.gamma = gamma;
    cell.acceptance = stats.acceptance_rate;
    cell.esjd = stats.esjd;
    cell.min_ess = stats.ess_per_coordinate.empty()
                       ? 0.0
                       : *std::min_element(stats.ess_per_coordinate.begin(),
                                           stats.ess_per_coordinate.end());
    cell.total_cost = stats.total_cost;
    cell.ess_per_cost = cell.total_cost > 0.0 ? cell.min_ess / cell.total_cost : 0.0;
  };
  detail::run_indexed_parallel(n_cells, config.threads, run_cell);

  report.noise_samples.resize(config.m_grid.size());
  auto run_noise = [&](std::size_t mi) {
    const LogTargetEstimator estimator = factory.make(config.m_grid[mi]);
    RngStream noise_rng = rng.substream(n_cells + mi);
    report.noise_samples[mi] =
        collect_noise_sample(estimator, config.theta0, std::nullopt,
                             config.noise_sample_size, noise_rng, config.m_grid[mi]);
  };
  detail::run_indexed_parallel(config.m_grid.size(), config.threads, run_noise);

  report.sigma2_hat_per_m.resize(config.m_grid.size());
  for (std::size_t mi = 0; mi < config.m_grid.size(); ++mi)
    report.sigma2_hat_per_m[mi] = variance(report.noise_samples[mi].w_star_draws);
  if (config.m_grid.size() >= 3)
    report.variance_slope = variance_vs_m_slope(report.noise_samples);
  return report;
}

/// Pilot stage: a plain identity-proposal run from theta0 whose thinned
/// trace yields per-coordinate posterior medians and a sample covariance
/// VarHat for the study proposal.
struct PilotResult {
  std::vector<double> median;
  std::vector<double> covariance;  // row-major d x d
  double acceptance_rate = 0.0;
};

inline PilotResult pilot_run(const LogTargetEstimator& estimator,
                             std::span<const double> theta0, double lambda,
                             std::size_t iterations, std::size_t thin, RngStream& rng) {
  const RunStatistics stats =
      run_chain(theta0, estimator, ProposalSpec(lambda, estimator.dimension), iterations,
                {}, rng, /*record=*/true, thin);
  const ChainTrace& trace = *stats.trace;
  const std::size_t d = trace.dimension;
  const std::size_t n = trace.rows();
  if (n < 10) throw std::invalid_argument("pilot_run: too few recorded samples");
  PilotResult result;
  result.acceptance_rate = stats.acceptance_rate;
  result.median.resize(d);
  std::vector<double> column(n);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t r = 0; r < n; ++r) column[r] = trace.positions[r * d + c];
    std::nth_element(column.begin(), column.begin() + n / 2, column.end());
    result.median[c] = column[n / 2];
  }
  result.covariance.assign(d * d, 0.0);
  std::vector<double> mu(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) mu[c] += trace.positions[r * d + c];
  for (double& v : mu) v /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        result.covariance[i * d + j] += (trace.positions[r * d + i] - mu[i]) *
                                        (trace.positions[r * d + j] - mu[j]);
  for (double& v : result.covariance) v /= static_cast<double>(n - 1);
  return result;
}

/// Synthetic surrogate: exact d-dimensional standard-Gaussian log-target
/// with injected independent Gaussian noise of variance noise_c / m
/// (declared cost m per evaluation).
inline StudyEstimatorFactory gaussian_surrogate_factory(std::size_t dimension,
                                                        double noise_c) {
  if (dimension == 0 || !(noise_c >= 0.0))
    throw std::invalid_argument("gaussian_surrogate_factory: bad arguments");
  StudyEstimatorFactory factory;
  factory.dimension = dimension;
  factory.make = [dimension, noise_c](std::size_t m) {
    if (m < 1) throw std::invalid_argument("gaussian_surrogate_factory: m must be >= 1");
    const double sigma2 = noise_c / static_cast<double>(m);
    const double sd = std::sqrt(sigma2);
    LogTargetEstimator est;
    est.dimension = dimension;
    est.evaluate = [sigma2, sd, m](std::span<const double> x, RngStream& rng) -> Evaluation {
      double s = 0.0;
      for (double xi : x) s += xi * xi;
      const double noise = (sigma2 > 0.0) ? (-0.5 * sigma2 + sd * rng.normal()) : 0.0;
      return {-0.5 * s + noise, static_cast<double>(m)};
    };
    return est;
  };
  return factory;
}

}  // namespace psmrwm
