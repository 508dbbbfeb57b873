#pragma once

// Pseudo-marginal random-walk Metropolis kernel.
//
// The defining design point: the log-estimate of the target at the current
// position is the one carried over from the iteration that accepted it, and
// is NEVER re-evaluated.  Refreshing it would silently change the invariant
// distribution of the extended chain.  A proposal whose estimate comes back
// -inf (or NaN) is a certain reject; the comparison log(u) < log-ratio
// already does the right thing for every non-finite case.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "psmrwm/math/stats.hpp"
#include "psmrwm/rng.hpp"

namespace psmrwm {

/// One noisy evaluation of the log-target: value and its declared cost
/// (e.g. particles x observation intervals for a particle filter).
struct Evaluation {
  double log_value;
  double cost;
};

/// Noisy unbiased-in-density log-target.  evaluate must use fresh auxiliary
/// randomness from the supplied stream on every call, including repeated
/// calls at the same position.
struct LogTargetEstimator {
  std::size_t dimension;
  std::function<Evaluation(std::span<const double>, RngStream&)> evaluate;
};

struct ChainState {
  std::vector<double> position;
  double stored_log_estimate;
  std::size_t iteration;
};

/// Random-walk proposal x* = x + lambda * (root * z), z ~ N(0, I), with
/// root a lower-triangular factor of the proposal covariance shape
/// (identity when no root is supplied).
class ProposalSpec {
 public:
  ProposalSpec(double scale_lambda, std::size_t dimension)
      : lambda_(scale_lambda), dimension_(dimension) {
    validate_lambda();
  }

  ProposalSpec(double scale_lambda, std::size_t dimension,
               std::vector<double> covariance_root_row_major)
      : lambda_(scale_lambda),
        dimension_(dimension),
        root_(std::move(covariance_root_row_major)) {
    validate_lambda();
    if (root_.size() != dimension_ * dimension_)
      throw std::invalid_argument("ProposalSpec: covariance root must be d x d");
    for (std::size_t i = 0; i < dimension_; ++i) {
      if (!(root_[i * dimension_ + i] > 0.0))
        throw std::invalid_argument(
            "ProposalSpec: covariance root needs a strictly positive diagonal");
      for (std::size_t j = i + 1; j < dimension_; ++j)
        if (root_[i * dimension_ + j] != 0.0)
          throw std::invalid_argument("ProposalSpec: covariance root must be lower-triangular");
    }
  }

  double scale_lambda() const { return lambda_; }
  std::size_t dimension() const { return dimension_; }
  bool identity_shape() const { return root_.empty(); }
  const std::vector<double>& covariance_root() const { return root_; }

  /// Draws the proposal displacement lambda * root * z into `out`.
  void sample_displacement(RngStream& rng, std::vector<double>& out) const {
    out.resize(dimension_);
    if (root_.empty()) {
      for (double& v : out) v = lambda_ * rng.normal();
      return;
    }
    scratch_.resize(dimension_);
    for (double& z : scratch_) z = rng.normal();
    for (std::size_t i = 0; i < dimension_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j <= i; ++j) s += root_[i * dimension_ + j] * scratch_[j];
      out[i] = lambda_ * s;
    }
  }

 private:
  void validate_lambda() const {
    if (!(lambda_ > 0.0)) throw std::invalid_argument("ProposalSpec: requires lambda > 0");
    if (dimension_ == 0) throw std::invalid_argument("ProposalSpec: requires dimension >= 1");
  }

  double lambda_;
  std::size_t dimension_;
  std::vector<double> root_;
  mutable std::vector<double> scratch_;
};

/// Evaluates the estimator at the starting position.  A non-finite estimate
/// here is an error: the chain cannot start from a state of estimated zero
/// density.
inline ChainState make_initial_state(std::span<const double> position,
                                     const LogTargetEstimator& estimator, RngStream& rng,
                                     double* cost_out = nullptr) {
  if (position.size() != estimator.dimension)
    throw std::invalid_argument("make_initial_state: position/estimator dimension mismatch");
  const Evaluation e = estimator.evaluate(position, rng);
  if (cost_out) *cost_out = e.cost;
  if (!std::isfinite(e.log_value))
    throw std::invalid_argument(
        "make_initial_state: estimator returned a non-finite value at the initial position");
  return {std::vector<double>(position.begin(), position.end()), e.log_value, 0};
}

struct StepResult {
  ChainState state;
  bool accepted;
  std::vector<double> proposal_position;
  double proposal_log_estimate;
  double cost;
};

inline StepResult step(const ChainState& state, const LogTargetEstimator& estimator,
                       const ProposalSpec& proposal, RngStream& rng) {
  if (state.position.size() != estimator.dimension ||
      proposal.dimension() != estimator.dimension)
    throw std::invalid_argument("step: dimension mismatch");
  std::vector<double> displacement;
  proposal.sample_displacement(rng, displacement);
  std::vector<double> proposed = state.position;
  for (std::size_t i = 0; i < proposed.size(); ++i) proposed[i] += displacement[i];
  const Evaluation e = estimator.evaluate(proposed, rng);
  const double log_ratio = e.log_value - state.stored_log_estimate;
  // False for NaN and -inf log-ratios, true for +inf: certain reject/accept.
  const bool accepted = std::log(rng.uniform()) < log_ratio;
  StepResult r{state, accepted, std::move(proposed), e.log_value, e.cost};
  r.state.iteration = state.iteration + 1;
  if (accepted) {
    r.state.position = r.proposal_position;
    r.state.stored_log_estimate = e.log_value;
  }
  return r;
}

/// Thinned recording of the chain (row = every thin-th iteration).
struct ChainTrace {
  std::size_t dimension = 0;
  std::size_t thin = 1;
  std::vector<std::size_t> iterations;
  std::vector<std::uint8_t> accepted;
  std::vector<double> log_estimates;
  std::vector<double> positions;  // row-major, one row per record

  std::size_t rows() const { return iterations.size(); }
  std::span<const double> row(std::size_t r) const {
    return {positions.data() + r * dimension, dimension};
  }
};

struct RunStatistics {
  double acceptance_rate = 0.0;
  double esjd = 0.0;
  std::vector<double> esjd_metric;  // row-major d x d; empty means identity
  std::vector<double> ess_per_coordinate;  // from the recorded thinned trace
  double total_cost = 0.0;
  std::vector<std::uint8_t> accept_history;  // one flag per iteration
  std::optional<ChainTrace> trace;
};

/// Runs n_iters steps from `initial`.  ESJD is the mean over iterations of
/// <dx, T dx> (rejections contribute zero), with T the optional metric
/// matrix (row-major, identity if empty).  ESS per coordinate is computed
/// from the recorded thinned series when recording is on; it is left empty
/// otherwise to avoid storing the full path for long high-dimensional runs.
/// total_cost includes the initial evaluation.
inline RunStatistics run_chain(std::span<const double> initial,
                               const LogTargetEstimator& estimator,
                               const ProposalSpec& proposal, std::size_t n_iters,
                               std::span<const double> metric, RngStream& rng,
                               bool record = false, std::size_t thin = 1) {
  if (n_iters < 1) throw std::invalid_argument("run_chain: requires n_iters >= 1");
  if (thin < 1) throw std::invalid_argument("run_chain: requires thin >= 1");
  const std::size_t d = estimator.dimension;
  if (!metric.empty() && metric.size() != d * d)
    throw std::invalid_argument("run_chain: metric must be d x d");

  RunStatistics stats;
  stats.esjd_metric.assign(metric.begin(), metric.end());
  stats.accept_history.resize(n_iters);
  if (record) {
    stats.trace.emplace();
    stats.trace->dimension = d;
    stats.trace->thin = thin;
    stats.trace->iterations.reserve(n_iters / thin + 1);
  }

  double init_cost = 0.0;
  ChainState state = make_initial_state(initial, estimator, rng, &init_cost);
  stats.total_cost = init_cost;

  auto metric_quadform = [&](const std::vector<double>& a, const std::vector<double>& b) {
    // squared jump <a-b, T (a-b)>; identity fast path
    double s = 0.0;
    if (metric.empty()) {
      for (std::size_t i = 0; i < d; ++i) {
        const double dx = a[i] - b[i];
        s += dx * dx;
      }
      return s;
    }
    for (std::size_t i = 0; i < d; ++i) {
      const double dxi = a[i] - b[i];
      double row = 0.0;
      for (std::size_t j = 0; j < d; ++j) row += metric[i * d + j] * (a[j] - b[j]);
      s += dxi * row;
    }
    return s;
  };

  std::size_t accepted_count = 0;
  double esjd_sum = 0.0;
  for (std::size_t i = 0; i < n_iters; ++i) {
    StepResult r = step(state, estimator, proposal, rng);
    stats.total_cost += r.cost;
    stats.accept_history[i] = r.accepted ? 1 : 0;
    if (r.accepted) {
      ++accepted_count;
      esjd_sum += metric_quadform(r.proposal_position, state.position);
    }
    state = std::move(r.state);
    if (record && ((i + 1) % thin == 0)) {
      stats.trace->iterations.push_back(i + 1);
      stats.trace->accepted.push_back(stats.accept_history[i]);
      stats.trace->log_estimates.push_back(state.stored_log_estimate);
      stats.trace->positions.insert(stats.trace->positions.end(), state.position.begin(),
                                    state.position.end());
    }
  }

  stats.acceptance_rate =
      static_cast<double>(accepted_count) / static_cast<double>(n_iters);
  stats.esjd = esjd_sum / static_cast<double>(n_iters);

  if (record && stats.trace->rows() >= 4) {
    stats.ess_per_coordinate.resize(d);
    std::vector<double> series(stats.trace->rows());
    for (std::size_t c = 0; c < d; ++c) {
      for (std::size_t r = 0; r < series.size(); ++r)
        series[r] = stats.trace->positions[r * d + c];
      stats.ess_per_coordinate[c] = geyer_ess(series);
    }
  }
  return stats;
}

/// Counts of maximal consecutive-rejection run lengths.  An all-accepted
/// history has no rejection runs and yields an empty histogram.
inline std::map<std::size_t, std::size_t> sticky_patch_histogram(
    std::span<const std::uint8_t> accept_history) {
  if (accept_history.empty())
    throw std::invalid_argument("sticky_patch_histogram: empty accept history");
  std::map<std::size_t, std::size_t> hist;
  std::size_t run = 0;
  for (std::uint8_t a : accept_history) {
    if (a) {
      if (run > 0) ++hist[run];
      run = 0;
    } else {
      ++run;
    }
  }
  if (run > 0) ++hist[run];
  return hist;
}

inline std::map<std::size_t, std::size_t> sticky_patch_histogram(const RunStatistics& stats) {
  return sticky_patch_histogram(
      std::span<const std::uint8_t>(stats.accept_history.data(), stats.accept_history.size()));
}

}  // namespace psmrwm
