#pragma once

#include <functional>
#include <optional>

#include "twintune/ocp.hpp"

namespace twintune {

struct SolverConfig {
  int max_iterations = 10;
  double tol_expected_improvement = 1e-4;
  double tol_gap = 1e-6;  // feasibility tolerance on warm-start gaps
  double reg_init = 1e-12;
  double reg_min = 1e-12;
  double reg_max = 1e9;
  double reg_factor = 10.0;
  int line_search_steps = 11;  // alpha in {1, 0.5, ..., 2^-10}
  bool verbose = false;

  void validate() const;
};

struct DdpSolution {
  std::vector<VecX> xs;  // N+1 states
  std::vector<VecX> us;  // N controls
  std::vector<VecX> k;   // N feedforward vectors
  std::vector<MatX> K;   // N feedback matrices, n_u x n_x
  bool converged = false;
  int iterations = 0;
  double cost = 0.0;
  double expected_improvement = 0.0;
  double wall_time_s = 0.0;
};

struct IterationTrace {
  int iteration;
  double cost;
  double reg;
  double step;
};

struct BackwardPassResult {
  std::vector<VecX> k;
  std::vector<MatX> K;
  double d1 = 0.0;  // sum k' Qu, plus gap term sum f' Vx when infeasible
  double d2 = 0.0;  // sum k' Quu k, plus gap term sum f' Vxx f when infeasible
  bool ok = false;

  /// Predicted cost change of an alpha step (negative = improvement).
  double expected_cost_change(double alpha) const {
    return alpha * d1 + 0.5 * alpha * alpha * d2;
  }

  double expected_improvement(double alpha = 1.0) const {
    return -expected_cost_change(alpha);
  }
};

struct ForwardPassResult {
  std::vector<VecX> xs;
  std::vector<VecX> us;
  double cost = 0.0;
  bool finite = true;
};

double total_cost(const StageProblem& problem, const std::vector<VecX>& xs,
                  const std::vector<VecX>& us);

/// FDDP-style solver. One instance holds workspace state (gaps) and is
/// single-use-at-a-time; distinct instances may run concurrently.
class DdpSolver {
 public:
  explicit DdpSolver(SolverConfig config = {});

  /// Backward Riccati-like sweep over Gauss-Newton stage models, with gap
  /// correction terms for infeasible (warm-started) trajectories.
  /// Returns ok=false when Quu fails to factor at the given regularization.
  BackwardPassResult backward_pass(const StageProblem& problem,
                                   const std::vector<VecX>& xs,
                                   const std::vector<VecX>& us, double reg) const;

  /// Nonlinear rollout u = ubar + alpha k + K (x - xbar) with FDDP gap
  /// contraction by (1 - alpha).
  ForwardPassResult forward_pass(const StageProblem& problem,
                                 const std::vector<VecX>& xs,
                                 const std::vector<VecX>& us,
                                 const BackwardPassResult& gains,
                                 double alpha) const;

  /// Warm start is shifted by one node (last node repeated) and re-anchored
  /// at x0. Throws std::runtime_error on divergence.
  DdpSolution solve(const StageProblem& problem, const VecX& x0,
                    const DdpSolution* warm_start = nullptr);

  void set_trace_callback(std::function<void(const IterationTrace&)> cb) {
    trace_ = std::move(cb);
  }

  const SolverConfig& config() const { return config_; }

 private:
  void compute_gaps(const StageProblem& problem, const std::vector<VecX>& xs,
                    const std::vector<VecX>& us) const;

  SolverConfig config_;
  std::function<void(const IterationTrace&)> trace_;
  mutable std::vector<VecX> gaps_;  // gaps_[k+1] = f(xs[k], us[k]) - xs[k+1]
  mutable double gap_inf_ = 0.0;    // max-norm over all gaps
};

/// Shift a previous MPC solution by `steps` nodes (last node repeated) for
/// warm starting; one node when the re-solve period equals the node spacing.
DdpSolution shift_solution(const DdpSolution& prev, int steps = 1);

}  // namespace twintune
