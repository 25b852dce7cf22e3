#include "twintune/ddp.hpp"

#include <Eigen/Cholesky>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace twintune {

void SolverConfig::validate() const {
  if (max_iterations < 1)
    throw std::invalid_argument("max_iterations must be >= 1");
  if (!(tol_expected_improvement > 0.0))
    throw std::invalid_argument("convergence tolerance must be > 0");
  if (!(reg_min > 0.0) || !(reg_max >= reg_min) || !(reg_factor > 1.0))
    throw std::invalid_argument("invalid regularization schedule");
}

double total_cost(const StageProblem& problem, const std::vector<VecX>& xs,
                  const std::vector<VecX>& us) {
  double cost = 0.0;
  for (int k = 0; k < problem.horizon(); ++k)
    cost += problem.stage_cost(k, xs[k], us[k]);
  return cost + problem.terminal_value(xs.back());
}

DdpSolver::DdpSolver(SolverConfig config) : config_(config) {
  config_.validate();
}

void DdpSolver::compute_gaps(const StageProblem& problem,
                             const std::vector<VecX>& xs,
                             const std::vector<VecX>& us) const {
  const int N = problem.horizon();
  gaps_.assign(N + 1, VecX::Zero(problem.nx()));
  gap_inf_ = 0.0;
  for (int k = 0; k < N; ++k) {
    gaps_[k + 1] = problem.dynamics(k, xs[k], us[k]) - xs[k + 1];
    gap_inf_ = std::max(gap_inf_, gaps_[k + 1].lpNorm<Eigen::Infinity>());
  }
}

BackwardPassResult DdpSolver::backward_pass(const StageProblem& problem,
                                            const std::vector<VecX>& xs,
                                            const std::vector<VecX>& us,
                                            double reg) const {
  const int N = problem.horizon();
  const int nu = problem.nu();
  if (static_cast<int>(gaps_.size()) != N + 1) compute_gaps(problem, xs, us);

  BackwardPassResult out;
  out.k.assign(N, VecX::Zero(nu));
  out.K.assign(N, MatX::Zero(nu, problem.nx()));

  VecX Vx;
  MatX Vxx;
  problem.terminal_derivatives(xs[N], Vx, Vxx);
  // Gap terms of the expected cost change: closing a defect f at node t moves
  // the rollout by alpha*f through the local value model V_t. They vanish on
  // feasible trajectories.
  out.d1 += gaps_[N].dot(Vx);
  out.d2 += gaps_[N].dot(Vxx * gaps_[N]);

  for (int k = N - 1; k >= 0; --k) {
    const StageDerivatives ld = problem.stage_derivatives(k, xs[k], us[k]);
    const DynamicsDerivatives fd = problem.dynamics_derivatives(k, xs[k], us[k]);
    const VecX Vx_hat = Vx + Vxx * gaps_[k + 1];
    const VecX Qx = ld.lx + fd.fx.transpose() * Vx_hat;
    const VecX Qu = ld.lu + fd.fu.transpose() * Vx_hat;
    const MatX Qxx = ld.lxx + fd.fx.transpose() * Vxx * fd.fx;
    MatX Quu = ld.luu + fd.fu.transpose() * Vxx * fd.fu;
    const MatX Qux = ld.lux + fd.fu.transpose() * Vxx * fd.fx;
    Quu.diagonal().array() += reg;

    Eigen::LLT<MatX> llt(Quu);
    if (llt.info() != Eigen::Success) return out;  // ok stays false

    out.k[k] = -llt.solve(Qu);
    out.K[k] = -llt.solve(Qux);
    out.d1 += out.k[k].dot(Qu);
    out.d2 += out.k[k].dot(Quu * out.k[k]);

    Vx = Qx + out.K[k].transpose() * Quu * out.k[k] +
         out.K[k].transpose() * Qu + Qux.transpose() * out.k[k];
    Vxx = Qxx + out.K[k].transpose() * Quu * out.K[k] +
          out.K[k].transpose() * Qux + Qux.transpose() * out.K[k];
    Vxx = 0.5 * (Vxx + Vxx.transpose());
    if (k > 0) {
      out.d1 += gaps_[k].dot(Vx);
      out.d2 += gaps_[k].dot(Vxx * gaps_[k]);
    }
  }
  out.ok = true;
  return out;
}

ForwardPassResult DdpSolver::forward_pass(const StageProblem& problem,
                                          const std::vector<VecX>& xs,
                                          const std::vector<VecX>& us,
                                          const BackwardPassResult& gains,
                                          double alpha) const {
  const int N = problem.horizon();
  if (static_cast<int>(gaps_.size()) != N + 1) compute_gaps(problem, xs, us);
  ForwardPassResult out;
  out.xs.resize(N + 1);
  out.us.resize(N);
  out.xs[0] = xs[0];
  out.cost = 0.0;
  for (int k = 0; k < N; ++k) {
    out.us[k] = us[k] + alpha * gains.k[k] + gains.K[k] * (out.xs[k] - xs[k]);
    out.cost += problem.stage_cost(k, out.xs[k], out.us[k]);
    out.xs[k + 1] =
        problem.dynamics(k, out.xs[k], out.us[k]) - (1.0 - alpha) * gaps_[k + 1];
    if (!out.xs[k + 1].allFinite()) {
      out.finite = false;
      return out;
    }
  }
  out.cost += problem.terminal_value(out.xs[N]);
  if (!std::isfinite(out.cost)) out.finite = false;
  return out;
}

DdpSolution shift_solution(const DdpSolution& prev, int steps) {
  DdpSolution out = prev;
  if (prev.us.empty() || steps < 1) return out;
  const size_t n = prev.us.size();
  const size_t s = static_cast<size_t>(steps);
  for (size_t k = 0; k < n; ++k) out.us[k] = prev.us[std::min(k + s, n - 1)];
  for (size_t k = 0; k <= n; ++k) out.xs[k] = prev.xs[std::min(k + s, n)];
  return out;
}

DdpSolution DdpSolver::solve(const StageProblem& problem, const VecX& x0,
                             const DdpSolution* warm_start) {
  const auto t_start = std::chrono::steady_clock::now();
  const int N = problem.horizon();
  if (x0.size() != problem.nx())
    throw std::invalid_argument("initial state dimension mismatch");

  DdpSolution sol;
  if (warm_start && static_cast<int>(warm_start->us.size()) == N) {
    sol.xs = warm_start->xs;
    sol.us = warm_start->us;
  } else {
    sol.xs.assign(N + 1, x0);
    sol.us.assign(N, VecX::Zero(problem.nu()));
  }
  sol.xs[0] = x0;

  compute_gaps(problem, sol.xs, sol.us);
  sol.cost = total_cost(problem, sol.xs, sol.us);
  if (!std::isfinite(sol.cost))
    throw std::runtime_error("DDP: non-finite initial cost");

  double reg = config_.reg_init;
  int consecutive_failures = 0;
  BackwardPassResult gains;
  for (int it = 0; it < config_.max_iterations; ++it) {
    gains = backward_pass(problem, sol.xs, sol.us, reg);
    while (!gains.ok) {
      reg *= config_.reg_factor;
      if (reg > config_.reg_max)
        throw std::runtime_error(
            "DDP: Quu not positive-definite at maximum regularization");
      gains = backward_pass(problem, sol.xs, sol.us, reg);
    }

    sol.expected_improvement = gains.expected_improvement(1.0);
    // A warm start carries dynamics gaps (xs[0] is the fresh measurement);
    // the trajectory is optimal only once it is also feasible.
    if (sol.expected_improvement < config_.tol_expected_improvement &&
        gap_inf_ < config_.tol_gap) {
      sol.converged = true;
      break;
    }

    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < config_.line_search_steps; ++ls, alpha *= 0.5) {
      const ForwardPassResult trial =
          forward_pass(problem, sol.xs, sol.us, gains, alpha);
      if (!trial.finite) continue;
      // Nonmonotone FDDP acceptance. On a feasible trajectory the model
      // predicts a decrease and we require a fraction of it. On an
      // infeasible one, closing gaps can legitimately raise the cost (the
      // d1/d2 gap terms predict by how much); accept such steps as long as
      // the rise stays within twice the prediction, so the solver can buy
      // feasibility instead of deadlocking on the raw cost.
      const double predicted = gains.expected_cost_change(alpha);
      const double actual = trial.cost - sol.cost;
      const bool accept_step =
          predicted < 0.0
              ? actual <= 0.1 * predicted
              : gap_inf_ > config_.tol_gap && actual <= 2.0 * predicted;
      if (accept_step) {
        sol.xs = std::move(trial.xs);
        sol.us = std::move(trial.us);
        sol.cost = trial.cost;
        compute_gaps(problem, sol.xs, sol.us);
        accepted = true;
        ++sol.iterations;
        consecutive_failures = 0;
        reg = std::max(reg / config_.reg_factor, config_.reg_min);
        if (trace_) trace_({sol.iterations, sol.cost, reg, alpha});
        break;
      }
    }
    if (!accepted) {
      // Near the optimum (small predicted improvement) a second full
      // line-search failure means the incumbent is already at the accuracy
      // the quadratic model can deliver, so stop paying for backward passes.
      // Far from it, keep raising the regularization instead: bailing out
      // there would hand the controller an unconverged trajectory.
      if (++consecutive_failures >= 2 &&
          sol.expected_improvement < 1e2 * config_.tol_expected_improvement)
        break;
      reg *= config_.reg_factor;
      if (reg > config_.reg_max) break;  // stuck; return the best we have
    }
  }

  // Gains for the low-level controller come from the last backward pass.
  sol.k = std::move(gains.k);
  sol.K = std::move(gains.K);
  sol.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return sol;
}

}  // namespace twintune
