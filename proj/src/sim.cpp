#include "twintune/sim.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace twintune {

void EpisodeConfig::validate() const {
  if (!model) throw std::invalid_argument("episode config needs a model");
  shape.validate();
  weights.validate();
  eval_weights.validate();
  gains.validate();
  solver.validate();
  if (N < 1 || !(dt_ocp > 0.0)) throw std::invalid_argument("bad MPC horizon");
  if (!(ctrl_period > 0.0) || !(mpc_period > 0.0) || !(substep > 0.0))
    throw std::invalid_argument("periods must be > 0");
  if (ctrl_period > mpc_period + 1e-12)
    throw std::invalid_argument("control period must be <= MPC period");
  if (substep > ctrl_period + 1e-12)
    throw std::invalid_argument("physics substep must be <= control period");
  if (q0.size() != model->nq() || v0.size() != model->nv())
    throw std::invalid_argument("initial state dimension mismatch");
}

EpisodeMetrics run_episode(const EpisodeConfig& config, EpisodeLog* log) {
  config.validate();
  const RobotModel& model = *config.model;
  const int n = model.nq();

  EpisodeMetrics metrics;
  const int n_ticks =
      static_cast<int>(std::floor(config.shape.duration / config.ctrl_period));
  if (n_ticks == 0) return metrics;

  OcpProblem problem(
      model, config.N, config.dt_ocp,
      trajectory_to_ocp_references(config.shape, 0.0, config.N, config.dt_ocp),
      config.weights, config.barrier_margin);
  // Fixed-weight scoring problem so episodes with different candidate
  // weights remain comparable; its single node is re-referenced every tick.
  const ReferenceSample ref0 = sample_reference(config.shape, 0.0);
  OcpProblem scorer(model, 1, config.dt_ocp, {ref0, ref0}, config.eval_weights,
                    config.barrier_margin);
  DdpSolver solver(config.solver);

  JointState state{config.q0, config.v0};
  MpcSnapshot mpc;
  mpc.dt = config.dt_ocp;
  mpc.N = config.N;
  bool have_solution = false;

  double sum_err = 0.0, sum_solve = 0.0, sum_iters = 0.0;
  const int substeps_per_tick = std::max(
      1, static_cast<int>(std::llround(config.ctrl_period / config.substep)));
  const double dt_sub = config.ctrl_period / substeps_per_tick;
  const int ticks_per_mpc = std::max(
      1, static_cast<int>(std::llround(config.mpc_period / config.ctrl_period)));

  for (int tick = 0; tick < n_ticks; ++tick) {
    const double t = tick * config.ctrl_period;

    if (tick % ticks_per_mpc == 0) {
      problem.set_references(trajectory_to_ocp_references(
          config.shape, t, config.N, config.dt_ocp));
      VecX x0(2 * n);
      x0 << state.q, state.v;
      DdpSolution warm;
      const bool use_warm = have_solution && !config.cold_start;
      // Shift by however many nodes the re-solve period spans.
      const int shift_nodes = std::max(
          1, static_cast<int>(std::llround(config.mpc_period / config.dt_ocp)));
      if (use_warm) warm = shift_solution(mpc.solution, shift_nodes);
      try {
        mpc.solution = solver.solve(problem, x0, use_warm ? &warm : nullptr);
      } catch (const std::runtime_error&) {
        metrics.failed = true;
        break;
      }
      mpc.t_solution = t;
      have_solution = true;
      ++metrics.mpc_solves;
      const double solve_time = config.deterministic_time
                                    ? mpc.solution.iterations *
                                          config.per_iteration_time
                                    : mpc.solution.wall_time_s;
      sum_solve += solve_time;
      sum_iters += mpc.solution.iterations;
      if (solve_time > config.mpc_period) ++metrics.realtime_violations;
    }

    ControlCommand cmd;
    try {
      cmd = control_tick(t, mpc, state, model, config.gains);
    } catch (const StaleSolutionError&) {
      ++metrics.realtime_violations;
      metrics.failed = true;
      break;
    }
    // The twin adds the gravity term back, as the robot firmware does.
    const VecX u_applied = cmd.tau + gravity_vector(model, state.q);

    const ReferenceSample ref = sample_reference(config.shape, t);
    const Vec3 p_now = forward_kinematics(model, state.q).p;
    const double err = (p_now - ref.p_des).norm();
    sum_err += err;
    metrics.max_error = std::max(metrics.max_error, err);
    VecX x(2 * n);
    x << state.q, state.v;
    scorer.set_references({ref, ref});
    // Scored on the commanded torque (Eq.-8 tau, above gravity compensation):
    // the gravity-holding component of the applied torque is posture-bound
    // and irreducible, and would otherwise swamp the tracking terms of the
    // episode score (measured 92% of the accumulated cost on the baseline).
    metrics.accumulated_cost +=
        scorer.running_cost(0, x, cmd.tau) * config.ctrl_period;
    ++metrics.ticks;

    if (log) {
      EpisodeLogRow row;
      row.t = t;
      row.q = state.q;
      row.v = state.v;
      row.tau = cmd.tau;
      row.p = p_now;
      row.p_des = ref.p_des;
      row.err = err;
      row.solve_time = metrics.mpc_solves
                           ? (config.deterministic_time
                                  ? mpc.solution.iterations *
                                        config.per_iteration_time
                                  : mpc.solution.wall_time_s)
                           : 0.0;
      row.iterations = mpc.solution.iterations;
      log->push_back(std::move(row));
    }

    for (int s = 0; s < substeps_per_tick; ++s)
      state = step(model, state, u_applied, dt_sub);
    if (!state.q.allFinite() || !state.v.allFinite()) {
      metrics.failed = true;
      break;
    }
  }

  if (metrics.ticks > 0) metrics.avg_error = sum_err / metrics.ticks;
  if (metrics.mpc_solves > 0) {
    metrics.mean_solve_time = sum_solve / metrics.mpc_solves;
    metrics.mean_iterations = sum_iters / metrics.mpc_solves;
  }
  return metrics;
}

double objective(const EpisodeMetrics& metrics, double alpha,
                 const EpisodeMetrics& baseline) {
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("alpha must be in [0, 1]");
  if (!(baseline.accumulated_cost > 0.0) || !(baseline.mean_solve_time > 0.0) ||
      !std::isfinite(baseline.accumulated_cost) ||
      !std::isfinite(baseline.mean_solve_time))
    throw std::invalid_argument("baseline metrics must be finite and positive");
  if (metrics.failed) return 10.0;
  if (!std::isfinite(metrics.accumulated_cost) ||
      !std::isfinite(metrics.mean_solve_time))
    throw std::invalid_argument("non-finite episode metrics");
  return alpha * (metrics.accumulated_cost / baseline.accumulated_cost) +
         (1.0 - alpha) * (metrics.mean_solve_time / baseline.mean_solve_time);
}

VecX pack_params(const CostWeights& weights, const GainSet& gains) {
  VecX theta(kParamDim);
  theta << weights.w_pos, weights.w_rot, weights.w_tau, weights.w_v, gains.kp,
      gains.kd, gains.kpc, gains.kdc;
  return theta;
}

void unpack_params(const VecX& theta, CostWeights& weights, GainSet& gains) {
  if (theta.size() != kParamDim)
    throw std::invalid_argument("theta must have 12 dimensions");
  weights.w_pos = theta[0];
  weights.w_rot = theta[1];
  weights.w_tau = theta[2];
  weights.w_v = theta[3];
  gains.kp = theta[4];
  gains.kd = theta[5];
  gains.kpc = theta.segment<3>(6);
  gains.kdc = theta.segment<3>(9);
}

std::pair<double, EpisodeMetrics> evaluate_params(const VecX& theta,
                                                  const EpisodeConfig& base,
                                                  const EpisodeMetrics& baseline,
                                                  double alpha) {
  EpisodeConfig config = base;
  unpack_params(theta, config.weights, config.gains);
  EpisodeMetrics metrics;
  try {
    metrics = run_episode(config);
  } catch (const std::exception&) {
    metrics.failed = true;
  }
  return {objective(metrics, alpha, baseline), metrics};
}

void write_episode_csv(std::ostream& out, const EpisodeLog& log) {
  if (log.empty()) {
    out << "t,err,solve_time,iters\n";
    return;
  }
  const int n = static_cast<int>(log.front().q.size());
  out << "t";
  for (int i = 0; i < n; ++i) out << ",q" << i;
  for (int i = 0; i < n; ++i) out << ",v" << i;
  for (int i = 0; i < n; ++i) out << ",tau" << i;
  out << ",p_x,p_y,p_z,pdes_x,pdes_y,pdes_z,err,solve_time,iters\n";
  out.precision(12);
  for (const auto& row : log) {
    out << row.t;
    for (int i = 0; i < n; ++i) out << "," << row.q[i];
    for (int i = 0; i < n; ++i) out << "," << row.v[i];
    for (int i = 0; i < n; ++i) out << "," << row.tau[i];
    for (int i = 0; i < 3; ++i) out << "," << row.p[i];
    for (int i = 0; i < 3; ++i) out << "," << row.p_des[i];
    out << "," << row.err << "," << row.solve_time << "," << row.iterations
        << "\n";
  }
}

}  // namespace twintune
