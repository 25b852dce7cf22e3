#pragma once

#include <iosfwd>
#include <optional>

#include "twintune/controller.hpp"

namespace twintune {

struct EpisodeConfig {
  const RobotModel* model = nullptr;
  ShapeSpec shape;
  CostWeights weights;          // weights the MPC plans with
  CostWeights eval_weights;     // fixed weights the episode is scored with
  GainSet gains;
  SolverConfig solver;
  int N = 20;
  double dt_ocp = 0.0025;
  double ctrl_period = 0.002;   // 500 Hz
  double mpc_period = 0.004;    // 250 Hz
  double substep = 0.0005;      // physics integration step
  VecX q0, v0;
  uint64_t seed = 0;
  bool cold_start = false;      // disable warm starting (diagnostics)
  bool deterministic_time = false;
  double per_iteration_time = 5e-4;  // synthetic solve time per DDP iteration
  double barrier_margin = 0.0;

  void validate() const;
};

struct EpisodeMetrics {
  double avg_error = 0.0;       // m
  double max_error = 0.0;       // m
  double accumulated_cost = 0.0;  // Eq.-2 style sum on the realized trajectory
  double mean_solve_time = 0.0;   // s
  double mean_iterations = 0.0;
  int realtime_violations = 0;
  int mpc_solves = 0;
  int ticks = 0;
  bool failed = false;
};

struct EpisodeLogRow {
  double t;
  VecX q, v, tau;
  Vec3 p, p_des;
  double err;
  double solve_time;
  double iterations;
};

using EpisodeLog = std::vector<EpisodeLogRow>;

/// Closed-loop run: MPC re-solves at mpc_period, the 500 Hz controller picks
/// nodes from the latest solution, and the twin integrates tau + g(q) (the
/// twin mirrors the firmware-side gravity compensation). Deterministic given
/// the config. Divergence marks the episode failed instead of throwing.
EpisodeMetrics run_episode(const EpisodeConfig& config,
                           EpisodeLog* log = nullptr);

/// J = alpha * (L / L_base) + (1 - alpha) * (t_solve / t_base); failed
/// episodes map to 10x the baseline J (= 10).
double objective(const EpisodeMetrics& metrics, double alpha,
                 const EpisodeMetrics& baseline);

/// theta = [w_pos, w_rot, w_tau, w_v, K_p, K_d, K_pc(3), K_dc(3)], 12-dim.
constexpr int kParamDim = 12;
VecX pack_params(const CostWeights& weights, const GainSet& gains);
void unpack_params(const VecX& theta, CostWeights& weights, GainSet& gains);

std::pair<double, EpisodeMetrics> evaluate_params(const VecX& theta,
                                                  const EpisodeConfig& base,
                                                  const EpisodeMetrics& baseline,
                                                  double alpha);

/// CSV episode log with the documented column schema.
void write_episode_csv(std::ostream& out, const EpisodeLog& log);

}  // namespace twintune
