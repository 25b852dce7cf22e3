#include "twintune/controller.hpp"

#include <cmath>

namespace twintune {

void GainSet::validate() const {
  if (kp < 0.0 || kd < 0.0 || kpc.minCoeff() < 0.0 || kdc.minCoeff() < 0.0)
    throw std::invalid_argument("feedback gains must be >= 0");
}

VecX feedback_command(const DdpSolution& solution, int k, const JointState& state,
                      const RobotModel& model, const GainSet& gains) {
  const int N = static_cast<int>(solution.us.size());
  if (k < 0 || k >= N) throw std::out_of_range("MPC node index");
  const int n = model.nq();
  if (state.q.size() != n || state.v.size() != n)
    throw std::invalid_argument("state dimension mismatch");

  const VecX& u_star = solution.us[k];
  const VecX q_next = solution.xs[k + 1].head(n);
  const VecX v_next = solution.xs[k + 1].tail(n);
  const VecX q_node = solution.xs[k].head(n);

  VecX u = u_star + gains.kd * (v_next - state.v) + gains.kp * (q_next - state.q);

  // Task-space feedback, mapped through the node-k linear Jacobian exactly as
  // the control law is written (J_{k+1} pairs with the MPC velocity target,
  // J_k with the measured one).
  const MatX Jk = frame_jacobian(model, q_node).topRows(3);
  const MatX Jk1 = frame_jacobian(model, q_next).topRows(3);
  const Vec3 p_star = forward_kinematics(model, q_next).p;
  const Vec3 p_now = forward_kinematics(model, state.q).p;
  const Vec3 ep = p_star - p_now;
  const Vec3 ev = Jk1 * v_next - Jk * state.v;
  u += Jk.transpose() * gains.kpc.asDiagonal() * ep;
  u += Jk.transpose() * gains.kdc.asDiagonal() * ev;
  return u;
}

ControlCommand saturate_and_compensate(const VecX& u_tilde,
                                       const RobotModel& model, const VecX& q) {
  const VecX lo = model.u_min();
  const VecX hi = model.u_max();
  const VecX g = gravity_vector(model, q);
  ControlCommand cmd;
  cmd.tau.resize(u_tilde.size());
  cmd.saturated.assign(u_tilde.size(), false);
  for (int i = 0; i < u_tilde.size(); ++i) {
    double s = u_tilde[i];
    if (s > hi[i]) {
      s = hi[i];
      cmd.saturated[i] = true;
    } else if (s < lo[i]) {
      s = lo[i];
      cmd.saturated[i] = true;
    }
    cmd.tau[i] = s - g[i];
  }
  return cmd;
}

ControlCommand control_tick(double t, const MpcSnapshot& mpc,
                            const JointState& state, const RobotModel& model,
                            const GainSet& gains) {
  const double age = t - mpc.t_solution;
  const double horizon = mpc.N * mpc.dt;
  if (age < 0.0 || age >= horizon)
    throw StaleSolutionError("MPC solution is stale (age " +
                             std::to_string(age) + " s, horizon " +
                             std::to_string(horizon) + " s)");
  const int k = std::min(static_cast<int>(std::floor(age / mpc.dt)), mpc.N - 1);
  const VecX u_tilde = feedback_command(mpc.solution, k, state, model, gains);
  return saturate_and_compensate(u_tilde, model, state.q);
}

}  // namespace twintune
