#pragma once

#include "twintune/ddp.hpp"

namespace twintune {

struct GainSet {
  double kp = 1.0;             // joint position gain (scalar, all joints)
  double kd = 1.0;             // joint velocity gain
  Vec3 kpc = Vec3::Ones();     // Cartesian position gain
  Vec3 kdc = Vec3::Ones();     // Cartesian velocity gain

  void validate() const;
};

struct ControlCommand {
  VecX tau;
  std::vector<bool> saturated;
};

/// MPC solution snapshot consumed by the low-level loop between solves.
struct MpcSnapshot {
  DdpSolution solution;
  double t_solution = 0.0;  // simulation time the solve was anchored at
  double dt = 0.0;          // OCP node spacing
  int N = 0;
};

/// Hybrid feedforward/feedback torque: the node-k feedforward is zero-order
/// held while joint and task feedback track the node-(k+1) targets. The
/// Cartesian terms are mapped through the linear Jacobian at the node-k
/// reference configuration.
VecX feedback_command(const DdpSolution& solution, int k, const JointState& state,
                      const RobotModel& model, const GainSet& gains);

/// tau = sat(u_tilde, u_min, u_max) - g(q), saturation applied first.
ControlCommand saturate_and_compensate(const VecX& u_tilde,
                                       const RobotModel& model, const VecX& q);

/// Thrown when the controller is asked to run from an MPC solution older
/// than the solver horizon.
struct StaleSolutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ControlCommand control_tick(double t, const MpcSnapshot& mpc,
                            const JointState& state, const RobotModel& model,
                            const GainSet& gains);

}  // namespace twintune
