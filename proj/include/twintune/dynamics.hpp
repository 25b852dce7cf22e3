#pragma once

#include "twintune/model.hpp"

namespace twintune {

/// World-frame pose of every joint frame plus the end-effector frame.
struct LinkPoses {
  std::vector<Iso3> link;  // joint/link frames, one per joint
  Iso3 ee = Iso3::Identity();
};

LinkPoses link_poses(const RobotModel& model, const VecX& q);

EePose forward_kinematics(const RobotModel& model, const VecX& q);

/// Geometric frame Jacobian, linear rows first: [pdot; omega] = J v.
Eigen::Matrix<double, 6, Eigen::Dynamic> frame_jacobian(const RobotModel& model,
                                                        const VecX& q);

/// Joint-space inertia matrix via a composite-rigid-body recursion.
MatX mass_matrix(const RobotModel& model, const VecX& q);

/// Recursive Newton-Euler: tau = M(q) a + C(q,v) v + g(q).
VecX inverse_dynamics(const RobotModel& model, const VecX& q, const VecX& v,
                      const VecX& a);

/// b(q, v) = C(q, v) v + g(q).
VecX bias_forces(const RobotModel& model, const JointState& state);

VecX gravity_vector(const RobotModel& model, const VecX& q);

/// a = M(q)^-1 (u - b(q, v)); throws std::runtime_error if M fails to factor.
VecX forward_dynamics(const RobotModel& model, const JointState& state,
                      const VecX& u);

/// Semi-implicit Euler: v+ = v + a dt, q+ = q + v+ dt.
JointState step(const RobotModel& model, const JointState& state, const VecX& u,
                double dt);

}  // namespace twintune
