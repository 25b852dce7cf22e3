#include "twintune/dynamics.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

namespace twintune {

namespace {

void check_q(const RobotModel& model, const VecX& q) {
  if (q.size() != model.nq())
    throw std::invalid_argument("joint vector length does not match model");
}

}  // namespace

LinkPoses link_poses(const RobotModel& model, const VecX& q) {
  check_q(model, q);
  LinkPoses out;
  out.link.resize(model.nq());
  Iso3 X = Iso3::Identity();
  for (int i = 0; i < model.nq(); ++i) {
    const Joint& j = model.joints[i];
    X = X * j.origin * Eigen::AngleAxisd(q[i], j.axis);
    out.link[i] = X;
  }
  out.ee = X * model.ee_offset;
  return out;
}

EePose forward_kinematics(const RobotModel& model, const VecX& q) {
  const LinkPoses poses = link_poses(model, q);
  EePose pose;
  pose.p = poses.ee.translation();
  pose.R = poses.ee.rotation();
  return pose;
}

Eigen::Matrix<double, 6, Eigen::Dynamic> frame_jacobian(const RobotModel& model,
                                                        const VecX& q) {
  const LinkPoses poses = link_poses(model, q);
  const Vec3 p_ee = poses.ee.translation();
  Eigen::Matrix<double, 6, Eigen::Dynamic> J(6, model.nv());
  for (int i = 0; i < model.nq(); ++i) {
    const Vec3 z = poses.link[i].rotation() * model.joints[i].axis;
    const Vec3 r = p_ee - poses.link[i].translation();
    J.col(i).head<3>() = z.cross(r);
    J.col(i).tail<3>() = z;
  }
  return J;
}

VecX inverse_dynamics(const RobotModel& model, const VecX& q, const VecX& v,
                      const VecX& a) {
  check_q(model, q);
  if (v.size() != model.nv() || a.size() != model.nv())
    throw std::invalid_argument("velocity/acceleration length mismatch");
  const int n = model.nq();
  const LinkPoses poses = link_poses(model, q);

  // Forward pass: link angular velocity/acceleration and the linear
  // acceleration of each joint origin, world frame. The gravity trick offsets
  // the base acceleration by -g.
  std::vector<Vec3> z(n), w(n), dw(n), ao(n), ac(n), com(n);
  Vec3 w_p = Vec3::Zero();
  Vec3 dw_p = Vec3::Zero();
  Vec3 ao_p = -model.gravity;
  Vec3 p_prev = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    const Vec3 p_i = poses.link[i].translation();
    const Vec3 r = p_i - p_prev;
    z[i] = poses.link[i].rotation() * model.joints[i].axis;
    const Vec3 ao_i = ao_p + dw_p.cross(r) + w_p.cross(w_p.cross(r));
    w[i] = w_p + z[i] * v[i];
    dw[i] = dw_p + z[i] * a[i] + w_p.cross(z[i] * v[i]);
    com[i] = poses.link[i].rotation() * model.joints[i].com;
    ac[i] = ao_i + dw[i].cross(com[i]) + w[i].cross(w[i].cross(com[i]));
    ao[i] = ao_i;
    w_p = w[i];
    dw_p = dw[i];
    ao_p = ao_i;
    p_prev = p_i;
  }

  // Backward pass: net forces/moments, accumulated down the chain.
  VecX tau(n);
  Vec3 f_child = Vec3::Zero();
  Vec3 n_child = Vec3::Zero();  // moment about the child joint origin
  Vec3 p_child = Vec3::Zero();
  for (int i = n - 1; i >= 0; --i) {
    const Mat3 R = poses.link[i].rotation();
    const Mat3 I_w = R * model.joints[i].inertia * R.transpose();
    const Vec3 F = model.joints[i].mass * ac[i];
    const Vec3 N = I_w * dw[i] + w[i].cross(I_w * w[i]);
    const Vec3 p_i = poses.link[i].translation();
    Vec3 f_i = F + f_child;
    Vec3 n_i = N + com[i].cross(F);
    if (i < n - 1) n_i += n_child + (p_child - p_i).cross(f_child);
    tau[i] = z[i].dot(n_i);
    f_child = f_i;
    n_child = n_i;
    p_child = p_i;
  }
  return tau;
}

MatX mass_matrix(const RobotModel& model, const VecX& q) {
  check_q(model, q);
  const int n = model.nq();
  const LinkPoses poses = link_poses(model, q);

  std::vector<Vec3> z(n), p(n), com_w(n);
  std::vector<Mat3> I_w(n);
  for (int i = 0; i < n; ++i) {
    const Mat3 R = poses.link[i].rotation();
    z[i] = R * model.joints[i].axis;
    p[i] = poses.link[i].translation();
    com_w[i] = p[i] + R * model.joints[i].com;
    I_w[i] = R * model.joints[i].inertia * R.transpose();
  }

  // Composite subtree mass properties, tip to base.
  std::vector<double> mc(n);
  std::vector<Vec3> cc(n);
  std::vector<Mat3> Ic(n);  // about the composite COM, world frame
  for (int i = n - 1; i >= 0; --i) {
    double m = model.joints[i].mass;
    Vec3 c = com_w[i];
    Mat3 I = I_w[i];
    if (i < n - 1) {
      const double m2 = mc[i + 1];
      const Vec3 c2 = cc[i + 1];
      const double mt = m + m2;
      const Vec3 ct = mt > 0.0 ? Vec3((m * c + m2 * c2) / mt) : c;
      auto shift = [](const Mat3& Icom, double mass, const Vec3& d) -> Mat3 {
        return Icom + mass * (d.squaredNorm() * Mat3::Identity() - d * d.transpose());
      };
      I = shift(I, m, c - ct) + shift(Ic[i + 1], m2, c2 - ct);
      m = mt;
      c = ct;
    }
    mc[i] = m;
    cc[i] = c;
    Ic[i] = I;
  }

  MatX M = MatX::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    // Unit acceleration of joint i sweeps the composite subtree i..n-1.
    const Vec3 a_com = z[i].cross(cc[i] - p[i]);
    const Vec3 F = mc[i] * a_com;
    const Vec3 N = Ic[i] * z[i];  // moment about the composite COM
    for (int j = 0; j <= i; ++j) {
      const Vec3 n_j = N + (cc[i] - p[j]).cross(F);
      M(j, i) = z[j].dot(n_j);
      M(i, j) = M(j, i);
    }
  }
  return M;
}

VecX bias_forces(const RobotModel& model, const JointState& state) {
  return inverse_dynamics(model, state.q, state.v, VecX::Zero(model.nv()));
}

VecX gravity_vector(const RobotModel& model, const VecX& q) {
  return inverse_dynamics(model, q, VecX::Zero(model.nv()),
                          VecX::Zero(model.nv()));
}

VecX forward_dynamics(const RobotModel& model, const JointState& state,
                      const VecX& u) {
  if (u.size() != model.nu())
    throw std::invalid_argument("torque vector length mismatch");
  const MatX M = mass_matrix(model, state.q);
  Eigen::LLT<MatX> llt(M);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("mass matrix is not positive-definite");
  return llt.solve(u - bias_forces(model, state));
}

JointState step(const RobotModel& model, const JointState& state, const VecX& u,
                double dt) {
  if (dt <= 0.0) throw std::invalid_argument("dt must be > 0");
  const VecX a = forward_dynamics(model, state, u);
  JointState next;
  next.v = state.v + a * dt;
  next.q = state.q + next.v * dt;
  return next;
}

}  // namespace twintune
