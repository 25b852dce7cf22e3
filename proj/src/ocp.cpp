#include "twintune/ocp.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

namespace twintune {

void CostWeights::validate() const {
  for (double w : {w_pos, w_rot, w_tau, w_v, w_lim_tau, w_lim_x})
    if (!(w >= 0.0) || !std::isfinite(w))
      throw std::invalid_argument("cost weights must be finite and >= 0");
}

double barrier(const VecX& value, const VecX& lower, const VecX& upper) {
  double sum = 0.0;
  for (int i = 0; i < value.size(); ++i) {
    const double hi = std::max(0.0, value[i] - upper[i]);
    const double lo = std::max(0.0, lower[i] - value[i]);
    sum += hi * hi + lo * lo;
  }
  return sum;
}

VecX barrier_gradient(const VecX& value, const VecX& lower, const VecX& upper) {
  VecX g = VecX::Zero(value.size());
  for (int i = 0; i < value.size(); ++i) {
    if (value[i] > upper[i])
      g[i] = 2.0 * (value[i] - upper[i]);
    else if (value[i] < lower[i])
      g[i] = -2.0 * (lower[i] - value[i]);
  }
  return g;
}

VecX barrier_hessian_diag(const VecX& value, const VecX& lower,
                          const VecX& upper) {
  VecX h = VecX::Zero(value.size());
  for (int i = 0; i < value.size(); ++i)
    if (value[i] > upper[i] || value[i] < lower[i]) h[i] = 2.0;
  return h;
}

OcpProblem::OcpProblem(const RobotModel& model, int N, double dt,
                       std::vector<ReferenceSample> refs, CostWeights weights,
                       double barrier_margin)
    : model_(&model), N_(N), dt_(dt), refs_(std::move(refs)), weights_(weights) {
  if (N_ < 1) throw std::invalid_argument("horizon N must be >= 1");
  if (!(dt_ > 0.0)) throw std::invalid_argument("dt must be > 0");
  if (static_cast<int>(refs_.size()) != N_ + 1)
    throw std::invalid_argument("need N+1 reference samples");
  weights_.validate();
  const int n = model.nq();
  x_lower_.resize(2 * n);
  x_upper_.resize(2 * n);
  x_lower_ << model.q_min().array() + barrier_margin,
      model.v_min().array() + barrier_margin;
  x_upper_ << model.q_max().array() - barrier_margin,
      model.v_max().array() - barrier_margin;
  u_lower_ = model.u_min().array() + barrier_margin;
  u_upper_ = model.u_max().array() - barrier_margin;
}

void OcpProblem::set_references(std::vector<ReferenceSample> refs) {
  if (static_cast<int>(refs.size()) != N_ + 1)
    throw std::invalid_argument("need N+1 reference samples");
  refs_ = std::move(refs);
}

double OcpProblem::running_cost(int k, const VecX& x, const VecX& u) const {
  if (k < 0 || k >= N_) throw std::out_of_range("stage index");
  if (x.size() != nx() || u.size() != nu())
    throw std::invalid_argument("state/control dimension mismatch");
  const int n = model_->nq();
  const VecX q = x.head(n);
  const VecX v = x.tail(n);
  const ReferenceSample& ref = refs_[k];
  const EePose pose = forward_kinematics(*model_, q);
  double cost = weights_.w_pos * (pose.p - ref.p_des).squaredNorm();
  cost += weights_.w_rot * (pose.R - ref.R_des).squaredNorm();
  cost += weights_.w_tau * u.squaredNorm();
  cost += weights_.w_v * v.squaredNorm();
  cost += weights_.w_lim_tau * barrier(u, u_lower_, u_upper_);
  cost += weights_.w_lim_x * barrier(x, x_lower_, x_upper_);
  return cost;
}

double OcpProblem::terminal_cost(const VecX& x) const {
  const VecX q = x.head(model_->nq());
  const EePose pose = forward_kinematics(*model_, q);
  return weights_.w_pos_terminal() * (pose.p - refs_[N_].p_des).squaredNorm();
}

StageDerivatives OcpProblem::cost_derivatives(int k, const VecX& x,
                                              const VecX& u) const {
  if (k < 0 || k >= N_) throw std::out_of_range("stage index");
  const int n = model_->nq();
  const int nxd = 2 * n;
  const VecX q = x.head(n);
  const VecX v = x.tail(n);
  const ReferenceSample& ref = refs_[k];

  StageDerivatives d;
  d.lx = VecX::Zero(nxd);
  d.lu = VecX::Zero(n);
  d.lxx = MatX::Zero(nxd, nxd);
  d.luu = MatX::Zero(n, n);
  d.lux = MatX::Zero(n, nxd);

  const EePose pose = forward_kinematics(*model_, q);
  const auto J = frame_jacobian(*model_, q);
  const MatX Jlin = J.topRows(3);
  const MatX Jang = J.bottomRows(3);

  // Position tracking (Gauss-Newton on residual p(q) - p_des).
  const Vec3 rp = pose.p - ref.p_des;
  d.lx.head(n) += 2.0 * weights_.w_pos * Jlin.transpose() * rp;
  d.lxx.topLeftCorner(n, n) +=
      2.0 * weights_.w_pos * Jlin.transpose() * Jlin;

  // Rotation tracking: residual vec(R - R_des), column j of R moves as
  // d(R e_j)/dq_i = (Jang_i) x (R e_j).
  if (weights_.w_rot > 0.0) {
    MatX Jr(9, n);  // Jacobian of the stacked rotation residual
    for (int i = 0; i < n; ++i) {
      const Vec3 w = Jang.col(i);
      for (int c = 0; c < 3; ++c)
        Jr.block<3, 1>(3 * c, i) = w.cross(Vec3(pose.R.col(c)));
    }
    VecX rres(9);
    for (int c = 0; c < 3; ++c)
      rres.segment<3>(3 * c) = pose.R.col(c) - ref.R_des.col(c);
    d.lx.head(n) += 2.0 * weights_.w_rot * Jr.transpose() * rres;
    d.lxx.topLeftCorner(n, n) += 2.0 * weights_.w_rot * Jr.transpose() * Jr;
  }

  // Quadratic regularizers.
  d.lx.tail(n) += 2.0 * weights_.w_v * v;
  d.lxx.bottomRightCorner(n, n) +=
      2.0 * weights_.w_v * MatX::Identity(n, n);
  d.lu += 2.0 * weights_.w_tau * u;
  d.luu += 2.0 * weights_.w_tau * MatX::Identity(n, n);

  // Barriers (exact quadratics outside the bounds).
  d.lu += weights_.w_lim_tau * barrier_gradient(u, u_lower_, u_upper_);
  d.luu += weights_.w_lim_tau *
           MatX(barrier_hessian_diag(u, u_lower_, u_upper_).asDiagonal());
  d.lx += weights_.w_lim_x * barrier_gradient(x, x_lower_, x_upper_);
  d.lxx += weights_.w_lim_x *
           MatX(barrier_hessian_diag(x, x_lower_, x_upper_).asDiagonal());
  return d;
}

StageDerivatives OcpProblem::stage_derivatives(int k, const VecX& x,
                                               const VecX& u) const {
  StageDerivatives d = cost_derivatives(k, x, u);
  d.lx *= dt_;
  d.lu *= dt_;
  d.lxx *= dt_;
  d.luu *= dt_;
  d.lux *= dt_;
  return d;
}

void OcpProblem::terminal_derivatives(const VecX& x, VecX& lx, MatX& lxx) const {
  const int n = model_->nq();
  const VecX q = x.head(n);
  const EePose pose = forward_kinematics(*model_, q);
  const MatX Jlin = frame_jacobian(*model_, q).topRows(3);
  const Vec3 rp = pose.p - refs_[N_].p_des;
  lx = VecX::Zero(2 * n);
  lxx = MatX::Zero(2 * n, 2 * n);
  const double w = weights_.w_pos_terminal();
  lx.head(n) = 2.0 * w * Jlin.transpose() * rp;
  lxx.topLeftCorner(n, n) = 2.0 * w * Jlin.transpose() * Jlin;
}

VecX OcpProblem::dynamics(int, const VecX& x, const VecX& u) const {
  const int n = model_->nq();
  const JointState next =
      step(*model_, JointState{x.head(n), x.tail(n)}, u, dt_);
  VecX out(2 * n);
  out << next.q, next.v;
  return out;
}

DynamicsDerivatives OcpProblem::dynamics_derivatives(int, const VecX& x,
                                                     const VecX& u) const {
  // Partially analytic: da/du = M^-1 exactly, da/dv from finite differences
  // of the bias recursion alone, da/dq from finite differences of the full
  // joint-space residual M(q) a + b(q, v) at frozen a. Validated against the
  // all-finite-difference path in tests.
  const int n = model_->nq();
  const VecX q = x.head(n);
  const VecX v = x.tail(n);
  const MatX M = mass_matrix(*model_, q);
  Eigen::LLT<MatX> llt(M);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("mass matrix is not positive-definite");
  const VecX a0 = llt.solve(u - bias_forces(*model_, {q, v}));

  const double h = 1e-6;
  MatX dres_dq(n, n), dbias_dv(n, n);
  VecX qp = q, vp = v;
  for (int i = 0; i < n; ++i) {
    qp[i] = q[i] + h;
    const VecX rp = inverse_dynamics(*model_, qp, v, a0);
    qp[i] = q[i] - h;
    const VecX rm = inverse_dynamics(*model_, qp, v, a0);
    qp[i] = q[i];
    dres_dq.col(i) = (rp - rm) / (2.0 * h);

    vp[i] = v[i] + h;
    const VecX bp = inverse_dynamics(*model_, q, vp, VecX::Zero(n));
    vp[i] = v[i] - h;
    const VecX bm = inverse_dynamics(*model_, q, vp, VecX::Zero(n));
    vp[i] = v[i];
    dbias_dv.col(i) = (bp - bm) / (2.0 * h);
  }
  const MatX da_dq = -llt.solve(dres_dq);
  const MatX da_dv = -llt.solve(dbias_dv);
  const MatX da_du = llt.solve(MatX::Identity(n, n));

  DynamicsDerivatives d;
  d.fx = MatX::Zero(2 * n, 2 * n);
  d.fu = MatX::Zero(2 * n, n);
  const MatX I = MatX::Identity(n, n);
  // v+ = v + a dt; q+ = q + v+ dt (semi-implicit Euler).
  d.fx.topLeftCorner(n, n) = I + dt_ * dt_ * da_dq;
  d.fx.topRightCorner(n, n) = dt_ * I + dt_ * dt_ * da_dv;
  d.fx.bottomLeftCorner(n, n) = dt_ * da_dq;
  d.fx.bottomRightCorner(n, n) = I + dt_ * da_dv;
  d.fu.topRows(n) = dt_ * dt_ * da_du;
  d.fu.bottomRows(n) = dt_ * da_du;
  return d;
}

DynamicsDerivatives OcpProblem::dynamics_derivatives_fd(const VecX& x,
                                                        const VecX& u) const {
  const int nxd = nx();
  const int nud = nu();
  const double h = 1e-6;
  DynamicsDerivatives d;
  d.fx.resize(nxd, nxd);
  d.fu.resize(nxd, nud);
  VecX xp = x, up = u;
  for (int i = 0; i < nxd; ++i) {
    xp[i] = x[i] + h;
    const VecX fp = dynamics(0, xp, u);
    xp[i] = x[i] - h;
    const VecX fm = dynamics(0, xp, u);
    xp[i] = x[i];
    d.fx.col(i) = (fp - fm) / (2.0 * h);
  }
  for (int i = 0; i < nud; ++i) {
    up[i] = u[i] + h;
    const VecX fp = dynamics(0, x, up);
    up[i] = u[i] - h;
    const VecX fm = dynamics(0, x, up);
    up[i] = u[i];
    d.fu.col(i) = (fp - fm) / (2.0 * h);
  }
  return d;
}

}  // namespace twintune
