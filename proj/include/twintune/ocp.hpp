#pragma once

#include "twintune/dynamics.hpp"
#include "twintune/trajectory.hpp"

namespace twintune {

struct CostWeights {
  double w_pos = 1e5;
  double w_rot = 1e-4;
  double w_tau = 1e-2;
  double w_v = 1e-3;
  double w_lim_tau = 1e1;
  double w_lim_x = 1e1;

  double w_pos_terminal() const { return w_pos; }  // coupled by construction
  void validate() const;
};

/// Sum of one-sided quadratic penalties outside [lower, upper]; zero strictly
/// inside, C1 at the bounds.
double barrier(const VecX& value, const VecX& lower, const VecX& upper);
/// d(barrier)/d(value).
VecX barrier_gradient(const VecX& value, const VecX& lower, const VecX& upper);
/// Diagonal of the (exact) barrier Hessian.
VecX barrier_hessian_diag(const VecX& value, const VecX& lower, const VecX& upper);

struct StageDerivatives {
  VecX lx, lu;
  MatX lxx, luu, lux;
};

struct DynamicsDerivatives {
  MatX fx, fu;
};

/// Abstract discrete-time optimal-control problem as consumed by the DDP
/// solver. Stage costs are already integration-scaled (see OcpProblem).
class StageProblem {
 public:
  virtual ~StageProblem() = default;
  virtual int nx() const = 0;
  virtual int nu() const = 0;
  virtual int horizon() const = 0;
  virtual double stage_cost(int k, const VecX& x, const VecX& u) const = 0;
  virtual double terminal_value(const VecX& x) const = 0;
  virtual StageDerivatives stage_derivatives(int k, const VecX& x,
                                             const VecX& u) const = 0;
  virtual void terminal_derivatives(const VecX& x, VecX& lx, MatX& lxx) const = 0;
  virtual VecX dynamics(int k, const VecX& x, const VecX& u) const = 0;
  virtual DynamicsDerivatives dynamics_derivatives(int k, const VecX& x,
                                                   const VecX& u) const = 0;
};

/// Discretized tracking OCP: running cost
///   w_pos |p(q)-p_des|^2 + w_rot |R(q)-R_des|^2_F + w_tau |u|^2 + w_v |v|^2
///   + w_lim_tau G(u) + w_lim_x G(x),
/// scaled by dt in the stage sum, plus a terminal position term. Derivatives
/// are Gauss-Newton for the tracking residuals and exact for the quadratic
/// regularizers and barriers.
class OcpProblem : public StageProblem {
 public:
  OcpProblem(const RobotModel& model, int N, double dt,
             std::vector<ReferenceSample> refs, CostWeights weights,
             double barrier_margin = 0.0);

  int nx() const override { return model_->nx(); }
  int nu() const override { return model_->nu(); }
  int horizon() const override { return N_; }
  double dt() const { return dt_; }
  const RobotModel& model() const { return *model_; }
  const CostWeights& weights() const { return weights_; }
  const std::vector<ReferenceSample>& references() const { return refs_; }
  void set_references(std::vector<ReferenceSample> refs);

  /// Unscaled Eq.-style running cost l_k(x, u).
  double running_cost(int k, const VecX& x, const VecX& u) const;
  double terminal_cost(const VecX& x) const;
  /// Derivatives of running_cost (unscaled).
  StageDerivatives cost_derivatives(int k, const VecX& x, const VecX& u) const;

  double stage_cost(int k, const VecX& x, const VecX& u) const override {
    return running_cost(k, x, u) * dt_;
  }
  double terminal_value(const VecX& x) const override { return terminal_cost(x); }
  StageDerivatives stage_derivatives(int k, const VecX& x,
                                     const VecX& u) const override;
  void terminal_derivatives(const VecX& x, VecX& lx, MatX& lxx) const override;
  VecX dynamics(int k, const VecX& x, const VecX& u) const override;
  DynamicsDerivatives dynamics_derivatives(int k, const VecX& x,
                                           const VecX& u) const override;

  /// Pure finite-difference transition Jacobians, kept as the oracle for the
  /// partially analytic path used by dynamics_derivatives.
  DynamicsDerivatives dynamics_derivatives_fd(const VecX& x, const VecX& u) const;

 private:
  const RobotModel* model_;
  int N_;
  double dt_;
  std::vector<ReferenceSample> refs_;
  CostWeights weights_;
  VecX x_lower_, x_upper_, u_lower_, u_upper_;
};

}  // namespace twintune
