#include "twintune/gp.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "twintune/nuts.hpp"

namespace twintune {

namespace {

constexpr double kSqrt5 = 2.2360679774997896964091736687747;
constexpr double kTauHyperScale = 0.1;   // half-Cauchy scale on tau_saas
constexpr double kLogSigma2Std = 3.0;    // log-normal prior width on sigma2

double half_cauchy_log(double x, double scale) {
  // density 2 / (pi * scale * (1 + (x/scale)^2)) on x > 0
  return std::log(2.0 / std::numbers::pi) - std::log(scale) -
         std::log1p((x / scale) * (x / scale));
}

Eigen::LLT<MatX> jittered_llt(MatX K) {
  double jitter = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::LLT<MatX> llt(K);
    if (llt.info() == Eigen::Success) return llt;
    jitter = jitter == 0.0 ? 1e-12 : jitter * 10.0;
    if (jitter > 1e-6) break;
    K.diagonal().array() += jitter;
  }
  throw std::runtime_error("kernel matrix failed Cholesky even with jitter");
}

}  // namespace

void TrialDataset::append(const VecX& x, double value) {
  if (X.rows() > 0 && x.size() != X.cols())
    throw std::invalid_argument("input dimension mismatch");
  if ((x.array() < -1e-9).any() || (x.array() > 1.0 + 1e-9).any())
    throw std::invalid_argument("inputs must lie in the unit hypercube");
  X.conservativeResize(X.rows() + 1, X.rows() == 0 ? x.size() : X.cols());
  X.row(X.rows() - 1) = x.transpose();
  y.conservativeResize(y.size() + 1);
  y[y.size() - 1] = value;
}

void TrialDataset::validate() const {
  if (X.rows() != y.size())
    throw std::invalid_argument("one output per input required");
  if (X.rows() < 2) throw std::invalid_argument("need >= 2 points to fit");
}

double TrialDataset::y_mean() const { return y.size() ? y.mean() : 0.0; }

double TrialDataset::y_std() const {
  if (y.size() < 2) return 1.0;
  const double m = y_mean();
  const double var = (y.array() - m).square().sum() / (y.size() - 1);
  return std::max(std::sqrt(var), 1e-12);
}

VecX TrialDataset::standardized_y() const {
  return (y.array() - y_mean()) / y_std();
}

void KernelHyperparams::validate() const {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be > 0");
  if ((lengthscales.array() <= 0.0).any())
    throw std::invalid_argument("lengthscales must be > 0");
}

double matern52(const VecX& a, const VecX& b, const KernelHyperparams& hyper) {
  if (a.size() != b.size() || a.size() != hyper.lengthscales.size())
    throw std::invalid_argument("dimension mismatch in kernel evaluation");
  const double r =
      std::sqrt(((a - b).array() / hyper.lengthscales.array()).square().sum());
  return hyper.sigma2 * (1.0 + kSqrt5 * r + (5.0 / 3.0) * r * r) *
         std::exp(-kSqrt5 * r);
}

MatX kernel_matrix(const MatX& X, const KernelHyperparams& hyper) {
  const int n = static_cast<int>(X.rows());
  MatX K(n, n);
  for (int i = 0; i < n; ++i) {
    K(i, i) = hyper.sigma2 + hyper.noise;
    for (int j = 0; j < i; ++j) {
      K(i, j) = matern52(X.row(i), X.row(j), hyper);
      K(j, i) = K(i, j);
    }
  }
  return K;
}

FittedGp::FittedGp(const TrialDataset& data, const KernelHyperparams& hyper)
    : X_(data.X), hyper_(hyper) {
  data.validate();
  hyper.validate();
  llt_ = jittered_llt(kernel_matrix(X_, hyper_));
  alpha_ = llt_.solve(data.standardized_y());
}

GpPrediction FittedGp::predict(const VecX& query) const {
  const int n = static_cast<int>(X_.rows());
  VecX k_star(n);
  for (int i = 0; i < n; ++i) k_star[i] = matern52(X_.row(i), query, hyper_);
  GpPrediction out;
  out.mean = k_star.dot(alpha_);
  const VecX w = llt_.solve(k_star);
  out.variance = std::max(hyper_.sigma2 - k_star.dot(w), 0.0);
  return out;
}

GpPrediction gp_posterior(const TrialDataset& data,
                          const KernelHyperparams& hyper, const VecX& query) {
  return FittedGp(data, hyper).predict(query);
}

SaasDensity::SaasDensity(const TrialDataset& data)
    : n_(data.size()), d_(data.dim()), y_(data.standardized_y()) {
  data.validate();
  sq_dist_.reserve(d_);
  for (int d = 0; d < d_; ++d) {
    MatX D(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        const double diff = data.X(i, d) - data.X(j, d);
        D(i, j) = diff * diff;
      }
    sq_dist_.push_back(std::move(D));
  }
}

KernelHyperparams SaasDensity::to_hyperparams(const VecX& z) {
  KernelHyperparams h;
  h.sigma2 = std::exp(z[0]);
  h.lengthscales = (-z.tail(z.size() - 2)).array().exp();
  return h;
}

double SaasDensity::logp(const VecX& z) const {
  VecX grad;
  return logp_grad(z, grad);
}

double SaasDensity::logp_grad(const VecX& z, VecX& grad) const {
  if (z.size() != dim()) throw std::invalid_argument("SAAS parameter size");
  const double sigma2 = std::exp(z[0]);
  const double tau = std::exp(z[1]);
  const VecX rho = z.tail(d_).array().exp();  // inverse lengthscales
  grad = VecX::Zero(dim());

  // Scaled squared distances and the Matern-5/2 Gram matrix.
  MatX R2 = MatX::Zero(n_, n_);
  for (int d = 0; d < d_; ++d) R2 += (rho[d] * rho[d]) * sq_dist_[d];
  const MatX R = R2.array().sqrt();
  const MatX E = (-kSqrt5 * R.array()).exp();
  const MatX G =
      (1.0 + kSqrt5 * R.array() + (5.0 / 3.0) * R2.array()) * E.array();
  MatX K = sigma2 * G;
  K.diagonal().array() += 1e-6;

  const Eigen::LLT<MatX> llt = jittered_llt(K);
  const VecX alpha = llt.solve(y_);
  const MatX Kinv = llt.solve(MatX::Identity(n_, n_));
  double logdet = 0.0;
  for (int i = 0; i < n_; ++i) logdet += std::log(llt.matrixL()(i, i));
  double lp = -0.5 * y_.dot(alpha) - logdet -
              0.5 * n_ * std::log(2.0 * std::numbers::pi);

  // d(lml)/d(theta) = 0.5 tr((alpha alpha' - K^-1) dK/dtheta)
  const MatX W = alpha * alpha.transpose() - Kinv;
  grad[0] = 0.5 * (W.array() * (sigma2 * G).array()).sum();
  // dK/d(log rho_d) = sigma2 * g'(r)/r * rho_d^2 * Dd, with
  // g'(r)/r = -(5/3)(1 + sqrt5 r) exp(-sqrt5 r), smooth at r = 0.
  const MatX dGfac = (-(5.0 / 3.0) * (1.0 + kSqrt5 * R.array()) * E.array());
  const MatX WdG = W.array() * dGfac.array() * sigma2;
  for (int d = 0; d < d_; ++d)
    grad[2 + d] =
        0.5 * (WdG.array() * ((rho[d] * rho[d]) * sq_dist_[d]).array()).sum();

  // Priors. Half-Cauchy(tau) on each rho_d, sampled as log rho.
  for (int d = 0; d < d_; ++d) {
    const double q = rho[d] * rho[d] / (tau * tau);
    lp += half_cauchy_log(rho[d], tau) + std::log(rho[d]);
    grad[2 + d] += 1.0 - 2.0 * q / (1.0 + q);
    grad[1] += -1.0 + 2.0 * q / (1.0 + q);
  }
  // Half-Cauchy(0.1) hyperprior on tau, log-space.
  {
    const double q = (tau / kTauHyperScale) * (tau / kTauHyperScale);
    lp += half_cauchy_log(tau, kTauHyperScale) + std::log(tau);
    grad[1] += 1.0 - 2.0 * q / (1.0 + q);
  }

  // Log-normal prior on sigma2: log sigma2 ~ N(0, kLogSigma2Std^2).
  lp += -0.5 * z[0] * z[0] / (kLogSigma2Std * kLogSigma2Std);
  grad[0] += -z[0] / (kLogSigma2Std * kLogSigma2Std);

  return lp;
}

double log_posterior_density(const TrialDataset& data,
                             const KernelHyperparams& hyper, double tau_saas) {
  hyper.validate();
  if (!(tau_saas > 0.0)) throw std::invalid_argument("tau_saas must be > 0");
  SaasDensity density(data);
  VecX z(2 + data.dim());
  z[0] = std::log(hyper.sigma2);
  z[1] = std::log(tau_saas);
  z.tail(data.dim()) = -hyper.lengthscales.array().log();
  return density.logp(z);
}

PosteriorSamples sample_hyperparams(const TrialDataset& data, int warmup,
                                    int samples, int thin, uint64_t seed) {
  data.validate();
  if (thin < 1 || samples < 1 || warmup < 1)
    throw std::invalid_argument("invalid MCMC configuration");
  SaasDensity density(data);
  const int d = data.dim();

  LogDensityGrad target = [&density, d](const VecX& z, VecX& grad) -> double {
    try {
      const double lp = density.logp_grad(z, grad);
      if (!std::isfinite(lp) || !grad.allFinite()) {
        grad = VecX::Zero(2 + d);
        return -std::numeric_limits<double>::infinity();
      }
      return lp;
    } catch (const std::runtime_error&) {
      grad = VecX::Zero(2 + d);
      return -std::numeric_limits<double>::infinity();
    }
  };

  VecX init(2 + d);
  init[0] = 0.0;                       // sigma2 = 1
  init[1] = std::log(kTauHyperScale);  // tau at its prior scale
  // Lengthscale init sqrt(d): the conventional high-dimensional default.
  init.tail(d).setConstant(-0.5 * std::log(static_cast<double>(d)));

  NutsConfig config;
  config.warmup = warmup;
  config.samples = samples;
  const NutsResult result = nuts_sample(target, init, config, seed);

  PosteriorSamples out;
  out.divergences = result.divergences;
  out.total_transitions = samples;
  for (int i = thin - 1; i < static_cast<int>(result.draws.size()); i += thin) {
    out.samples.push_back(SaasDensity::to_hyperparams(result.draws[i]));
    out.tau_saas.push_back(SaasDensity::to_tau(result.draws[i]));
  }
  if (out.samples.empty())
    throw std::runtime_error("MCMC produced no retained samples");
  return out;
}

GpPrediction predict_mixture(const PosteriorSamples& samples,
                             const TrialDataset& data, const VecX& query) {
  return MixtureGp(samples, data).predict(query);
}

MixtureGp::MixtureGp(const PosteriorSamples& samples, const TrialDataset& data) {
  if (samples.samples.empty())
    throw std::invalid_argument("empty posterior sample set");
  gps_.reserve(samples.samples.size());
  for (const auto& h : samples.samples) gps_.emplace_back(data, h);
}

GpPrediction MixtureGp::predict(const VecX& query) const {
  double mean = 0.0, second = 0.0;
  for (const auto& gp : gps_) {
    const GpPrediction p = gp.predict(query);
    mean += p.mean;
    second += p.variance + p.mean * p.mean;
  }
  const double m = static_cast<double>(gps_.size());
  mean /= m;
  GpPrediction out;
  out.mean = mean;
  out.variance = std::max(second / m - mean * mean, 0.0);
  return out;
}

}  // namespace twintune
