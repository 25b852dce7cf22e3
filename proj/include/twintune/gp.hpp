#pragma once

#include <cstdint>

#include "twintune/model.hpp"

namespace twintune {

/// Observation set for the surrogate: inputs are normalized to the unit
/// hypercube; outputs are stored raw and standardized on demand.
struct TrialDataset {
  MatX X;  // n x d, rows in [0, 1]^d
  VecX y;  // n raw objective values

  int size() const { return static_cast<int>(X.rows()); }
  int dim() const { return static_cast<int>(X.cols()); }
  void append(const VecX& x, double value);
  void validate() const;

  double y_mean() const;
  double y_std() const;  // >= 1e-12 floor for constant data
  VecX standardized_y() const;
};

struct KernelHyperparams {
  double sigma2 = 1.0;
  VecX lengthscales;          // per dimension, > 0
  double noise = 1e-6;        // fixed
  static constexpr double nu = 2.5;

  void validate() const;
};

struct PosteriorSamples {
  std::vector<KernelHyperparams> samples;
  std::vector<double> tau_saas;   // global shrinkage per sample
  int divergences = 0;
  int total_transitions = 0;
};

double matern52(const VecX& a, const VecX& b, const KernelHyperparams& hyper);

MatX kernel_matrix(const MatX& X, const KernelHyperparams& hyper);

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// Standard GP conditionals on standardized outputs. Escalates Cholesky
/// jitter up to 1e-6 before failing.
GpPrediction gp_posterior(const TrialDataset& data,
                          const KernelHyperparams& hyper, const VecX& query);

/// Factorized GP ready for repeated prediction with fixed hyperparameters.
class FittedGp {
 public:
  FittedGp(const TrialDataset& data, const KernelHyperparams& hyper);
  GpPrediction predict(const VecX& query) const;
  const KernelHyperparams& hyper() const { return hyper_; }

 private:
  MatX X_;
  KernelHyperparams hyper_;
  Eigen::LLT<MatX> llt_;
  VecX alpha_;
};

/// Unconstrained SAAS parameterization z = [log sigma2, log tau,
/// log rho_1..d] with rho_d = 1 / lengthscale_d.
struct SaasDensity {
  explicit SaasDensity(const TrialDataset& data);

  int dim() const { return 2 + d_; }
  double logp(const VecX& z) const;
  double logp_grad(const VecX& z, VecX& grad) const;

  static KernelHyperparams to_hyperparams(const VecX& z);
  static double to_tau(const VecX& z) { return std::exp(z[1]); }

 private:
  int n_, d_;
  VecX y_;                       // standardized outputs
  std::vector<MatX> sq_dist_;    // per-dimension squared distances
};

/// GP log marginal likelihood plus SAAS priors: half-Cauchy(tau) on each
/// inverse lengthscale, half-Cauchy(0.1) hyperprior on tau, log-normal on
/// sigma2; includes the log-space Jacobian terms.
double log_posterior_density(const TrialDataset& data,
                             const KernelHyperparams& hyper, double tau_saas);

PosteriorSamples sample_hyperparams(const TrialDataset& data, int warmup = 1024,
                                    int samples = 1024, int thin = 16,
                                    uint64_t seed = 0);

GpPrediction predict_mixture(const PosteriorSamples& samples,
                             const TrialDataset& data, const VecX& query);

/// Mixture prediction with pre-factorized components (the hot path in the
/// acquisition search).
class MixtureGp {
 public:
  MixtureGp(const PosteriorSamples& samples, const TrialDataset& data);
  GpPrediction predict(const VecX& query) const;
  int components() const { return static_cast<int>(gps_.size()); }

 private:
  std::vector<FittedGp> gps_;
};

}  // namespace twintune
