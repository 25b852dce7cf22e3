#pragma once

#include <functional>

#include "twintune/gp.hpp"
#include "twintune/sim.hpp"

namespace twintune {

struct ParamSpace {
  VecX lower, upper;                // raw units
  std::vector<bool> log_scale;
  std::vector<std::string> labels;

  int dim() const { return static_cast<int>(lower.size()); }
  void validate() const;
  VecX normalize(const VecX& raw) const;    // raw -> [0,1]^d
  VecX denormalize(const VecX& unit) const;
  bool contains(const VecX& raw) const;
};

/// Tuning bounds for the 12-dim theta: weights span two decades either side
/// of their defaults, gains span [0.01, 100], all log-scaled.
ParamSpace default_param_space();

enum class BoMethod { kSaasbo, kVanilla };

struct McmcSettings {
  int warmup = 1024;
  int samples = 1024;
  int thin = 16;
};

struct CampaignConfig {
  int n0 = 100;
  int n_max = 300;
  int patience = 100;
  double alpha = 0.8;
  uint64_t seed = 0;
  BoMethod method = BoMethod::kSaasbo;
  McmcSettings mcmc;
  int workers = 1;
  EpisodeConfig episode;

  void validate() const;
};

struct TrialRecord {
  int index = 0;
  VecX theta_raw;
  VecX theta_unit;
  double y = 0.0;
  EpisodeMetrics metrics;
  std::string phase;  // "init" or "bo"
  int64_t timestamp = 0;  // unix seconds; 0 in deterministic mode
};

struct CampaignResult {
  VecX theta_best;      // raw units
  double y_best = 0.0;
  std::vector<TrialRecord> trials;
  EpisodeMetrics baseline;
  VecX lengthscale_medians;  // per dimension, from the last SAAS fit (if any)
  bool early_stopped = false;
};

/// One sample per axis stratum per dimension, permuted and jittered;
/// returned in the unit cube (log-scaled dimensions are therefore stratified
/// in log space). Rows are samples.
MatX latin_hypercube(int dim, int n, uint64_t seed);

/// Minimization EI: (f* - mu) Phi(z) + sigma phi(z), z = (f* - mu) / sigma.
double expected_improvement(double mean, double stddev, double best);

/// Multi-start EI maximization over the mixture posterior: 1024 quasi-random
/// candidates, top 8 refined by coordinate descent. Falls back to the
/// maximum-variance candidate when EI vanishes everywhere.
VecX maximize_acquisition(const MixtureGp& gp, double best_standardized,
                          int dim, uint64_t seed);

/// Point-estimate hyperparameters by maximizing the log marginal likelihood
/// with log-normal lengthscale priors (no SAAS sparsity), multi-start.
KernelHyperparams vanilla_fit(const TrialDataset& data, uint64_t seed = 0);

using TrialSink = std::function<void(const TrialRecord&)>;

/// Evaluates one raw-units parameter vector; metrics may be default for
/// synthetic objectives.
using EvalFn = std::function<std::pair<double, EpisodeMetrics>(const VecX&)>;

/// Algorithm core (LHS init + surrogate/EI loop) over an arbitrary objective;
/// used directly for synthetic studies.
CampaignResult run_campaign_with(const CampaignConfig& config,
                                 const ParamSpace& space, const EvalFn& eval,
                                 const TrialSink& sink = nullptr);

/// Episode-backed campaign: runs the default-parameter baseline first and
/// scores every trial with sim::evaluate_params.
CampaignResult run_campaign(const CampaignConfig& config,
                            const ParamSpace& space,
                            const TrialSink& sink = nullptr);

}  // namespace twintune
