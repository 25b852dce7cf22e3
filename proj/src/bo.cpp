#include "twintune/bo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <thread>

namespace twintune {

namespace {

double norm_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Halton sequence point (prime bases), offset for seed-dependent scrambling.
VecX halton_point(int index, int dim) {
  static constexpr int primes[] = {2,  3,  5,  7,  11, 13, 17, 19,
                                   23, 29, 31, 37, 41, 43, 47, 53};
  if (dim > 16) throw std::invalid_argument("halton dimension too large");
  VecX out(dim);
  for (int d = 0; d < dim; ++d) {
    const int base = primes[d];
    double f = 1.0, x = 0.0;
    int i = index;
    while (i > 0) {
      f /= base;
      x += f * (i % base);
      i /= base;
    }
    out[d] = x;
  }
  return out;
}

}  // namespace

void ParamSpace::validate() const {
  if (lower.size() != upper.size() ||
      static_cast<size_t>(lower.size()) != log_scale.size())
    throw std::invalid_argument("inconsistent parameter space");
  for (int d = 0; d < dim(); ++d) {
    if (!(lower[d] < upper[d]))
      throw std::invalid_argument("parameter bounds must satisfy lower < upper");
    if (log_scale[d] && !(lower[d] > 0.0))
      throw std::invalid_argument("log-scaled bounds must be positive");
  }
}

VecX ParamSpace::normalize(const VecX& raw) const {
  VecX unit(dim());
  for (int d = 0; d < dim(); ++d) {
    if (log_scale[d])
      unit[d] = (std::log(raw[d]) - std::log(lower[d])) /
                (std::log(upper[d]) - std::log(lower[d]));
    else
      unit[d] = (raw[d] - lower[d]) / (upper[d] - lower[d]);
  }
  return unit;
}

VecX ParamSpace::denormalize(const VecX& unit) const {
  VecX raw(dim());
  for (int d = 0; d < dim(); ++d) {
    if (log_scale[d])
      raw[d] = std::exp(std::log(lower[d]) +
                        unit[d] * (std::log(upper[d]) - std::log(lower[d])));
    else
      raw[d] = lower[d] + unit[d] * (upper[d] - lower[d]);
  }
  return raw;
}

bool ParamSpace::contains(const VecX& raw) const {
  for (int d = 0; d < dim(); ++d)
    if (raw[d] < lower[d] - 1e-12 || raw[d] > upper[d] + 1e-12) return false;
  return true;
}

ParamSpace default_param_space() {
  ParamSpace space;
  space.labels = {"w_pos", "w_rot", "w_tau", "w_v",  "K_p",   "K_d",
                  "K_pc_x", "K_pc_y", "K_pc_z", "K_dc_x", "K_dc_y", "K_dc_z"};
  space.lower.resize(12);
  space.upper.resize(12);
  space.log_scale.assign(12, true);
  const CostWeights defaults;
  const double weight_defaults[4] = {defaults.w_pos, defaults.w_rot,
                                     defaults.w_tau, defaults.w_v};
  for (int d = 0; d < 4; ++d) {
    space.lower[d] = weight_defaults[d] * 1e-2;
    space.upper[d] = weight_defaults[d] * 1e2;
  }
  for (int d = 4; d < 12; ++d) {
    space.lower[d] = 0.01;
    space.upper[d] = 100.0;
  }
  space.validate();
  return space;
}

void CampaignConfig::validate() const {
  if (n0 < 2) throw std::invalid_argument("n0 must be >= 2");
  if (n_max <= n0) throw std::invalid_argument("n_max must exceed n0");
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("alpha must be in [0, 1]");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  episode.validate();
}

MatX latin_hypercube(int dim, int n, uint64_t seed) {
  if (n < 1 || dim < 1) throw std::invalid_argument("bad LHS shape");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  MatX out(n, dim);
  std::vector<int> strata(n);
  for (int d = 0; d < dim; ++d) {
    for (int i = 0; i < n; ++i) strata[i] = i;
    std::shuffle(strata.begin(), strata.end(), rng);
    for (int i = 0; i < n; ++i)
      out(i, d) = (strata[i] + unif(rng)) / n;
  }
  return out;
}

double expected_improvement(double mean, double stddev, double best) {
  if (stddev < 0.0) throw std::invalid_argument("stddev must be >= 0");
  const double improve = best - mean;
  if (stddev == 0.0) return std::max(improve, 0.0);
  const double z = improve / stddev;
  return improve * norm_cdf(z) + stddev * norm_pdf(z);
}

VecX maximize_acquisition(const MixtureGp& gp, double best_standardized,
                          int dim, uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int offset = static_cast<int>(rng() % 4096) + 1;

  auto score = [&](const VecX& x) {
    const GpPrediction p = gp.predict(x);
    return expected_improvement(p.mean, std::sqrt(p.variance),
                                best_standardized);
  };

  constexpr int kCandidates = 1024;
  std::vector<std::pair<double, VecX>> scored;
  scored.reserve(kCandidates);
  double best_var = -1.0;
  VecX best_var_point;
  for (int i = 0; i < kCandidates; ++i) {
    VecX x = halton_point(offset + i, dim);
    const GpPrediction p = gp.predict(x);
    const double ei =
        expected_improvement(p.mean, std::sqrt(p.variance), best_standardized);
    scored.emplace_back(ei, std::move(x));
    if (p.variance > best_var) {
      best_var = p.variance;
      best_var_point = scored.back().second;
    }
  }
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  if (scored.front().first <= 1e-15) return best_var_point;  // pure exploration

  // Coordinate descent refinement on the leading candidates.
  double best_ei = scored.front().first;
  VecX best_x = scored.front().second;
  const int restarts = std::min<int>(8, scored.size());
  for (int s = 0; s < restarts; ++s) {
    VecX x = scored[s].second;
    double fx = scored[s].first;
    double h = 0.1;
    for (int round = 0; round < 12; ++round) {
      bool improved = false;
      for (int d = 0; d < dim; ++d) {
        for (double dir : {+1.0, -1.0}) {
          VecX trial = x;
          trial[d] = std::clamp(x[d] + dir * h, 0.0, 1.0);
          const double ft = score(trial);
          if (ft > fx) {
            fx = ft;
            x = trial;
            improved = true;
          }
        }
      }
      if (!improved) h *= 0.5;
      if (h < 1e-4) break;
    }
    if (fx > best_ei) {
      best_ei = fx;
      best_x = x;
    }
  }
  return best_x;
}

KernelHyperparams vanilla_fit(const TrialDataset& data, uint64_t seed) {
  data.validate();
  const int d = data.dim();
  SaasDensity density(data);  // reused for its marginal-likelihood gradient

  // Objective: LML + log-normal prior on each lengthscale + prior on sigma2.
  // Parameterized as z = [log sigma2, log tau (unused, pinned), log rho_d];
  // the SAAS prior terms are replaced by the log-normal below.
  auto objective = [&](const VecX& w, VecX& grad) -> double {
    VecX z(2 + d);
    z[0] = w[0];
    z[1] = 0.0;
    z.tail(d) = -w.tail(d);  // log rho = -log lengthscale
    VecX gz;
    double lp = density.logp_grad(z, gz);
    // Strip the SAAS priors, keep the likelihood + sigma2 prior.
    const double tau = 1.0;
    for (int i = 0; i < d; ++i) {
      const double rho = std::exp(z[2 + i]);
      const double q = rho * rho / (tau * tau);
      lp -= std::log(2.0 / std::numbers::pi) - std::log(tau) -
            std::log1p(q) + z[2 + i];
      gz[2 + i] -= 1.0 - 2.0 * q / (1.0 + q);
    }
    {
      const double t = std::exp(z[1]);
      const double q = (t / 0.1) * (t / 0.1);
      lp -= std::log(2.0 / std::numbers::pi) - std::log(0.1) - std::log1p(q) +
            z[1];
    }
    // log-normal prior: log ell ~ N(0, 1.5^2)
    for (int i = 0; i < d; ++i) {
      const double log_ell = w[1 + i];
      lp += -0.5 * log_ell * log_ell / (1.5 * 1.5);
      gz[2 + i] += log_ell / (1.5 * 1.5);  // d/d(log rho) = -d/d(log ell)
    }
    grad.resize(1 + d);
    grad[0] = gz[0];
    grad.tail(d) = -gz.tail(d);
    return lp;
  };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.5);
  double best_lp = -std::numeric_limits<double>::infinity();
  VecX best_w;
  for (int start = 0; start < 4; ++start) {
    VecX w = VecX::Zero(1 + d);
    if (start > 0)
      for (int i = 0; i < w.size(); ++i) w[i] = normal(rng);
    // Gradient ascent with backtracking.
    VecX grad;
    double lp;
    try {
      lp = objective(w, grad);
    } catch (const std::runtime_error&) {
      continue;
    }
    double step = 0.1;
    for (int it = 0; it < 200; ++it) {
      VecX trial = w + step * grad;
      trial = trial.cwiseMax(-8.0).cwiseMin(8.0);
      VecX tgrad;
      double tlp;
      try {
        tlp = objective(trial, tgrad);
      } catch (const std::runtime_error&) {
        step *= 0.5;
        continue;
      }
      if (tlp > lp) {
        w = trial;
        lp = tlp;
        grad = tgrad;
        step *= 1.25;
      } else {
        step *= 0.5;
      }
      if (step < 1e-10 || grad.norm() < 1e-8) break;
    }
    if (lp > best_lp) {
      best_lp = lp;
      best_w = w;
    }
  }

  KernelHyperparams hyper;
  if (best_w.size() == 0) {
    // Optimizer never produced a finite value; fall back to unit scales.
    hyper.sigma2 = 1.0;
    hyper.lengthscales = VecX::Ones(d);
    return hyper;
  }
  hyper.sigma2 = std::exp(best_w[0]);
  hyper.lengthscales = best_w.tail(d).array().exp();
  return hyper;
}

namespace {

int64_t now_or_zero(bool deterministic) {
  if (deterministic) return 0;
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

CampaignResult run_campaign_with(const CampaignConfig& config,
                                 const ParamSpace& space, const EvalFn& eval,
                                 const TrialSink& sink) {
  space.validate();
  const int d = space.dim();

  CampaignResult result;
  TrialDataset data;
  auto record_trial = [&](int index, const VecX& unit, const std::string& phase,
                          double y, const EpisodeMetrics& metrics) {
    TrialRecord rec;
    rec.index = index;
    rec.theta_unit = unit;
    rec.theta_raw = space.denormalize(unit);
    rec.y = y;
    rec.metrics = metrics;
    rec.phase = phase;
    rec.timestamp = now_or_zero(config.episode.deterministic_time);
    data.append(unit, y);
    result.trials.push_back(rec);
    if (sink) sink(rec);
  };

  // Phase 1: Latin Hypercube initialization, optionally in parallel.
  const MatX lhs = latin_hypercube(d, config.n0, config.seed);
  {
    std::vector<double> ys(config.n0);
    std::vector<EpisodeMetrics> ms(config.n0);
    auto eval_range = [&](int begin, int end) {
      for (int i = begin; i < end; ++i) {
        const VecX raw = space.denormalize(lhs.row(i).transpose());
        auto [y, metrics] = eval(raw);
        ys[i] = y;
        ms[i] = metrics;
      }
    };
    const int workers = std::min(config.workers, config.n0);
    if (workers <= 1) {
      eval_range(0, config.n0);
    } else {
      std::vector<std::thread> pool;
      const int chunk = (config.n0 + workers - 1) / workers;
      for (int w = 0; w < workers; ++w)
        pool.emplace_back(eval_range, w * chunk,
                          std::min(config.n0, (w + 1) * chunk));
      for (auto& t : pool) t.join();
    }
    for (int i = 0; i < config.n0; ++i)
      record_trial(i, lhs.row(i).transpose(), "init", ys[i], ms[i]);
  }

  double best_y = data.y.minCoeff();
  int since_improvement = 0;

  // Phase 2: fit surrogate, maximize EI, evaluate, repeat.
  for (int t = config.n0; t < config.n_max; ++t) {
    PosteriorSamples posterior;
    if (config.method == BoMethod::kSaasbo) {
      posterior = sample_hyperparams(data, config.mcmc.warmup,
                                     config.mcmc.samples, config.mcmc.thin,
                                     config.seed + 0x5eed + t);
    } else {
      posterior.samples.push_back(vanilla_fit(data, config.seed + t));
      posterior.tau_saas.push_back(0.0);
    }
    if (config.method == BoMethod::kSaasbo) {
      // Per-dimension medians, exported for the campaign report.
      result.lengthscale_medians.resize(d);
      for (int dd = 0; dd < d; ++dd) {
        std::vector<double> ells;
        ells.reserve(posterior.samples.size());
        for (const auto& h : posterior.samples)
          ells.push_back(h.lengthscales[dd]);
        std::nth_element(ells.begin(), ells.begin() + ells.size() / 2,
                         ells.end());
        result.lengthscale_medians[dd] = ells[ells.size() / 2];
      }
    }

    const MixtureGp gp(posterior, data);
    const double best_std = (best_y - data.y_mean()) / data.y_std();
    const VecX next =
        maximize_acquisition(gp, best_std, d, config.seed + 0xac0 + t);

    auto [y, metrics] = eval(space.denormalize(next));
    record_trial(t, next, "bo", y, metrics);

    if (y < best_y - 1e-6 * std::abs(best_y)) {
      best_y = y;
      since_improvement = 0;
    } else if (t > config.n0) {
      // The first BO trial establishes the incumbent for patience counting.
      ++since_improvement;
    }
    if (since_improvement >= config.patience) {
      result.early_stopped = true;
      break;
    }
  }

  int best_idx = 0;
  for (size_t i = 1; i < result.trials.size(); ++i)
    if (result.trials[i].y < result.trials[best_idx].y)
      best_idx = static_cast<int>(i);
  result.theta_best = result.trials[best_idx].theta_raw;
  result.y_best = result.trials[best_idx].y;
  return result;
}

CampaignResult run_campaign(const CampaignConfig& config,
                            const ParamSpace& space, const TrialSink& sink) {
  config.validate();
  if (space.dim() != kParamDim)
    throw std::invalid_argument("campaign parameter space must be 12-dim");

  // Baseline episode with the default parameters normalizes the objective.
  const EpisodeMetrics baseline = run_episode(config.episode);
  if (baseline.failed)
    throw std::runtime_error("baseline episode failed; cannot normalize J");

  auto eval = [&](const VecX& raw) {
    return evaluate_params(raw, config.episode, baseline, config.alpha);
  };
  CampaignResult result = run_campaign_with(config, space, eval, sink);
  result.baseline = baseline;
  return result;
}

}  // namespace twintune
