#include "twintune/nuts.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace twintune {

namespace {

struct PhasePoint {
  VecX z;
  VecX r;      // momentum
  VecX grad;   // grad log p at z
  double logp = 0.0;

  double hamiltonian() const { return logp - 0.5 * r.squaredNorm(); }
};

struct Leapfrog {
  const LogDensityGrad& target;

  PhasePoint step(PhasePoint p, double eps) const {
    p.r += 0.5 * eps * p.grad;
    p.z += eps * p.r;
    p.logp = target(p.z, p.grad);
    p.r += 0.5 * eps * p.grad;
    return p;
  }
};

struct Tree {
  PhasePoint minus, plus, proposal;
  double log_sum_weight = -std::numeric_limits<double>::infinity();
  double sum_accept = 0.0;
  int n_leapfrog = 0;
  bool ok = true;       // no U-turn, no divergence
  bool divergent = false;
};

class NutsSampler {
 public:
  NutsSampler(const LogDensityGrad& target, const NutsConfig& config,
              uint64_t seed)
      : target_(target), config_(config), rng_(seed) {}

  NutsResult run(const VecX& init) {
    PhasePoint p;
    p.z = init;
    p.logp = target_(p.z, p.grad);
    if (!std::isfinite(p.logp))
      throw std::runtime_error("NUTS: non-finite density at the initial point");

    double eps = find_reasonable_epsilon(p);
    // Dual averaging (Hoffman & Gelman 2014).
    const double mu = std::log(10.0 * eps);
    double log_eps_bar = 0.0, h_bar = 0.0;
    const double gamma = 0.05, t0 = 10.0, kappa = 0.75;

    NutsResult out;
    out.draws.reserve(config_.samples);
    for (int m = 1; m <= config_.warmup + config_.samples; ++m) {
      double accept_stat = 0.0;
      p = transition(p, eps, accept_stat, out.divergences, m > config_.warmup);
      if (m <= config_.warmup) {
        const double frac = 1.0 / (m + t0);
        h_bar = (1.0 - frac) * h_bar +
                frac * (config_.target_accept - accept_stat);
        const double log_eps = mu - std::sqrt(m) / gamma * h_bar;
        const double w = std::pow(m, -kappa);
        log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
        eps = std::exp(log_eps);
        if (m == config_.warmup) eps = std::exp(log_eps_bar);
      } else {
        out.draws.push_back(p.z);
      }
    }
    out.step_size = eps;
    return out;
  }

 private:
  double find_reasonable_epsilon(const PhasePoint& start) {
    double eps = 1.0;
    PhasePoint p = start;
    p.r = sample_momentum(start.z.size());
    const double h0 = p.hamiltonian();
    PhasePoint q = Leapfrog{target_}.step(p, eps);
    double h1 = q.hamiltonian();
    if (!std::isfinite(h1)) h1 = -std::numeric_limits<double>::infinity();
    const double dir = (h1 - h0 > std::log(0.5)) ? 1.0 : -1.0;
    for (int i = 0; i < 50; ++i) {
      eps *= std::pow(2.0, dir);
      q = Leapfrog{target_}.step(p, eps);
      h1 = q.hamiltonian();
      if (!std::isfinite(h1)) h1 = -std::numeric_limits<double>::infinity();
      if (dir * (h1 - h0) <= dir * std::log(0.5)) break;
    }
    return eps;
  }

  VecX sample_momentum(Eigen::Index n) {
    VecX r(n);
    std::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < n; ++i) r[i] = normal(rng_);
    return r;
  }

  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
  }

  PhasePoint transition(PhasePoint current, double eps, double& accept_stat,
                        int& divergences, bool counting) {
    current.r = sample_momentum(current.z.size());
    const double h0 = current.hamiltonian();

    Tree whole;
    whole.minus = whole.plus = whole.proposal = current;
    whole.log_sum_weight = 0.0;

    for (int depth = 0; depth < config_.max_tree_depth; ++depth) {
      const bool forward = uniform() < 0.5;
      Tree sub = build_tree(forward ? whole.plus : whole.minus, depth, eps,
                            forward ? 1.0 : -1.0, h0);
      if (sub.divergent && counting) ++divergences;
      if (!sub.ok) break;
      // Multinomial (weight-proportional) proposal across the subtrees.
      const double total = log_add(whole.log_sum_weight, sub.log_sum_weight);
      if (std::log(uniform()) < sub.log_sum_weight - total)
        whole.proposal = sub.proposal;
      whole.log_sum_weight = total;
      if (forward)
        whole.plus = sub.plus;
      else
        whole.minus = sub.minus;
      whole.sum_accept += sub.sum_accept;
      whole.n_leapfrog += sub.n_leapfrog;
      if (uturn(whole.minus, whole.plus)) break;
    }
    accept_stat =
        whole.n_leapfrog > 0 ? whole.sum_accept / whole.n_leapfrog : 0.0;
    return whole.proposal;
  }

  static double log_add(double a, double b) {
    const double hi = std::max(a, b);
    if (!std::isfinite(hi)) return hi;
    return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
  }

  static bool uturn(const PhasePoint& minus, const PhasePoint& plus) {
    const VecX dz = plus.z - minus.z;
    return dz.dot(minus.r) < 0.0 || dz.dot(plus.r) < 0.0;
  }

  Tree build_tree(const PhasePoint& from, int depth, double eps, double dir,
                  double h0) {
    if (depth == 0) {
      Tree leaf;
      PhasePoint p = Leapfrog{target_}.step(from, dir * eps);
      leaf.n_leapfrog = 1;
      double h = p.hamiltonian();
      if (!std::isfinite(h)) h = -std::numeric_limits<double>::infinity();
      const double dh = h - h0;
      if (dh < -config_.divergence_threshold) {
        leaf.ok = false;
        leaf.divergent = true;
        leaf.minus = leaf.plus = leaf.proposal = p;
        leaf.log_sum_weight = -std::numeric_limits<double>::infinity();
        return leaf;
      }
      leaf.minus = leaf.plus = leaf.proposal = p;
      leaf.log_sum_weight = dh;
      leaf.sum_accept = std::min(1.0, std::exp(dh));
      return leaf;
    }
    Tree first = build_tree(from, depth - 1, eps, dir, h0);
    if (!first.ok) return first;
    Tree second =
        build_tree(dir > 0 ? first.plus : first.minus, depth - 1, eps, dir, h0);
    Tree merged;
    merged.minus = dir > 0 ? first.minus : second.minus;
    merged.plus = dir > 0 ? second.plus : first.plus;
    merged.n_leapfrog = first.n_leapfrog + second.n_leapfrog;
    merged.sum_accept = first.sum_accept + second.sum_accept;
    merged.divergent = first.divergent || second.divergent;
    merged.log_sum_weight =
        log_add(first.log_sum_weight, second.log_sum_weight);
    merged.proposal = first.proposal;
    if (second.ok &&
        std::log(uniform()) <
            second.log_sum_weight - merged.log_sum_weight)
      merged.proposal = second.proposal;
    merged.ok = second.ok && !uturn(merged.minus, merged.plus);
    return merged;
  }

  const LogDensityGrad& target_;
  NutsConfig config_;
  std::mt19937_64 rng_;
};

}  // namespace

NutsResult nuts_sample(const LogDensityGrad& target, const VecX& init,
                       const NutsConfig& config, uint64_t seed) {
  return NutsSampler(target, config, seed).run(init);
}

}  // namespace twintune
