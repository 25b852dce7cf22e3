// Acceptance criteria runner: one PASS/FAIL line per criterion, exit code is
// the number of failures. Budgets and tolerances are printed next to the
// measured values so a log line is self-contained.
//
//  1. dynamics oracle           ||M a + bias - u|| < 1e-10, M symmetric 1e-12
//  2. gradient suites           cost & SAAS log-density vs central FD, 1e-5
//  3. DDP = discrete Riccati    states/controls/gains to 1e-8, 1 iteration
//  4. GP dense oracle           posterior to 1e-10; 1-sample mixture exact
//  5. SAAS sparsity signature   12-D / 2 active, 50 pts, 2 of 3 seeds
//  6. desk campaign             median J(theta*) <= 0.8 over 3 seeds
//  7. SAASBO vs vanilla         median final best: saasbo <= vanilla
//  8. warm-start efficiency     warm mean iters < 2, cold mean > warm mean
//  9. best-so-far monotone      every journal written by this run
// 10. CLI determinism           eval & tune --deterministic-time byte-equal

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "twintune/config.hpp"
#include "twintune/ddp.hpp"
#include "twintune/dynamics.hpp"
#include "twintune/gp.hpp"
#include "twintune/journal.hpp"
#include "twintune/sim.hpp"

namespace fs = std::filesystem;
using namespace twintune;

namespace {

std::string repo_root() {
  if (const char* env = std::getenv("TWINTUNE_ROOT")) return env;
  return ".";
}

std::string asset(const std::string& rel) { return repo_root() + "/" + rel; }

struct Criterion {
  int id;
  std::string label;
  bool pass = true;
  std::string detail;
  double seconds = 0.0;
};

class Timer {
 public:
  Timer() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

VecX random_vector(int n, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  VecX v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

// ---------------------------------------------------------------- criterion 1
Criterion criterion_dynamics() {
  Criterion c{1, "dynamics oracle"};
  Timer timer;
  const RobotModel model = load_robot_model(asset("models/ur10e_like.rmf"));
  std::mt19937_64 rng(11);
  double worst_res = 0.0, worst_sym = 0.0;
  bool chol_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    JointState s{random_vector(model.nq(), rng, 3.0),
                 random_vector(model.nq(), rng, 2.0)};
    const VecX u = random_vector(model.nq(), rng, 80.0);
    const VecX a = forward_dynamics(model, s, u);
    const MatX M = mass_matrix(model, s.q);
    const VecX res = M * a + bias_forces(model, s) - u;
    worst_res = std::max(worst_res, res.lpNorm<Eigen::Infinity>());
    worst_sym = std::max(worst_sym,
                         (M - MatX(M.transpose())).lpNorm<Eigen::Infinity>());
    chol_ok = chol_ok && Eigen::LLT<MatX>(M).info() == Eigen::Success;
  }
  c.seconds = timer.seconds();
  c.pass = worst_res < 1e-10 && worst_sym < 1e-12 && chol_ok &&
           c.seconds < 10.0;
  c.detail = fmt("max|Ma+b-u| %.2e (tol 1e-10), max asym %.2e (tol 1e-12), "
                 "chol %s, 100 states",
                 worst_res, worst_sym, chol_ok ? "ok" : "FAILED");
  return c;
}

// ---------------------------------------------------------------- criterion 2
Criterion criterion_gradients() {
  Criterion c{2, "gradient suites"};
  Timer timer;
  const RobotModel model = load_robot_model(asset("models/ur10e_like.rmf"));
  ShapeSpec shape;
  shape.kind = ShapeKind::kHexagon;
  shape.size = 0.08;
  shape.duration = 10.0;
  shape.center = forward_kinematics(model, VecX::Zero(model.nq())).p;
  const int N = 4;
  OcpProblem problem(model, N, 0.0025,
                     trajectory_to_ocp_references(shape, 0.0, N, 0.0025), {});
  std::mt19937_64 rng(22);
  // Cost values reach ~1e5 (w_pos); h = 2e-5 balances FD cancellation and
  // truncation at the 1e-5 relative level (see tests/test_ocp.cpp).
  const double h = 2e-5;
  double worst_cost = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const VecX x = random_vector(2 * model.nq(), rng, 1.5);
    const VecX u = random_vector(model.nq(), rng, 40.0);
    const int k = trial % N;
    const StageDerivatives d = problem.cost_derivatives(k, x, u);
    for (int i = 0; i < x.size(); ++i) {
      VecX xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (problem.running_cost(k, xp, u) -
                         problem.running_cost(k, xm, u)) /
                        (2 * h);
      worst_cost = std::max(worst_cost,
                            std::abs(d.lx[i] - fd) / std::max(1.0, std::abs(fd)));
    }
    for (int i = 0; i < u.size(); ++i) {
      VecX up = u, um = u;
      up[i] += h;
      um[i] -= h;
      const double fd = (problem.running_cost(k, x, up) -
                         problem.running_cost(k, x, um)) /
                        (2 * h);
      worst_cost = std::max(worst_cost,
                            std::abs(d.lu[i] - fd) / std::max(1.0, std::abs(fd)));
    }
  }

  // SAAS log posterior density in its unconstrained parameterization.
  TrialDataset data;
  for (int i = 0; i < 16; ++i) {
    const VecX x = (random_vector(5, rng, 0.5).array() + 0.5).matrix();
    data.append(x, std::sin(3.0 * x[0]) + 0.25 * x[1] * x[1]);
  }
  const SaasDensity density(data);
  double worst_lp = 0.0;
  const double hz = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    const VecX z = random_vector(density.dim(), rng, 1.0);
    VecX grad(density.dim());
    density.logp_grad(z, grad);
    for (int i = 0; i < density.dim(); ++i) {
      VecX zp = z, zm = z;
      zp[i] += hz;
      zm[i] -= hz;
      const double fd = (density.logp(zp) - density.logp(zm)) / (2 * hz);
      worst_lp = std::max(worst_lp,
                          std::abs(grad[i] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  c.seconds = timer.seconds();
  c.pass = worst_cost < 1e-5 && worst_lp < 1e-5 && c.seconds < 30.0;
  c.detail = fmt("cost grads max rel %.2e, saas log-density max rel %.2e "
                 "(tol 1e-5), 50 pts each",
                 worst_cost, worst_lp);
  return c;
}

// ---------------------------------------------------------------- criterion 3
class LqrProblem : public StageProblem {
 public:
  MatX A, B, Q, R, Qf;
  int N;
  LqrProblem(MatX a, MatX b, MatX q, MatX r, MatX qf, int horizon)
      : A(std::move(a)), B(std::move(b)), Q(std::move(q)), R(std::move(r)),
        Qf(std::move(qf)), N(horizon) {}
  int nx() const override { return static_cast<int>(A.rows()); }
  int nu() const override { return static_cast<int>(B.cols()); }
  int horizon() const override { return N; }
  double stage_cost(int, const VecX& x, const VecX& u) const override {
    return x.dot(Q * x) + u.dot(R * u);
  }
  double terminal_value(const VecX& x) const override { return x.dot(Qf * x); }
  StageDerivatives stage_derivatives(int, const VecX& x,
                                     const VecX& u) const override {
    StageDerivatives d;
    d.lx = 2.0 * Q * x;
    d.lu = 2.0 * R * u;
    d.lxx = 2.0 * Q;
    d.luu = 2.0 * R;
    d.lux = MatX::Zero(nu(), nx());
    return d;
  }
  void terminal_derivatives(const VecX& x, VecX& lx, MatX& lxx) const override {
    lx = 2.0 * Qf * x;
    lxx = 2.0 * Qf;
  }
  VecX dynamics(int, const VecX& x, const VecX& u) const override {
    return A * x + B * u;
  }
  DynamicsDerivatives dynamics_derivatives(int, const VecX&,
                                           const VecX&) const override {
    return {A, B};
  }
};

Criterion criterion_lqr() {
  Criterion c{3, "DDP vs Riccati"};
  Timer timer;
  const double dt = 0.05;
  MatX A(2, 2), B(2, 1), Q(2, 2), R(1, 1), Qf(2, 2);
  A << 1, dt, 0, 1;
  B << 0.5 * dt * dt, dt;
  Q << 1, 0, 0, 0.1;
  R << 0.01;
  Qf << 10, 0, 0, 1;
  const LqrProblem problem(A, B, Q, R, Qf, 30);
  VecX x0(2);
  x0 << 1.0, -0.5;

  // Independent discrete Riccati recursion.
  std::vector<MatX> P(problem.N + 1), K(problem.N);
  P[problem.N] = Qf;
  for (int k = problem.N - 1; k >= 0; --k) {
    const MatX BtP = B.transpose() * P[k + 1];
    K[k] = (R + BtP * B).ldlt().solve(BtP * A);
    P[k] = Q + A.transpose() * P[k + 1] * (A - B * K[k]);
  }
  std::vector<VecX> xs(problem.N + 1), us(problem.N);
  xs[0] = x0;
  for (int k = 0; k < problem.N; ++k) {
    us[k] = -K[k] * xs[k];
    xs[k + 1] = A * xs[k] + B * us[k];
  }

  DdpSolver solver;
  const DdpSolution sol = solver.solve(problem, x0);
  double worst = 0.0;
  for (int k = 0; k < problem.N; ++k) {
    worst = std::max(worst, (sol.us[k] - us[k]).lpNorm<Eigen::Infinity>());
    worst = std::max(worst, (sol.xs[k] - xs[k]).lpNorm<Eigen::Infinity>());
    worst = std::max(worst, (sol.K[k] + K[k]).lpNorm<Eigen::Infinity>());
  }
  c.seconds = timer.seconds();
  c.pass = sol.converged && sol.iterations == 1 && worst < 1e-8 &&
           c.seconds < 5.0;
  c.detail = fmt("max dev %.2e (tol 1e-8), iterations %d (need 1), %s", worst,
                 sol.iterations, sol.converged ? "converged" : "NOT converged");
  return c;
}

// ---------------------------------------------------------------- criterion 4
Criterion criterion_gp_oracle() {
  Criterion c{4, "GP dense oracle"};
  Timer timer;
  TrialDataset data;
  const double xs[5] = {0.05, 0.25, 0.5, 0.75, 0.95};
  for (double x : xs) {
    VecX v(1);
    v << x;
    data.append(v, std::sin(6.0 * x));
  }
  KernelHyperparams hyper;
  hyper.sigma2 = 1.3;
  hyper.lengthscales = VecX::Constant(1, 0.35);

  double worst = 0.0;
  for (double q : {0.12, 0.4, 0.61, 0.83}) {
    VecX query(1);
    query << q;
    const GpPrediction got = gp_posterior(data, hyper, query);
    // Dense closed form, written independently.
    MatX K(5, 5);
    VecX ks(5);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j)
        K(i, j) = matern52(data.X.row(i).transpose(),
                           data.X.row(j).transpose(), hyper);
      K(i, i) += hyper.noise;
      ks[i] = matern52(data.X.row(i).transpose(), query, hyper);
    }
    const MatX Kinv = K.inverse();
    const VecX y = data.standardized_y();
    worst = std::max(worst, std::abs(got.mean - ks.dot(Kinv * y)));
    worst = std::max(worst,
                     std::abs(got.variance - (hyper.sigma2 - ks.dot(Kinv * ks))));
  }

  PosteriorSamples one;
  one.samples.push_back(hyper);
  bool mixture_exact = true;
  for (double q : {0.3, 0.77}) {
    VecX query(1);
    query << q;
    const GpPrediction single = FittedGp(data, hyper).predict(query);
    const GpPrediction mix = predict_mixture(one, data, query);
    mixture_exact = mixture_exact && mix.mean == single.mean &&
                    mix.variance == single.variance;
  }
  c.seconds = timer.seconds();
  c.pass = worst < 1e-10 && mixture_exact;
  c.detail = fmt("max |posterior - dense| %.2e (tol 1e-10), 1-sample mixture "
                 "%s",
                 worst, mixture_exact ? "exact" : "NOT exact");
  return c;
}

// ---------------------------------------------------------------- criterion 5
Criterion criterion_saas_signature() {
  Criterion c{5, "SAAS sparsity signature"};
  Timer timer;
  const int d = 12, n = 50;
  const MatX X = latin_hypercube(d, n, 7);
  TrialDataset data;
  for (int i = 0; i < n; ++i) {
    const VecX x = X.row(i).transpose();
    data.append(x, std::sin(2.0 * std::numbers::pi * x[0]) +
                       2.0 * (x[1] - 0.5) * (x[1] - 0.5));
  }
  int hits = 0;
  std::string per_seed;
  for (uint64_t seed : {1, 2, 3}) {
    const PosteriorSamples post = sample_hyperparams(data, 256, 256, 8, seed);
    VecX med(d);
    for (int j = 0; j < d; ++j) {
      std::vector<double> ls;
      ls.reserve(post.samples.size());
      for (const auto& s : post.samples) ls.push_back(s.lengthscales[j]);
      std::nth_element(ls.begin(), ls.begin() + ls.size() / 2, ls.end());
      med[j] = ls[ls.size() / 2];
    }
    const double active_max = std::max(med[0], med[1]);
    const double inactive_min = med.tail(d - 2).minCoeff();
    const bool hit = inactive_min > active_max;
    hits += hit;
    per_seed += fmt(" s%llu:%s(act<=%.2f,inact>=%.2f)",
                    static_cast<unsigned long long>(seed), hit ? "hit" : "miss",
                    active_max, inactive_min);
  }
  c.seconds = timer.seconds();
  c.pass = hits >= 2 && c.seconds < 300.0;
  c.detail = fmt("%d/3 seeds show inactive > active medians;%s", hits,
                 per_seed.c_str());
  return c;
}

// ------------------------------------------------------- criteria 6, 7 and 9
RunConfig desk_run_config() {
  RunConfig rc = load_run_config(asset("configs/smoke.cfg"));
  set_config_key(rc, "model", asset("models/ur10e_like.rmf"));
  set_config_key(rc, "shape.duration", "10.0");
  set_config_key(rc, "campaign.n0", "20");
  set_config_key(rc, "campaign.iterations", "30");
  set_config_key(rc, "campaign.patience", "100");
  set_config_key(rc, "sim.deterministic_time", "true");
  set_config_key(rc, "mcmc.warmup", "96");
  set_config_key(rc, "mcmc.samples", "96");
  set_config_key(rc, "mcmc.thin", "8");
  return rc;
}

struct CampaignRuns {
  std::vector<double> saasbo_best, vanilla_best;
  std::vector<fs::path> journals;
  double saasbo_seconds = 0.0;
  double vanilla_seconds = 0.0;
};

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[1];
}

CampaignRuns run_desk_campaigns(const fs::path& out_dir) {
  CampaignRuns runs;
  const RobotModel model = load_robot_model(asset("models/ur10e_like.rmf"));
  const ParamSpace space = default_param_space();
  for (const char* method : {"saasbo", "vanilla"}) {
    Timer timer;
    for (uint64_t seed : {1, 2, 3}) {
      RunConfig rc = desk_run_config();
      set_config_key(rc, "campaign.method", method);
      set_config_key(rc, "campaign.seed", std::to_string(seed));
      const CampaignConfig campaign = make_campaign_config(rc, model);
      const fs::path journal_path =
          out_dir / fmt("journal_%s_seed%llu.jsonl", method,
                        static_cast<unsigned long long>(seed));
      std::ofstream journal(journal_path);
      const CampaignResult result = run_campaign(
          campaign, space,
          [&](const TrialRecord& r) { journal << trial_to_json_line(r) << "\n"; });
      runs.journals.push_back(journal_path);
      (method == std::string("saasbo") ? runs.saasbo_best : runs.vanilla_best)
          .push_back(result.y_best);
      std::printf("    %s seed %llu: best J = %.4f (%zu trials)\n", method,
                  static_cast<unsigned long long>(seed), result.y_best,
                  result.trials.size());
      std::fflush(stdout);
    }
    (method == std::string("saasbo") ? runs.saasbo_seconds
                                     : runs.vanilla_seconds) = timer.seconds();
  }
  return runs;
}

Criterion criterion_desk_campaign(const CampaignRuns& runs) {
  Criterion c{6, "desk campaign J(theta*)"};
  const double med = median3(runs.saasbo_best);
  c.seconds = runs.saasbo_seconds;
  c.pass = med <= 0.8 && c.seconds < 1800.0;
  c.detail = fmt("median J over seeds {1,2,3} = %.4f (need <= 0.8); bests "
                 "%.4f/%.4f/%.4f",
                 med, runs.saasbo_best[0], runs.saasbo_best[1],
                 runs.saasbo_best[2]);
  return c;
}

Criterion criterion_saasbo_vs_vanilla(const CampaignRuns& runs) {
  Criterion c{7, "SAASBO <= vanilla"};
  const double med_s = median3(runs.saasbo_best);
  const double med_v = median3(runs.vanilla_best);
  c.seconds = runs.vanilla_seconds;
  c.pass = med_s <= med_v;
  c.detail = fmt("median final best: saasbo %.4f vs vanilla %.4f "
                 "(identical seeds, budgets, LHS init)",
                 med_s, med_v);
  return c;
}

Criterion criterion_monotone(const CampaignRuns& runs) {
  Criterion c{9, "best-so-far monotone"};
  Timer timer;
  int checked = 0;
  bool ok = true;
  for (const fs::path& path : runs.journals) {
    const std::vector<TrialRecord> trials = read_journal(path.string());
    const std::vector<double> trace = best_so_far(trials);
    for (size_t i = 1; i < trace.size(); ++i)
      ok = ok && trace[i] <= trace[i - 1];
    ++checked;
  }
  c.seconds = timer.seconds();
  c.pass = ok && checked == 6;
  c.detail = fmt("%d journals, all traces non-increasing: %s", checked,
                 ok ? "yes" : "NO");
  return c;
}

// ---------------------------------------------------------------- criterion 8
Criterion criterion_warm_start() {
  Criterion c{8, "warm-start efficiency"};
  Timer timer;
  RunConfig rc = desk_run_config();
  const RobotModel model = load_robot_model(rc.model_path);
  EpisodeConfig ep = make_episode_config(rc, model);
  const EpisodeMetrics warm = run_episode(ep);
  ep.cold_start = true;
  const EpisodeMetrics cold = run_episode(ep);
  c.seconds = timer.seconds();
  c.pass = !warm.failed && !cold.failed && warm.mean_iterations < 2.0 &&
           cold.mean_iterations > warm.mean_iterations;
  c.detail = fmt("warm mean iters %.3f (need < 2), cold %.3f (need > warm), "
                 "10 s hexagon, default weights",
                 warm.mean_iterations, cold.mean_iterations);
  return c;
}

// --------------------------------------------------------------- criterion 10
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Criterion criterion_determinism(const fs::path& out_dir) {
  Criterion c{10, "CLI determinism"};
  Timer timer;
  const char* bin = std::getenv("TWINTUNE_BIN");
  if (!bin) {
    c.pass = false;
    c.detail = "TWINTUNE_BIN not set";
    return c;
  }
  const std::string config = asset("configs/smoke.cfg");
  auto run = [&](const std::string& cmd) {
    const std::string full = cmd + " > /dev/null 2>&1";
    return std::system(full.c_str()) == 0;
  };
  std::string mismatches;
  bool ran_ok = true;
  for (const char* mode : {"eval", "tune"}) {
    const fs::path a = out_dir / fmt("det_%s_a", mode);
    const fs::path b = out_dir / fmt("det_%s_b", mode);
    for (const fs::path& dir : {a, b}) {
      const std::string cmd =
          std::string(bin) + " " + mode + " --config " + config +
          " --deterministic-time --seed 3 --out " + dir.string();
      ran_ok = ran_ok && run(cmd);
    }
    const std::vector<std::string> files =
        mode == std::string("eval")
            ? std::vector<std::string>{"manifest.json", "report.json",
                                       "episode.csv"}
            : std::vector<std::string>{"manifest.json", "report.json",
                                       "journal.jsonl", "best_theta.txt"};
    for (const std::string& f : files)
      if (slurp(a / f) != slurp(b / f)) mismatches += " " + std::string(mode) + "/" + f;
  }
  c.seconds = timer.seconds();
  c.pass = ran_ok && mismatches.empty();
  c.detail = ran_ok ? (mismatches.empty()
                           ? std::string("eval and tune outputs byte-identical "
                                         "across two seeded runs")
                           : "mismatched files:" + mismatches)
                    : "CLI invocation failed";
  return c;
}

}  // namespace

int main() {
  const fs::path out_dir = fs::path("acceptance_artifacts");
  fs::remove_all(out_dir);
  fs::create_directories(out_dir);

  std::vector<Criterion> results;
  auto report = [&](Criterion c) {
    std::printf("[%2d] %s  %-24s %s [%.1f s]\n", c.id,
                c.pass ? "PASS" : "FAIL", c.label.c_str(), c.detail.c_str(),
                c.seconds);
    std::fflush(stdout);
    results.push_back(std::move(c));
  };

  report(criterion_dynamics());
  report(criterion_gradients());
  report(criterion_lqr());
  report(criterion_gp_oracle());
  report(criterion_saas_signature());
  report(criterion_warm_start());
  report(criterion_determinism(out_dir));

  std::printf("  running 6 desk campaigns (3 seeds x {saasbo, vanilla}; "
              "n0=20 + 30 BO trials, 10 s hexagon, 250 Hz MPC)...\n");
  std::fflush(stdout);
  const CampaignRuns runs = run_desk_campaigns(out_dir);
  report(criterion_desk_campaign(runs));
  report(criterion_saasbo_vs_vanilla(runs));
  report(criterion_monotone(runs));

  int failures = 0;
  for (const Criterion& c : results) failures += !c.pass;
  std::printf("%d/%zu acceptance criteria passed\n", int(results.size()) - failures,
              results.size());
  return failures;
}
