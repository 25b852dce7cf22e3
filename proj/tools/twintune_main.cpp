// Command-line front end: tune (run a campaign), eval (score one parameter
// set, dump the episode CSV), compare (best-so-far traces of two journals).
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "twintune/config.hpp"
#include "twintune/journal.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace twintune;

namespace {

constexpr const char* kVersion = "twintune 0.1.0";

std::string default_out_dir() {
  if (const char* env = std::getenv("TWINTUNE_OUT")) return env;
  return "out";
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("--set expects key=value, got '" + s + "'");
    std::string key = s.substr(0, eq), value = s.substr(eq + 1);
    auto trim = [](std::string& t) {
      const auto b = t.find_first_not_of(" \t");
      const auto e = t.find_last_not_of(" \t");
      t = b == std::string::npos ? "" : t.substr(b, e - b + 1);
    };
    trim(key);
    trim(value);
    set_config_key(config, key, value);
    config.entries[key] = value;
  }
}

ordered_json metrics_to_json(const EpisodeMetrics& m) {
  return ordered_json{{"avg_error", m.avg_error},
                      {"max_error", m.max_error},
                      {"accumulated_cost", m.accumulated_cost},
                      {"mean_solve_time", m.mean_solve_time},
                      {"mean_iterations", m.mean_iterations},
                      {"realtime_violations", m.realtime_violations},
                      {"mpc_solves", m.mpc_solves},
                      {"ticks", m.ticks},
                      {"failed", m.failed}};
}

ordered_json vec_to_json(const VecX& v) {
  ordered_json a = ordered_json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

void write_manifest(const fs::path& path, const RunConfig& config,
                    const ParamSpace& space, const std::string& command) {
  ordered_json j;
  j["tool"] = kVersion;
  j["command"] = command;
  j["timestamp"] = config.deterministic_time ? 0 : std::time(nullptr);
  j["config"] = ordered_json(config.entries);
  ordered_json sp;
  sp["labels"] = space.labels;
  sp["lower"] = vec_to_json(space.lower);
  sp["upper"] = vec_to_json(space.upper);
  sp["log_scale"] = space.log_scale;
  j["param_space"] = sp;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

VecX read_theta_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open theta file: " + path);
  std::vector<double> values;
  double x;
  while (in >> x) values.push_back(x);
  if (static_cast<int>(values.size()) != kParamDim)
    throw std::runtime_error("theta file " + path + ": expected " +
                             std::to_string(kParamDim) + " numbers, found " +
                             std::to_string(values.size()));
  return Eigen::Map<VecX>(values.data(), kParamDim);
}

void check_bounds(const VecX& theta, const ParamSpace& space) {
  std::string bad;
  for (int i = 0; i < space.dim(); ++i) {
    if (theta[i] < space.lower[i] || theta[i] > space.upper[i]) {
      if (!bad.empty()) bad += ", ";
      bad += space.labels[i] + "=" + std::to_string(theta[i]) + " outside [" +
             std::to_string(space.lower[i]) + ", " +
             std::to_string(space.upper[i]) + "]";
    }
  }
  if (!bad.empty()) throw std::runtime_error("theta out of bounds: " + bad);
}

struct TuneArgs {
  std::string config_path, out_dir, method;
  std::vector<std::string> sets;
  int64_t seed = -1;
  int workers = 0;
  bool deterministic = false;
};

int cmd_tune(const TuneArgs& args) {
  RunConfig config;
  RobotModel model;
  try {
    config = load_run_config(args.config_path);
    apply_overrides(config, args.sets);
    if (args.seed >= 0) {
      config.seed = static_cast<uint64_t>(args.seed);
      config.entries["campaign.seed"] = std::to_string(args.seed);
    }
    if (!args.method.empty()) {
      if (args.method != "saasbo" && args.method != "vanilla")
        throw std::runtime_error("--method must be saasbo or vanilla");
      config.method = args.method;
      config.entries["campaign.method"] = args.method;
    }
    if (args.workers > 0) {
      config.workers = args.workers;
      config.entries["campaign.workers"] = std::to_string(args.workers);
    }
    if (args.deterministic) {
      config.deterministic_time = true;
      config.entries["sim.deterministic_time"] = "true";
    }
    model = load_robot_model(config.model_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    CampaignConfig campaign = make_campaign_config(config, model);
    const ParamSpace space = default_param_space();
    const fs::path out_dir = args.out_dir;
    fs::create_directories(out_dir);
    write_manifest(out_dir / "manifest.json", config, space, "tune");

    std::ofstream journal(out_dir / "journal.jsonl");
    if (!journal)
      throw std::runtime_error("cannot write " +
                               (out_dir / "journal.jsonl").string());
    const int total = campaign.n_max;
    auto sink = [&](const TrialRecord& r) {
      journal << trial_to_json_line(r) << "\n";
      journal.flush();
      std::cout << "[" << r.index + 1 << "/" << total << "] " << r.phase
                << "  J = " << r.y
                << (r.metrics.failed ? "  (failed episode)" : "") << "\n";
    };

    const CampaignResult result = run_campaign(campaign, space, sink);

    ordered_json report;
    report["tool"] = kVersion;
    report["method"] = config.method;
    report["trials"] = static_cast<int>(result.trials.size());
    report["early_stopped"] = result.early_stopped;
    report["y_best"] = result.y_best;
    report["theta_best"] = vec_to_json(result.theta_best);
    report["theta_labels"] = space.labels;
    report["baseline"] = metrics_to_json(result.baseline);
    if (result.lengthscale_medians.size() > 0)
      report["lengthscale_medians"] = vec_to_json(result.lengthscale_medians);
    std::ofstream rep(out_dir / "report.json");
    rep << report.dump(2) << "\n";

    std::ofstream best(out_dir / "best_theta.txt");
    best.precision(17);
    for (int i = 0; i < result.theta_best.size(); ++i)
      best << result.theta_best[i] << "\n";

    std::cout << "best J = " << result.y_best << " after "
              << result.trials.size() << " trials"
              << (result.early_stopped ? " (early stop)" : "") << "\n"
              << "artifacts in " << out_dir.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

struct EvalArgs {
  std::string config_path, out_dir, preset, theta_path;
  std::vector<std::string> sets;
  int64_t seed = -1;
  bool deterministic = false;
  bool cold_start = false;
};

int cmd_eval(const EvalArgs& args) {
  RunConfig config;
  RobotModel model;
  VecX theta;
  try {
    config = load_run_config(args.config_path);
    apply_overrides(config, args.sets);
    if (args.seed >= 0) config.seed = static_cast<uint64_t>(args.seed);
    if (args.deterministic) config.deterministic_time = true;
    model = load_robot_model(config.model_path);
    if (!args.theta_path.empty())
      theta = read_theta_file(args.theta_path);
    else
      theta = preset_theta(args.preset.empty() ? "default" : args.preset);
    check_bounds(theta, default_param_space());
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    EpisodeConfig episode = make_episode_config(config, model);
    episode.cold_start = args.cold_start;

    EpisodeConfig base = episode;  // scored with stock parameters
    const EpisodeMetrics baseline = run_episode(base);
    if (baseline.failed)
      throw std::runtime_error("baseline episode failed; check the config");

    unpack_params(theta, episode.weights, episode.gains);
    EpisodeLog log;
    const EpisodeMetrics metrics = run_episode(episode, &log);
    const double j = objective(metrics, config.alpha, baseline);

    const fs::path out_dir = args.out_dir;
    fs::create_directories(out_dir);
    write_manifest(out_dir / "manifest.json", config, default_param_space(),
                   "eval");
    std::ofstream csv(out_dir / "episode.csv");
    write_episode_csv(csv, log);

    ordered_json report;
    report["tool"] = kVersion;
    report["theta"] = vec_to_json(theta);
    report["objective"] = j;
    report["alpha"] = config.alpha;
    report["metrics"] = metrics_to_json(metrics);
    report["baseline"] = metrics_to_json(baseline);
    std::ofstream rep(out_dir / "report.json");
    rep << report.dump(2) << "\n";

    std::cout.precision(6);
    std::cout << "avg error      " << metrics.avg_error * 1e3 << " mm\n"
              << "max error      " << metrics.max_error * 1e3 << " mm\n"
              << "mean solve     " << metrics.mean_solve_time * 1e3 << " ms\n"
              << "mean iters     " << metrics.mean_iterations << "\n"
              << "objective J    " << j << "\n"
              << (metrics.failed ? "episode FAILED\n" : "")
              << "artifacts in " << out_dir.string() << "\n";
    return metrics.failed ? 2 : 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_compare(const std::string& path_a, const std::string& path_b,
                const std::string& out_path) {
  std::vector<TrialRecord> a, b;
  try {
    a = read_journal(path_a);
    b = read_journal(path_b);
    if (a.empty() || b.empty())
      throw std::runtime_error("journals must contain at least one trial");
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    const auto best_a = best_so_far(a);
    const auto best_b = best_so_far(b);
    const size_t n = std::max(best_a.size(), best_b.size());
    std::ofstream csv(out_path);
    if (!csv) throw std::runtime_error("cannot write " + out_path);
    csv.precision(12);
    csv << "trial,best_a,best_b\n";
    for (size_t i = 0; i < n; ++i) {
      csv << i + 1 << ","
          << best_a[std::min(i, best_a.size() - 1)] << ","
          << best_b[std::min(i, best_b.size() - 1)] << "\n";
    }
    const double fa = best_a.back(), fb = best_b.back();
    std::cout.precision(6);
    std::cout << "A: " << path_a << "  best J = " << fa << " (" << a.size()
              << " trials)\n"
              << "B: " << path_b << "  best J = " << fb << " (" << b.size()
              << " trials)\n";
    if (fa != fb) {
      const char* winner = fa < fb ? "A" : "B";
      std::cout << winner << " is better by "
                << std::abs(fa - fb) / std::max(fa, fb) * 100.0 << "%\n";
    } else {
      std::cout << "tie\n";
    }
    std::cout << "trace written to " << out_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Digital-twin auto-tuning for torque-level manipulator MPC"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  TuneArgs tune;
  tune.out_dir = default_out_dir();
  auto* t = app.add_subcommand("tune", "Run a tuning campaign");
  t->add_option("--config", tune.config_path, "Run configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  t->add_option("--seed", tune.seed, "Override campaign.seed");
  t->add_option("--method", tune.method, "saasbo or vanilla");
  t->add_option("--workers", tune.workers, "Parallel episode workers");
  t->add_option("--out", tune.out_dir, "Output directory");
  t->add_option("--set", tune.sets, "Override any config key (key=value)");
  t->add_flag("--deterministic-time", tune.deterministic,
              "Synthetic solve times and zero timestamps");

  EvalArgs ev;
  ev.out_dir = default_out_dir();
  auto* e = app.add_subcommand("eval", "Evaluate one parameter set");
  e->add_option("--config", ev.config_path, "Run configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  e->add_option("--preset", ev.preset, "default, vanilla-bo, or saasbo");
  e->add_option("--theta", ev.theta_path,
                "File with 12 whitespace-separated parameter values");
  e->add_option("--seed", ev.seed, "Override campaign.seed");
  e->add_option("--out", ev.out_dir, "Output directory");
  e->add_option("--set", ev.sets, "Override any config key (key=value)");
  e->add_flag("--deterministic-time", ev.deterministic,
              "Synthetic solve times and zero timestamps");
  e->add_flag("--cold-start", ev.cold_start, "Disable MPC warm starting");

  std::string cmp_a, cmp_b, cmp_out = "compare.csv";
  auto* c = app.add_subcommand("compare", "Compare two campaign journals");
  c->add_option("journal_a", cmp_a, "First journal.jsonl")
      ->required()
      ->check(CLI::ExistingFile);
  c->add_option("journal_b", cmp_b, "Second journal.jsonl")
      ->required()
      ->check(CLI::ExistingFile);
  c->add_option("--out", cmp_out, "Best-so-far trace CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  if (t->parsed()) return cmd_tune(tune);
  if (e->parsed()) return cmd_eval(ev);
  return cmd_compare(cmp_a, cmp_b, cmp_out);
}
