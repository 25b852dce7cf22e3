#include "twintune/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "twintune/dynamics.hpp"

namespace twintune {

namespace {

double parse_double(const std::string& key, const std::string& value) {
  std::istringstream ss(value);
  double out;
  if (!(ss >> out))
    throw std::runtime_error("key '" + key + "': expected a number, got '" +
                             value + "'");
  return out;
}

int parse_int(const std::string& key, const std::string& value) {
  return static_cast<int>(parse_double(key, value));
}

VecX parse_vector(const std::string& key, const std::string& value) {
  std::istringstream ss(value);
  std::vector<double> vals;
  double v;
  while (ss >> v) vals.push_back(v);
  if (vals.empty())
    throw std::runtime_error("key '" + key + "': expected numbers");
  return Eigen::Map<VecX>(vals.data(), vals.size());
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

Mat3 plane_rotation(const std::string& plane) {
  Mat3 R = Mat3::Identity();
  if (plane == "xy") return R;
  if (plane == "xz") {
    R.col(0) = Vec3::UnitX();
    R.col(1) = Vec3::UnitZ();
    R.col(2) = -Vec3::UnitY();
    return R;
  }
  if (plane == "yz") {
    R.col(0) = Vec3::UnitY();
    R.col(1) = Vec3::UnitZ();
    R.col(2) = Vec3::UnitX();
    return R;
  }
  throw std::runtime_error("unknown plane: " + plane + " (use xy, xz, yz)");
}

}  // namespace

void set_config_key(RunConfig& c, const std::string& key,
                    const std::string& value) {
  if (key == "model") c.model_path = value;
  else if (key == "shape.kind") { parse_shape_kind(value); c.shape_kind = value; }
  else if (key == "shape.size") c.shape_size = parse_double(key, value);
  else if (key == "shape.duration") c.shape_duration = parse_double(key, value);
  else if (key == "shape.plane") { plane_rotation(value); c.plane = value; }
  else if (key == "shape.center") {
    if (value == "auto") {
      c.center_auto = true;
    } else {
      const VecX v = parse_vector(key, value);
      if (v.size() != 3)
        throw std::runtime_error("key 'shape.center': expected 3 numbers or 'auto'");
      c.center = v;
      c.center_auto = false;
    }
  }
  else if (key == "campaign.n0") c.n0 = parse_int(key, value);
  else if (key == "campaign.iterations") c.iterations = parse_int(key, value);
  else if (key == "campaign.patience") c.patience = parse_int(key, value);
  else if (key == "campaign.alpha") c.alpha = parse_double(key, value);
  else if (key == "campaign.seed") c.seed = static_cast<uint64_t>(parse_double(key, value));
  else if (key == "campaign.method") {
    if (value != "saasbo" && value != "vanilla")
      throw std::runtime_error("key 'campaign.method': use saasbo or vanilla");
    c.method = value;
  }
  else if (key == "campaign.workers") c.workers = parse_int(key, value);
  else if (key == "mpc.N") c.mpc_horizon = parse_int(key, value);
  else if (key == "mpc.dt") c.mpc_dt = parse_double(key, value);
  else if (key == "mpc.period") c.mpc_period = parse_double(key, value);
  else if (key == "mpc.max_iterations") c.mpc_max_iterations = parse_int(key, value);
  else if (key == "control.period") c.ctrl_period = parse_double(key, value);
  else if (key == "sim.substep") c.substep = parse_double(key, value);
  else if (key == "sim.q0") c.q0 = parse_vector(key, value);
  else if (key == "sim.deterministic_time")
    c.deterministic_time = value == "true" || value == "1";
  else if (key == "sim.per_iteration_time") c.per_iteration_time = parse_double(key, value);
  else if (key == "mcmc.warmup") c.mcmc.warmup = parse_int(key, value);
  else if (key == "mcmc.samples") c.mcmc.samples = parse_int(key, value);
  else if (key == "mcmc.thin") c.mcmc.thin = parse_int(key, value);
  else throw std::runtime_error("unknown config key: " + key);
  c.entries[key] = value;
}

RunConfig parse_run_config(std::istream& in, const std::string& origin_name) {
  RunConfig config;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(origin_name + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      set_config_key(config, key, value);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(origin_name + ":" + std::to_string(lineno) +
                               ": " + e.what());
    }
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  return parse_run_config(in, path);
}

EpisodeConfig make_episode_config(const RunConfig& c, const RobotModel& model) {
  EpisodeConfig ep;
  ep.model = &model;
  ep.q0 = c.q0.size() ? c.q0 : VecX::Zero(model.nq());
  if (ep.q0.size() != model.nq())
    throw std::runtime_error("sim.q0 length does not match the model");
  ep.v0 = VecX::Zero(model.nv());

  const EePose start = forward_kinematics(model, ep.q0);
  ep.shape.kind = parse_shape_kind(c.shape_kind);
  ep.shape.size = c.shape_size;
  ep.shape.duration = c.shape_duration;
  ep.shape.plane = plane_rotation(c.plane);
  ep.shape.R_des = start.R;
  if (c.center_auto) {
    // Place the first path vertex at the initial end-effector position so
    // episodes start on-reference.
    ShapeSpec probe = ep.shape;
    probe.center = Vec3::Zero();
    ep.shape.center = start.p - sample_reference(probe, 0.0).p_des;
  } else {
    ep.shape.center = c.center;
  }

  ep.N = c.mpc_horizon;
  ep.dt_ocp = c.mpc_dt;
  ep.mpc_period = c.mpc_period;
  ep.ctrl_period = c.ctrl_period;
  ep.substep = c.substep;
  ep.solver.max_iterations = c.mpc_max_iterations;
  ep.seed = c.seed;
  ep.deterministic_time = c.deterministic_time;
  ep.per_iteration_time = c.per_iteration_time;
  ep.validate();
  return ep;
}

CampaignConfig make_campaign_config(const RunConfig& c, const RobotModel& model) {
  CampaignConfig out;
  out.n0 = c.n0;
  out.n_max = c.n0 + c.iterations;
  out.patience = c.patience;
  out.alpha = c.alpha;
  out.seed = c.seed;
  out.method = c.method == "vanilla" ? BoMethod::kVanilla : BoMethod::kSaasbo;
  out.mcmc = c.mcmc;
  out.workers = c.workers;
  out.episode = make_episode_config(c, model);
  out.validate();
  return out;
}

VecX preset_theta(const std::string& name) {
  CostWeights w;
  GainSet g;
  if (name == "default") {
    // Stock weights and unit gains.
  } else if (name == "vanilla-bo") {
    w.w_pos = 7.2e4;
    w.w_rot = 5.8e-5;
    w.w_tau = 6.5e-3;
    w.w_v = 8.1e-4;
    g.kp = 12.3;
    g.kd = 0.45;
    g.kpc = Vec3(3.2, 2.8, 15.4);
    g.kdc = Vec3(1.5, 1.3, 8.7);
  } else if (name == "saasbo") {
    w.w_pos = 4.1e4;
    w.w_rot = 2.3e-5;
    w.w_tau = 3.7e-3;
    w.w_v = 7.9e-4;
    g.kp = 28.7;
    g.kd = 0.18;
    g.kpc = Vec3(7.8, 6.5, 89.2);
    g.kdc = Vec3(2.1, 1.8, 10.3);
  } else {
    throw std::runtime_error("unknown preset: " + name +
                             " (use default, vanilla-bo, saasbo)");
  }
  return pack_params(w, g);
}

}  // namespace twintune
