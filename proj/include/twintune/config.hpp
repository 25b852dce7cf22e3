#pragma once

#include <map>
#include <string>

#include "twintune/bo.hpp"

namespace twintune {

/// Flat key = value run configuration (see configs/*.cfg for the schema).
/// Every accepted key is kept in `entries` as the resolved snapshot written
/// to the run manifest.
struct RunConfig {
  std::map<std::string, std::string> entries;

  std::string model_path = "models/ur10e_like.rmf";

  std::string shape_kind = "hexagon";
  double shape_size = 0.10;
  double shape_duration = 30.0;
  bool center_auto = true;  // center at the initial end-effector position
  Vec3 center = Vec3::Zero();
  std::string plane = "xy";

  int n0 = 100;
  int iterations = 200;
  int patience = 100;
  double alpha = 0.8;
  uint64_t seed = 0;
  std::string method = "saasbo";
  int workers = 1;

  int mpc_horizon = 20;
  double mpc_dt = 0.0025;
  double mpc_period = 0.004;
  int mpc_max_iterations = 10;
  double ctrl_period = 0.002;
  double substep = 0.0005;
  VecX q0;  // empty = all zeros
  bool deterministic_time = false;
  double per_iteration_time = 5e-4;

  McmcSettings mcmc;
};

RunConfig parse_run_config(std::istream& in, const std::string& origin_name);
RunConfig load_run_config(const std::string& path);

/// Applies one key/value pair; throws std::runtime_error naming the key on
/// unknown keys or unparsable values.
void set_config_key(RunConfig& config, const std::string& key,
                    const std::string& value);

/// Resolves the run config against a loaded model ('auto' center and the
/// constant reference orientation come from the initial configuration).
EpisodeConfig make_episode_config(const RunConfig& config,
                                  const RobotModel& model);
CampaignConfig make_campaign_config(const RunConfig& config,
                                    const RobotModel& model);

/// Published parameter sets: "default", "vanilla-bo", "saasbo".
VecX preset_theta(const std::string& name);

}  // namespace twintune
