#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "twintune/model.hpp"

namespace twintune {

/// Target density for the sampler: returns log p(z) and fills the gradient.
using LogDensityGrad = std::function<double(const VecX&, VecX&)>;

struct NutsConfig {
  int warmup = 1024;
  int samples = 1024;
  int max_tree_depth = 10;
  double target_accept = 0.8;
  double divergence_threshold = 1000.0;
};

struct NutsResult {
  std::vector<VecX> draws;  // one per post-warmup transition
  int divergences = 0;
  double step_size = 0.0;
};

/// No-U-Turn sampler with dual-averaging step-size adaptation during warmup.
/// Deterministic under a fixed seed.
NutsResult nuts_sample(const LogDensityGrad& target, const VecX& init,
                       const NutsConfig& config, uint64_t seed);

}  // namespace twintune
