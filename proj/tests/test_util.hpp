#pragma once

#include <cstdlib>
#include <random>
#include <string>

#include "twintune/model.hpp"

namespace twintune::test {

inline std::string repo_root() {
  if (const char* env = std::getenv("TWINTUNE_ROOT")) return env;
  return ".";
}

inline std::string asset(const std::string& rel) {
  return repo_root() + "/" + rel;
}

inline VecX random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  VecX v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

}  // namespace twintune::test
