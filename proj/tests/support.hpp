// Shared helpers for the test suites: deterministic RNG wrappers, scene
// builders and a scratch directory.
#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ravp/scene.hpp"

namespace test_support {

using ravp::Scene;
using ravp::Splat;
using ravp::Vec3;

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline Vec3 uniform_vec3(std::mt19937_64& g, const Vec3& lo, const Vec3& hi) {
  return Vec3(uniform(g, lo.x(), hi.x()), uniform(g, lo.y(), hi.y()), uniform(g, lo.z(), hi.z()));
}

inline Splat random_splat(std::mt19937_64& g, const Vec3& lo, const Vec3& hi) {
  Splat s;
  s.mu = uniform_vec3(g, lo, hi);
  s.sigma = uniform(g, 0.02, 0.3);
  s.opacity = uniform(g, 0.1, 0.95);
  s.color = Vec3(uniform(g, 0, 1), uniform(g, 0, 1), uniform(g, 0, 1));
  return s;
}

inline Scene random_scene(std::uint64_t seed, int n, const Vec3& lo = Vec3(0, 0, 0),
                          const Vec3& hi = Vec3(4, 2, 4)) {
  auto g = rng(seed);
  Scene scene;
  scene.bounds_min = lo;
  scene.bounds_max = hi;
  for (int i = 0; i < n; ++i) scene.splats.push_back(random_splat(g, lo, hi));
  return scene;
}

inline std::string scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "ravp_tests";
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace test_support
