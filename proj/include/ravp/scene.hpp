// Core domain types: isotropic Gaussian splats, scenes, camera poses and
// rectilinear lattices, plus scene-file (de)serialization.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace ravp {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec8 = Eigen::Matrix<double, 8, 1>;

// Per-splat parameter layout used by Jacobians, Hessian diagonals and the
// Fisher prior: (mu_x, mu_y, mu_z, sigma, opacity, color_r, color_g, color_b).
inline constexpr int kSplatParams = 8;

struct Splat {
  Vec3 mu;         // center, meters
  double sigma;    // isotropic stddev, meters (covariance sigma^2 * I3)
  double opacity;  // in [0, 1]
  Vec3 color;      // rgb in [0, 1]^3
};

struct Scene {
  std::vector<Splat> splats;
  Vec3 bounds_min;
  Vec3 bounds_max;
};

// Position plus yaw about the vertical axis; pitch and roll are fixed to zero.
struct Pose {
  Vec3 position;
  double yaw;  // radians in [-pi, pi)
};

struct CameraIntrinsics {
  double focal;  // pixels
  int width;
  int height;
  double near;  // clip depths, meters
  double far;
};

// Rectilinear vertex grid. Linear vertex order is i-major, then j, then k:
// index(i,j,k) = (i * dims[1] + j) * dims[2] + k.
struct Lattice {
  Vec3 origin;
  double spacing;
  std::array<int, 3> dims;

  std::int64_t vertex_count() const {
    return std::int64_t(dims[0]) * dims[1] * dims[2];
  }
  int index(int i, int j, int k) const {
    return (i * dims[1] + j) * dims[2] + k;
  }
  std::array<int, 3> coords(int index) const {
    const int k = index % dims[2];
    const int j = (index / dims[2]) % dims[1];
    const int i = index / (dims[1] * dims[2]);
    return {i, j, k};
  }
  Vec3 vertex(int i, int j, int k) const {
    return origin + spacing * Vec3(i, j, k);
  }
  Vec3 vertex(int index) const {
    const auto c = coords(index);
    return vertex(c[0], c[1], c[2]);
  }
  // Nearest vertex; points outside the grid clamp to the boundary.
  int snap(const Vec3& p) const {
    std::array<int, 3> c;
    for (int a = 0; a < 3; ++a) {
      const int v = int(std::lround((p[a] - origin[a]) / spacing));
      c[a] = std::min(std::max(v, 0), dims[a] - 1);
    }
    return index(c[0], c[1], c[2]);
  }
  bool contains(const Vec3& p) const {
    for (int a = 0; a < 3; ++a) {
      const double t = p[a] - origin[a];
      if (t < 0.0 || t > spacing * (dims[a] - 1)) return false;
    }
    return true;
  }
};

inline void validate_lattice(const Lattice& lat) {
  if (!(lat.spacing > 0.0)) throw std::invalid_argument("lattice: spacing must be positive");
  for (int a = 0; a < 3; ++a)
    if (lat.dims[a] < 2) throw std::invalid_argument("lattice: dims must be >= 2 per axis");
  if (!lat.origin.allFinite()) throw std::invalid_argument("lattice: origin must be finite");
}

// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * M_PI);
  if (r >= M_PI) r -= 2.0 * M_PI;  // remainder yields [-pi, pi]; fold +pi
  return r;
}

inline Pose make_pose(const Vec3& position, double yaw) {
  if (!position.allFinite() || !std::isfinite(yaw))
    throw std::invalid_argument("make_pose: non-finite input");
  return Pose{position, wrap_angle(yaw)};
}

// World frame: +y is up. The camera frame coincides with the world frame at
// yaw 0 and rotates about +y; the optical axis is camera +z, so the forward
// direction in world coordinates is (sin yaw, 0, cos yaw). The camera frame
// is right-handed with +x to the right and +y up.
struct CameraBasis {
  Vec3 right;
  Vec3 up;
  Vec3 fwd;
};

inline CameraBasis camera_basis(double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return CameraBasis{Vec3(c, 0.0, -s), Vec3(0.0, 1.0, 0.0), Vec3(s, 0.0, c)};
}

// World point -> camera frame; depth is the third component.
inline Vec3 camera_transform(const Pose& pose, const Vec3& point) {
  const CameraBasis b = camera_basis(pose.yaw);
  const Vec3 d = point - pose.position;
  return Vec3(b.right.dot(d), b.up.dot(d), b.fwd.dot(d));
}

// Yaw that points the optical axis from `from` toward `to`. Degenerate
// (vertical or zero) offsets give yaw 0.
inline double bearing_yaw(const Vec3& from, const Vec3& to) {
  const double dx = to.x() - from.x();
  const double dz = to.z() - from.z();
  if (dx == 0.0 && dz == 0.0) return 0.0;
  return wrap_angle(std::atan2(dx, dz));
}

inline void validate_camera(const CameraIntrinsics& cam) {
  if (!(cam.focal > 0.0)) throw std::invalid_argument("camera: focal must be positive");
  if (cam.width < 8 || cam.height < 8) throw std::invalid_argument("camera: image size must be >= 8");
  if (!(cam.near > 0.0) || !(cam.far > cam.near))
    throw std::invalid_argument("camera: need 0 < near < far");
}

// Checks the Splat/Scene invariants; error messages carry the splat index.
inline void validate_scene(const Scene& scene) {
  if (scene.splats.empty()) throw std::invalid_argument("scene: must contain at least one splat");
  for (int a = 0; a < 3; ++a)
    if (!(scene.bounds_min[a] < scene.bounds_max[a]))
      throw std::invalid_argument("scene: bounds min must be below max");
  double sigma_max = 0.0;
  for (std::size_t i = 0; i < scene.splats.size(); ++i) {
    const Splat& s = scene.splats[i];
    const std::string at = "scene: splat " + std::to_string(i) + ": ";
    if (!s.mu.allFinite() || !std::isfinite(s.sigma) || !std::isfinite(s.opacity) ||
        !s.color.allFinite())
      throw std::invalid_argument(at + "non-finite field");
    if (!(s.sigma > 0.0)) throw std::invalid_argument(at + "sigma must be positive");
    if (s.opacity < 0.0 || s.opacity > 1.0)
      throw std::invalid_argument(at + "opacity must be in [0, 1]");
    for (int c = 0; c < 3; ++c)
      if (s.color[c] < 0.0 || s.color[c] > 1.0)
        throw std::invalid_argument(at + "color must be in [0, 1]");
    sigma_max = std::max(sigma_max, s.sigma);
  }
  const Vec3 lo = scene.bounds_min.array() - 3.0 * sigma_max;
  const Vec3 hi = scene.bounds_max.array() + 3.0 * sigma_max;
  for (std::size_t i = 0; i < scene.splats.size(); ++i) {
    const Vec3& mu = scene.splats[i].mu;
    for (int a = 0; a < 3; ++a)
      if (mu[a] < lo[a] || mu[a] > hi[a])
        throw std::invalid_argument("scene: splat " + std::to_string(i) +
                                    ": mean outside bounds inflated by 3*sigma_max");
  }
}

namespace detail {

inline Vec3 parse_vec3(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw std::runtime_error(std::string("scene: ") + what + " must be a 3-array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace detail

inline Scene scene_from_json(const nlohmann::json& j) {
  Scene scene;
  scene.bounds_min = detail::parse_vec3(j.at("bounds").at("min"), "bounds.min");
  scene.bounds_max = detail::parse_vec3(j.at("bounds").at("max"), "bounds.max");
  for (const auto& js : j.at("splats")) {
    Splat s;
    s.mu = detail::parse_vec3(js.at("mu"), "splat.mu");
    s.sigma = js.at("sigma").get<double>();
    s.opacity = js.at("opacity").get<double>();
    s.color = detail::parse_vec3(js.at("color"), "splat.color");
    scene.splats.push_back(s);
  }
  validate_scene(scene);
  return scene;
}

inline nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json j;
  j["bounds"]["min"] = {scene.bounds_min.x(), scene.bounds_min.y(), scene.bounds_min.z()};
  j["bounds"]["max"] = {scene.bounds_max.x(), scene.bounds_max.y(), scene.bounds_max.z()};
  j["splats"] = nlohmann::json::array();
  for (const Splat& s : scene.splats) {
    nlohmann::json js;
    js["mu"] = {s.mu.x(), s.mu.y(), s.mu.z()};
    js["sigma"] = s.sigma;
    js["opacity"] = s.opacity;
    js["color"] = {s.color.x(), s.color.y(), s.color.z()};
    j["splats"].push_back(std::move(js));
  }
  return j;
}

inline Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("scene: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("scene: parse failure in " + path + ": " + e.what());
  }
  try {
    return scene_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("scene: malformed " + path + ": " + e.what());
  }
}

// JSON round-trips doubles exactly, so save followed by load reproduces
// every field bit for bit.
inline void save_scene(const Scene& scene, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("scene: cannot write " + path);
  out << scene_to_json(scene).dump(2) << '\n';
}

}  // namespace ravp
