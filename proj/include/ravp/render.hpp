// Forward splatting renderer with front-to-back alpha compositing of
// isotropic screen-space Gaussians, joint RGB+depth L1 loss, and analytic
// per-splat parameter derivatives through the compositing chain (depth
// ordering held fixed). The derivative sweep feeds both the diagonal
// Gauss-Newton Hessian diag(J^T J) and plain gradient-descent map refinement.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ravp/scene.hpp"

namespace ravp {

// Blending weights are clamped below 1 so transmittance stays positive.
inline constexpr double kMaxBlendWeight = 0.999;
// Compositing terminates once this little light is left.
inline constexpr double kMinTransmittance = 1e-4;
// Lower bound kept on sigma during refinement.
inline constexpr double kMinSigma = 1e-4;

struct ProjectedSplat {
  int splat_index;
  Vec2 center2d;    // pixels
  double radius2d;  // projected stddev, pixels
  double depth;     // camera-frame z, meters
};

struct RenderedImage {
  int width = 0;
  int height = 0;
  std::vector<double> color;                // (v * width + u) * 3 + channel
  std::vector<double> depth;                // v * width + u, meters
  std::vector<double> final_transmittance;  // v * width + u

  static RenderedImage zeros(int w, int h) {
    RenderedImage img;
    img.width = w;
    img.height = h;
    img.color.assign(std::size_t(w) * h * 3, 0.0);
    img.depth.assign(std::size_t(w) * h, 0.0);
    img.final_transmittance.assign(std::size_t(w) * h, 0.0);
    return img;
  }
  double color_at(int u, int v, int ch) const {
    return color[(std::size_t(v) * width + u) * 3 + ch];
  }
  double depth_at(int u, int v) const { return depth[std::size_t(v) * width + u]; }
};

// Diagonal of J^T J per splat, parameter order as kSplatParams.
struct SplatHessianDiag {
  std::vector<Vec8> rows;
};

// Pixel centers sit at integer coordinates; the principal point is the
// center of the pixel grid.
inline double principal_x(const CameraIntrinsics& cam) { return 0.5 * (cam.width - 1); }
inline double principal_y(const CameraIntrinsics& cam) { return 0.5 * (cam.height - 1); }

// Pinhole projection of the splat center; the footprint is an isotropic 2D
// Gaussian of stddev focal * sigma / depth. Returns nullopt when the depth
// leaves (near, far) or the 3-stddev disc misses the image.
inline std::optional<ProjectedSplat> project_splat(const Splat& splat, const Pose& pose,
                                                   const CameraIntrinsics& cam,
                                                   int splat_index = 0) {
  const Vec3 q = camera_transform(pose, splat.mu);
  if (!(q.z() > cam.near && q.z() < cam.far)) return std::nullopt;
  const double u = principal_x(cam) + cam.focal * q.x() / q.z();
  const double v = principal_y(cam) + cam.focal * q.y() / q.z();
  const double r = cam.focal * splat.sigma / q.z();
  const double pad = 3.0 * r;
  if (u + pad < -0.5 || u - pad > cam.width - 0.5 || v + pad < -0.5 || v - pad > cam.height - 0.5)
    return std::nullopt;
  return ProjectedSplat{splat_index, Vec2(u, v), r, q.z()};
}

namespace detail {

struct ProjectedFull {
  int splat;  // scene index
  double u, v;
  double s;           // radius2d
  double qx, qy, qz;  // camera-frame center
  double opacity;
  Vec3 color;
};

// Projects every splat and sorts front to back; depth ties keep scene order.
inline std::vector<ProjectedFull> project_sorted(const Scene& scene, const Pose& pose,
                                                 const CameraIntrinsics& cam) {
  const double cx = principal_x(cam), cy = principal_y(cam);
  std::vector<ProjectedFull> out;
  out.reserve(scene.splats.size());
  for (std::size_t i = 0; i < scene.splats.size(); ++i) {
    const Splat& sp = scene.splats[i];
    const Vec3 q = camera_transform(pose, sp.mu);
    if (!(q.z() > cam.near && q.z() < cam.far)) continue;
    const double u = cx + cam.focal * q.x() / q.z();
    const double v = cy + cam.focal * q.y() / q.z();
    const double s = cam.focal * sp.sigma / q.z();
    const double pad = 3.0 * s;
    if (u + pad < -0.5 || u - pad > cam.width - 0.5 || v + pad < -0.5 ||
        v - pad > cam.height - 0.5)
      continue;
    out.push_back(ProjectedFull{int(i), u, v, s, q.x(), q.y(), q.z(), sp.opacity, sp.color});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ProjectedFull& a, const ProjectedFull& b) { return a.qz < b.qz; });
  return out;
}

}  // namespace detail

inline RenderedImage render(const Scene& scene, const Pose& pose, const CameraIntrinsics& cam) {
  validate_camera(cam);
  const auto proj = detail::project_sorted(scene, pose, cam);
  RenderedImage img = RenderedImage::zeros(cam.width, cam.height);
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      double T = 1.0;
      double c0 = 0.0, c1 = 0.0, c2 = 0.0, d = 0.0;
      for (const auto& p : proj) {
        const double dx = u - p.u, dy = v - p.v;
        const double g = std::exp(-0.5 * (dx * dx + dy * dy) / (p.s * p.s));
        const double rho = std::min(p.opacity * g, kMaxBlendWeight);
        const double w = T * rho;
        c0 += w * p.color[0];
        c1 += w * p.color[1];
        c2 += w * p.color[2];
        d += w * p.qz;
        T *= 1.0 - rho;
        if (T < kMinTransmittance) break;
      }
      const std::size_t px = std::size_t(v) * cam.width + u;
      img.color[px * 3 + 0] = c0;
      img.color[px * 3 + 1] = c1;
      img.color[px * 3 + 2] = c2;
      img.depth[px] = d + T * cam.far;  // background at far
      img.final_transmittance[px] = T;
    }
  }
  return img;
}

// Mean absolute color error plus depth_weight times the mean absolute
// far-normalized depth error.
inline double render_loss(const RenderedImage& rendered, const RenderedImage& target,
                          double depth_weight, double far) {
  if (rendered.width != target.width || rendered.height != target.height)
    throw std::invalid_argument("render_loss: image dimensions differ");
  const std::size_t n = std::size_t(rendered.width) * rendered.height;
  double csum = 0.0;
  for (std::size_t i = 0; i < 3 * n; ++i) csum += std::fabs(rendered.color[i] - target.color[i]);
  double dsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) dsum += std::fabs(rendered.depth[i] - target.depth[i]);
  return csum / double(3 * n) + depth_weight * dsum / (double(n) * far);
}

// ---------------------------------------------------------------------------
// Derivative sweep.
//
// Output channels per pixel are (color_r, color_g, color_b, depth / far).
// For splat i with blend weight w_i = T_i rho_i, the partial of any channel
// with respect to a parameter p of splat i that acts through rho_i is
//   d out / d p = (d rho_i / d p) * bracket,  with
//   bracket = T_i * value_i - suffix / (1 - rho_i),
// where suffix sums the contributions of everything composited behind i
// (including the far background in the depth channel). The splat mean also
// moves its camera depth directly, adding w_i * fwd / far to the depth
// channel; color parameters contribute w_i to their own channel only.
// ---------------------------------------------------------------------------

struct PixelForward {
  int u, v;
  double color[3];
  double depth_norm;  // depth / far
  double t_end;
};

struct SplatPixelDerivs {
  int splat;          // scene index
  double w;           // blend weight
  double t_before;    // transmittance ahead of this splat
  double bracket[4];  // d out_ch / d rho; depth channel already divided by far
  Vec3 drho_dmu;      // world frame
  double drho_dsigma;
  double drho_dopacity;
  Vec3 ddepthnorm_dmu;  // w * fwd / far, the direct depth term
};

// Visitor requirements:
//   void begin_pixel(const PixelForward&);
//   void accumulate(const SplatPixelDerivs&);
// Called per pixel, then once per splat composited at that pixel (in
// back-to-front order). Splats culled at projection are never visited.
template <class Visitor>
void render_backward(const Scene& scene, const Pose& pose, const CameraIntrinsics& cam,
                     Visitor& vis) {
  validate_camera(cam);
  const auto proj = detail::project_sorted(scene, pose, cam);
  const CameraBasis basis = camera_basis(pose.yaw);
  const Vec3 fwd_over_far = basis.fwd / cam.far;

  struct Processed {
    int p;  // index into proj
    double g, rho, w, t_before, dx, dy;
    bool clamped;
  };
  std::vector<Processed> stack;
  stack.reserve(proj.size());

  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      stack.clear();
      double T = 1.0;
      double acc[4] = {0.0, 0.0, 0.0, 0.0};
      for (std::size_t pi = 0; pi < proj.size(); ++pi) {
        const auto& p = proj[pi];
        const double dx = u - p.u, dy = v - p.v;
        const double g = std::exp(-0.5 * (dx * dx + dy * dy) / (p.s * p.s));
        const double raw = p.opacity * g;
        const bool clamped = raw > kMaxBlendWeight;
        const double rho = clamped ? kMaxBlendWeight : raw;
        const double w = T * rho;
        stack.push_back(Processed{int(pi), g, rho, w, T, dx, dy, clamped});
        acc[0] += w * p.color[0];
        acc[1] += w * p.color[1];
        acc[2] += w * p.color[2];
        acc[3] += w * p.qz;
        T *= 1.0 - rho;
        if (T < kMinTransmittance) break;
      }

      PixelForward pf;
      pf.u = u;
      pf.v = v;
      pf.color[0] = acc[0];
      pf.color[1] = acc[1];
      pf.color[2] = acc[2];
      pf.depth_norm = (acc[3] + T * cam.far) / cam.far;
      pf.t_end = T;
      vis.begin_pixel(pf);

      // Suffix sums of what lies behind the current splat; depth includes
      // the background term.
      double suf[4] = {0.0, 0.0, 0.0, T * cam.far};
      for (int si = int(stack.size()) - 1; si >= 0; --si) {
        const Processed& st = stack[std::size_t(si)];
        const auto& p = proj[std::size_t(st.p)];
        const double inv_rest = 1.0 / (1.0 - st.rho);

        SplatPixelDerivs d;
        d.splat = p.splat;
        d.w = st.w;
        d.t_before = st.t_before;
        d.bracket[0] = st.t_before * p.color[0] - suf[0] * inv_rest;
        d.bracket[1] = st.t_before * p.color[1] - suf[1] * inv_rest;
        d.bracket[2] = st.t_before * p.color[2] - suf[2] * inv_rest;
        d.bracket[3] = (st.t_before * p.qz - suf[3] * inv_rest) / cam.far;
        d.ddepthnorm_dmu = st.w * fwd_over_far;

        if (st.clamped) {
          d.drho_dmu.setZero();
          d.drho_dsigma = 0.0;
          d.drho_dopacity = 0.0;
        } else {
          const double s2 = p.s * p.s;
          const double dg_du = st.g * st.dx / s2;
          const double dg_dv = st.g * st.dy / s2;
          const double dg_ds = st.g * (st.dx * st.dx + st.dy * st.dy) / (s2 * p.s);
          const double f_over_z = cam.focal / p.qz;
          // Chain through camera coordinates q = (qx, qy, qz):
          //   u2d = cx + f qx / qz, v2d = cy + f qy / qz, s = f sigma / qz.
          const double dq0 = dg_du * f_over_z;
          const double dq1 = dg_dv * f_over_z;
          const double dq2 = (-dg_du * p.qx * f_over_z - dg_dv * p.qy * f_over_z -
                              dg_ds * p.s) /
                             p.qz;
          d.drho_dmu = p.opacity * (dq0 * basis.right + dq1 * basis.up + dq2 * basis.fwd);
          d.drho_dsigma = p.opacity * dg_ds * f_over_z;
          d.drho_dopacity = st.g;
        }
        vis.accumulate(d);

        suf[0] += st.w * p.color[0];
        suf[1] += st.w * p.color[1];
        suf[2] += st.w * p.color[2];
        suf[3] += st.w * p.qz;
      }
    }
  }
}

namespace detail {

struct HessianVisitor {
  std::vector<Vec8>& rows;
  void begin_pixel(const PixelForward&) {}
  void accumulate(const SplatPixelDerivs& d) {
    Vec8& r = rows[std::size_t(d.splat)];
    const double b2 = d.bracket[0] * d.bracket[0] + d.bracket[1] * d.bracket[1] +
                      d.bracket[2] * d.bracket[2] + d.bracket[3] * d.bracket[3];
    for (int k = 0; k < 3; ++k) {
      const double lin = d.drho_dmu[k];
      r[k] += lin * lin * b2 + 2.0 * lin * d.bracket[3] * d.ddepthnorm_dmu[k] +
              d.ddepthnorm_dmu[k] * d.ddepthnorm_dmu[k];
    }
    r[3] += d.drho_dsigma * d.drho_dsigma * b2;
    r[4] += d.drho_dopacity * d.drho_dopacity * b2;
    const double w2 = d.w * d.w;
    r[5] += w2;
    r[6] += w2;
    r[7] += w2;
  }
};

}  // namespace detail

// diag(J^T J) with J the Jacobian of the concatenated color + normalized
// depth image with respect to all splat parameters. Culled splats keep
// all-zero rows.
inline SplatHessianDiag splat_hessian_diag(const Scene& scene, const Pose& pose,
                                           const CameraIntrinsics& cam) {
  SplatHessianDiag h;
  h.rows.assign(scene.splats.size(), Vec8::Zero());
  detail::HessianVisitor vis{h.rows};
  render_backward(scene, pose, cam, vis);
  return h;
}

struct RefineOptions {
  int steps = 0;
  double step_color = 5e-2;  // opacity and color channels
  double step_geom = 5e-3;   // mean and sigma
  double depth_weight = 0.5;
};

namespace detail {

struct LossGradVisitor {
  const RenderedImage& target;
  double depth_weight;
  double far;
  double inv_3n;
  double inv_n;
  std::vector<Vec8>& grad;
  double adj[4] = {0, 0, 0, 0};

  static double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

  void begin_pixel(const PixelForward& pf) {
    const std::size_t px = std::size_t(pf.v) * target.width + pf.u;
    adj[0] = sgn(pf.color[0] - target.color[px * 3 + 0]) * inv_3n;
    adj[1] = sgn(pf.color[1] - target.color[px * 3 + 1]) * inv_3n;
    adj[2] = sgn(pf.color[2] - target.color[px * 3 + 2]) * inv_3n;
    adj[3] = depth_weight * sgn(pf.depth_norm - target.depth[px] / far) * inv_n;
  }
  void accumulate(const SplatPixelDerivs& d) {
    Vec8& g = grad[std::size_t(d.splat)];
    const double adot = adj[0] * d.bracket[0] + adj[1] * d.bracket[1] + adj[2] * d.bracket[2] +
                        adj[3] * d.bracket[3];
    for (int k = 0; k < 3; ++k) g[k] += adot * d.drho_dmu[k] + adj[3] * d.ddepthnorm_dmu[k];
    g[3] += adot * d.drho_dsigma;
    g[4] += adot * d.drho_dopacity;
    g[5] += adj[0] * d.w;
    g[6] += adj[1] * d.w;
    g[7] += adj[2] * d.w;
  }
};

}  // namespace detail

// Plain gradient descent on the summed RGB+depth L1 loss over the given
// views. Parameters are re-projected into their invariant domains after each
// step. The input scene is left untouched.
inline Scene refine_map(const Scene& scene,
                        const std::vector<std::pair<Pose, RenderedImage>>& views,
                        const CameraIntrinsics& cam, const RefineOptions& opt) {
  if (opt.steps < 0) throw std::invalid_argument("refine_map: steps must be >= 0");
  Scene cur = scene;
  if (opt.steps == 0 || views.empty()) return cur;

  std::vector<Vec8> grad;
  for (int step = 0; step < opt.steps; ++step) {
    grad.assign(cur.splats.size(), Vec8::Zero());
    for (const auto& [pose, target] : views) {
      if (target.width != cam.width || target.height != cam.height)
        throw std::invalid_argument("refine_map: target dimensions differ from camera");
      detail::LossGradVisitor vis{target,
                                  opt.depth_weight,
                                  cam.far,
                                  1.0 / (3.0 * cam.width * cam.height),
                                  1.0 / (double(cam.width) * cam.height),
                                  grad};
      render_backward(cur, pose, cam, vis);
    }
    double sigma_max = 0.0;
    for (std::size_t i = 0; i < cur.splats.size(); ++i) {
      Splat& s = cur.splats[i];
      const Vec8& g = grad[i];
      s.mu -= opt.step_geom * Vec3(g[0], g[1], g[2]);
      s.sigma = std::max(s.sigma - opt.step_geom * g[3], kMinSigma);
      s.opacity = std::clamp(s.opacity - opt.step_color * g[4], 0.0, 1.0);
      for (int c = 0; c < 3; ++c)
        s.color[c] = std::clamp(s.color[c] - opt.step_color * g[5 + c], 0.0, 1.0);
      sigma_max = std::max(sigma_max, s.sigma);
    }
    // Keep means inside the scene's inflated bounds.
    const Vec3 lo = cur.bounds_min.array() - 3.0 * sigma_max;
    const Vec3 hi = cur.bounds_max.array() + 3.0 * sigma_max;
    for (Splat& s : cur.splats)
      for (int a = 0; a < 3; ++a) s.mu[a] = std::clamp(s.mu[a], lo[a], hi[a]);
  }
  return cur;
}

}  // namespace ravp
