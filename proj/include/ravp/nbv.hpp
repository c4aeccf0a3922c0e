// Risk-masked next-best-view selection: mask regions around a planned
// segment, proximity weighting by safe-grid graph distance, accumulation of
// diagonal Fisher information over views, the proximity-weighted expected
// information gain and its per-splat decomposition, and yaw optimization by
// multi-start gradient ascent with an information-based early stop.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ravp/plan.hpp"
#include "ravp/render.hpp"
#include "ravp/risk.hpp"
#include "ravp/scene.hpp"

namespace ravp {

// r_mask = beta1 * exp(-beta2 * alpha): riskier waypoints mask a larger ball.
inline double mask_radius(double alpha, double beta1, double beta2) {
  if (!(beta1 > 0.0) || !(beta2 > 0.0))
    throw std::invalid_argument("mask_radius: beta1 and beta2 must be positive");
  return beta1 * std::exp(-beta2 * alpha);
}

// Union of per-waypoint balls; member_splats lists scene indices whose mean
// falls inside at least one ball, in ascending order.
struct MaskRegion {
  std::vector<Vec3> centers;
  std::vector<double> radii;
  std::vector<int> member_splats;
};

inline MaskRegion build_mask(const PathSegment& segment, const RiskField& field,
                             const Scene& scene, double beta1, double beta2) {
  if (segment.vertex_ids.empty()) throw std::invalid_argument("build_mask: empty segment");
  MaskRegion mask;
  mask.centers = segment.waypoints;
  mask.radii.reserve(segment.vertex_ids.size());
  for (int v : segment.vertex_ids)
    mask.radii.push_back(mask_radius(field.values[std::size_t(v)], beta1, beta2));
  for (std::size_t i = 0; i < scene.splats.size(); ++i) {
    const Vec3& mu = scene.splats[i].mu;
    for (std::size_t k = 0; k < mask.centers.size(); ++k) {
      if ((mu - mask.centers[k]).norm() <= mask.radii[k]) {
        mask.member_splats.push_back(int(i));
        break;
      }
    }
  }
  return mask;
}

struct ProximityParams {
  double w_alpha = 1.0;
  double w_beta = 1.1;
};

// Exponential decay in the safe-grid graph distance between the pose and the
// splat centers. Falls back to Euclidean distance when either endpoint snaps
// to an unsafe vertex or the two are disconnected. One Dijkstra sweep serves
// all queries.
inline std::vector<double> proximity_weights(const Pose& pose, const std::vector<Vec3>& mus,
                                             const ProximityParams& params, const SafeSet& safe) {
  if (!(params.w_alpha > 0.0) || params.w_beta < 0.0)
    throw std::invalid_argument("proximity_weights: need w_alpha > 0, w_beta >= 0");
  const Lattice& lat = safe.lattice;
  const int src = lat.snap(pose.position);
  std::vector<double> graph_dist;
  if (safe.contains(src)) graph_dist = detail::safe_distances(safe, src);

  std::vector<double> out;
  out.reserve(mus.size());
  for (const Vec3& mu : mus) {
    double dist;
    const int snap = lat.snap(mu);
    if (!graph_dist.empty() && safe.contains(snap) &&
        std::isfinite(graph_dist[std::size_t(snap)])) {
      dist = graph_dist[std::size_t(snap)];
    } else {
      dist = (pose.position - mu).norm();
    }
    out.push_back(params.w_alpha * std::exp(-params.w_beta * dist));
  }
  return out;
}

inline double proximity_weight(const Pose& pose, const Vec3& mu, double w_alpha, double w_beta,
                               const SafeSet& safe) {
  return proximity_weights(pose, {mu}, ProximityParams{w_alpha, w_beta}, safe)[0];
}

// Diagonal Fisher information accumulated over assimilated views: the
// regularizer lambda plus the running sum of view Hessian diagonals. Keeping
// the sum separate from lambda makes two-view accumulation exactly
// commutative; every effective entry is >= lambda by construction.
struct PriorInfo {
  std::vector<Vec8> accumulated;  // sum of assimilated view diagonals
  double lambda = 1e-6;
  int view_count = 0;

  double entry(std::size_t splat, int param) const {
    return lambda + accumulated[splat][param];
  }

  static PriorInfo init(std::size_t splat_count, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("PriorInfo: lambda must be positive");
    PriorInfo p;
    p.accumulated.assign(splat_count, Vec8::Zero());
    p.lambda = lambda;
    return p;
  }
};

inline PriorInfo accumulate_prior(const PriorInfo& prior, const SplatHessianDiag& view) {
  if (prior.accumulated.size() != view.rows.size())
    throw std::invalid_argument("accumulate_prior: splat counts differ");
  PriorInfo out = prior;
  for (std::size_t i = 0; i < out.accumulated.size(); ++i) out.accumulated[i] += view.rows[i];
  out.view_count = prior.view_count + 1;
  return out;
}

// Proximity-weighted information gain from precomputed per-splat Hessian
// diagonals: with all matrices diagonal the trace collapses to
//   sum over masked splats i, parameters p of
//     (weight_i * hess[i][p] + lambda_share) / prior[i][p],
// where the regularizing lambda of the new-view Hessian is split uniformly
// over the masked parameters. An empty mask gains nothing.
inline double info_gain_from_hessian(const SplatHessianDiag& hess, const MaskRegion& mask,
                                     const PriorInfo& prior, const std::vector<double>& weights) {
  if (weights.size() != mask.member_splats.size())
    throw std::invalid_argument("info_gain: weights must match mask members");
  if (mask.member_splats.empty()) return 0.0;
  const double lambda_share = prior.lambda / (kSplatParams * double(mask.member_splats.size()));
  double total = 0.0;
  for (std::size_t j = 0; j < mask.member_splats.size(); ++j) {
    const std::size_t i = std::size_t(mask.member_splats[j]);
    const Vec8& h = hess.rows[i];
    for (int p = 0; p < kSplatParams; ++p)
      total += (weights[j] * h[p] + lambda_share) / prior.entry(i, p);
  }
  return total;
}

inline std::vector<double> info_gain_per_splat_from_hessian(const SplatHessianDiag& hess,
                                                            const MaskRegion& mask,
                                                            const PriorInfo& prior,
                                                            const std::vector<double>& weights) {
  if (weights.size() != mask.member_splats.size())
    throw std::invalid_argument("info_gain: weights must match mask members");
  std::vector<double> out(mask.member_splats.size(), 0.0);
  if (mask.member_splats.empty()) return out;
  const double lambda_share = prior.lambda / (kSplatParams * double(mask.member_splats.size()));
  for (std::size_t j = 0; j < mask.member_splats.size(); ++j) {
    const std::size_t i = std::size_t(mask.member_splats[j]);
    const Vec8& h = hess.rows[i];
    double comp = 0.0;
    for (int p = 0; p < kSplatParams; ++p)
      comp += (weights[j] * h[p] + lambda_share) / prior.entry(i, p);
    out[j] = comp;
  }
  return out;
}

inline double info_gain(const Pose& pose, const Scene& scene, const MaskRegion& mask,
                        const PriorInfo& prior, const std::vector<double>& weights,
                        const CameraIntrinsics& cam) {
  return info_gain_from_hessian(splat_hessian_diag(scene, pose, cam), mask, prior, weights);
}

inline std::vector<double> info_gain_per_splat(const Pose& pose, const Scene& scene,
                                               const MaskRegion& mask, const PriorInfo& prior,
                                               const std::vector<double>& weights,
                                               const CameraIntrinsics& cam) {
  return info_gain_per_splat_from_hessian(splat_hessian_diag(scene, pose, cam), mask, prior,
                                          weights);
}

// Diagonal specialization of the positive-semidefinite ordering A >= B.
inline bool loewner_geq(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("loewner_geq: dimensions differ");
  return ((a - b).array() >= 0.0).all();
}

inline bool loewner_geq(const std::vector<Vec8>& a, const std::vector<Vec8>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("loewner_geq: dimensions differ");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!((a[i] - b[i]).array() >= 0.0).all()) return false;
  return true;
}

enum class StopReason { converged, early_info_stop, max_iters };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::converged: return "converged";
    case StopReason::early_info_stop: return "early_info_stop";
    default: return "max_iters";
  }
}

struct NbvParams {
  int starts = 8;
  double step = 0.2;        // first-iteration yaw step, radians
  int max_iters = 15;
  double fd_step = 0.01;    // central-difference step, radians
  double eig_stop = 0.0;    // information early stop; 0 disables
  double batch_fraction = 1.0;
  std::uint64_t seed = 0;
};

struct NbvResult {
  double yaw_star = 0.0;
  double eig_star = 0.0;
  struct TraceEntry {
    int start_id;
    int iter;
    double yaw;
    double eig;
  };
  std::vector<TraceEntry> trace;
  StopReason stop_reason = StopReason::max_iters;
};

namespace detail {

inline double canonical_uniform(std::uint64_t& state) {
  // xorshift* stream; 53-bit mantissa in [0, 1).
  state ^= state >> 12;
  state ^= state << 25;
  state ^= state >> 27;
  return double((state * 0x2545F4914F6CDD1Dull) >> 11) * 0x1.0p-53;
}

}  // namespace detail

// Unbiased mini-batch estimate of sum(values): draws round(fraction * n)
// indices with replacement, each with probability proportional to its
// (positive) weight, and averages values[j] / p_j. With fraction >= 1 the
// exact sum is returned.
inline double sample_weighted_sum(const std::vector<double>& values,
                                  const std::vector<double>& weights, double fraction,
                                  std::uint64_t& rng_state) {
  if (values.size() != weights.size())
    throw std::invalid_argument("sample_weighted_sum: size mismatch");
  if (values.empty()) return 0.0;
  if (fraction >= 1.0) {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum;
  }
  const std::size_t n = values.size();
  std::vector<double> cum(n, 0.0);
  double wsum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!(weights[j] > 0.0))
      throw std::invalid_argument("sample_weighted_sum: weights must be positive");
    wsum += weights[j];
    cum[j] = wsum;
  }
  const int batch = std::max(1, int(std::lround(fraction * double(n))));
  double acc = 0.0;
  for (int s = 0; s < batch; ++s) {
    const double u = detail::canonical_uniform(rng_state) * wsum;
    std::size_t j = std::size_t(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    if (j >= n) j = n - 1;
    acc += values[j] * (wsum / weights[j]);
  }
  return acc / double(batch);
}

// Multi-start gradient ascent of the information gain over yaw. Start 0 is
// the nominal yaw, so the returned optimum never falls below it. Gradients
// are central finite differences of the per-splat components; with
// batch_fraction < 1 each iteration resamples masked splats proportionally
// to their proximity weight and rescales by the inverse probability, which
// keeps the estimator unbiased. The step size is calibrated per start so the
// first move spans `step` radians.
inline NbvResult optimize_yaw(const Vec3& waypoint, double nominal_yaw, const Scene& scene,
                              const MaskRegion& mask, const PriorInfo& prior, const SafeSet& safe,
                              const CameraIntrinsics& cam, const ProximityParams& prox,
                              const NbvParams& params) {
  if (!(params.batch_fraction > 0.0 && params.batch_fraction <= 1.0))
    throw std::invalid_argument("optimize_yaw: batch_fraction must be in (0, 1]");
  NbvResult res;
  res.yaw_star = wrap_angle(nominal_yaw);
  if (mask.member_splats.empty()) {
    res.eig_star = 0.0;
    res.trace.push_back({0, 0, res.yaw_star, 0.0});
    res.stop_reason = StopReason::early_info_stop;
    return res;
  }

  std::vector<Vec3> mus;
  mus.reserve(mask.member_splats.size());
  for (int i : mask.member_splats) mus.push_back(scene.splats[std::size_t(i)].mu);
  const Pose at{waypoint, 0.0};
  const std::vector<double> weights = proximity_weights(at, mus, prox, safe);

  const auto components = [&](double yaw) {
    return info_gain_per_splat(Pose{waypoint, wrap_angle(yaw)}, scene, mask, prior, weights, cam);
  };
  const auto gain = [&](double yaw) {
    return info_gain(Pose{waypoint, wrap_angle(yaw)}, scene, mask, prior, weights, cam);
  };

  const std::size_t m = mask.member_splats.size();
  std::uint64_t rng = params.seed * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull;

  // Central difference of each per-splat component, then the (possibly
  // mini-batched) proximity-weighted sum.
  std::vector<double> grad_comps(m, 0.0);
  const auto gradient = [&](double yaw) {
    const std::vector<double> cp = components(yaw + params.fd_step);
    const std::vector<double> cm = components(yaw - params.fd_step);
    for (std::size_t j = 0; j < m; ++j) grad_comps[j] = (cp[j] - cm[j]) / (2.0 * params.fd_step);
    return sample_weighted_sum(grad_comps, weights, params.batch_fraction, rng);
  };

  double best_eig = -std::numeric_limits<double>::infinity();
  double best_yaw = wrap_angle(nominal_yaw);
  StopReason best_reason = StopReason::max_iters;

  for (int s = 0; s <= params.starts; ++s) {
    const double yaw0 = s == 0 ? wrap_angle(nominal_yaw)
                               : wrap_angle(-M_PI + 2.0 * M_PI * double(s - 1) / params.starts);
    double yaw = yaw0;
    double cur = gain(yaw);
    res.trace.push_back({s, 0, yaw, cur});
    bool improved = cur > best_eig;
    StopReason reason = StopReason::max_iters;
    if (improved) {
      best_eig = cur;
      best_yaw = yaw;
    }

    if (params.eig_stop > 0.0 && cur < params.eig_stop) {
      reason = StopReason::early_info_stop;
    } else {
      double eta = 0.0;
      for (int it = 1; it <= params.max_iters; ++it) {
        const double g = gradient(yaw);
        if (std::fabs(g) < 1e-300) {
          reason = StopReason::converged;
          break;
        }
        // The first move spans `step` radians; afterwards eta adapts by
        // backtracking whenever a trial step would lose gain.
        if (it == 1) eta = params.step / std::fabs(g);
        double delta = std::clamp(eta * g, -0.5, 0.5);
        double next = wrap_angle(yaw + delta);
        double next_gain = gain(next);
        for (int halvings = 0; halvings < 6 && next_gain < cur; ++halvings) {
          delta *= 0.5;
          eta *= 0.5;
          next = wrap_angle(yaw + delta);
          next_gain = gain(next);
        }
        yaw = next;
        cur = next_gain;
        res.trace.push_back({s, it, yaw, cur});
        if (cur > best_eig) {
          best_eig = cur;
          best_yaw = yaw;
          improved = true;
        }
        if (std::fabs(delta) < 1e-4) {
          reason = StopReason::converged;
          break;
        }
        if (params.eig_stop > 0.0 && cur < params.eig_stop) {
          reason = StopReason::early_info_stop;
          break;
        }
      }
    }
    if (improved) best_reason = reason;
  }

  res.yaw_star = best_yaw;
  res.eig_star = best_eig;
  res.stop_reason = best_reason;
  return res;
}

}  // namespace ravp
