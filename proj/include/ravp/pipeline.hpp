// Episode orchestration: the replanning / view-selection / assimilation loop,
// safety and reconstruction metrics, configuration parsing and the report
// and artifact writers used by the command-line tool.
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ravp/io.hpp"
#include "ravp/nbv.hpp"
#include "ravp/plan.hpp"
#include "ravp/render.hpp"
#include "ravp/risk.hpp"
#include "ravp/scene.hpp"

namespace ravp {

struct EpisodeConfig {
  std::string ground_truth_scene;
  std::string initial_scene;
  Lattice lattice;
  std::vector<Vec3> trajectory;  // coarse reference z_1 .. z_N

  double epsilon = 0.05;  // risk level
  double gamma = 0.10;    // risk tolerance, meters
  double margin = -1.0;   // partition inflation; < 0 means 4 lattice spacings
  double delta = -1.0;    // proxy ball radius; < 0 means 3 lattice spacings
  int delta_expansions = 5;

  double beta1 = 0.2;  // mask radius scale, meters
  double beta2 = 1.1;  // mask radius decay, 1/meters
  ProximityParams prox;

  CameraIntrinsics cam{32.0, 32, 32, 0.05, 12.0};
  NbvParams nbv;
  double eig_stop_fraction = 0.01;  // of the first view's optimized gain
  double lambda = 1e-6;

  RefineOptions refine{25, 5e-2, 5e-3, 0.5};
  std::vector<double> corridor_radii;
  std::uint64_t seed = 1;
  bool save_frames = true;

  double margin_m() const { return margin > 0.0 ? margin : 4.0 * lattice.spacing; }
  double delta_m() const { return delta > 0.0 ? delta : 3.0 * lattice.spacing; }
};

inline void validate_config(const EpisodeConfig& cfg) {
  validate_lattice(cfg.lattice);
  validate_camera(cfg.cam);
  if (cfg.trajectory.size() < 2)
    throw std::invalid_argument("config: trajectory needs at least 2 waypoints");
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0))
    throw std::invalid_argument("config: epsilon must be in (0, 1)");
  if (!(cfg.gamma > 0.0)) throw std::invalid_argument("config: gamma must be positive");
  if (!(cfg.beta1 > 0.0 && cfg.beta2 > 0.0))
    throw std::invalid_argument("config: beta1 and beta2 must be positive");
  if (!(cfg.lambda > 0.0)) throw std::invalid_argument("config: lambda must be positive");
  if (!(cfg.refine.depth_weight >= 0.0 && cfg.refine.depth_weight < 1.0))
    throw std::invalid_argument("config: depth_weight must be in [0, 1)");
  double prev = 0.0;
  for (double r : cfg.corridor_radii) {
    if (!(r > prev)) throw std::invalid_argument("config: corridor radii must ascend and be positive");
    prev = r;
  }
}

// 100 * (optimized - nominal) / nominal; NaN marks not-applicable.
inline double eig_gain_percent(double nominal, double optimized) {
  if (!(nominal > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return 100.0 * (optimized - nominal) / nominal;
}

// Min and mean risk value over the path's waypoints.
inline std::pair<double, double> safety_measure(const PathSegment& path, const RiskField& field) {
  if (path.vertex_ids.empty()) throw std::invalid_argument("safety_measure: empty path");
  double mn = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (int v : path.vertex_ids) {
    const double a = field.values[std::size_t(v)];
    mn = std::min(mn, a);
    sum += a;
  }
  return {mn, sum / double(path.vertex_ids.size())};
}

inline double psnr_db(const RenderedImage& a, const RenderedImage& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("psnr: image dimensions differ");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.color.size(); ++i) {
    const double d = a.color[i] - b.color[i];
    mse += d * d;
  }
  mse /= double(a.color.size());
  if (mse <= 0.0) return 99.0;  // identical frames report the sentinel
  return std::min(10.0 * std::log10(1.0 / mse), 99.0);
}

inline double depth_mae(const RenderedImage& a, const RenderedImage& b, double far) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("depth_mae: image dimensions differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.depth.size(); ++i)
    sum += std::fabs(std::min(a.depth[i], far) - std::min(b.depth[i], far));
  return sum / double(a.depth.size());
}

struct CorridorRow {
  double radius;
  double psnr;
  double depth_mae;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

// Reconstruction quality inside spherical corridors around the executed
// path: for each radius, 32 seeded poses with positions uniform in the union
// of balls and uniform yaw, rendered against both scenes.
inline std::vector<CorridorRow> corridor_eval(const Scene& gt, const Scene& estimate,
                                              const std::vector<Vec3>& executed,
                                              const std::vector<double>& radii,
                                              const CameraIntrinsics& cam, std::uint64_t seed) {
  if (executed.empty()) throw std::invalid_argument("corridor_eval: empty path");
  constexpr int kPoses = 32;
  std::vector<CorridorRow> rows;
  for (std::size_t ri = 0; ri < radii.size(); ++ri) {
    const double r = radii[ri];
    Vec3 lo = executed[0], hi = executed[0];
    for (const Vec3& w : executed) {
      lo = lo.cwiseMin(w);
      hi = hi.cwiseMax(w);
    }
    lo.array() -= r;
    hi.array() += r;

    std::uint64_t rng = detail::mix_seed(seed, 0xC0DE + ri);
    double psnr_sum = 0.0, mae_sum = 0.0;
    for (int s = 0; s < kPoses; ++s) {
      Vec3 p;
      bool ok = false;
      for (int tries = 0; tries < 1000000 && !ok; ++tries) {
        for (int a = 0; a < 3; ++a)
          p[a] = lo[a] + (hi[a] - lo[a]) * ravp::detail::canonical_uniform(rng);
        for (const Vec3& w : executed)
          if ((p - w).norm() <= r) {
            ok = true;
            break;
          }
      }
      if (!ok) throw std::runtime_error("corridor_eval: sampling failed");
      const double yaw = -M_PI + 2.0 * M_PI * ravp::detail::canonical_uniform(rng);
      const Pose pose = make_pose(p, yaw);
      const RenderedImage img_gt = render(gt, pose, cam);
      const RenderedImage img_est = render(estimate, pose, cam);
      psnr_sum += psnr_db(img_gt, img_est);
      mae_sum += depth_mae(img_gt, img_est, cam.far);
    }
    rows.push_back(CorridorRow{r, psnr_sum / kPoses, mae_sum / kPoses});
  }
  return rows;
}

// One observation step: fold the view's Fisher diagonal into the prior, then
// descend the joint loss against the observation.
inline std::pair<Scene, PriorInfo> assimilate_view(const Scene& estimate, const PriorInfo& prior,
                                                   const Pose& pose,
                                                   const RenderedImage& observation,
                                                   const CameraIntrinsics& cam,
                                                   const RefineOptions& refine) {
  PriorInfo next_prior = accumulate_prior(prior, splat_hessian_diag(estimate, pose, cam));
  Scene next_scene = refine_map(estimate, {{pose, observation}}, cam, refine);
  return {std::move(next_scene), std::move(next_prior)};
}

struct WaypointRecord {
  int subgoal;
  int vertex_id;
  Vec3 position;
  double yaw;
  double alpha;  // planning-time risk value
  double nominal_eig;
  double optimized_eig;
  double gain_percent;  // NaN when nominal is not positive
  StopReason stop_reason;
};

struct EpisodeReport {
  std::string termination;  // "completed" or "blocked_at_subgoal_<j>"
  std::string block_diagnostic;
  std::uint64_t seed = 0;

  std::vector<WaypointRecord> executed;
  std::vector<PathSegment> segments;
  std::vector<NbvResult> nbv_results;
  std::vector<std::pair<Pose, RenderedImage>> observations;

  double executed_length = 0.0;
  double baseline_length = 0.0;
  // Safety of both paths under the risk field of the ground-truth scene.
  double executed_min_alpha = 0.0;
  double executed_mean_alpha = 0.0;
  double baseline_min_alpha = 0.0;
  double baseline_mean_alpha = 0.0;
  // The planning-time guarantee: min alpha at selection time.
  double planning_min_alpha = 0.0;

  double mean_gain_percent = 0.0;
  int waypoints_with_gain = 0;
  int views_assimilated = 0;

  std::vector<CorridorRow> corridor;
  Scene final_estimate;
  RiskField final_field;
  PathSegment executed_path;
  PathSegment baseline_path;
};

namespace detail {

inline double nominal_yaw_for(const PathSegment& seg, std::size_t k, const Vec3& subgoal) {
  if (k + 1 < seg.waypoints.size()) return bearing_yaw(seg.waypoints[k], seg.waypoints[k + 1]);
  if (seg.waypoints.size() >= 2)
    return bearing_yaw(seg.waypoints[seg.waypoints.size() - 2], seg.waypoints.back());
  return bearing_yaw(seg.waypoints[k], subgoal);
}

}  // namespace detail

inline EpisodeReport run_episode(const EpisodeConfig& cfg) {
  validate_config(cfg);
  const Scene gt = load_scene(cfg.ground_truth_scene);
  Scene est = load_scene(cfg.initial_scene);
  if (gt.splats.size() != est.splats.size())
    throw std::invalid_argument("run_episode: scenes must have matching splat counts");

  EpisodeReport rep;
  rep.seed = cfg.seed;
  PriorInfo prior = PriorInfo::init(est.splats.size(), cfg.lambda);

  PlanParams plan_params{cfg.gamma, cfg.margin_m(), cfg.delta_m(), cfg.delta_expansions};
  NbvParams nbv_params = cfg.nbv;
  nbv_params.eig_stop = 0.0;

  Vec3 cur = cfg.trajectory.front();
  rep.termination = "completed";
  std::vector<int> executed_ids;
  std::vector<Vec3> executed_pos;
  std::vector<double> executed_alpha;

  for (std::size_t j = 0; j + 1 < cfg.trajectory.size(); ++j) {
    const Vec3 subgoal = cfg.trajectory[j + 1];
    const RiskField field = build_risk_field(est, cfg.lattice, cfg.epsilon);
    const PlanResult plan = plan_segment(field, cur, subgoal, plan_params);
    if (plan.blocked) {
      rep.termination = "blocked_at_subgoal_" + std::to_string(j);
      rep.block_diagnostic = plan.diagnostic;
      break;
    }
    const PathSegment& seg = plan.segment;
    rep.segments.push_back(seg);

    const SafeSet safe =
        filter_safe(field, local_partition(cfg.lattice, cur, subgoal, plan_params.margin),
                    cfg.gamma);
    const MaskRegion mask = build_mask(seg, field, est, cfg.beta1, cfg.beta2);

    for (std::size_t k = 0; k < seg.waypoints.size(); ++k) {
      // Consecutive segments share their joint vertex; do not observe twice.
      if (!executed_ids.empty() && seg.vertex_ids[k] == executed_ids.back()) continue;

      const double alpha = field.values[std::size_t(seg.vertex_ids[k])];
      if (alpha < cfg.gamma)
        throw std::logic_error("run_episode: executed waypoint violates the risk tolerance");

      nbv_params.seed = detail::mix_seed(cfg.seed, (j << 20) + k);
      const double nominal = detail::nominal_yaw_for(seg, k, subgoal);
      const NbvResult nbv = optimize_yaw(seg.waypoints[k], nominal, est, mask, prior, safe,
                                         cfg.cam, cfg.prox, nbv_params);
      const Pose pose = make_pose(seg.waypoints[k], nbv.yaw_star);
      const RenderedImage obs = render(gt, pose, cfg.cam);
      std::tie(est, prior) = assimilate_view(est, prior, pose, obs, cfg.cam, cfg.refine);

      const double nominal_eig = nbv.trace.front().eig;
      WaypointRecord rec;
      rec.subgoal = int(j);
      rec.vertex_id = seg.vertex_ids[k];
      rec.position = seg.waypoints[k];
      rec.yaw = nbv.yaw_star;
      rec.alpha = alpha;
      rec.nominal_eig = nominal_eig;
      rec.optimized_eig = nbv.eig_star;
      rec.gain_percent = eig_gain_percent(nominal_eig, nbv.eig_star);
      rec.stop_reason = nbv.stop_reason;
      rep.executed.push_back(rec);
      rep.nbv_results.push_back(nbv);
      rep.observations.emplace_back(pose, obs);
      executed_ids.push_back(seg.vertex_ids[k]);
      executed_pos.push_back(seg.waypoints[k]);
      executed_alpha.push_back(alpha);

      if (nbv_params.eig_stop == 0.0 && nbv.eig_star > 0.0)
        nbv_params.eig_stop = cfg.eig_stop_fraction * nbv.eig_star;
    }
    cur = seg.waypoints.back();
  }

  rep.views_assimilated = int(rep.executed.size());
  rep.final_estimate = est;
  rep.final_field = build_risk_field(est, cfg.lattice, cfg.epsilon);

  if (!executed_ids.empty()) {
    rep.executed_path = detail::make_segment(cfg.lattice, executed_ids, false);
    rep.executed_length = rep.executed_path.total_length;
    rep.planning_min_alpha =
        *std::min_element(executed_alpha.begin(), executed_alpha.end());

    // Risk-ignoring shortest path between the reference endpoints, evaluated
    // against the same ground-truth risk field as the executed path.
    const RiskField gt_field = build_risk_field(gt, cfg.lattice, cfg.epsilon);
    std::vector<int> all(std::size_t(cfg.lattice.vertex_count()));
    for (std::size_t v = 0; v < all.size(); ++v) all[v] = int(v);
    const SafeSet everywhere =
        filter_safe(gt_field, all, -std::numeric_limits<double>::infinity());
    auto base = astar(everywhere, cfg.lattice.snap(cfg.trajectory.front()),
                      cfg.lattice.snap(cfg.trajectory.back()));
    rep.baseline_path = std::move(*base);
    rep.baseline_length = rep.baseline_path.total_length;

    std::tie(rep.executed_min_alpha, rep.executed_mean_alpha) =
        safety_measure(rep.executed_path, gt_field);
    std::tie(rep.baseline_min_alpha, rep.baseline_mean_alpha) =
        safety_measure(rep.baseline_path, gt_field);

    double gain_sum = 0.0;
    int gain_n = 0;
    for (const auto& rec : rep.executed)
      if (std::isfinite(rec.gain_percent)) {
        gain_sum += rec.gain_percent;
        ++gain_n;
      }
    rep.waypoints_with_gain = gain_n;
    rep.mean_gain_percent = gain_n > 0 ? gain_sum / gain_n : 0.0;

    if (!cfg.corridor_radii.empty())
      rep.corridor = corridor_eval(gt, est, executed_pos, cfg.corridor_radii, cfg.cam, cfg.seed);
  }
  return rep;
}

// --- configuration and report serialization -------------------------------

inline EpisodeConfig config_from_json(const nlohmann::json& j, const std::string& base_dir) {
  EpisodeConfig cfg;
  const auto path_of = [&](const std::string& p) {
    if (p.empty() || p.front() == '/' || base_dir.empty()) return p;
    return base_dir + "/" + p;
  };
  cfg.ground_truth_scene = path_of(j.at("ground_truth_scene").get<std::string>());
  cfg.initial_scene = path_of(j.at("initial_scene").get<std::string>());

  const auto& jl = j.at("lattice");
  cfg.lattice.origin = detail::parse_vec3(jl.at("origin"), "lattice.origin");
  cfg.lattice.spacing = jl.at("spacing").get<double>();
  cfg.lattice.dims = {jl.at("dims")[0].get<int>(), jl.at("dims")[1].get<int>(),
                      jl.at("dims")[2].get<int>()};

  for (const auto& w : j.at("trajectory"))
    cfg.trajectory.push_back(detail::parse_vec3(w, "trajectory waypoint"));

  cfg.epsilon = j.value("epsilon", cfg.epsilon);
  cfg.gamma = j.value("gamma", cfg.gamma);
  cfg.margin = j.value("margin", cfg.margin);
  cfg.delta = j.value("delta", cfg.delta);
  cfg.delta_expansions = j.value("delta_expansions", cfg.delta_expansions);
  cfg.beta1 = j.value("beta1", cfg.beta1);
  cfg.beta2 = j.value("beta2", cfg.beta2);
  cfg.prox.w_alpha = j.value("w_alpha", cfg.prox.w_alpha);
  cfg.prox.w_beta = j.value("w_beta", cfg.prox.w_beta);

  if (j.contains("camera")) {
    const auto& jc = j.at("camera");
    cfg.cam.focal = jc.value("focal", cfg.cam.focal);
    cfg.cam.width = jc.value("width", cfg.cam.width);
    cfg.cam.height = jc.value("height", cfg.cam.height);
    cfg.cam.near = jc.value("near", cfg.cam.near);
    cfg.cam.far = jc.value("far", cfg.cam.far);
  }
  if (j.contains("nbv")) {
    const auto& jn = j.at("nbv");
    cfg.nbv.starts = jn.value("starts", cfg.nbv.starts);
    cfg.nbv.step = jn.value("step", cfg.nbv.step);
    cfg.nbv.max_iters = jn.value("max_iters", cfg.nbv.max_iters);
    cfg.nbv.fd_step = jn.value("fd_step", cfg.nbv.fd_step);
    cfg.nbv.batch_fraction = jn.value("batch_fraction", cfg.nbv.batch_fraction);
    cfg.eig_stop_fraction = jn.value("eig_stop_fraction", cfg.eig_stop_fraction);
  }
  if (j.contains("refine")) {
    const auto& jr = j.at("refine");
    cfg.refine.steps = jr.value("steps", cfg.refine.steps);
    cfg.refine.step_color = jr.value("step_color", cfg.refine.step_color);
    cfg.refine.step_geom = jr.value("step_geom", cfg.refine.step_geom);
    cfg.refine.depth_weight = jr.value("depth_weight", cfg.refine.depth_weight);
  }
  cfg.lambda = j.value("lambda", cfg.lambda);
  if (j.contains("corridor_radii"))
    for (const auto& r : j.at("corridor_radii")) cfg.corridor_radii.push_back(r.get<double>());
  cfg.seed = j.value("seed", cfg.seed);
  cfg.save_frames = j.value("save_frames", cfg.save_frames);
  validate_config(cfg);
  return cfg;
}

inline EpisodeConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config: parse failure in " + path + ": " + e.what());
  }
  const auto dir = std::filesystem::path(path).parent_path().string();
  try {
    return config_from_json(j, dir);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config: malformed " + path + ": " + e.what());
  }
}

inline nlohmann::json report_to_json(const EpisodeReport& rep) {
  nlohmann::json j;
  j["termination"] = rep.termination;
  if (!rep.block_diagnostic.empty()) j["block_diagnostic"] = rep.block_diagnostic;
  j["seed"] = rep.seed;
  j["views_assimilated"] = rep.views_assimilated;

  j["executed"] = nlohmann::json::array();
  for (const auto& r : rep.executed) {
    nlohmann::json jr;
    jr["subgoal"] = r.subgoal;
    jr["position"] = {r.position.x(), r.position.y(), r.position.z()};
    jr["yaw"] = r.yaw;
    jr["alpha"] = r.alpha;
    jr["nominal_eig"] = r.nominal_eig;
    jr["optimized_eig"] = r.optimized_eig;
    if (std::isfinite(r.gain_percent)) jr["gain_percent"] = r.gain_percent;
    jr["stop_reason"] = to_string(r.stop_reason);
    j["executed"].push_back(std::move(jr));
  }

  j["segments"] = nlohmann::json::array();
  for (const auto& seg : rep.segments) {
    nlohmann::json js;
    js["reached_proxy"] = seg.reached_proxy;
    js["total_length"] = seg.total_length;
    js["waypoints"] = nlohmann::json::array();
    for (const Vec3& w : seg.waypoints) js["waypoints"].push_back({w.x(), w.y(), w.z()});
    j["segments"].push_back(std::move(js));
  }

  j["path_length"]["executed"] = rep.executed_length;
  j["path_length"]["shortest_baseline"] = rep.baseline_length;
  j["safety"]["executed_min_alpha"] = rep.executed_min_alpha;
  j["safety"]["executed_mean_alpha"] = rep.executed_mean_alpha;
  j["safety"]["baseline_min_alpha"] = rep.baseline_min_alpha;
  j["safety"]["baseline_mean_alpha"] = rep.baseline_mean_alpha;
  j["safety"]["planning_min_alpha"] = rep.planning_min_alpha;
  j["eig"]["mean_gain_percent"] = rep.mean_gain_percent;
  j["eig"]["waypoints_with_gain"] = rep.waypoints_with_gain;

  j["corridor"] = nlohmann::json::array();
  for (const auto& row : rep.corridor) {
    nlohmann::json jr;
    jr["radius"] = row.radius;
    jr["psnr_db"] = row.psnr;
    jr["depth_mae"] = row.depth_mae;
    j["corridor"].push_back(std::move(jr));
  }
  return j;
}

// Writes report, CSVs, the refined scene and (optionally) observation frames.
inline void write_episode_artifacts(const EpisodeReport& rep, const EpisodeConfig& cfg,
                                    const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream out(out_dir + "/report");
    if (!out) throw std::runtime_error("cannot write " + out_dir + "/report");
    out << report_to_json(rep).dump(2) << '\n';
  }
  std::vector<Vec3> pos;
  std::vector<double> alpha;
  for (const auto& r : rep.executed) {
    pos.push_back(r.position);
    alpha.push_back(r.alpha);
  }
  write_path_csv(pos, alpha, out_dir + "/path.csv");
  write_riskfield_csv(rep.final_field, out_dir + "/riskfield.csv");
  write_nbv_trace_csv(rep.nbv_results, out_dir + "/eig_trace.csv");
  {
    std::ofstream out(out_dir + "/corridor.csv");
    if (!out) throw std::runtime_error("cannot write " + out_dir + "/corridor.csv");
    out << "radius,psnr_db,depth_mae\n";
    for (const auto& row : rep.corridor)
      out << fmt_double(row.radius) << ',' << fmt_double(row.psnr) << ','
          << fmt_double(row.depth_mae) << '\n';
  }
  save_scene(rep.final_estimate, out_dir + "/final_scene.json");
  if (cfg.save_frames) {
    fs::create_directories(out_dir + "/frames");
    char name[64];
    for (std::size_t i = 0; i < rep.observations.size(); ++i) {
      std::snprintf(name, sizeof(name), "/frames/frame_%04zu", i);
      write_ppm(rep.observations[i].second, out_dir + name + std::string(".ppm"));
      write_depth_pgm(rep.observations[i].second, cfg.cam.far,
                      out_dir + name + std::string("_depth.pgm"));
    }
  }
}

// Dense gain-versus-yaw sweep at a lattice vertex, using the first subgoal's
// segment, mask and a fresh prior; a diagnostic for the yaw optimizer.
inline std::vector<std::pair<double, double>> sweep_yaw(const EpisodeConfig& cfg,
                                                        const std::array<int, 3>& vertex,
                                                        int samples = 360) {
  validate_config(cfg);
  const Scene est = load_scene(cfg.initial_scene);
  for (int a = 0; a < 3; ++a)
    if (vertex[a] < 0 || vertex[a] >= cfg.lattice.dims[a])
      throw std::invalid_argument("sweep_yaw: vertex outside lattice");

  const RiskField field = build_risk_field(est, cfg.lattice, cfg.epsilon);
  PlanParams params{cfg.gamma, cfg.margin_m(), cfg.delta_m(), cfg.delta_expansions};
  const PlanResult plan =
      plan_segment(field, cfg.trajectory[0], cfg.trajectory[1], params);
  if (plan.blocked) throw std::runtime_error("sweep_yaw: first subgoal blocked: " + plan.diagnostic);
  const SafeSet safe = filter_safe(
      field, local_partition(cfg.lattice, cfg.trajectory[0], cfg.trajectory[1], params.margin),
      cfg.gamma);
  const MaskRegion mask = build_mask(plan.segment, field, est, cfg.beta1, cfg.beta2);
  const PriorInfo prior = PriorInfo::init(est.splats.size(), cfg.lambda);

  const Vec3 p = cfg.lattice.vertex(vertex[0], vertex[1], vertex[2]);
  std::vector<Vec3> mus;
  for (int i : mask.member_splats) mus.push_back(est.splats[std::size_t(i)].mu);
  const std::vector<double> weights = proximity_weights(Pose{p, 0.0}, mus, cfg.prox, safe);

  std::vector<std::pair<double, double>> out;
  out.reserve(std::size_t(samples));
  for (int s = 0; s < samples; ++s) {
    const double yaw = wrap_angle(-M_PI + 2.0 * M_PI * double(s) / samples);
    out.emplace_back(yaw, info_gain(Pose{p, yaw}, est, mask, prior, weights, cfg.cam));
  }
  return out;
}

}  // namespace ravp
