// Acceptance suite: one line per criterion, nonzero exit when any fails.
// Criteria mix exact oracle equivalences, statistical oracles at three
// standard errors, and qualitative trend reproductions on the shipped
// fixtures, each with its stated runtime budget.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fd_oracle.hpp"
#include "grid_oracle.hpp"
#include "ravp/pipeline.hpp"
#include "support.hpp"

using namespace ravp;
using test_support::all_vertices;
using test_support::DijkstraOracle;
using test_support::make_field;

namespace {

const std::string kFixtures = RAVP_FIXTURE_DIR;

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- criterion 1 -----------------------------------------------------------

Check avar_vs_monte_carlo() {
  Check c;
  const int n = 10000000;
  std::vector<double> samples(static_cast<std::size_t>(n), 0.0);
  std::mt19937_64 rng(0xAE5u);
  for (double mean : {0.0, 1.0, 2.0})
    for (double sd : {0.1, 0.5, 1.0})
      for (double eps : {0.01, 0.05, 0.25, 0.5, 0.9}) {
        std::normal_distribution<double> gauss(mean, sd);
        for (auto& s : samples) s = gauss(rng);
        const int k = int(eps * n);
        std::nth_element(samples.begin(), samples.begin() + k, samples.end());
        const double quantile = samples[std::size_t(k)];
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < k; ++i) {
          sum += samples[std::size_t(i)];
          sumsq += samples[std::size_t(i)] * samples[std::size_t(i)];
        }
        const double tail_mean = sum / k;
        const double tail_var = sumsq / k - tail_mean * tail_mean;
        const double se = std::sqrt(
            (tail_var + (1.0 - eps) * (quantile - tail_mean) * (quantile - tail_mean)) / k);
        const double closed = avar_normal(mean, sd, eps);
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "mean %.1f sd %.1f eps %.2f: closed %.6f vs MC %.6f (3se %.2g)", mean, sd,
                      eps, closed, tail_mean, 3 * se);
        c.require(std::fabs(closed - tail_mean) < 3.0 * se, buf);
      }
  return c;
}

// --- criterion 2 -----------------------------------------------------------

Check risk_field_brute_force() {
  Check c;
  const Scene scene = test_support::random_scene(0xF1E1D, 100, Vec3(0, 0, 0), Vec3(4, 4, 4));
  const Lattice lat{Vec3(0, 0, 0), 0.25, {17, 17, 17}};
  const double eps = 0.05;
  const RiskField field = build_risk_field(scene, lat, eps);
  std::size_t v = 0;
  for (int i = 0; i < 17 && c.ok; ++i)
    for (int j = 0; j < 17 && c.ok; ++j)
      for (int k = 0; k < 17 && c.ok; ++k) {
        const Vec3 q = lat.vertex(i, j, k);
        double expect = std::numeric_limits<double>::infinity();
        for (const auto& s : scene.splats) {
          const auto st = signed_distance_stats(q, s);
          expect = std::min(expect, avar_normal(st.mean, st.stddev, eps));
        }
        c.require(field.values[v++] == expect, "mismatch at vertex " + std::to_string(v - 1));
      }
  return c;
}

// --- criterion 3 -----------------------------------------------------------

Check astar_vs_dijkstra() {
  Check c;
  auto g = test_support::rng(0xA57A);
  const Lattice lat{Vec3(0, 0, 0), 0.5, {10, 10, 10}};
  int feasible = 0;
  for (int t = 0; t < 50; ++t) {
    const double density = test_support::uniform(g, 0.1, 0.4);
    RiskField field = make_field(lat, [&](int, int, int) {
      return test_support::uniform(g, 0.0, 1.0) < density ? -1.0 : 1.0;
    });
    field.values.front() = 1.0;
    field.values.back() = 1.0;
    const SafeSet safe = filter_safe(field, all_vertices(lat), 0.0);
    const int start = 0, goal = int(lat.vertex_count()) - 1;
    const auto seg = astar(safe, start, goal);
    const DijkstraOracle oracle(safe, start);
    if (!seg) {
      c.require(!std::isfinite(oracle.dist[std::size_t(goal)]),
                "instance " + std::to_string(t) + ": astar infeasible but oracle reached");
      continue;
    }
    ++feasible;
    const double oracle_cost = detail::path_length(lat, oracle.path_to(goal));
    c.require(seg->total_length == oracle_cost,
              "instance " + std::to_string(t) + ": cost mismatch");
  }
  c.require(feasible >= 20, "too few feasible instances: " + std::to_string(feasible));
  return c;
}

// --- criterion 4 -----------------------------------------------------------

Check proxy_vs_exhaustive() {
  Check c;
  auto g = test_support::rng(0x9677);
  const Lattice lat{Vec3(0, 0, 0), 0.5, {8, 8, 8}};
  for (int t = 0; t < 100; ++t) {
    const RiskField field = make_field(
        lat, [&](int, int, int) { return 0.1 * std::floor(test_support::uniform(g, 0.0, 6.0)); });
    const SafeSet safe = filter_safe(field, all_vertices(lat), 0.2);
    const Vec3 z_next = test_support::uniform_vec3(g, Vec3(0, 0, 0), Vec3(3.5, 3.5, 3.5));
    const double delta = test_support::uniform(g, 0.3, 1.8);

    int expect = -1;
    double ba = -std::numeric_limits<double>::infinity();
    double bd = std::numeric_limits<double>::infinity();
    for (int v = 0; v < lat.vertex_count(); ++v) {
      if (!safe.contains(v)) continue;
      const double d = (lat.vertex(v) - z_next).norm();
      if (d > delta) continue;
      const double a = field.values[std::size_t(v)];
      if (a > ba || (a == ba && d < bd)) {
        expect = v;
        ba = a;
        bd = d;
      }
    }
    const auto got = proxy_subgoal(safe, field, z_next, delta);
    if (expect < 0)
      c.require(!got.has_value(), "instance " + std::to_string(t) + ": expected none");
    else
      c.require(got.has_value() && *got == expect,
                "instance " + std::to_string(t) + ": argmax mismatch");
  }
  return c;
}

// --- criterion 5 -----------------------------------------------------------

Check jacobian_vs_finite_differences() {
  Check c;
  Scene scene;
  scene.bounds_min = Vec3(-6, -6, -6);
  scene.bounds_max = Vec3(6, 6, 6);
  scene.splats = {
      Splat{Vec3(-0.12, 0.08, 2.0), 0.22, 0.75, Vec3(0.9, 0.3, 0.1)},
      Splat{Vec3(0.15, -0.05, 2.7), 0.30, 0.60, Vec3(0.2, 0.8, 0.3)},
      Splat{Vec3(0.02, 0.12, 3.5), 0.40, 0.85, Vec3(0.1, 0.4, 0.9)},
  };
  const CameraIntrinsics cam{32.0, 32, 32, 0.1, 10.0};
  const Pose pose = make_pose(Vec3(0, 0, 0), 0.0);
  const auto analytic = test_support::analytic_jacobian(scene, pose, cam);
  const auto fd = test_support::fd_jacobian(scene, pose, cam);
  double worst = 0.0;
  for (int r = 0; r < analytic.rows; ++r)
    for (int col = 0; col < analytic.cols; ++col) {
      const double a = analytic.at(r, col), f = fd.at(r, col);
      const double rel = std::fabs(a - f) / std::max({std::fabs(a), std::fabs(f), 1e-6});
      worst = std::max(worst, rel);
    }
  char buf[80];
  std::snprintf(buf, sizeof(buf), "worst relative error %.3g", worst);
  c.require(worst < 1e-4, buf);
  return c;
}

// --- criterion 6 -----------------------------------------------------------

Check eig_consistency() {
  Check c;
  auto g = test_support::rng(0xE16);
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + int(test_support::uniform(g, 0, 18));
    SplatHessianDiag hess;
    hess.rows.assign(std::size_t(n), Vec8::Zero());
    PriorInfo prior;
    prior.lambda = test_support::uniform(g, 1e-6, 0.3);
    prior.accumulated.assign(std::size_t(n), Vec8::Zero());
    MaskRegion mask;
    std::vector<double> weights;
    for (int i = 0; i < n; ++i) {
      for (int p = 0; p < 8; ++p) {
        hess.rows[std::size_t(i)][p] = test_support::uniform(g, 0, 3);
        prior.accumulated[std::size_t(i)][p] = test_support::uniform(g, 0.02, 4.0);
      }
      if (test_support::uniform(g, 0, 1) < 0.7) {
        mask.member_splats.push_back(i);
        weights.push_back(test_support::uniform(g, 0.05, 2.0));
      }
    }
    if (mask.member_splats.empty()) {
      mask.member_splats.push_back(0);
      weights.push_back(1.0);
    }
    const double gain = info_gain_from_hessian(hess, mask, prior, weights);
    const auto comps = info_gain_per_splat_from_hessian(hess, mask, prior, weights);
    const double total = std::accumulate(comps.begin(), comps.end(), 0.0);
    c.require(std::fabs(total - gain) <= 1e-10 * std::max(std::fabs(gain), 1.0),
              "per-splat sum mismatch at instance " + std::to_string(t));

    const int dim = int(mask.member_splats.size()) * 8;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim), P = Eigen::MatrixXd::Zero(dim, dim);
    const double share = prior.lambda / double(dim);
    for (std::size_t j = 0; j < mask.member_splats.size(); ++j)
      for (int p = 0; p < 8; ++p) {
        const int d = int(j) * 8 + p;
        H(d, d) = weights[j] * hess.rows[std::size_t(mask.member_splats[j])][p] + share;
        P(d, d) = prior.entry(std::size_t(mask.member_splats[j]), p);
      }
    const double oracle = (H * P.inverse()).trace();
    c.require(std::fabs(oracle - gain) <= 1e-10 * std::max(std::fabs(gain), 1.0),
              "dense trace mismatch at instance " + std::to_string(t));
  }
  return c;
}

// --- criterion 7 -----------------------------------------------------------

Check theorem1_ordering() {
  Check c;
  auto g = test_support::rng(0x7410);
  for (int t = 0; t < 200; ++t) {
    const int n = 4 + int(test_support::uniform(g, 0, 8));
    SplatHessianDiag hess;
    hess.rows.assign(std::size_t(n), Vec8::Zero());
    PriorInfo small;
    small.lambda = 1e-6;
    small.accumulated.assign(std::size_t(n), Vec8::Zero());
    MaskRegion mask;
    std::vector<double> weights;
    for (int i = 0; i < n; ++i) {
      for (int p = 0; p < 8; ++p) {
        hess.rows[std::size_t(i)][p] = test_support::uniform(g, 0.01, 3.0);
        small.accumulated[std::size_t(i)][p] = test_support::uniform(g, 0.05, 2.0);
      }
      mask.member_splats.push_back(i);
      weights.push_back(test_support::uniform(g, 0.1, 1.5));
    }
    PriorInfo big = small;
    const bool strict = t % 2 == 0;
    for (int i = 0; i < n; ++i)
      for (int p = 0; p < 8; ++p)
        big.accumulated[std::size_t(i)][p] +=
            strict ? test_support::uniform(g, 0.01, 1.0)
                   : (p % 3 == 0 ? test_support::uniform(g, 0.0, 1.0) : 0.0);
    if (!loewner_geq(big.accumulated, small.accumulated)) {
      c.require(false, "generator violated the ordering");
      break;
    }
    const double gain_big = info_gain_from_hessian(hess, mask, big, weights);
    const double gain_small = info_gain_from_hessian(hess, mask, small, weights);
    c.require(gain_big <= gain_small, "ordering violated at instance " + std::to_string(t));
    if (strict)
      c.require(gain_big < gain_small, "strict ordering not strict at " + std::to_string(t));
  }

  // Diminishing returns: assimilating the view strictly lowers the next gain
  // at any pose that sees a masked splat.
  const CameraIntrinsics cam{32.0, 32, 32, 0.05, 12.0};
  const Lattice lat{Vec3(-2, -2, -2), 0.5, {9, 9, 9}};
  const SafeSet safe =
      filter_safe(make_field(lat, [](int, int, int) { return 1.0; }), all_vertices(lat), 0.0);
  for (int t = 0; t < 30; ++t) {
    Scene scene = test_support::random_scene(5000 + t, 6, Vec3(-1, -1, 0.8), Vec3(1, 1, 2.2));
    MaskRegion mask;
    std::vector<Vec3> mus;
    for (int i = 0; i < 6; ++i) {
      mask.member_splats.push_back(i);
      mus.push_back(scene.splats[std::size_t(i)].mu);
    }
    const Pose pose{Vec3(0, 0, 0), 0.0};
    const auto weights = proximity_weights(pose, mus, ProximityParams{}, safe);
    PriorInfo prior = PriorInfo::init(6, 1e-6);
    const SplatHessianDiag view = splat_hessian_diag(scene, pose, cam);
    double mass = 0.0;
    for (const auto& row : view.rows) mass += row.sum();
    if (mass <= 0.0) continue;  // pose sees nothing; corollary is vacuous
    const double before = info_gain_from_hessian(view, mask, prior, weights);
    prior = accumulate_prior(prior, view);
    const double after = info_gain_from_hessian(view, mask, prior, weights);
    c.require(after < before, "corollary violated at instance " + std::to_string(t));
  }
  return c;
}

// --- criterion 8 -----------------------------------------------------------

Check yaw_optimizer_quality() {
  Check c;
  const CameraIntrinsics cam{32.0, 32, 32, 0.05, 12.0};
  const Lattice lat{Vec3(-3, -3, -3), 0.5, {13, 13, 13}};
  const SafeSet safe =
      filter_safe(make_field(lat, [](int, int, int) { return 1.0; }), all_vertices(lat), 0.0);
  const Vec3 waypoint(0, 0, 0);

  for (int t = 0; t < 10; ++t) {
    auto g = test_support::rng(0xC1A0 + t);
    Scene scene;
    scene.bounds_min = Vec3(-8, -8, -8);
    scene.bounds_max = Vec3(8, 8, 8);
    MaskRegion mask;
    const int clusters = 2 + int(test_support::uniform(g, 0, 3));
    for (int cl = 0; cl < clusters; ++cl) {
      const double bearing = test_support::uniform(g, -M_PI, M_PI);
      const double dist = test_support::uniform(g, 0.8, 1.6);
      const Vec3 center(dist * std::sin(bearing), test_support::uniform(g, -0.2, 0.2),
                        dist * std::cos(bearing));
      const int size = 3 + int(test_support::uniform(g, 0, 5));
      for (int s = 0; s < size; ++s) {
        Splat sp;
        sp.mu = center + test_support::uniform_vec3(g, Vec3(-0.35, -0.15, -0.35),
                                                    Vec3(0.35, 0.15, 0.35));
        sp.sigma = test_support::uniform(g, 0.08, 0.25);
        sp.opacity = test_support::uniform(g, 0.3, 0.7);
        sp.color = Vec3(test_support::uniform(g, 0, 1), test_support::uniform(g, 0, 1),
                        test_support::uniform(g, 0, 1));
        mask.member_splats.push_back(int(scene.splats.size()));
        scene.splats.push_back(sp);
      }
    }
    PriorInfo prior = PriorInfo::init(scene.splats.size(), 1e-6);
    for (auto& row : prior.accumulated)
      row = Vec8::Constant(test_support::uniform(g, 0.0, 2.0));

    std::vector<Vec3> mus;
    for (int i : mask.member_splats) mus.push_back(scene.splats[std::size_t(i)].mu);
    const auto weights = proximity_weights(Pose{waypoint, 0.0}, mus, ProximityParams{}, safe);

    NbvParams params;
    params.starts = 12;
    params.max_iters = 20;
    const NbvResult res = optimize_yaw(waypoint, 0.0, scene, mask, prior, safe, cam,
                                       ProximityParams{}, params);
    double sweep = -1.0;
    for (int s = 0; s < 360; ++s) {
      const double yaw = wrap_angle(-M_PI + 2.0 * M_PI * s / 360.0);
      sweep = std::max(sweep, info_gain(Pose{waypoint, yaw}, scene, mask, prior, weights, cam));
    }
    char buf[120];
    std::snprintf(buf, sizeof(buf), "fixture %d: optimizer %.6g vs sweep %.6g", t, res.eig_star,
                  sweep);
    c.require(res.eig_star >= sweep - 1e-3 * sweep, buf);
  }

  // Mini-batch estimator unbiasedness at fraction 0.25 over 1e4 draws.
  auto g = test_support::rng(0xB1A5);
  const int n = 24;
  std::vector<double> values(n), weights(n);
  for (int i = 0; i < n; ++i) {
    values[std::size_t(i)] = test_support::uniform(g, -3, 3);
    weights[std::size_t(i)] = test_support::uniform(g, 0.05, 2.0);
  }
  const double full = std::accumulate(values.begin(), values.end(), 0.0);
  std::uint64_t state = 0x5EED;
  const int draws = 10000;
  double sum = 0.0, sumsq = 0.0;
  for (int d = 0; d < draws; ++d) {
    const double est = sample_weighted_sum(values, weights, 0.25, state);
    sum += est;
    sumsq += est * est;
  }
  const double mean = sum / draws;
  const double se = std::sqrt((sumsq / draws - mean * mean) / draws);
  char buf[120];
  std::snprintf(buf, sizeof(buf), "estimator mean %.6f vs full %.6f (3se %.2g)", mean, full,
                3 * se);
  c.require(std::fabs(mean - full) < 3.0 * se, buf);
  return c;
}

// --- criteria 9-13 ---------------------------------------------------------

struct EpisodeRun {
  EpisodeConfig cfg;
  EpisodeReport rep;
  double seconds = 0.0;
};

EpisodeRun run_fixture(const std::string& name) {
  EpisodeRun run;
  run.cfg = load_config(kFixtures + "/" + name + "_config.json");
  const auto t0 = std::chrono::steady_clock::now();
  run.rep = run_episode(run.cfg);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

Check risk_averse_vs_baseline(const EpisodeRun& a, const EpisodeRun& b) {
  Check c;
  for (const EpisodeRun* run : {&a, &b}) {
    const auto& r = run->rep;
    c.require(r.termination == "completed", "episode did not complete");
    c.require(r.executed_length > r.baseline_length, "executed path not longer than baseline");
    c.require(r.executed_min_alpha > r.baseline_min_alpha, "min alpha did not improve");
    c.require(r.planning_min_alpha >= run->cfg.gamma, "planning-time safety violated");
  }
  return c;
}

Check corridor_trends(const EpisodeRun& a, const EpisodeRun& b) {
  Check c;
  for (const EpisodeRun* run : {&a, &b}) {
    const auto& rows = run->rep.corridor;
    c.require(rows.size() == 3, "expected three corridor radii");
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
      char buf[120];
      std::snprintf(buf, sizeof(buf), "psnr %.3f -> %.3f at radius %.3f", rows[i].psnr,
                    rows[i + 1].psnr, rows[i + 1].radius);
      c.require(rows[i].psnr >= rows[i + 1].psnr, buf);
      std::snprintf(buf, sizeof(buf), "mae %.4f -> %.4f at radius %.3f", rows[i].depth_mae,
                    rows[i + 1].depth_mae, rows[i + 1].radius);
      c.require(rows[i].depth_mae <= rows[i + 1].depth_mae, buf);
    }
  }
  return c;
}

Check eig_gains(const std::vector<const EpisodeRun*>& runs) {
  Check c;
  for (const EpisodeRun* run : runs) {
    for (const auto& rec : run->rep.executed)
      c.require(rec.optimized_eig >= rec.nominal_eig, "optimized below nominal at a waypoint");
    c.require(run->rep.waypoints_with_gain > 0, "no waypoint with a measurable gain");
    c.require(run->rep.mean_gain_percent > 0.0, "mean gain not strictly positive");
  }
  return c;
}

Check determinism(const EpisodeRun& first) {
  Check c;
  const std::string out1 = std::filesystem::temp_directory_path() / "ravp_acc_run1";
  const std::string out2 = std::filesystem::temp_directory_path() / "ravp_acc_run2";
  std::filesystem::remove_all(out1);
  std::filesystem::remove_all(out2);
  write_episode_artifacts(first.rep, first.cfg, out1);
  const EpisodeReport again = run_episode(first.cfg);
  write_episode_artifacts(again, first.cfg, out2);
  for (const char* name : {"report", "path.csv", "riskfield.csv", "eig_trace.csv", "corridor.csv",
                           "final_scene.json"})
    c.require(slurp(out1 + "/" + name) == slurp(out2 + "/" + name),
              std::string("artifact differs: ") + name);
  return c;
}

}  // namespace

int main() {
  int failures = 0;
  const auto report = [&](int id, const char* title, const std::function<Check()>& fn,
                          double budget_s) {
    const auto t0 = std::chrono::steady_clock::now();
    Check c;
    try {
      c = fn();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_s > 0.0 && dt > budget_s) {
      c.ok = false;
      c.detail = "over time budget";
    }
    std::printf("criterion %2d [%s] %6.2fs  %s%s%s\n", id, c.ok ? "PASS" : "FAIL", dt, title,
                c.ok ? "" : " -- ", c.detail.c_str());
    std::fflush(stdout);
    if (!c.ok) ++failures;
  };

  report(1, "closed-form AVaR vs Monte-Carlo conditional mean", avar_vs_monte_carlo, 60.0);
  report(2, "risk field equals the naive double loop bit-for-bit", risk_field_brute_force, 10.0);
  report(3, "A* cost equals Dijkstra on 50 random 10^3 instances", astar_vs_dijkstra, 30.0);
  report(4, "proxy subgoal equals the exhaustive argmax on 100 instances", proxy_vs_exhaustive,
         0.0);
  report(5, "analytic renderer Jacobian matches finite differences",
         jacobian_vs_finite_differences, 20.0);
  report(6, "gain equals per-splat sum and dense trace oracle", eig_consistency, 0.0);
  report(7, "larger priors never gain more; assimilation diminishes returns", theorem1_ordering,
         0.0);
  report(8, "yaw optimizer reaches the dense-sweep optimum; mini-batch unbiased",
         yaw_optimizer_quality, 0.0);

  EpisodeRun corridor, two_wall, freespace;
  try {
    corridor = run_fixture("corridor_pocket");
    two_wall = run_fixture("two_wall");
    freespace = run_fixture("freespace");
  } catch (const std::exception& e) {
    std::printf("criterion  9-13 [FAIL] fixture episodes threw: %s\n", e.what());
    return 1;
  }

  report(9, "risk-averse paths are longer and safer than the shortest baseline",
         [&] { return risk_averse_vs_baseline(corridor, two_wall); }, 0.0);
  report(10, "corridor PSNR falls and depth MAE rises with radius",
         [&] { return corridor_trends(corridor, two_wall); }, 0.0);
  report(11, "optimized gain never loses to nominal; positive mean gain",
         [&] { return eig_gains({&corridor, &two_wall, &freespace}); }, 0.0);
  report(12, "seeded episodes produce byte-identical artifacts",
         [&] { return determinism(freespace); }, 0.0);
  report(13, "full fixture episode fits the runtime budget", [&] {
    Check c;
    char buf[120];
    std::snprintf(buf, sizeof(buf), " (corridor %.1fs, two-wall %.1fs)", corridor.seconds,
                  two_wall.seconds);
    c.require(corridor.seconds < 300.0 && two_wall.seconds < 300.0, buf);
    c.detail = buf;
    return c;
  }, 0.0);

  if (failures == 0) std::printf("all %d criteria passed\n", 13);
  return failures == 0 ? 0 : 1;
}
