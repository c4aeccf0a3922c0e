// Command-line front end: run an episode, dump a risk field, or sweep the
// view-selection objective over yaw at a lattice vertex.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ravp/io.hpp"
#include "ravp/pipeline.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  const ravp::EpisodeConfig cfg = ravp::load_config(config_path);
  const ravp::EpisodeReport rep = ravp::run_episode(cfg);
  ravp::write_episode_artifacts(rep, cfg, out_dir);
  std::cout << "termination: " << rep.termination << "\n"
            << "views: " << rep.views_assimilated << "\n"
            << "executed length: " << rep.executed_length
            << " m (baseline " << rep.baseline_length << " m)\n"
            << "min alpha executed/baseline: " << rep.executed_min_alpha << " / "
            << rep.baseline_min_alpha << "\n"
            << "mean EIG gain: " << rep.mean_gain_percent << " %\n"
            << "report written to " << out_dir << "/report\n";
  return rep.termination == "completed" ? 0 : 2;
}

int cmd_riskfield(const std::string& scene_path, const std::string& out_csv,
                  const std::string& config_path, double epsilon, double spacing,
                  const std::string& slices_prefix) {
  const ravp::Scene scene = ravp::load_scene(scene_path);
  ravp::Lattice lat;
  if (!config_path.empty()) {
    const ravp::EpisodeConfig cfg = ravp::load_config(config_path);
    lat = cfg.lattice;
    epsilon = cfg.epsilon;
  } else {
    // Fit a grid over the scene bounds.
    const ravp::Vec3 span = scene.bounds_max - scene.bounds_min;
    if (spacing <= 0.0) spacing = span.maxCoeff() / 32.0;
    lat.origin = scene.bounds_min;
    lat.spacing = spacing;
    for (int a = 0; a < 3; ++a)
      lat.dims[a] = std::max(2, int(std::floor(span[a] / spacing)) + 1);
  }
  const ravp::RiskField field = ravp::build_risk_field(scene, lat, epsilon);
  ravp::write_riskfield_csv(field, out_csv);
  if (!slices_prefix.empty()) ravp::write_riskfield_slices(field, slices_prefix);
  std::cout << "risk field (" << lat.dims[0] << "x" << lat.dims[1] << "x" << lat.dims[2]
            << ", epsilon " << epsilon << ") written to " << out_csv << "\n";
  return 0;
}

int cmd_sweep_yaw(const std::string& config_path, const std::string& vertex_spec,
                  const std::string& out_csv, int samples) {
  std::array<int, 3> vertex{};
  if (std::sscanf(vertex_spec.c_str(), "%d,%d,%d", &vertex[0], &vertex[1], &vertex[2]) != 3)
    throw std::runtime_error("sweep-yaw: --waypoint expects i,j,k");
  const ravp::EpisodeConfig cfg = ravp::load_config(config_path);
  const auto sweep = ravp::sweep_yaw(cfg, vertex, samples);
  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot write " + out_csv);
  out << "yaw,eig\n";
  for (const auto& [yaw, eig] : sweep)
    out << ravp::fmt_double(yaw) << ',' << ravp::fmt_double(eig) << '\n';
  std::cout << "yaw sweep written to " << out_csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"risk-averse trajectory planning with view selection over Gaussian-splat scenes"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  auto* run = app.add_subcommand("run", "execute a planning episode");
  run->add_option("--config", config_path, "episode config (json)")->required();
  run->add_option("--out", out_dir, "output directory")->required();

  std::string scene_path, out_csv, rf_config, slices_prefix;
  double epsilon = 0.05, spacing = 0.0;
  auto* rf = app.add_subcommand("riskfield", "dump a risk field as csv");
  rf->add_option("--scene", scene_path, "scene file (json)")->required();
  rf->add_option("--out", out_csv, "output csv path")->required();
  rf->add_option("--config", rf_config, "take lattice and epsilon from an episode config");
  rf->add_option("--epsilon", epsilon, "risk level (default 0.05)");
  rf->add_option("--spacing", spacing, "lattice spacing (default: bounds/32)");
  rf->add_option("--slices", slices_prefix, "also write per-slice graymaps with this prefix");

  std::string sw_config, sw_vertex, sw_out = "sweep.csv";
  int sw_samples = 360;
  auto* sw = app.add_subcommand("sweep-yaw", "dense gain-vs-yaw sweep at a lattice vertex");
  sw->add_option("--config", sw_config, "episode config (json)")->required();
  sw->add_option("--waypoint", sw_vertex, "lattice vertex as i,j,k")->required();
  sw->add_option("--out", sw_out, "output csv path");
  sw->add_option("--samples", sw_samples, "number of yaw samples (default 360)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return cmd_run(config_path, out_dir);
    if (rf->parsed())
      return cmd_riskfield(scene_path, out_csv, rf_config, epsilon, spacing, slices_prefix);
    if (sw->parsed()) return cmd_sweep_yaw(sw_config, sw_vertex, sw_out, sw_samples);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
