// Artifact writers: portable pixmaps for rendered color, 16-bit graymaps for
// depth, CSV dumps for risk fields, paths and yaw traces. All numeric text
// is written with round-trip precision so repeated runs are byte-identical.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ravp/nbv.hpp"
#include "ravp/render.hpp"
#include "ravp/risk.hpp"

namespace ravp {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("io: cannot write " + path);
  return out;
}

}  // namespace detail

// Binary PPM (P6, maxval 255). Rows are written top-down with image +v up,
// so the vertical axis matches world up.
inline void write_ppm(const RenderedImage& img, const std::string& path) {
  auto out = detail::open_out(path, true);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> row(std::size_t(img.width) * 3);
  for (int v = img.height - 1; v >= 0; --v) {
    for (int u = 0; u < img.width; ++u)
      for (int c = 0; c < 3; ++c) {
        const double x = std::clamp(img.color_at(u, v, c), 0.0, 1.0);
        row[std::size_t(u) * 3 + c] = (unsigned char)std::lround(255.0 * x);
      }
    out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
  }
}

// Binary PGM (P5, maxval 65535, big-endian) of depth scaled by far.
inline void write_depth_pgm(const RenderedImage& img, double far, const std::string& path) {
  auto out = detail::open_out(path, true);
  out << "P5\n" << img.width << " " << img.height << "\n65535\n";
  std::vector<unsigned char> row(std::size_t(img.width) * 2);
  for (int v = img.height - 1; v >= 0; --v) {
    for (int u = 0; u < img.width; ++u) {
      const double x = std::clamp(img.depth_at(u, v) / far, 0.0, 1.0);
      const unsigned value = unsigned(std::lround(65535.0 * x));
      row[std::size_t(u) * 2] = (unsigned char)(value >> 8);
      row[std::size_t(u) * 2 + 1] = (unsigned char)(value & 0xFF);
    }
    out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
  }
}

// CSV with columns i,j,k,x,y,z,alpha in lattice order.
inline void write_riskfield_csv(const RiskField& field, const std::string& path) {
  auto out = detail::open_out(path);
  out << "i,j,k,x,y,z,alpha\n";
  const Lattice& lat = field.lattice;
  std::size_t v = 0;
  for (int i = 0; i < lat.dims[0]; ++i)
    for (int j = 0; j < lat.dims[1]; ++j)
      for (int k = 0; k < lat.dims[2]; ++k) {
        const Vec3 p = lat.vertex(i, j, k);
        out << i << ',' << j << ',' << k << ',' << fmt_double(p.x()) << ',' << fmt_double(p.y())
            << ',' << fmt_double(p.z()) << ',' << fmt_double(field.values[v++]) << '\n';
      }
}

// One 8-bit graymap per horizontal slice (fixed j), alpha affinely mapped to
// [0, 255] over the global range; the mapping lands in <prefix>_scale.json.
inline void write_riskfield_slices(const RiskField& field, const std::string& prefix) {
  const Lattice& lat = field.lattice;
  double lo = field.values[0], hi = field.values[0];
  for (double v : field.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;

  for (int j = 0; j < lat.dims[1]; ++j) {
    auto out = detail::open_out(prefix + "_j" + std::to_string(j) + ".pgm", true);
    out << "P5\n" << lat.dims[2] << " " << lat.dims[0] << "\n255\n";
    std::vector<unsigned char> row(std::size_t(lat.dims[2]));
    for (int i = 0; i < lat.dims[0]; ++i) {
      for (int k = 0; k < lat.dims[2]; ++k) {
        const double a = field.values[std::size_t(lat.index(i, j, k))];
        row[std::size_t(k)] = (unsigned char)std::lround((a - lo) * scale);
      }
      out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
    }
  }
  nlohmann::json side;
  side["alpha_min"] = lo;
  side["alpha_max"] = hi;
  side["mapping"] = "pixel = round(255 * (alpha - alpha_min) / (alpha_max - alpha_min))";
  side["rows"] = "i";
  side["cols"] = "k";
  side["slices"] = "j";
  auto out = detail::open_out(prefix + "_scale.json");
  out << side.dump(2) << '\n';
}

// CSV with columns k,x,y,z,alpha for a planned or executed lattice path.
inline void write_path_csv(const std::vector<Vec3>& waypoints, const std::vector<double>& alphas,
                           const std::string& path) {
  if (waypoints.size() != alphas.size())
    throw std::invalid_argument("write_path_csv: size mismatch");
  auto out = detail::open_out(path);
  out << "k,x,y,z,alpha\n";
  for (std::size_t k = 0; k < waypoints.size(); ++k)
    out << k << ',' << fmt_double(waypoints[k].x()) << ',' << fmt_double(waypoints[k].y()) << ','
        << fmt_double(waypoints[k].z()) << ',' << fmt_double(alphas[k]) << '\n';
}

inline void write_nbv_trace_csv(const NbvResult& result, const std::string& path) {
  auto out = detail::open_out(path);
  out << "start_id,iter,yaw,eig\n";
  for (const auto& t : result.trace)
    out << t.start_id << ',' << t.iter << ',' << fmt_double(t.yaw) << ',' << fmt_double(t.eig)
        << '\n';
}

// Episode-level variant with a leading waypoint column.
inline void write_nbv_trace_csv(const std::vector<NbvResult>& results, const std::string& path) {
  auto out = detail::open_out(path);
  out << "waypoint,start_id,iter,yaw,eig\n";
  for (std::size_t w = 0; w < results.size(); ++w)
    for (const auto& t : results[w].trace)
      out << w << ',' << t.start_id << ',' << t.iter << ',' << fmt_double(t.yaw) << ','
          << fmt_double(t.eig) << '\n';
}

}  // namespace ravp
