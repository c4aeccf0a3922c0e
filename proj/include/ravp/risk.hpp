// Tail-risk machinery: inverse error function, signed-distance statistics of
// isotropic splats, the closed-form Gaussian average value-at-risk, and the
// conservative per-vertex risk field (lower-tail convention: larger values
// are safer).
#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ravp/scene.hpp"

namespace ravp {

// Inverse error function. Initial guess from the rational Chebyshev fits of
// Blair, Edwards & Johnson (Math. Comp. 30, 1976), then two Newton steps on
// erf(y) - x, good to ~1e-16 relative over (-1, 1).
inline double inverse_erf(double x) {
  if (!(std::fabs(x) < 1.0)) throw std::invalid_argument("inverse_erf: |x| must be < 1");
  if (x == 0.0) return 0.0;

  const double ax = std::fabs(x);
  double y;
  if (ax <= 0.75) {
    static const double p[] = {-13.0959967422, 26.785225760, -9.289057635};
    static const double q[] = {-12.0749426297, 30.960614529, -17.149977991, 1.0};
    const double t = x * x - 0.75 * 0.75;
    y = x * (p[0] + t * (p[1] + t * p[2])) / (q[0] + t * (q[1] + t * (q[2] + t * q[3])));
  } else if (ax <= 0.9375) {
    static const double p[] = {-0.12402565221, 1.0688059574, -1.9594556078, 0.4230581357};
    static const double q[] = {-0.08827697997, 0.8900743359, -2.1757031196, 1.0};
    const double t = x * x - 0.9375 * 0.9375;
    y = x * (p[0] + t * (p[1] + t * (p[2] + t * p[3]))) /
        (q[0] + t * (q[1] + t * (q[2] + t * q[3])));
  } else {
    static const double p[] = {0.1550470003116,  1.382719649631, 0.690969348887,
                               -1.128081391617, 0.680544246825, -0.16444156791};
    static const double q[] = {0.155024849822, 1.385228141995, 1.0};
    const double t = 1.0 / std::sqrt(-std::log(1.0 - ax));
    y = std::copysign((p[0] / t + p[1] + t * (p[2] + t * (p[3] + t * (p[4] + t * p[5])))) /
                          (q[0] + t * (q[1] + t * q[2])),
                      x);
  }

  static const double two_over_sqrt_pi = 2.0 / std::sqrt(M_PI);
  for (int it = 0; it < 2; ++it) {
    const double err = std::erf(y) - x;
    y -= err / (two_over_sqrt_pi * std::exp(-y * y));
  }
  return y;
}

// Multiplier m(eps) such that AV@R_eps of N(mean, sd^2) = mean - sd * m(eps).
// From the closed form with iota = erf^-1(2 eps - 1):
//   m(eps) = exp(-iota^2) / (sqrt(2 pi) * eps),
// which equals phi(z_eps)/eps, the lower-tail mean deficit of the standard
// normal.
inline double avar_tail_factor(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("avar: epsilon must be in (0, 1)");
  const double iota = inverse_erf(2.0 * epsilon - 1.0);
  return std::exp(-iota * iota) / (std::sqrt(2.0 * M_PI) * epsilon);
}

// E[y | y < VaR_eps(y)] for y ~ N(mean, stddev^2).
inline double avar_normal(double mean, double stddev, double epsilon) {
  if (!(stddev >= 0.0)) throw std::invalid_argument("avar: stddev must be >= 0");
  return mean - stddev * avar_tail_factor(epsilon);
}

struct DistanceStats {
  double mean;
  double stddev;
  bool degenerate;  // query point coincides with the splat mean
};

// Signed distance from q to a splat sample, projected on the unit direction
// toward the splat mean, is N(|mu - q|, sigma^2). A query at the mean itself
// has no direction; it reports mean 0 (maximally unsafe) with the same
// stddev.
inline DistanceStats signed_distance_stats(const Vec3& q, const Splat& splat) {
  const double dist = (splat.mu - q).norm();
  if (dist < 1e-9) return DistanceStats{0.0, splat.sigma, true};
  return DistanceStats{dist, splat.sigma, false};
}

// Minimum AV@R of the signed distance over all splats.
inline double risk_at(const Vec3& q, const Scene& scene, double epsilon) {
  if (scene.splats.empty()) throw std::invalid_argument("risk_at: empty scene");
  const double tail = avar_tail_factor(epsilon);
  double best = std::numeric_limits<double>::infinity();
  for (const Splat& s : scene.splats) {
    const DistanceStats st = signed_distance_stats(q, s);
    const double v = st.mean - st.stddev * tail;
    if (v < best) best = v;
  }
  return best;
}

struct RiskField {
  Lattice lattice;
  std::vector<double> values;  // one alpha per vertex, lattice order
  double epsilon;

  double at(int vertex_index) const { return values[vertex_index]; }
};

inline RiskField build_risk_field(const Scene& scene, const Lattice& lattice, double epsilon) {
  validate_lattice(lattice);
  RiskField field{lattice, {}, epsilon};
  field.values.resize(std::size_t(lattice.vertex_count()));
  const double tail = avar_tail_factor(epsilon);
  std::size_t v = 0;
  for (int i = 0; i < lattice.dims[0]; ++i)
    for (int j = 0; j < lattice.dims[1]; ++j)
      for (int k = 0; k < lattice.dims[2]; ++k) {
        const Vec3 q = lattice.vertex(i, j, k);
        double best = std::numeric_limits<double>::infinity();
        for (const Splat& s : scene.splats) {
          const DistanceStats st = signed_distance_stats(q, s);
          const double a = st.mean - st.stddev * tail;
          if (a < best) best = a;
        }
        field.values[v++] = best;
      }
  return field;
}

}  // namespace ravp
