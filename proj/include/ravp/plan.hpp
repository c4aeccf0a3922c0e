// Local risk-averse replanning: box partitions of the lattice, threshold
// filtering against the risk field, A* over the 26-connected safe grid,
// proxy subgoals for unsafe waypoints, and the segment-planning cascade.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "ravp/risk.hpp"
#include "ravp/scene.hpp"

namespace ravp {

// Safe subset of a local lattice partition: vertex v is a member iff it lies
// in the partition and its risk value is >= gamma.
struct SafeSet {
  Lattice lattice;
  std::vector<std::uint8_t> member;  // one flag per lattice vertex
  double gamma;

  bool contains(int vertex) const { return member[std::size_t(vertex)] != 0; }
};

struct PathSegment {
  std::vector<int> vertex_ids;
  std::vector<Vec3> waypoints;
  bool reached_proxy = false;
  double total_length = 0.0;
};

// Vertices inside the axis-aligned box spanned by {a, b} inflated by margin,
// clipped to the lattice; returned in ascending vertex order.
inline std::vector<int> local_partition(const Lattice& lat, const Vec3& a, const Vec3& b,
                                        double margin) {
  int lo[3], hi[3];
  for (int ax = 0; ax < 3; ++ax) {
    const double mn = std::min(a[ax], b[ax]) - margin;
    const double mx = std::max(a[ax], b[ax]) + margin;
    lo[ax] = std::max(0, int(std::ceil((mn - lat.origin[ax]) / lat.spacing - 1e-9)));
    hi[ax] = std::min(lat.dims[ax] - 1,
                      int(std::floor((mx - lat.origin[ax]) / lat.spacing + 1e-9)));
    if (lo[ax] > hi[ax])
      throw std::invalid_argument("local_partition: box does not intersect the lattice");
  }
  std::vector<int> out;
  out.reserve(std::size_t(hi[0] - lo[0] + 1) * (hi[1] - lo[1] + 1) * (hi[2] - lo[2] + 1));
  for (int i = lo[0]; i <= hi[0]; ++i)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int k = lo[2]; k <= hi[2]; ++k) out.push_back(lat.index(i, j, k));
  return out;
}

// Exact thresholding; alpha == gamma is a member.
inline SafeSet filter_safe(const RiskField& field, const std::vector<int>& partition,
                           double gamma) {
  SafeSet safe{field.lattice, std::vector<std::uint8_t>(field.values.size(), 0), gamma};
  for (int v : partition)
    if (field.values[std::size_t(v)] >= gamma) safe.member[std::size_t(v)] = 1;
  return safe;
}

namespace detail {

struct NeighborTable {
  // 26-neighborhood offsets with step lengths in lattice units.
  std::array<std::array<int, 3>, 26> delta;
  std::array<double, 26> length;

  NeighborTable() {
    int n = 0;
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj)
        for (int dk = -1; dk <= 1; ++dk) {
          if (di == 0 && dj == 0 && dk == 0) continue;
          delta[n] = {di, dj, dk};
          length[n] = std::sqrt(double(di * di + dj * dj + dk * dk));
          ++n;
        }
  }
};

inline const NeighborTable& neighbors() {
  static const NeighborTable table;
  return table;
}

// Canonical segment length: counts axis/planar/space-diagonal steps so two
// paths with the same step multiset report a bit-identical total.
inline double path_length(const Lattice& lat, const std::vector<int>& ids) {
  long n1 = 0, n2 = 0, n3 = 0;
  for (std::size_t i = 1; i < ids.size(); ++i) {
    const auto a = lat.coords(ids[i - 1]);
    const auto b = lat.coords(ids[i]);
    const int d = std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]);
    if (d == 1) ++n1;
    else if (d == 2) ++n2;
    else ++n3;
  }
  return lat.spacing * (double(n1) + double(n2) * std::sqrt(2.0) + double(n3) * std::sqrt(3.0));
}

inline PathSegment make_segment(const Lattice& lat, std::vector<int> ids, bool reached_proxy) {
  PathSegment seg;
  seg.vertex_ids = std::move(ids);
  seg.waypoints.reserve(seg.vertex_ids.size());
  for (int v : seg.vertex_ids) seg.waypoints.push_back(lat.vertex(v));
  seg.reached_proxy = reached_proxy;
  seg.total_length = path_length(lat, seg.vertex_ids);
  return seg;
}

}  // namespace detail

// A* over the safe set with Euclidean edge costs and straight-line heuristic.
// Ties are broken by smaller heuristic, then smaller vertex index. Returns
// nullopt when start and goal are disconnected.
inline std::optional<PathSegment> astar(const SafeSet& safe, int start, int goal) {
  if (!safe.contains(start)) throw std::invalid_argument("astar: start vertex not in safe set");
  if (!safe.contains(goal)) throw std::invalid_argument("astar: goal vertex not in safe set");
  const Lattice& lat = safe.lattice;
  const auto& nb = detail::neighbors();

  const std::size_t n = safe.member.size();
  std::vector<double> g(n, std::numeric_limits<double>::infinity());
  std::vector<int> parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);

  struct Node {
    double f, h;
    int v;
    bool operator>(const Node& o) const {
      if (f != o.f) return f > o.f;
      if (h != o.h) return h > o.h;
      return v > o.v;
    }
  };
  std::priority_queue<Node, std::vector<Node>, std::greater<Node>> open;

  const Vec3 goal_pos = lat.vertex(goal);
  auto heur = [&](int v) { return (lat.vertex(v) - goal_pos).norm(); };

  g[std::size_t(start)] = 0.0;
  open.push(Node{heur(start), heur(start), start});
  while (!open.empty()) {
    const Node cur = open.top();
    open.pop();
    if (closed[std::size_t(cur.v)]) continue;
    closed[std::size_t(cur.v)] = 1;
    if (cur.v == goal) break;
    const auto c = lat.coords(cur.v);
    for (int e = 0; e < 26; ++e) {
      const int i = c[0] + nb.delta[e][0];
      const int j = c[1] + nb.delta[e][1];
      const int k = c[2] + nb.delta[e][2];
      if (i < 0 || j < 0 || k < 0 || i >= lat.dims[0] || j >= lat.dims[1] || k >= lat.dims[2])
        continue;
      const int w = lat.index(i, j, k);
      if (!safe.contains(w) || closed[std::size_t(w)]) continue;
      const double cand = g[std::size_t(cur.v)] + lat.spacing * nb.length[e];
      if (cand < g[std::size_t(w)]) {
        g[std::size_t(w)] = cand;
        parent[std::size_t(w)] = cur.v;
        const double h = heur(w);
        open.push(Node{cand + h, h, w});
      }
    }
  }
  if (!closed[std::size_t(goal)]) return std::nullopt;

  std::vector<int> ids;
  for (int v = goal; v != -1; v = parent[std::size_t(v)]) ids.push_back(v);
  std::reverse(ids.begin(), ids.end());
  return detail::make_segment(lat, std::move(ids), false);
}

// Safest vertex of the safe set inside the closed ball of radius delta about
// z_next; ties go to the vertex nearer z_next, then to the smaller index.
inline std::optional<int> proxy_subgoal(const SafeSet& safe, const RiskField& field,
                                        const Vec3& z_next, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("proxy_subgoal: delta must be positive");
  const Lattice& lat = safe.lattice;
  int best = -1;
  double best_alpha = -std::numeric_limits<double>::infinity();
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < safe.member.size(); ++v) {
    if (!safe.member[v]) continue;
    const double dist = (lat.vertex(int(v)) - z_next).norm();
    if (dist > delta) continue;
    const double a = field.values[v];
    if (a > best_alpha || (a == best_alpha && dist < best_dist)) {
      best = int(v);
      best_alpha = a;
      best_dist = dist;
    }
  }
  if (best < 0) return std::nullopt;
  return best;
}

struct PlanParams {
  double gamma = 0.10;
  double margin;  // partition inflation, meters
  double delta;   // proxy search radius, meters
  int delta_expansions = 5;
};

struct PlanResult {
  bool blocked = false;
  PathSegment segment;
  std::string diagnostic;
};

namespace detail {

// Dijkstra over the safe set from `start`; distances in meters, infinity
// where unreachable.
inline std::vector<double> safe_distances(const SafeSet& safe, int start) {
  const Lattice& lat = safe.lattice;
  const auto& nb = neighbors();
  std::vector<double> dist(safe.member.size(), std::numeric_limits<double>::infinity());
  if (!safe.contains(start)) return dist;

  struct Node {
    double d;
    int v;
    bool operator>(const Node& o) const { return d != o.d ? d > o.d : v > o.v; }
  };
  std::priority_queue<Node, std::vector<Node>, std::greater<Node>> open;
  dist[std::size_t(start)] = 0.0;
  open.push(Node{0.0, start});
  std::vector<std::uint8_t> done(safe.member.size(), 0);
  while (!open.empty()) {
    const Node cur = open.top();
    open.pop();
    if (done[std::size_t(cur.v)]) continue;
    done[std::size_t(cur.v)] = 1;
    const auto c = lat.coords(cur.v);
    for (int e = 0; e < 26; ++e) {
      const int i = c[0] + nb.delta[e][0];
      const int j = c[1] + nb.delta[e][1];
      const int k = c[2] + nb.delta[e][2];
      if (i < 0 || j < 0 || k < 0 || i >= lat.dims[0] || j >= lat.dims[1] || k >= lat.dims[2])
        continue;
      const int w = lat.index(i, j, k);
      if (!safe.contains(w) || done[std::size_t(w)]) continue;
      const double cand = cur.d + lat.spacing * nb.length[e];
      if (cand < dist[std::size_t(w)]) {
        dist[std::size_t(w)] = cand;
        open.push(Node{cand, w});
      }
    }
  }
  return dist;
}

}  // namespace detail

// Planning cascade for one subgoal: partition, filter, proxy the subgoal if
// it is unsafe (growing the search ball by one spacing per retry), then A*.
// When no target is reachable at all, the segment leads to the reachable
// safe vertex closest to z_next so exploration can continue.
inline PlanResult plan_segment(const RiskField& field, const Vec3& z_j, const Vec3& z_next,
                               const PlanParams& params) {
  const Lattice& lat = field.lattice;
  PlanResult res;

  std::vector<int> partition;
  try {
    partition = local_partition(lat, z_j, z_next, params.margin);
  } catch (const std::invalid_argument& e) {
    res.blocked = true;
    res.diagnostic = e.what();
    return res;
  }
  const SafeSet safe = filter_safe(field, partition, params.gamma);

  const int start = lat.snap(z_j);
  const double snap_dist = (lat.vertex(start) - z_j).norm();
  if (snap_dist > lat.spacing * std::sqrt(3.0) / 2.0)
    res.diagnostic = "warning: start snapped " + std::to_string(snap_dist) + " m";
  if (!safe.contains(start)) {
    res.blocked = true;
    res.diagnostic = "start vertex " + std::to_string(start) + " is not safe (alpha " +
                     std::to_string(field.values[std::size_t(start)]) + " < gamma " +
                     std::to_string(params.gamma) + ")";
    return res;
  }

  const int goal_snap = lat.snap(z_next);
  int target = -1;
  bool proxied = false;
  if (safe.contains(goal_snap)) {
    target = goal_snap;
  } else {
    double delta = params.delta;
    for (int attempt = 0; attempt <= params.delta_expansions; ++attempt) {
      if (auto p = proxy_subgoal(safe, field, z_next, delta)) {
        target = *p;
        proxied = true;
        break;
      }
      delta += lat.spacing;
    }
  }

  if (target >= 0) {
    if (auto seg = astar(safe, start, target)) {
      seg->reached_proxy = proxied;
      res.segment = std::move(*seg);
      return res;
    }
  }

  // Nothing reachable matches the subgoal: fall back to the reachable safe
  // vertex nearest z_next.
  const std::vector<double> dist = detail::safe_distances(safe, start);
  int fallback = start;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < dist.size(); ++v) {
    if (!std::isfinite(dist[v])) continue;
    const double d = (lat.vertex(int(v)) - z_next).norm();
    if (d < best) {
      best = d;
      fallback = int(v);
    }
  }
  auto seg = astar(safe, start, fallback);
  seg->reached_proxy = true;
  res.segment = std::move(*seg);
  res.diagnostic += std::string(res.diagnostic.empty() ? "" : "; ") +
                    "subgoal unreachable; falling back to nearest reachable safe vertex";
  return res;
}

}  // namespace ravp
