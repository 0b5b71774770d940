// Copyright 2026 The FaceGCN Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "facegcn/sampling.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <queue>
#include <set>
#include <tuple>

#include "facegcn/errors.h"

namespace facegcn {

namespace {

using Vec3 = Eigen::Vector3d;
using Mat4 = Eigen::Matrix4d;

// Barycentric weights of the point of triangle (a, b, c) closest to p.
Vec3 closest_point_weights(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return {1, 0, 0};
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return {0, 1, 0};
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    const double v = d1 / (d1 - d3);
    return {1 - v, v, 0};
  }
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return {0, 0, 1};
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    const double w = d2 / (d2 - d6);
    return {1 - w, 0, w};
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return {0, 1 - w, w};
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return {1 - v - w, v, w};
}

class EdgeCollapser {
 public:
  EdgeCollapser(const MeshTopology& topology, const Positions& positions)
      : positions_(positions),
        faces_(topology.triangles()),
        face_alive_(faces_.size(), true),
        vertex_alive_(static_cast<std::size_t>(topology.vertex_count()), true),
        incident_(static_cast<std::size_t>(topology.vertex_count())),
        quadric_(static_cast<std::size_t>(topology.vertex_count()), Mat4::Zero()),
        stamp_(static_cast<std::size_t>(topology.vertex_count()), 0),
        alive_count_(topology.vertex_count()) {
    std::map<std::pair<Index, Index>, int> edge_faces;
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      const Triangle& t = faces_[f];
      for (Index v : t) incident_[static_cast<std::size_t>(v)].push_back(f);
      const Vec3 a = pos(t[0]), b = pos(t[1]), c = pos(t[2]);
      Vec3 n = (b - a).cross(c - a);
      const double twice_area = n.norm();
      if (twice_area > 0) {
        n /= twice_area;
        Eigen::Vector4d plane(n.x(), n.y(), n.z(), -n.dot(a));
        const Mat4 k = 0.5 * twice_area * plane * plane.transpose();
        for (Index v : t) quadric_[static_cast<std::size_t>(v)] += k;
      }
      for (int e = 0; e < 3; ++e) ++edge_faces[std::minmax(t[e], t[(e + 1) % 3])];
    }
    for (const auto& [edge, count] : edge_faces) non_manifold_ = non_manifold_ || count > 2;
  }

  bool non_manifold() const { return non_manifold_; }

  void run(Index target) {
    bool relaxed = false;
    while (alive_count_ > target) {
      const Index before = alive_count_;
      rebuild_queue();
      while (!queue_.empty() && alive_count_ > target) {
        const Candidate c = queue_.top();
        queue_.pop();
        if (!is_current(c)) continue;
        if (!can_collapse(c.remove, c.keep, relaxed)) continue;
        collapse(c.remove, c.keep);
      }
      if (alive_count_ == before) {
        if (relaxed) {
          throw ContractViolation("build_sampling: no valid edge collapse left at " +
                                  std::to_string(alive_count_) + " vertices");
        }
        relaxed = true;
      }
    }
  }

  std::vector<Index> kept() const {
    std::vector<Index> out;
    for (std::size_t v = 0; v < vertex_alive_.size(); ++v) {
      if (vertex_alive_[v]) out.push_back(static_cast<Index>(v));
    }
    return out;
  }

  std::vector<Triangle> alive_faces() const {
    std::vector<Triangle> out;
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      if (face_alive_[f]) out.push_back(faces_[f]);
    }
    return out;
  }

 private:
  struct Candidate {
    double cost;
    Index remove;
    Index keep;
    unsigned stamp_remove;
    unsigned stamp_keep;
    bool operator>(const Candidate& o) const {
      return std::tie(cost, remove, keep) > std::tie(o.cost, o.remove, o.keep);
    }
  };

  Vec3 pos(Index v) const { return positions_.row(v).transpose(); }

  double cost(Index remove, Index keep) const {
    const Eigen::Vector4d q(positions_(keep, 0), positions_(keep, 1), positions_(keep, 2), 1.0);
    const Mat4 sum = quadric_[static_cast<std::size_t>(remove)] +
                     quadric_[static_cast<std::size_t>(keep)];
    return q.dot(sum * q);
  }

  std::set<Index> neighbors(Index v) const {
    std::set<Index> out;
    for (std::size_t f : incident_[static_cast<std::size_t>(v)]) {
      if (!face_alive_[f]) continue;
      for (Index w : faces_[f]) {
        if (w != v) out.insert(w);
      }
    }
    return out;
  }

  void push_edge(Index a, Index b) {
    const double ab = cost(a, b), ba = cost(b, a);
    // Remove the endpoint whose merge is cheaper; ties remove the larger index.
    Index remove = a, keep = b;
    if (ba < ab || (ba == ab && b > a)) std::swap(remove, keep);
    queue_.push({std::min(ab, ba), remove, keep, stamp_[static_cast<std::size_t>(remove)],
                 stamp_[static_cast<std::size_t>(keep)]});
  }

  void rebuild_queue() {
    queue_ = {};
    for (std::size_t v = 0; v < vertex_alive_.size(); ++v) {
      if (!vertex_alive_[v]) continue;
      for (Index w : neighbors(static_cast<Index>(v))) {
        if (static_cast<Index>(v) < w) push_edge(static_cast<Index>(v), w);
      }
    }
  }

  bool is_current(const Candidate& c) const {
    const auto r = static_cast<std::size_t>(c.remove), k = static_cast<std::size_t>(c.keep);
    return vertex_alive_[r] && vertex_alive_[k] && stamp_[r] == c.stamp_remove &&
           stamp_[k] == c.stamp_keep;
  }

  bool can_collapse(Index remove, Index keep, bool relaxed) const {
    int shared = 0;
    for (std::size_t f : incident_[static_cast<std::size_t>(remove)]) {
      if (!face_alive_[f]) continue;
      const Triangle& t = faces_[f];
      if (std::find(t.begin(), t.end(), keep) != t.end()) ++shared;
    }
    if (shared == 0) return false;
    const auto nr = neighbors(remove), nk = neighbors(keep);
    int common = 0;
    for (Index w : nr) common += static_cast<int>(nk.count(w));
    if (common != shared) return false;
    if (relaxed) return true;
    for (std::size_t f : incident_[static_cast<std::size_t>(remove)]) {
      if (!face_alive_[f]) continue;
      const Triangle& t = faces_[f];
      if (std::find(t.begin(), t.end(), keep) != t.end()) continue;
      Triangle moved = t;
      for (Index& v : moved) {
        if (v == remove) v = keep;
      }
      const Vec3 before = (pos(t[1]) - pos(t[0])).cross(pos(t[2]) - pos(t[0]));
      const Vec3 after = (pos(moved[1]) - pos(moved[0])).cross(pos(moved[2]) - pos(moved[0]));
      if (after.norm() <= 1e-14 * std::max(1.0, before.norm())) return false;
      if (before.dot(after) <= 0) return false;
    }
    return true;
  }

  void collapse(Index remove, Index keep) {
    const auto r = static_cast<std::size_t>(remove), k = static_cast<std::size_t>(keep);
    for (std::size_t f : incident_[r]) {
      if (!face_alive_[f]) continue;
      Triangle& t = faces_[f];
      if (std::find(t.begin(), t.end(), keep) != t.end()) {
        face_alive_[f] = false;
        continue;
      }
      for (Index& v : t) {
        if (v == remove) v = keep;
      }
      incident_[k].push_back(f);
    }
    quadric_[k] += quadric_[r];
    vertex_alive_[r] = false;
    --alive_count_;
    ++stamp_[k];
    ++stamp_[r];
    for (Index w : neighbors(keep)) push_edge(keep, w);
  }

  const Positions& positions_;
  std::vector<Triangle> faces_;
  std::vector<bool> face_alive_;
  std::vector<bool> vertex_alive_;
  std::vector<std::vector<std::size_t>> incident_;
  std::vector<Mat4> quadric_;
  std::vector<unsigned> stamp_;
  Index alive_count_;
  bool non_manifold_ = false;
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> queue_;
};

}  // namespace

SamplingOperators build_sampling(const MeshTopology& topology, const Positions& positions,
                                 double target_fraction) {
  const Index n = topology.vertex_count();
  if (!(target_fraction > 0.0 && target_fraction < 1.0)) {
    throw ContractViolation("build_sampling: target_fraction must lie in (0, 1)");
  }
  return build_sampling_to_count(
      topology, positions,
      static_cast<Index>(std::ceil(static_cast<double>(n) * target_fraction)));
}

SamplingOperators build_sampling_to_count(const MeshTopology& topology,
                                          const Positions& positions, Index target) {
  const Index n = topology.vertex_count();
  if (positions.rows() != n) {
    throw ContractViolation("build_sampling: positions do not match vertex count");
  }
  if (target >= n) {
    throw ContractViolation("build_sampling: target of " + std::to_string(target) +
                            " vertices is not below the current " + std::to_string(n));
  }
  if (target < 4) {
    throw ContractViolation("build_sampling: target of " + std::to_string(target) +
                            " vertices is below the minimum of 4");
  }

  EdgeCollapser collapser(topology, positions);
  collapser.run(target);

  SamplingOperators ops;
  ops.non_manifold = collapser.non_manifold();
  ops.kept = collapser.kept();
  const Index nc = static_cast<Index>(ops.kept.size());
  std::vector<Index> coarse_of(static_cast<std::size_t>(n), -1);
  for (Index j = 0; j < nc; ++j) coarse_of[static_cast<std::size_t>(ops.kept[j])] = j;

  std::vector<Triangle> coarse_tris;
  for (Triangle t : collapser.alive_faces()) {
    for (Index& v : t) v = coarse_of[static_cast<std::size_t>(v)];
    coarse_tris.push_back(t);
  }
  ops.coarse_positions.resize(nc, 3);
  for (Index j = 0; j < nc; ++j) ops.coarse_positions.row(j) = positions.row(ops.kept[j]);
  ops.coarse_topology = MeshTopology(nc, coarse_tris);

  std::vector<SparseEntry> down;
  for (Index j = 0; j < nc; ++j) down.push_back({j, ops.kept[j], 1.0});
  ops.down = SparseMatrix(nc, n, down);

  std::vector<SparseEntry> up;
  for (Index i = 0; i < n; ++i) {
    const Index self = coarse_of[static_cast<std::size_t>(i)];
    if (self >= 0) {
      up.push_back({i, self, 1.0});
      continue;
    }
    const Vec3 p = positions.row(i).transpose();
    double best = INFINITY;
    Vec3 best_w = Vec3::Zero();
    Triangle best_t{};
    for (const Triangle& t : coarse_tris) {
      const Vec3 a = ops.coarse_positions.row(t[0]).transpose();
      const Vec3 b = ops.coarse_positions.row(t[1]).transpose();
      const Vec3 c = ops.coarse_positions.row(t[2]).transpose();
      if ((b - a).cross(c - a).norm() == 0.0) continue;
      const Vec3 w = closest_point_weights(p, a, b, c);
      const double d = (w[0] * a + w[1] * b + w[2] * c - p).squaredNorm();
      if (d < best) {
        best = d;
        best_w = w;
        best_t = t;
      }
    }
    if (!std::isfinite(best)) {
      throw ContractViolation("build_sampling: coarse mesh has no usable triangle");
    }
    // Merge weights when a coarse triangle repeats a vertex.
    std::map<Index, double> row;
    for (int k = 0; k < 3; ++k) {
      if (best_w[k] != 0.0) row[best_t[k]] += best_w[k];
    }
    for (const auto& [col, w] : row) up.push_back({i, col, w});
  }
  ops.up = SparseMatrix(n, nc, up);
  return ops;
}

MeshHierarchy build_hierarchy(const MeshTopology& topology, const Positions& positions,
                              int levels, double target_fraction, LambdaMode mode) {
  if (levels < 1) throw ConfigError("build_hierarchy: need at least one level");
  MeshHierarchy h;
  h.topologies.push_back(topology);
  h.positions.push_back(positions);
  for (int l = 1; l < levels; ++l) {
    SamplingOperators ops = build_sampling(h.topologies.back(), h.positions.back(),
                                           target_fraction);
    h.topologies.push_back(ops.coarse_topology);
    h.positions.push_back(ops.coarse_positions);
    h.samplers.push_back(std::move(ops));
  }
  for (const MeshTopology& t : h.topologies) h.laplacians.push_back(make_laplacian_pair(t, mode));
  return h;
}

void write_sampling(std::ostream& os, const SamplingOperators& ops) {
  os << "sampling-operators 1\n";
  write_triplets(os, ops.down);
  write_triplets(os, ops.up);
  const auto& tris = ops.coarse_topology.triangles();
  os << "triangles " << tris.size() << '\n';
  for (const Triangle& t : tris) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

SamplingOperators read_sampling(std::istream& is) {
  const auto offset = [&is]() -> std::size_t {
    const auto p = is.tellg();
    return p < 0 ? 0 : static_cast<std::size_t>(p);
  };
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "sampling-operators" || version != 1) {
    throw ParseError("sampling: bad header", offset());
  }
  SamplingOperators ops;
  ops.down = read_triplets(is);
  ops.up = read_triplets(is);
  std::string tag;
  std::size_t count = 0;
  if (!(is >> tag >> count) || tag != "triangles") {
    throw ParseError("sampling: missing triangle block", offset());
  }
  std::vector<Triangle> tris(count);
  for (Triangle& t : tris) {
    if (!(is >> t[0] >> t[1] >> t[2])) throw ParseError("sampling: truncated triangles", offset());
  }
  try {
    ops.coarse_topology = MeshTopology(ops.down.rows(), std::move(tris));
  } catch (const ContractViolation& e) {
    throw ParseError(std::string("sampling: ") + e.what(), offset());
  }
  for (const auto& e : ops.down.entries()) ops.kept.push_back(e.col);
  return ops;
}

}  // namespace facegcn
