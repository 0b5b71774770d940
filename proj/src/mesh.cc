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

#include "facegcn/mesh.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <utility>

#include "facegcn/errors.h"
#include "facegcn/ops.h"

namespace facegcn {

SparseMatrix build_adjacency(std::span<const Triangle> triangles, Index n) {
  std::set<std::pair<Index, Index>> edges;
  for (const Triangle& t : triangles) {
    for (int k = 0; k < 3; ++k) {
      const Index a = t[k], b = t[(k + 1) % 3];
      if (a < 0 || a >= n || b < 0 || b >= n) {
        throw ContractViolation("build_adjacency: vertex index out of range for n=" +
                                std::to_string(n));
      }
      if (a == b) continue;
      edges.emplace(a, b);
      edges.emplace(b, a);
    }
  }
  std::vector<SparseEntry> entries;
  entries.reserve(edges.size());
  for (const auto& [a, b] : edges) entries.push_back({a, b, 1.0});
  return SparseMatrix(n, n, entries);
}

MeshTopology::MeshTopology(Index vertex_count, std::vector<Triangle> triangles)
    : vertex_count_(vertex_count),
      triangles_(std::move(triangles)),
      adjacency_(build_adjacency(triangles_, vertex_count)) {}

SparseMatrix normalized_laplacian(const SparseMatrix& adjacency) {
  const Index n = adjacency.rows();
  if (adjacency.cols() != n) throw ContractViolation("normalized_laplacian: matrix not square");
  Eigen::VectorXd deg = Eigen::VectorXd::Zero(n);
  const auto entries = adjacency.entries();
  for (const auto& e : entries) deg[e.row] += e.value;
  std::vector<SparseEntry> out;
  out.reserve(entries.size() + static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) out.push_back({i, i, 1.0});
  for (const auto& e : entries) {
    if (e.row == e.col) continue;
    out.push_back({e.row, e.col, -e.value / std::sqrt(deg[e.row] * deg[e.col])});
  }
  return SparseMatrix(n, n, out);
}

double max_eigenvalue(const SparseMatrix& laplacian, double tol, int max_iterations) {
  const Index n = laplacian.rows();
  if (n == 0) return 0.0;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uniform(0.5, 1.5);
  Eigen::VectorXd x(n);
  for (Index i = 0; i < n; ++i) x[i] = uniform(rng);
  x.normalize();
  double lambda = 0.0;
  double step = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd y = laplacian.eigen() * x;
    const double next = x.dot(y);
    const double scale = std::max(std::abs(next), 1e-12);
    const double residual = (y - next * x).norm();
    if (residual <= tol * scale) return next;
    // On a PSD matrix the Rayleigh quotient rises monotonically and its
    // increments shrink geometrically; the tail of that series bounds the
    // remaining error when the top of the spectrum is nearly degenerate.
    const double prev_step = step;
    step = next - lambda;
    lambda = next;
    if (it > 2 && step >= 0.0 && prev_step > 0.0 && step < prev_step) {
      const double ratio = step / prev_step;
      if (step / (1.0 - ratio) <= tol * scale) return lambda;
    }
    const double len = y.norm();
    if (len == 0.0) return 0.0;
    x = y / len;
  }
  throw ConvergenceError("max_eigenvalue: no convergence after " +
                             std::to_string(max_iterations) + " iterations",
                         lambda);
}

SparseMatrix scaled_laplacian(const SparseMatrix& laplacian, double lambda_max) {
  if (!(lambda_max > 0.0)) {
    throw ContractViolation("scaled_laplacian: lambda_max must be positive");
  }
  SparseMatrix::Storage id(laplacian.rows(), laplacian.cols());
  id.setIdentity();
  SparseMatrix::Storage s = (2.0 / lambda_max) * laplacian.eigen() - id;
  s.prune(0.0, 0.0);
  return SparseMatrix(std::move(s));
}

LaplacianPair make_laplacian_pair(const MeshTopology& topology, LambdaMode mode, double tol) {
  LaplacianPair pair;
  pair.laplacian = normalized_laplacian(topology.adjacency());
  pair.lambda_max = mode == LambdaMode::kFixedTwo ? 2.0 : max_eigenvalue(pair.laplacian, tol);
  pair.scaled = scaled_laplacian(pair.laplacian, pair.lambda_max);
  return pair;
}

namespace {

ad::Tensor cross_rows(const ad::Tensor& u, const ad::Tensor& v) {
  using namespace ad;
  const Tensor ux = slice_cols(u, 0, 1), uy = slice_cols(u, 1, 2), uz = slice_cols(u, 2, 3);
  const Tensor vx = slice_cols(v, 0, 1), vy = slice_cols(v, 1, 2), vz = slice_cols(v, 2, 3);
  const Tensor parts[] = {sub(mul(uy, vz), mul(uz, vy)), sub(mul(uz, vx), mul(ux, vz)),
                          sub(mul(ux, vy), mul(uy, vx))};
  return concat_cols(parts);
}

}  // namespace

VertexNormals vertex_normals(const ad::Tensor& positions, const MeshTopology& topology) {
  using namespace ad;
  const Index n = topology.vertex_count();
  if (positions.rank() != 2 || positions.dim(0) != n || positions.dim(1) != 3) {
    throw ContractViolation("vertex_normals: positions " + shape_string(positions.shape()) +
                            " do not match " + std::to_string(n) + " vertices");
  }
  const auto& tris = topology.triangles();
  const Index f = static_cast<Index>(tris.size());
  VertexNormals out;
  out.defined.assign(static_cast<std::size_t>(n), false);
  if (f == 0) {
    out.normals = Tensor::zeros({n, 3});
    out.warning = n > 0;
    return out;
  }

  std::array<std::shared_ptr<IndexList>, 3> corner;
  for (auto& c : corner) c = std::make_shared<IndexList>(static_cast<std::size_t>(f));
  for (Index t = 0; t < f; ++t) {
    for (int k = 0; k < 3; ++k) (*corner[k])[static_cast<std::size_t>(t)] = tris[t][k];
  }
  const Tensor a = gather_rows(positions, corner[0]);
  const Tensor b = gather_rows(positions, corner[1]);
  const Tensor c = gather_rows(positions, corner[2]);
  const Tensor face = cross_rows(sub(b, a), sub(c, a));
  const Tensor len = row_norm(face);

  // Degenerate faces contribute nothing.
  Eigen::VectorXd valid(f);
  for (Index t = 0; t < f; ++t) valid[t] = len.values()[t] > 0.0 ? 1.0 : 0.0;
  const Tensor unit = mul(face, broadcast_cols(mul(safe_reciprocal(len), Tensor({f, 1}, valid)), 3));

  std::vector<SparseEntry> incidence;
  std::set<std::pair<Index, Index>> seen;
  for (Index t = 0; t < f; ++t) {
    for (int k = 0; k < 3; ++k) {
      if (seen.emplace(tris[t][k], t).second) incidence.push_back({tris[t][k], t, 1.0});
    }
  }
  const SparseMatrix inc(n, f, incidence);
  const Tensor summed = spmm(inc, unit);
  const Tensor vlen = row_norm(summed);
  out.normals = mul(summed, broadcast_cols(safe_reciprocal(vlen), 3));
  for (Index i = 0; i < n; ++i) {
    out.defined[static_cast<std::size_t>(i)] = vlen.values()[i] > 1e-12;
    out.warning = out.warning || !out.defined[static_cast<std::size_t>(i)];
  }
  return out;
}

TriangleMesh make_icosphere(int subdivisions) {
  if (subdivisions < 0) throw ContractViolation("make_icosphere: negative subdivision count");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<Triangle> faces = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
      {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<Index, Index>, Index> midpoint;
    auto mid = [&](Index a, Index b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back((verts[static_cast<std::size_t>(a)] + verts[static_cast<std::size_t>(b)])
                          .normalized());
      const Index id = static_cast<Index>(verts.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(faces.size() * 4);
    for (const Triangle& f : faces) {
      const Index ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  TriangleMesh mesh;
  mesh.positions.resize(static_cast<Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) {
    mesh.positions.row(static_cast<Index>(i)) = verts[i].transpose();
  }
  mesh.topology = MeshTopology(static_cast<Index>(verts.size()), std::move(faces));
  return mesh;
}

ObjData read_obj(std::istream& is) {
  ObjData data;
  std::vector<Eigen::Vector3d> pos, col;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(is, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Eigen::Vector3d p;
      if (!(ls >> p[0] >> p[1] >> p[2])) throw ParseError("obj: malformed vertex", line_start);
      pos.push_back(p);
      Eigen::Vector3d c;
      if (ls >> c[0] >> c[1] >> c[2]) col.push_back(c);
    } else if (tag == "f") {
      std::vector<Index> idx;
      std::string tok;
      while (ls >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        long long v = 0;
        try {
          v = std::stoll(head);
        } catch (const std::exception&) {
          throw ParseError("obj: malformed face index '" + tok + "'", line_start);
        }
        const Index count = static_cast<Index>(pos.size());
        const Index resolved = v > 0 ? static_cast<Index>(v) - 1 : count + static_cast<Index>(v);
        if (v == 0 || resolved < 0 || resolved >= count) {
          throw ParseError("obj: face index out of range", line_start);
        }
        idx.push_back(resolved);
      }
      if (idx.size() < 3) throw ParseError("obj: face with fewer than 3 vertices", line_start);
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        data.triangles.push_back({idx[0], idx[k], idx[k + 1]});
      }
    }
  }
  data.positions.resize(static_cast<Index>(pos.size()), 3);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    data.positions.row(static_cast<Index>(i)) = pos[i].transpose();
  }
  if (!col.empty() && col.size() == pos.size()) {
    Positions c(static_cast<Index>(col.size()), 3);
    for (std::size_t i = 0; i < col.size(); ++i) c.row(static_cast<Index>(i)) = col[i].transpose();
    data.colors = std::move(c);
  }
  return data;
}

ObjData read_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("obj: cannot open " + path, 0);
  return read_obj(in);
}

void write_obj(std::ostream& os, const Positions& positions, std::span<const Triangle> triangles,
               const Positions* colors) {
  char buf[256];
  for (Index i = 0; i < positions.rows(); ++i) {
    if (colors != nullptr) {
      std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g %.17g %.17g %.17g\n", positions(i, 0),
                    positions(i, 1), positions(i, 2), (*colors)(i, 0), (*colors)(i, 1),
                    (*colors)(i, 2));
    } else {
      std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", positions(i, 0), positions(i, 1),
                    positions(i, 2));
    }
    os << buf;
  }
  for (const Triangle& t : triangles) {
    os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
}

void write_obj(const std::string& path, const Positions& positions,
               std::span<const Triangle> triangles, const Positions* colors) {
  std::ofstream out(path);
  if (!out) throw ConfigError("obj: cannot write " + path);
  write_obj(out, positions, triangles, colors);
}

}  // namespace facegcn
