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

#ifndef FACEGCN_MESH_H_
#define FACEGCN_MESH_H_

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "facegcn/sparse.h"
#include "facegcn/tensor.h"

namespace facegcn {

using Triangle = std::array<Index, 3>;
using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

// Binary symmetric adjacency: A_ij = 1 iff i and j share a triangle edge.
SparseMatrix build_adjacency(std::span<const Triangle> triangles, Index n);

class MeshTopology {
 public:
  MeshTopology() = default;
  MeshTopology(Index vertex_count, std::vector<Triangle> triangles);

  Index vertex_count() const { return vertex_count_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const SparseMatrix& adjacency() const { return adjacency_; }
  // Number of undirected edges.
  Index edge_count() const { return adjacency_.nonzeros() / 2; }

 private:
  Index vertex_count_ = 0;
  std::vector<Triangle> triangles_;
  SparseMatrix adjacency_;
};

// L = I - D^{-1/2} A D^{-1/2}; isolated vertices keep L_ii = 1.
SparseMatrix normalized_laplacian(const SparseMatrix& adjacency);

// Largest eigenvalue of a symmetric positive semidefinite matrix by power
// iteration. Stops once the eigen-residual |Lx - lx| drops below tol * l or
// the extrapolated remaining rise of the Rayleigh quotient does. Throws
// ConvergenceError carrying the last estimate after max_iterations.
double max_eigenvalue(const SparseMatrix& laplacian, double tol = 1e-6,
                      int max_iterations = 10000);

// 2 L / lambda_max - I.
SparseMatrix scaled_laplacian(const SparseMatrix& laplacian, double lambda_max);

enum class LambdaMode { kPowerIteration, kFixedTwo };

struct LaplacianPair {
  SparseMatrix laplacian;
  SparseMatrix scaled;
  double lambda_max = 2.0;
};

LaplacianPair make_laplacian_pair(const MeshTopology& topology,
                                  LambdaMode mode = LambdaMode::kPowerIteration,
                                  double tol = 1e-6);

struct VertexNormals {
  ad::Tensor normals;         // [n, 3], differentiable w.r.t. positions
  std::vector<bool> defined;  // false where no non-degenerate triangle touches
  bool warning = false;       // any vertex undefined
};

// Per-vertex normal: normalized mean of the unit normals of incident
// non-degenerate triangles.
VertexNormals vertex_normals(const ad::Tensor& positions, const MeshTopology& topology);

// Same rule on plain matrices; undefined normals are zero.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 3, Eigen::RowMajor> vertex_normals(
    const Eigen::MatrixBase<Derived>& positions, std::span<const Triangle> triangles) {
  using Scalar = typename Derived::Scalar;
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor> acc =
      Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>::Zero(positions.rows(), 3);
  for (const Triangle& t : triangles) {
    const Vec3 a = positions.row(t[0]).transpose();
    const Vec3 b = positions.row(t[1]).transpose();
    const Vec3 c = positions.row(t[2]).transpose();
    const Vec3 n = (b - a).cross(c - a);
    const Scalar len = n.norm();
    if (len == Scalar(0)) continue;
    for (Index v : t) acc.row(v) += (n / len).transpose();
  }
  for (Index i = 0; i < acc.rows(); ++i) {
    const Scalar len = acc.row(i).norm();
    if (len > Scalar(0)) acc.row(i) /= len;
  }
  return acc;
}

struct TriangleMesh {
  Positions positions;
  MeshTopology topology;
};

// Unit icosphere after `subdivisions` rounds of 4-to-1 splitting:
// 10 * 4^s + 2 vertices, 20 * 4^s triangles, counter-clockwise outward.
TriangleMesh make_icosphere(int subdivisions);

struct ObjData {
  Positions positions;
  std::optional<Positions> colors;  // "v x y z r g b" extension
  std::vector<Triangle> triangles;
};

// ASCII OBJ with v/f records and 1-based indices. Polygons are fan
// triangulated; texture/normal references in face records are ignored.
ObjData read_obj(std::istream& is);
ObjData read_obj(const std::string& path);
void write_obj(std::ostream& os, const Positions& positions,
               std::span<const Triangle> triangles, const Positions* colors = nullptr);
void write_obj(const std::string& path, const Positions& positions,
               std::span<const Triangle> triangles, const Positions* colors = nullptr);

}  // namespace facegcn

#endif  // FACEGCN_MESH_H_
