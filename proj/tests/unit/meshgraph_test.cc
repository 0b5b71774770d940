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

#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "facegcn/errors.h"
#include "facegcn/gradcheck.h"
#include "facegcn/mesh.h"
#include "facegcn/ops.h"
#include "facegcn/sampling.h"

namespace facegcn {
namespace {

Eigen::VectorXd sorted_eigenvalues(const SparseMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.to_dense());
  return es.eigenvalues();
}

TEST(Adjacency, SingleTriangle) {
  const std::vector<Triangle> tris = {{0, 1, 2}};
  const Eigen::MatrixXd a = build_adjacency(tris, 3).to_dense();
  Eigen::Matrix3d expected;
  expected << 0, 1, 1, 1, 0, 1, 1, 1, 0;
  EXPECT_EQ(a, expected);
}

TEST(Adjacency, SharedEdgeCountsOnce) {
  const std::vector<Triangle> tris = {{0, 1, 2}, {0, 2, 3}};
  const MeshTopology topo(4, tris);
  EXPECT_EQ(topo.edge_count(), 5);
  EXPECT_EQ(topo.adjacency().coeff(1, 3), 0.0);
  EXPECT_EQ(topo.adjacency().coeff(0, 2), 1.0);
}

TEST(Adjacency, OutOfRangeIndexIsRejected) {
  const std::vector<Triangle> tris = {{0, 1, 5}};
  EXPECT_THROW(build_adjacency(tris, 3), ContractViolation);
}

TEST(Laplacian, EdgelessGraphIsIdentity) {
  const SparseMatrix l = normalized_laplacian(build_adjacency({}, 3));
  EXPECT_EQ(l.to_dense(), Eigen::MatrixXd::Identity(3, 3));
}

TEST(Laplacian, SingleEdge) {
  const SparseEntry e[] = {{0, 1, 1.0}, {1, 0, 1.0}};
  const Eigen::MatrixXd l = normalized_laplacian(SparseMatrix(2, 2, e)).to_dense();
  Eigen::Matrix2d expected;
  expected << 1, -1, -1, 1;
  EXPECT_EQ(l, expected);
}

TEST(Laplacian, TriangleSpectrum) {
  const std::vector<Triangle> tris = {{0, 1, 2}};
  const SparseMatrix l = normalized_laplacian(build_adjacency(tris, 3));
  EXPECT_NEAR(l.coeff(0, 1), -0.5, 1e-15);
  const Eigen::VectorXd ev = sorted_eigenvalues(l);
  EXPECT_NEAR(ev[0], 0.0, 1e-12);
  EXPECT_NEAR(ev[1], 1.5, 1e-12);
  EXPECT_NEAR(ev[2], 1.5, 1e-12);
}

TEST(MaxEigenvalue, SmallExamples) {
  EXPECT_NEAR(max_eigenvalue(SparseMatrix::identity(4)), 1.0, 1e-6);
  const SparseEntry e[] = {{0, 1, 1.0}, {1, 0, 1.0}};
  EXPECT_NEAR(max_eigenvalue(normalized_laplacian(SparseMatrix(2, 2, e))), 2.0, 1e-6);
  const std::vector<Triangle> tris = {{0, 1, 2}};
  EXPECT_NEAR(max_eigenvalue(normalized_laplacian(build_adjacency(tris, 3))), 1.5, 1e-6);
}

TEST(MaxEigenvalue, IterationCapRaisesWithEstimate) {
  const auto sphere = make_icosphere(2);
  const SparseMatrix l = normalized_laplacian(sphere.topology.adjacency());
  try {
    max_eigenvalue(l, 1e-14, 2);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.last_estimate(), 0.0);
  }
}

TEST(ScaledLaplacian, TriangleSpectrumMapsToUnitInterval) {
  const std::vector<Triangle> tris = {{0, 1, 2}};
  const SparseMatrix l = normalized_laplacian(build_adjacency(tris, 3));
  const Eigen::VectorXd ev = sorted_eigenvalues(scaled_laplacian(l, 1.5));
  EXPECT_NEAR(ev[0], -1.0, 1e-12);
  EXPECT_NEAR(ev[1], 1.0, 1e-12);
  EXPECT_NEAR(ev[2], 1.0, 1e-12);
  EXPECT_THROW(scaled_laplacian(l, 0.0), ContractViolation);
}

TEST(LaplacianProperties, RandomMeshesHaveBoundedSymmetricSpectra) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 4 + static_cast<Index>(rng() % 20);
    std::vector<Triangle> tris;
    const int count = 1 + static_cast<int>(rng() % 25);
    for (int t = 0; t < count; ++t) {
      Triangle tri{static_cast<Index>(rng() % n), static_cast<Index>(rng() % n),
                   static_cast<Index>(rng() % n)};
      if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) continue;
      tris.push_back(tri);
    }
    const MeshTopology topo(n, tris);
    const LaplacianPair pair = make_laplacian_pair(topo);
    const Eigen::MatrixXd l = pair.laplacian.to_dense();
    EXPECT_EQ(l, l.transpose());
    const Eigen::VectorXd ev = sorted_eigenvalues(pair.laplacian);
    EXPECT_GE(ev[0], -1e-10);
    EXPECT_LE(ev[n - 1], 2.0 + 1e-10);
    EXPECT_NEAR(pair.lambda_max, ev[n - 1], 1e-5);
    const Eigen::VectorXd sev = sorted_eigenvalues(pair.scaled);
    EXPECT_GE(sev[0], -1.0 - 1e-5);
    EXPECT_LE(sev[n - 1], 1.0 + 1e-5);
  }
}

TEST(Normals, FlatSquarePointsUp) {
  Positions p(4, 3);
  p << 0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0;
  const std::vector<Triangle> tris = {{0, 1, 2}, {0, 2, 3}};
  const auto n = vertex_normals(p, std::span<const Triangle>(tris));
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR((n.row(i) - Eigen::RowVector3d(0, 0, 1)).norm(), 0, 1e-15);

  const VertexNormals dn = vertex_normals(ad::Tensor({4, 3}, Eigen::Map<const Eigen::VectorXd>(p.data(), 12)),
                                          MeshTopology(4, tris));
  EXPECT_FALSE(dn.warning);
  EXPECT_LT((dn.normals.matrix() - n).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Normals, TetrahedronNormalsPointOutward) {
  Positions p(4, 3);
  p << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
  const std::vector<Triangle> tris = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
  const auto n = vertex_normals(p, std::span<const Triangle>(tris));
  for (Index i = 0; i < 4; ++i) {
    EXPECT_GT(n.row(i).dot(p.row(i)), 0.0);
    EXPECT_NEAR(n.row(i).norm(), 1.0, 1e-12);
  }
}

TEST(Normals, DegenerateTriangleGivesWarning) {
  const std::vector<Triangle> tris = {{0, 1, 2}};
  const ad::Tensor p({4, 3}, Eigen::VectorXd::Zero(12));
  const VertexNormals n = vertex_normals(p, MeshTopology(4, tris));
  EXPECT_TRUE(n.warning);
  EXPECT_FALSE(n.defined[0]);
  EXPECT_FALSE(n.defined[3]);
}

TEST(Normals, GradientMatchesFiniteDifferences) {
  const auto sphere = make_icosphere(1);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0, 0.05);
  Positions p = sphere.positions;
  for (Index i = 0; i < p.size(); ++i) p.data()[i] += noise(rng);
  const ad::Tensor x({p.rows(), 3}, Eigen::Map<const Eigen::VectorXd>(p.data(), p.size()));
  const Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(p.size(), -1, 1);
  const auto f = [&](const ad::Tensor& t) {
    return ad::sum(ad::mul(vertex_normals(t, sphere.topology).normals, ad::Tensor(t.shape(), w)));
  };
  EXPECT_LT(ad::grad_check(f, x).max_rel_error, 1e-5);
}

TEST(Icosphere, CountsFollowSubdivision) {
  for (int s = 0; s <= 3; ++s) {
    const auto m = make_icosphere(s);
    const Index pow4 = Index(1) << (2 * s);
    EXPECT_EQ(m.topology.vertex_count(), 10 * pow4 + 2);
    EXPECT_EQ(static_cast<Index>(m.topology.triangles().size()), 20 * pow4);
    EXPECT_EQ(m.topology.edge_count(), 30 * pow4);
  }
  const auto m = make_icosphere(3);
  EXPECT_EQ(m.topology.vertex_count(), 642);
  EXPECT_EQ(m.topology.triangles().size(), 1280u);
}

TEST(Sampling, DownThenUpIsIdentityOnCoarse) {
  const auto sphere = make_icosphere(2);
  const SamplingOperators ops = build_sampling(sphere.topology, sphere.positions, 0.25);
  EXPECT_EQ(ops.down.rows(), 41);
  EXPECT_EQ(ops.down.cols(), 162);
  const Eigen::MatrixXd du = ops.down.to_dense() * ops.up.to_dense();
  EXPECT_LT((du - Eigen::MatrixXd::Identity(41, 41)).cwiseAbs().maxCoeff(), 1e-12);
  const Eigen::VectorXd up_rows = ops.up.to_dense().rowwise().sum();
  EXPECT_LT((up_rows.array() - 1.0).abs().maxCoeff(), 1e-12);
  const Eigen::MatrixXd up = ops.up.to_dense();
  EXPECT_GE(up.minCoeff(), -1e-12);
  for (Index i = 0; i < 41; ++i) {
    EXPECT_EQ(ops.down.to_dense().row(i).sum(), 1.0);
  }
  EXPECT_EQ(ops.coarse_topology.vertex_count(), 41);
  EXPECT_FALSE(ops.coarse_topology.triangles().empty());
}

TEST(Sampling, InvalidFractionIsRejected) {
  const auto sphere = make_icosphere(1);
  EXPECT_THROW(build_sampling(sphere.topology, sphere.positions, 1.5), ContractViolation);
  EXPECT_THROW(build_sampling(sphere.topology, sphere.positions, 0.01), ContractViolation);
}

TEST(Sampling, HierarchyOfFourLevels) {
  const auto sphere = make_icosphere(3);
  const MeshHierarchy h = build_hierarchy(sphere.topology, sphere.positions, 4, 0.25);
  ASSERT_EQ(h.levels(), 4u);
  EXPECT_EQ(h.topologies[1].vertex_count(), 161);
  EXPECT_EQ(h.topologies[2].vertex_count(), 41);
  EXPECT_EQ(h.topologies[3].vertex_count(), 11);
  EXPECT_EQ(h.samplers.size(), 3u);
  EXPECT_EQ(h.laplacians.size(), 4u);
}

TEST(Sampling, TextRoundTrip) {
  const auto sphere = make_icosphere(1);
  const SamplingOperators ops = build_sampling(sphere.topology, sphere.positions, 0.5);
  std::stringstream ss;
  write_sampling(ss, ops);
  const SamplingOperators back = read_sampling(ss);
  EXPECT_EQ(back.down.to_dense(), ops.down.to_dense());
  EXPECT_EQ(back.up.to_dense(), ops.up.to_dense());
  EXPECT_EQ(back.coarse_topology.triangles(), ops.coarse_topology.triangles());
  EXPECT_EQ(back.kept, ops.kept);
}

TEST(SparseText, RoundTripIsExact) {
  const SparseEntry e[] = {{0, 2, 0.1}, {1, 0, -1.0 / 3.0}, {2, 1, 1e-300}};
  const SparseMatrix m(3, 3, e);
  std::stringstream ss;
  write_triplets(ss, m);
  EXPECT_EQ(read_triplets(ss).to_dense(), m.to_dense());
}

TEST(SparseText, TruncatedInputIsParseError) {
  std::stringstream ss("sparse-triplet 1\n3 3 2\n0 0 1\n");
  EXPECT_THROW(read_triplets(ss), ParseError);
}

TEST(Obj, RoundTripPreservesGeometryAndColors) {
  const auto sphere = make_icosphere(1);
  Positions colors = (sphere.positions.array() + 1.0) / 2.0;
  std::stringstream ss;
  write_obj(ss, sphere.positions, sphere.topology.triangles(), &colors);
  const ObjData back = read_obj(ss);
  EXPECT_EQ(back.positions, sphere.positions);
  ASSERT_TRUE(back.colors.has_value());
  EXPECT_EQ(*back.colors, colors);
  EXPECT_EQ(back.triangles, sphere.topology.triangles());
}

TEST(Obj, QuadsAreFanTriangulated) {
  std::stringstream ss("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3 -1\n");
  const ObjData obj = read_obj(ss);
  ASSERT_EQ(obj.triangles.size(), 2u);
  EXPECT_EQ(obj.triangles[1], (Triangle{0, 2, 3}));
}

TEST(Obj, BadFaceIndexIsParseError) {
  std::stringstream ss("v 0 0 0\nf 1 2 3\n");
  EXPECT_THROW(read_obj(ss), ParseError);
}

}  // namespace
}  // namespace facegcn
