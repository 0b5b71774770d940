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

#ifndef FACEGCN_MORPHABLE_H_
#define FACEGCN_MORPHABLE_H_

#include <cstdint>
#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "facegcn/mesh.h"
#include "facegcn/tensor.h"

namespace facegcn {

inline constexpr Index kIdentityDims = 80;
inline constexpr Index kExpressionDims = 64;
inline constexpr Index kTextureDims = 80;
inline constexpr Index kPoseDims = 6;
inline constexpr Index kLightingDims = 27;
inline constexpr Index kCoefficientDims =
    kIdentityDims + kExpressionDims + kTextureDims + kPoseDims + kLightingDims;

struct BasisDims {
  Index identity = kIdentityDims;
  Index expression = kExpressionDims;
  Index texture = kTextureDims;

  bool operator==(const BasisDims&) const = default;
};

// Linear face model. Per-vertex quantities are vectorized vertex-major:
// entry 3 * i + c holds coordinate (or channel) c of vertex i, so a 3n vector
// and an n x 3 row-major matrix share the same memory order.
class MorphableModel {
 public:
  MorphableModel() = default;
  MorphableModel(MeshTopology topology, Positions shape_mean, Positions texture_mean,
                 Eigen::MatrixXd identity_basis, Eigen::MatrixXd expression_basis,
                 Eigen::MatrixXd texture_basis);

  Index vertex_count() const { return topology_.vertex_count(); }
  BasisDims dims() const;
  const MeshTopology& topology() const { return topology_; }
  const Positions& shape_mean() const { return shape_mean_; }
  const Positions& texture_mean() const { return texture_mean_; }
  const Eigen::MatrixXd& identity_basis() const { return identity_basis_; }
  const Eigen::MatrixXd& expression_basis() const { return expression_basis_; }
  const Eigen::MatrixXd& texture_basis() const { return texture_basis_; }

  // Constant tensors over the same data, shared by every forward pass.
  const ad::Tensor& shape_mean_tensor() const { return shape_mean_t_; }
  const ad::Tensor& texture_mean_tensor() const { return texture_mean_t_; }
  const ad::Tensor& identity_basis_tensor() const { return identity_basis_t_; }
  const ad::Tensor& expression_basis_tensor() const { return expression_basis_t_; }
  const ad::Tensor& texture_basis_tensor() const { return texture_basis_t_; }

  bool operator==(const MorphableModel& other) const;

 private:
  MeshTopology topology_;
  Positions shape_mean_, texture_mean_;
  Eigen::MatrixXd identity_basis_, expression_basis_, texture_basis_;
  ad::Tensor shape_mean_t_, texture_mean_t_;
  ad::Tensor identity_basis_t_, expression_basis_t_, texture_basis_t_;
};

// (identity, expression, texture, pose, lighting), flattened in that order.
struct CoefficientVector {
  Eigen::VectorXd identity, expression, texture, pose, lighting;

  static CoefficientVector zeros(const BasisDims& dims = {});
  static CoefficientVector from_flat(const Eigen::VectorXd& flat, const BasisDims& dims = {});
  Eigen::VectorXd flat() const;
  Index size() const;
};

// S = S_mean + I_base c_i + E_base c_e, as n x 3.
ad::Tensor shape_from_coeffs(const MorphableModel& model, const ad::Tensor& identity,
                             const ad::Tensor& expression);
Positions shape_from_coeffs(const MorphableModel& model, const Eigen::VectorXd& identity,
                            const Eigen::VectorXd& expression);

// T = T_mean + T_base c_t, as n x 3. Not clamped.
ad::Tensor texture_from_coeffs(const MorphableModel& model, const ad::Tensor& texture);
Positions texture_from_coeffs(const MorphableModel& model, const Eigen::VectorXd& texture);

// n x 3 <-> 3n under the vertex-major rule.
Eigen::VectorXd vectorize(const Positions& p);
Positions unvectorize(const Eigen::VectorXd& v);

// Deterministic face-like toy model on n >= 4 vertices. The surface is an
// icosphere (collapsed to exactly n vertices when n is not an icosphere
// count) squashed into a head shape with a nose; bases mix low-frequency
// Laplacian eigenvectors and have strictly decreasing column norms.
MorphableModel synth_model(std::uint64_t seed, Index n, const BasisDims& dims = {});

// Binary container, all integers uint32 and reals float64, little-endian:
//   "FACE3DMM" | version=1 | n | identity | expression | texture | triangles
//   | S_mean (n*3) | T_mean (n*3) | I_base, E_base, T_base (row-major)
//   | triangle indices (3 per triangle)
void write_model(std::ostream& os, const MorphableModel& model);
void write_model(const std::string& path, const MorphableModel& model);
MorphableModel read_model(std::istream& is);
MorphableModel read_model(const std::string& path);

}  // namespace facegcn

#endif  // FACEGCN_MORPHABLE_H_
