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

#ifndef FACEGCN_RENDER_H_
#define FACEGCN_RENDER_H_

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "facegcn/mesh.h"
#include "facegcn/tensor.h"

namespace facegcn::render {

enum class RotationMode { kEulerXYZ, kAxisAngle };

// Pinhole camera on the +z axis looking towards the origin (down -z), y up.
// Pixel (i, j) has its center at screen coordinates (j + 0.5, i + 0.5); a
// camera-space point projects to u = W/2 + f x / d, v = H/2 - f y / d with
// depth d = distance - z and f = focal * W.
struct Camera {
  double focal = 4.6875;
  double distance = 10.0;
  double near = 0.1;
};

// 3x3 rotation from the first three pose entries. Euler angles (a, b, c)
// give Rz(c) Ry(b) Rx(a); axis-angle uses Rodrigues' formula.
ad::Tensor rotation_matrix(const ad::Tensor& pose, RotationMode mode = RotationMode::kEulerXYZ);

// x R^T + t for each vertex row; pose = (rotation[3], translation[3]).
ad::Tensor pose_transform(const ad::Tensor& positions, const ad::Tensor& pose,
                          RotationMode mode = RotationMode::kEulerXYZ);

// Screen coordinates [n, 2] (u, v) and depths [n, 1] of camera-space points.
struct Projection {
  ad::Tensor screen;
  ad::Tensor depth;
};
Projection project(const ad::Tensor& camera_positions, const Camera& camera, Index width,
                   Index height);

// Binary coverage mask, one entry per pixel in row-major order, 0 or 1.
using Mask = Eigen::VectorXd;

struct RenderBuffers {
  Index height = 0, width = 0;
  std::vector<Index> triangle_id;  // -1 = background
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> barycentric;
  Mask mask;

  Index covered() const;
};

// Z-buffered coverage of camera-space triangles. Triangles with a vertex
// closer than the near plane are skipped. Barycentrics are screen-space.
RenderBuffers rasterize(const Positions& camera_positions, std::span<const Triangle> triangles,
                        Index width, Index height, const Camera& camera);

// Differentiable barycentrics [covered, 3] of the covered pixels in row-major
// pixel order, recomputed from projected screen coordinates.
ad::Tensor pixel_barycentrics(const RenderBuffers& buffers, std::span<const Triangle> triangles,
                              const ad::Tensor& screen);

// Per-pixel sum of barycentric-weighted vertex attributes [n, C] -> [H, W, C],
// zero on background.
ad::Tensor interpolate(const RenderBuffers& buffers, std::span<const Triangle> triangles,
                       const ad::Tensor& barycentrics, const ad::Tensor& attributes);

// Real spherical harmonics up to band 2 at unit directions [m, 3] -> [m, 9].
ad::Tensor sh_basis(const ad::Tensor& normals);

// albedo_c * sum_b l[c * 9 + b] Y_b(normal), rows of [m, 3] inputs.
ad::Tensor sh_shade(const ad::Tensor& albedo, const ad::Tensor& normals, const ad::Tensor& lighting);

enum class ShadeMode { kShaded, kAlbedoOnly };

struct RenderOutput {
  ad::Tensor image;  // [H, W, 3], background 0
  RenderBuffers buffers;
};

// Geometry pass for a fixed shape: camera-space positions, rasterization and
// per-pixel barycentrics/normals, reusable across texture and lighting changes.
struct PreparedView {
  ad::Tensor camera_positions;  // [n, 3]
  ad::Tensor vertex_normals;    // [n, 3]
  RenderBuffers buffers;
  ad::Tensor barycentrics;      // [covered, 3]
  ad::Tensor pixel_normals;     // [covered, 3], unit length
  std::vector<Triangle> triangles;
};

PreparedView prepare_view(const ad::Tensor& shape, const MeshTopology& topology,
                          const ad::Tensor& pose, const Camera& camera, Index width,
                          Index height, RotationMode mode = RotationMode::kEulerXYZ);

// Geometry of `frozen` re-derived for a new shape or pose with the coverage
// (triangle ids) held fixed, so interior pixels stay differentiable in pose.
PreparedView repose_view(const PreparedView& frozen, const ad::Tensor& shape,
                         const MeshTopology& topology, const ad::Tensor& pose,
                         const Camera& camera, RotationMode mode = RotationMode::kEulerXYZ);

RenderOutput shade_view(const PreparedView& view, const ad::Tensor& albedo,
                        const ad::Tensor& lighting, ShadeMode mode = ShadeMode::kShaded);

// pose_transform -> rasterize -> interpolate albedo and normals -> sh_shade.
RenderOutput render_image(const ad::Tensor& shape, const ad::Tensor& albedo,
                          const MeshTopology& topology, const ad::Tensor& pose,
                          const ad::Tensor& lighting, const Camera& camera, Index width,
                          Index height, ShadeMode mode = ShadeMode::kShaded,
                          RotationMode rotation = RotationMode::kEulerXYZ);

struct ProjectedColors {
  Positions colors;         // [n, 3], zero where invalid
  std::vector<bool> valid;  // false for back-facing or out-of-frame vertices
};

// Bilinear samples of an [H, W, 3] image at each vertex's projection.
ProjectedColors project_vertex_colors(const ad::Tensor& image, const ad::Tensor& shape,
                                      const MeshTopology& topology, const ad::Tensor& pose,
                                      const Camera& camera,
                                      RotationMode mode = RotationMode::kEulerXYZ);

}  // namespace facegcn::render

#endif  // FACEGCN_RENDER_H_
