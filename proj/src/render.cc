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

#include "facegcn/render.h"

#include <cmath>
#include <limits>
#include <memory>

#include "facegcn/errors.h"
#include "facegcn/ops.h"

namespace facegcn::render {
namespace {

using ad::Tensor;

// SH normalization constants for bands 0..2.
constexpr double kY0 = 0.282095;
constexpr double kY1 = 0.488603;
constexpr double kY2 = 1.092548;
constexpr double kY20 = 0.315392;
constexpr double kY22 = 0.546274;

Tensor col(const Tensor& x, Index c) { return ad::slice_cols(x, c, c + 1); }

Tensor cat(std::initializer_list<Tensor> parts) {
  const std::vector<Tensor> v(parts);
  return ad::concat_cols(v);
}

Tensor pose_row(const Tensor& pose) {
  if (pose.size() != 6 || pose.rank() > 2) {
    throw ContractViolation("pose: expected 6 entries, got " + ad::shape_string(pose.shape()));
  }
  return ad::reshape(pose, {1, 6});
}

Tensor euler_rotation(const Tensor& p) {
  const Tensor a = col(p, 0), b = col(p, 1), c = col(p, 2);
  const Tensor sa = ad::sin(a), ca = ad::cos(a);
  const Tensor sb = ad::sin(b), cb = ad::cos(b);
  const Tensor sc = ad::sin(c), cc = ad::cos(c);
  using ad::add;
  using ad::mul;
  using ad::sub;
  const Tensor sbsa = mul(sb, sa), sbca = mul(sb, ca);
  const Tensor r = cat({mul(cc, cb), sub(mul(cc, sbsa), mul(sc, ca)), add(mul(cc, sbca), mul(sc, sa)),
                        mul(sc, cb), add(mul(sc, sbsa), mul(cc, ca)), sub(mul(sc, sbca), mul(cc, sa)),
                        ad::neg(sb), mul(cb, sa), mul(cb, ca)});
  return ad::reshape(r, {3, 3});
}

Tensor axis_angle_rotation(const Tensor& p) {
  const Tensor x = col(p, 0), y = col(p, 1), z = col(p, 2);
  const Tensor zero = Tensor::zeros({1, 1});
  const Tensor k = ad::reshape(
      cat({zero, ad::neg(z), y, z, zero, ad::neg(x), ad::neg(y), x, zero}), {3, 3});
  const Tensor r = ad::slice_cols(p, 0, 3);
  const Tensor theta2 = ad::sum(ad::mul(r, r));
  Tensor a, b;
  if (theta2.item() < 1e-8) {
    a = ad::add_scalar(ad::scale(theta2, -1.0 / 6.0), 1.0);
    b = ad::add_scalar(ad::scale(theta2, -1.0 / 24.0), 0.5);
  } else {
    const Tensor theta = ad::sqrt(theta2);
    const Tensor inv = ad::safe_reciprocal(theta);
    a = ad::mul(ad::sin(theta), inv);
    b = ad::mul(ad::add_scalar(ad::neg(ad::cos(theta)), 1.0), ad::mul(inv, inv));
  }
  const Tensor eye = Tensor::from_matrix(Eigen::Matrix3d::Identity());
  return ad::add(eye, ad::add(ad::mul(ad::expand(a, {3, 3}), k),
                              ad::mul(ad::expand(b, {3, 3}), ad::matmul(k, k))));
}

Eigen::Vector2d pixel_center(Index pixel, Index width) {
  return {static_cast<double>(pixel % width) + 0.5, static_cast<double>(pixel / width) + 0.5};
}

double edge(const Eigen::Vector2d& p, const Eigen::Vector2d& q, const Eigen::Vector2d& r) {
  return (q.x() - p.x()) * (r.y() - p.y()) - (q.y() - p.y()) * (r.x() - p.x());
}

Tensor edge(const Tensor& p, const Tensor& q, const Tensor& r) {
  using ad::mul;
  using ad::sub;
  return sub(mul(sub(col(q, 0), col(p, 0)), sub(col(r, 1), col(p, 1))),
             mul(sub(col(q, 1), col(p, 1)), sub(col(r, 0), col(p, 0))));
}

struct CoveredIndex {
  std::shared_ptr<const ad::IndexList> pixels;
  std::array<std::shared_ptr<const ad::IndexList>, 3> corners;
};

CoveredIndex covered_index(const RenderBuffers& buffers, std::span<const Triangle> triangles) {
  auto pixels = std::make_shared<ad::IndexList>();
  std::array<std::shared_ptr<ad::IndexList>, 3> corners;
  for (auto& c : corners) c = std::make_shared<ad::IndexList>();
  for (Index p = 0; p < static_cast<Index>(buffers.triangle_id.size()); ++p) {
    const Index t = buffers.triangle_id[static_cast<std::size_t>(p)];
    if (t < 0) continue;
    if (t >= static_cast<Index>(triangles.size())) {
      throw ContractViolation("render: triangle id " + std::to_string(t) + " out of range");
    }
    pixels->push_back(p);
    for (int k = 0; k < 3; ++k) corners[k]->push_back(triangles[static_cast<std::size_t>(t)][k]);
  }
  return {pixels, {corners[0], corners[1], corners[2]}};
}

// Barycentric blend of vertex attributes on the covered pixels, [m, C].
Tensor blend(const CoveredIndex& index, const Tensor& barycentrics, const Tensor& attributes) {
  const Index c = attributes.dim(1);
  Tensor out;
  for (int k = 0; k < 3; ++k) {
    const Tensor term = ad::mul(ad::broadcast_cols(col(barycentrics, k), c),
                                ad::gather_rows(attributes, index.corners[k]));
    out = k == 0 ? term : ad::add(out, term);
  }
  return out;
}

Tensor unit_rows(const Tensor& x) {
  return ad::mul(x, ad::broadcast_cols(ad::safe_reciprocal(ad::row_norm(x)), x.dim(1)));
}

void check_attributes(const char* op, const Tensor& a, Index rows) {
  if (a.rank() != 2 || a.dim(0) != rows) {
    throw ContractViolation(std::string(op) + ": attributes " + ad::shape_string(a.shape()) +
                            " do not have " + std::to_string(rows) + " rows");
  }
}

}  // namespace

Tensor rotation_matrix(const Tensor& pose, RotationMode mode) {
  const Tensor p = pose_row(pose);
  return mode == RotationMode::kEulerXYZ ? euler_rotation(p) : axis_angle_rotation(p);
}

Tensor pose_transform(const Tensor& positions, const Tensor& pose, RotationMode mode) {
  if (positions.rank() != 2 || positions.dim(1) != 3) {
    throw ContractViolation("pose_transform: positions " + ad::shape_string(positions.shape()) +
                            " are not [n, 3]");
  }
  const Tensor r = rotation_matrix(pose, mode);
  const Tensor t = ad::slice_cols(pose_row(pose), 3, 6);
  return ad::add(ad::matmul(positions, ad::transpose(r)),
                 ad::broadcast_rows(t, positions.dim(0)));
}

Projection project(const Tensor& camera_positions, const Camera& camera, Index width,
                   Index height) {
  const double f = camera.focal * static_cast<double>(width);
  const Tensor depth = ad::add_scalar(ad::neg(col(camera_positions, 2)), camera.distance);
  const Tensor inv = ad::safe_reciprocal(depth);
  const Tensor u = ad::add_scalar(ad::scale(ad::mul(col(camera_positions, 0), inv), f),
                                  0.5 * static_cast<double>(width));
  const Tensor v = ad::add_scalar(ad::scale(ad::mul(col(camera_positions, 1), inv), -f),
                                  0.5 * static_cast<double>(height));
  return {cat({u, v}), depth};
}

Index RenderBuffers::covered() const {
  return static_cast<Index>(mask.sum());
}

RenderBuffers rasterize(const Positions& camera_positions, std::span<const Triangle> triangles,
                        Index width, Index height, const Camera& camera) {
  if (width < 8 || height < 8) {
    throw ContractViolation("rasterize: image size must be at least 8x8");
  }
  if (!(camera.focal > 0.0)) throw ContractViolation("rasterize: focal length must be positive");
  const Index n = camera_positions.rows();
  const double f = camera.focal * static_cast<double>(width);
  std::vector<Eigen::Vector2d> screen(static_cast<std::size_t>(n));
  Eigen::VectorXd depth(n);
  for (Index i = 0; i < n; ++i) {
    depth[i] = camera.distance - camera_positions(i, 2);
    screen[static_cast<std::size_t>(i)] = {
        0.5 * static_cast<double>(width) + f * camera_positions(i, 0) / depth[i],
        0.5 * static_cast<double>(height) - f * camera_positions(i, 1) / depth[i]};
  }

  RenderBuffers buf;
  buf.height = height;
  buf.width = width;
  buf.triangle_id.assign(static_cast<std::size_t>(width * height), -1);
  buf.barycentric = decltype(buf.barycentric)::Zero(width * height, 3);
  buf.mask = Mask::Zero(width * height);
  std::vector<double> zbuf(static_cast<std::size_t>(width * height),
                           std::numeric_limits<double>::infinity());

  for (Index t = 0; t < static_cast<Index>(triangles.size()); ++t) {
    const Triangle& tri = triangles[static_cast<std::size_t>(t)];
    for (Index v : tri) {
      if (v < 0 || v >= n) throw ContractViolation("rasterize: triangle index out of range");
    }
    if (depth[tri[0]] < camera.near || depth[tri[1]] < camera.near || depth[tri[2]] < camera.near) {
      continue;
    }
    const Eigen::Vector2d& a = screen[static_cast<std::size_t>(tri[0])];
    const Eigen::Vector2d& b = screen[static_cast<std::size_t>(tri[1])];
    const Eigen::Vector2d& c = screen[static_cast<std::size_t>(tri[2])];
    const double area = edge(a, b, c);
    if (std::abs(area) < 1e-12) continue;
    const double lo_u = std::min({a.x(), b.x(), c.x()}), hi_u = std::max({a.x(), b.x(), c.x()});
    const double lo_v = std::min({a.y(), b.y(), c.y()}), hi_v = std::max({a.y(), b.y(), c.y()});
    const Index j0 = std::max<Index>(0, static_cast<Index>(std::ceil(lo_u - 0.5)));
    const Index j1 = std::min<Index>(width - 1, static_cast<Index>(std::floor(hi_u - 0.5)));
    const Index i0 = std::max<Index>(0, static_cast<Index>(std::ceil(lo_v - 0.5)));
    const Index i1 = std::min<Index>(height - 1, static_cast<Index>(std::floor(hi_v - 0.5)));
    for (Index i = i0; i <= i1; ++i) {
      for (Index j = j0; j <= j1; ++j) {
        const Index pixel = i * width + j;
        const Eigen::Vector2d p = pixel_center(pixel, width);
        const double w0 = edge(b, c, p) / area;
        const double w1 = edge(c, a, p) / area;
        const double w2 = edge(a, b, p) / area;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        const double z = w0 * depth[tri[0]] + w1 * depth[tri[1]] + w2 * depth[tri[2]];
        if (z >= zbuf[static_cast<std::size_t>(pixel)]) continue;
        zbuf[static_cast<std::size_t>(pixel)] = z;
        buf.triangle_id[static_cast<std::size_t>(pixel)] = t;
        buf.barycentric.row(pixel) << w0, w1, w2;
        buf.mask[pixel] = 1.0;
      }
    }
  }
  return buf;
}

Tensor pixel_barycentrics(const RenderBuffers& buffers, std::span<const Triangle> triangles,
                          const Tensor& screen) {
  const CoveredIndex index = covered_index(buffers, triangles);
  const Index m = static_cast<Index>(index.pixels->size());
  if (m == 0) return Tensor::zeros({0, 3});
  Eigen::VectorXd centers(2 * m);
  for (Index r = 0; r < m; ++r) {
    centers.segment<2>(2 * r) = pixel_center((*index.pixels)[static_cast<std::size_t>(r)], buffers.width);
  }
  const Tensor p({m, 2}, std::move(centers));
  const Tensor a = ad::gather_rows(screen, index.corners[0]);
  const Tensor b = ad::gather_rows(screen, index.corners[1]);
  const Tensor c = ad::gather_rows(screen, index.corners[2]);
  const Tensor inv_area = ad::safe_reciprocal(edge(a, b, c));
  return cat({ad::mul(edge(b, c, p), inv_area), ad::mul(edge(c, a, p), inv_area),
              ad::mul(edge(a, b, p), inv_area)});
}

Tensor interpolate(const RenderBuffers& buffers, std::span<const Triangle> triangles,
                   const Tensor& barycentrics, const Tensor& attributes) {
  if (attributes.rank() != 2) {
    throw ContractViolation("interpolate: attributes " + ad::shape_string(attributes.shape()) +
                            " are not [n, C]");
  }
  const Index c = attributes.dim(1);
  const CoveredIndex index = covered_index(buffers, triangles);
  const Index pixels = buffers.width * buffers.height;
  if (index.pixels->empty()) return Tensor::zeros({buffers.height, buffers.width, c});
  const Tensor values = blend(index, barycentrics, attributes);
  return ad::reshape(ad::scatter_rows(values, index.pixels, pixels), {buffers.height, buffers.width, c});
}

Tensor sh_basis(const Tensor& normals) {
  if (normals.rank() != 2 || normals.dim(1) != 3) {
    throw ContractViolation("sh_basis: normals " + ad::shape_string(normals.shape()) +
                            " are not [m, 3]");
  }
  const Tensor x = col(normals, 0), y = col(normals, 1), z = col(normals, 2);
  const Tensor one = Tensor::full({normals.dim(0), 1}, kY0);
  return cat({one, ad::scale(y, kY1), ad::scale(z, kY1), ad::scale(x, kY1),
              ad::scale(ad::mul(x, y), kY2), ad::scale(ad::mul(y, z), kY2),
              ad::scale(ad::add_scalar(ad::scale(ad::mul(z, z), 3.0), -1.0), kY20),
              ad::scale(ad::mul(x, z), kY2),
              ad::scale(ad::sub(ad::mul(x, x), ad::mul(y, y)), kY22)});
}

Tensor sh_shade(const Tensor& albedo, const Tensor& normals, const Tensor& lighting) {
  if (lighting.size() != 27) {
    throw ContractViolation("sh_shade: lighting has " + std::to_string(lighting.size()) +
                            " entries, expected 27");
  }
  if (albedo.rank() != 2 || albedo.dim(1) != 3 || albedo.shape() != normals.shape()) {
    throw ContractViolation("sh_shade: albedo " + ad::shape_string(albedo.shape()) +
                            " and normals " + ad::shape_string(normals.shape()) +
                            " must both be [m, 3]");
  }
  const Tensor shading =
      ad::matmul(sh_basis(normals), ad::transpose(ad::reshape(lighting, {3, 9})));
  return ad::mul(albedo, shading);
}

namespace {

// Normals, barycentrics and pixel normals from the view's camera positions
// and coverage.
void attach_geometry(PreparedView& view, const MeshTopology& topology, const Camera& camera) {
  const RenderBuffers& buf = view.buffers;
  view.vertex_normals = vertex_normals(view.camera_positions, topology).normals;
  const Projection proj = project(view.camera_positions, camera, buf.width, buf.height);
  view.barycentrics = pixel_barycentrics(buf, view.triangles, proj.screen);
  const CoveredIndex index = covered_index(buf, view.triangles);
  view.pixel_normals = unit_rows(blend(index, view.barycentrics, view.vertex_normals));
}

}  // namespace

PreparedView prepare_view(const Tensor& shape, const MeshTopology& topology, const Tensor& pose,
                          const Camera& camera, Index width, Index height, RotationMode mode) {
  check_attributes("prepare_view", shape, topology.vertex_count());
  PreparedView view;
  view.triangles = topology.triangles();
  view.camera_positions = pose_transform(shape, pose, mode);
  const Index n = topology.vertex_count();
  Positions cam(n, 3);
  if (n > 0) cam = Eigen::Map<const Positions>(view.camera_positions.values().data(), n, 3);
  view.buffers = rasterize(cam, view.triangles, width, height, camera);
  if (view.triangles.empty() || view.buffers.covered() == 0) {
    view.vertex_normals = Tensor::zeros({n, 3});
    view.barycentrics = Tensor::zeros({0, 3});
    view.pixel_normals = Tensor::zeros({0, 3});
    return view;
  }
  attach_geometry(view, topology, camera);
  return view;
}

PreparedView repose_view(const PreparedView& frozen, const Tensor& shape,
                         const MeshTopology& topology, const Tensor& pose, const Camera& camera,
                         RotationMode mode) {
  check_attributes("repose_view", shape, topology.vertex_count());
  if (topology.triangles() != frozen.triangles) {
    throw ContractViolation("repose_view: topology differs from the frozen view");
  }
  PreparedView view = frozen;
  view.camera_positions = pose_transform(shape, pose, mode);
  if (view.triangles.empty() || view.buffers.covered() == 0) return view;
  attach_geometry(view, topology, camera);
  return view;
}

RenderOutput shade_view(const PreparedView& view, const Tensor& albedo, const Tensor& lighting,
                        ShadeMode mode) {
  check_attributes("shade_view", albedo, view.camera_positions.dim(0));
  if (albedo.dim(1) != 3) throw ContractViolation("shade_view: albedo must be [n, 3]");
  const RenderBuffers& buf = view.buffers;
  const CoveredIndex index = covered_index(buf, view.triangles);
  if (index.pixels->empty()) return {Tensor::zeros({buf.height, buf.width, 3}), buf};
  Tensor color = blend(index, view.barycentrics, albedo);
  if (mode == ShadeMode::kShaded) color = sh_shade(color, view.pixel_normals, lighting);
  const Tensor image = ad::reshape(ad::scatter_rows(color, index.pixels, buf.width * buf.height),
                                   {buf.height, buf.width, 3});
  return {image, buf};
}

RenderOutput render_image(const Tensor& shape, const Tensor& albedo, const MeshTopology& topology,
                          const Tensor& pose, const Tensor& lighting, const Camera& camera,
                          Index width, Index height, ShadeMode mode, RotationMode rotation) {
  const PreparedView view = prepare_view(shape, topology, pose, camera, width, height, rotation);
  return shade_view(view, albedo, lighting, mode);
}

ProjectedColors project_vertex_colors(const Tensor& image, const Tensor& shape,
                                      const MeshTopology& topology, const Tensor& pose,
                                      const Camera& camera, RotationMode mode) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw ContractViolation("project_vertex_colors: image " + ad::shape_string(image.shape()) +
                            " is not [H, W, 3]");
  }
  check_attributes("project_vertex_colors", shape, topology.vertex_count());
  ad::NoGradScope no_grad;
  const Index h = image.dim(0), w = image.dim(1), n = topology.vertex_count();
  const Tensor cam_t = pose_transform(shape, pose, mode);
  const Positions cam = Eigen::Map<const Positions>(cam_t.values().data(), n, 3);
  const Positions normals = vertex_normals(cam, std::span<const Triangle>(topology.triangles()));
  const double f = camera.focal * static_cast<double>(w);
  const Eigen::Vector3d eye(0, 0, camera.distance);

  ProjectedColors out;
  out.colors = Positions::Zero(n, 3);
  out.valid.assign(static_cast<std::size_t>(n), false);
  const double* px = image.values().data();
  for (Index i = 0; i < n; ++i) {
    const Eigen::Vector3d p = cam.row(i).transpose();
    const double depth = camera.distance - p.z();
    if (depth < camera.near) continue;
    if (normals.row(i).dot(eye - p) <= 0.0) continue;
    // Continuous pixel-index coordinates: pixel (r, c) sits at (c, r).
    const double x = 0.5 * static_cast<double>(w) + f * p.x() / depth - 0.5;
    const double y = 0.5 * static_cast<double>(h) - f * p.y() / depth - 0.5;
    if (x < 0.0 || y < 0.0 || x > static_cast<double>(w - 1) || y > static_cast<double>(h - 1)) {
      continue;
    }
    const Index x0 = static_cast<Index>(std::floor(x)), y0 = static_cast<Index>(std::floor(y));
    const Index x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    const double fx = x - static_cast<double>(x0), fy = y - static_cast<double>(y0);
    for (int c = 0; c < 3; ++c) {
      const auto at = [&](Index r, Index q) { return px[(r * w + q) * 3 + c]; };
      out.colors(i, c) = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
                         fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
    }
    out.valid[static_cast<std::size_t>(i)] = true;
  }
  return out;
}

}  // namespace facegcn::render
