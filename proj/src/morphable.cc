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

#include "facegcn/morphable.h"

#include <cmath>
#include <fstream>
#include <random>

#include <Eigen/Eigenvalues>

#include "facegcn/binio.h"
#include "facegcn/errors.h"
#include "facegcn/ops.h"
#include "facegcn/sampling.h"

namespace facegcn {
namespace {

constexpr std::string_view kMagic = "FACE3DMM";
constexpr std::uint32_t kVersion = 1;

ad::Tensor constant(const Eigen::MatrixXd& m) {
  return ad::Tensor::from_matrix(m);
}

ad::Tensor constant(const Positions& p) {
  return ad::Tensor({p.rows(), 3}, Eigen::Map<const Eigen::VectorXd>(p.data(), p.size()));
}

void check_length(const char* op, const char* what, Index got, Index want) {
  if (got != want) {
    throw ContractViolation(std::string(op) + ": " + what + " has " + std::to_string(got) +
                            " entries, expected " + std::to_string(want));
  }
}

Index tensor_length(const ad::Tensor& t) {
  if (t.rank() > 2 || (t.rank() == 2 && t.dim(1) != 1)) return -1;
  return t.size();
}

ad::Tensor basis_times(const ad::Tensor& basis, const ad::Tensor& coeffs) {
  return ad::matmul(basis, ad::reshape(coeffs, {coeffs.size(), 1}));
}

}  // namespace

MorphableModel::MorphableModel(MeshTopology topology, Positions shape_mean,
                               Positions texture_mean, Eigen::MatrixXd identity_basis,
                               Eigen::MatrixXd expression_basis, Eigen::MatrixXd texture_basis)
    : topology_(std::move(topology)),
      shape_mean_(std::move(shape_mean)),
      texture_mean_(std::move(texture_mean)),
      identity_basis_(std::move(identity_basis)),
      expression_basis_(std::move(expression_basis)),
      texture_basis_(std::move(texture_basis)) {
  const Index n = topology_.vertex_count();
  if (shape_mean_.rows() != n || texture_mean_.rows() != n) {
    throw ContractViolation("MorphableModel: mean shape/texture rows do not match " +
                            std::to_string(n) + " vertices");
  }
  for (const Eigen::MatrixXd* b : {&identity_basis_, &expression_basis_, &texture_basis_}) {
    if (b->rows() != 3 * n) {
      throw ContractViolation("MorphableModel: basis has " + std::to_string(b->rows()) +
                              " rows, expected " + std::to_string(3 * n));
    }
  }
  if ((texture_mean_.array() < 0.0).any() || (texture_mean_.array() > 1.0).any()) {
    throw ContractViolation("MorphableModel: mean texture leaves [0, 1]");
  }
  shape_mean_t_ = constant(shape_mean_);
  texture_mean_t_ = constant(texture_mean_);
  identity_basis_t_ = constant(identity_basis_);
  expression_basis_t_ = constant(expression_basis_);
  texture_basis_t_ = constant(texture_basis_);
}

BasisDims MorphableModel::dims() const {
  return {identity_basis_.cols(), expression_basis_.cols(), texture_basis_.cols()};
}

bool MorphableModel::operator==(const MorphableModel& other) const {
  return topology_.vertex_count() == other.topology_.vertex_count() &&
         topology_.triangles() == other.topology_.triangles() &&
         shape_mean_ == other.shape_mean_ && texture_mean_ == other.texture_mean_ &&
         identity_basis_ == other.identity_basis_ &&
         expression_basis_ == other.expression_basis_ && texture_basis_ == other.texture_basis_;
}

CoefficientVector CoefficientVector::zeros(const BasisDims& dims) {
  return {Eigen::VectorXd::Zero(dims.identity), Eigen::VectorXd::Zero(dims.expression),
          Eigen::VectorXd::Zero(dims.texture), Eigen::VectorXd::Zero(kPoseDims),
          Eigen::VectorXd::Zero(kLightingDims)};
}

CoefficientVector CoefficientVector::from_flat(const Eigen::VectorXd& flat,
                                               const BasisDims& dims) {
  const Index want = dims.identity + dims.expression + dims.texture + kPoseDims + kLightingDims;
  check_length("CoefficientVector", "flat vector", flat.size(), want);
  CoefficientVector c;
  Index at = 0;
  const auto take = [&](Index len) {
    Eigen::VectorXd part = flat.segment(at, len);
    at += len;
    return part;
  };
  c.identity = take(dims.identity);
  c.expression = take(dims.expression);
  c.texture = take(dims.texture);
  c.pose = take(kPoseDims);
  c.lighting = take(kLightingDims);
  return c;
}

Eigen::VectorXd CoefficientVector::flat() const {
  Eigen::VectorXd out(size());
  out << identity, expression, texture, pose, lighting;
  return out;
}

Index CoefficientVector::size() const {
  return identity.size() + expression.size() + texture.size() + pose.size() + lighting.size();
}

ad::Tensor shape_from_coeffs(const MorphableModel& model, const ad::Tensor& identity,
                             const ad::Tensor& expression) {
  const BasisDims dims = model.dims();
  check_length("shape_from_coeffs", "identity coefficients", tensor_length(identity),
               dims.identity);
  check_length("shape_from_coeffs", "expression coefficients", tensor_length(expression),
               dims.expression);
  const ad::Tensor offset = ad::add(basis_times(model.identity_basis_tensor(), identity),
                                    basis_times(model.expression_basis_tensor(), expression));
  return ad::add(model.shape_mean_tensor(), ad::reshape(offset, {model.vertex_count(), 3}));
}

Positions shape_from_coeffs(const MorphableModel& model, const Eigen::VectorXd& identity,
                            const Eigen::VectorXd& expression) {
  const BasisDims dims = model.dims();
  check_length("shape_from_coeffs", "identity coefficients", identity.size(), dims.identity);
  check_length("shape_from_coeffs", "expression coefficients", expression.size(),
               dims.expression);
  return model.shape_mean() +
         unvectorize(model.identity_basis() * identity + model.expression_basis() * expression);
}

ad::Tensor texture_from_coeffs(const MorphableModel& model, const ad::Tensor& texture) {
  check_length("texture_from_coeffs", "texture coefficients", tensor_length(texture),
               model.dims().texture);
  return ad::add(model.texture_mean_tensor(),
                 ad::reshape(basis_times(model.texture_basis_tensor(), texture),
                             {model.vertex_count(), 3}));
}

Positions texture_from_coeffs(const MorphableModel& model, const Eigen::VectorXd& texture) {
  check_length("texture_from_coeffs", "texture coefficients", texture.size(),
               model.dims().texture);
  return model.texture_mean() + unvectorize(model.texture_basis() * texture);
}

Eigen::VectorXd vectorize(const Positions& p) {
  return Eigen::Map<const Eigen::VectorXd>(p.data(), p.size());
}

Positions unvectorize(const Eigen::VectorXd& v) {
  if (v.size() % 3 != 0) {
    throw ContractViolation("unvectorize: length " + std::to_string(v.size()) +
                            " is not a multiple of 3");
  }
  return Eigen::Map<const Positions>(v.data(), v.size() / 3, 3);
}

namespace {

Positions face_surface(const Positions& sphere) {
  Positions p(sphere.rows(), 3);
  for (Index i = 0; i < sphere.rows(); ++i) {
    const double x = sphere(i, 0), y = sphere(i, 1), z = sphere(i, 2);
    const double front = std::max(z, 0.0);
    const double nose = 0.3 * front * std::exp(-(x * x + (y + 0.05) * (y + 0.05)) / 0.02);
    const double brow = 0.06 * front * std::exp(-((y - 0.3) * (y - 0.3)) / 0.01);
    const double chin = y < 0 ? 1.0 - 0.15 * y * y : 1.0;
    p(i, 0) = 0.75 * x * chin;
    p(i, 1) = y;
    p(i, 2) = 0.8 * z + nose + brow;
  }
  return p;
}

Positions face_albedo(const Positions& sphere, const Eigen::MatrixXd& modes, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd field = Eigen::VectorXd::Zero(sphere.rows());
  for (Index k = 0; k < modes.cols(); ++k) field += normal(rng) / (1.0 + k) * modes.col(k);
  if (field.size() > 0 && field.cwiseAbs().maxCoeff() > 0) field /= field.cwiseAbs().maxCoeff();

  const Eigen::RowVector3d skin(0.78, 0.58, 0.48);
  const Eigen::RowVector3d lips(0.62, 0.32, 0.32);
  const Eigen::RowVector3d eyes(0.3, 0.25, 0.22);
  Positions t(sphere.rows(), 3);
  for (Index i = 0; i < sphere.rows(); ++i) {
    const double x = sphere(i, 0), y = sphere(i, 1);
    const double front = std::max(sphere(i, 2), 0.0);
    const auto blob = [&](double cx, double cy, double r2) {
      return front * std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / r2);
    };
    const double eye = std::min(1.0, blob(-0.3, 0.22, 0.01) + blob(0.3, 0.22, 0.01));
    const double mouth = blob(0.0, -0.45, 0.015);
    Eigen::RowVector3d c = skin + 0.08 * field[i] * Eigen::RowVector3d(1.0, 0.9, 0.8);
    c = (1 - eye) * c + eye * eyes;
    c = (1 - mouth) * c + mouth * lips;
    t.row(i) = c.cwiseMax(0.2).cwiseMin(0.9);
  }
  return t;
}

// Columns of mixed Laplacian modes with norms leading * 0.9^j.
Eigen::MatrixXd smooth_basis(const Eigen::MatrixXd& modes, Index columns, double leading,
                             std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  const Index n = modes.rows();
  Eigen::MatrixXd basis(3 * n, columns);
  for (Index j = 0; j < columns; ++j) {
    Eigen::VectorXd col;
    do {
      Eigen::MatrixXd mix(modes.cols(), 3);
      for (Index k = 0; k < modes.cols(); ++k) {
        for (int c = 0; c < 3; ++c) mix(k, c) = normal(rng) / (1.0 + 0.25 * k);
      }
      const Eigen::MatrixXd field = modes * mix;  // n x 3
      col.resize(3 * n);
      for (Index i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) col[3 * i + c] = field(i, c);
      }
    } while (col.norm() == 0.0);
    basis.col(j) = col * (leading * std::pow(0.9, static_cast<double>(j)) / col.norm());
  }
  return basis;
}

double leading_norm(double rms, Index n) {
  // Sum over j of 0.81^j for an unbounded number of columns.
  const double total = 1.0 / (1.0 - 0.81);
  return rms * std::sqrt(3.0 * static_cast<double>(n) / total);
}

}  // namespace

MorphableModel synth_model(std::uint64_t seed, Index n, const BasisDims& dims) {
  if (n < 4) throw ContractViolation("synth_model: need at least 4 vertices, got " + std::to_string(n));
  int level = 0;
  while (10 * (Index(1) << (2 * level)) + 2 < n) ++level;
  TriangleMesh sphere = make_icosphere(level);
  Positions surface = face_surface(sphere.positions);
  Positions unit = sphere.positions;
  MeshTopology topology = sphere.topology;
  if (topology.vertex_count() != n) {
    const SamplingOperators ops = build_sampling_to_count(topology, surface, n);
    topology = ops.coarse_topology;
    surface = ops.coarse_positions;
    Positions kept(n, 3);
    for (Index j = 0; j < n; ++j) kept.row(j) = unit.row(ops.kept[j]);
    unit = std::move(kept);
  }

  const Eigen::MatrixXd lap = normalized_laplacian(topology.adjacency()).to_dense();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lap);
  const Index mode_count = std::min<Index>(n - 1, 24);
  const Eigen::MatrixXd modes = eig.eigenvectors().middleCols(1, mode_count);

  std::mt19937_64 rng(seed);
  Positions albedo = face_albedo(unit, modes, rng);
  Eigen::MatrixXd identity = smooth_basis(modes, dims.identity, leading_norm(0.06, n), rng);
  Eigen::MatrixXd expression = smooth_basis(modes, dims.expression, leading_norm(0.03, n), rng);
  Eigen::MatrixXd texture = smooth_basis(modes, dims.texture, leading_norm(0.04, n), rng);
  return MorphableModel(std::move(topology), std::move(surface), std::move(albedo),
                        std::move(identity), std::move(expression), std::move(texture));
}

void write_model(std::ostream& os, const MorphableModel& model) {
  binio::Writer w(os);
  const BasisDims dims = model.dims();
  w.magic(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(model.vertex_count()));
  w.u32(static_cast<std::uint32_t>(dims.identity));
  w.u32(static_cast<std::uint32_t>(dims.expression));
  w.u32(static_cast<std::uint32_t>(dims.texture));
  w.u32(static_cast<std::uint32_t>(model.topology().triangles().size()));
  w.f64s(model.shape_mean().reshaped<Eigen::RowMajor>());
  w.f64s(model.texture_mean().reshaped<Eigen::RowMajor>());
  for (const Eigen::MatrixXd* b :
       {&model.identity_basis(), &model.expression_basis(), &model.texture_basis()}) {
    w.f64s(b->reshaped<Eigen::RowMajor>());
  }
  for (const Triangle& t : model.topology().triangles()) {
    for (Index v : t) w.u32(static_cast<std::uint32_t>(v));
  }
  if (!os) throw std::runtime_error("write_model: stream write failed");
}

void write_model(const std::string& path, const MorphableModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_model: cannot open " + path);
  write_model(out, model);
}

MorphableModel read_model(std::istream& is) {
  binio::Reader r(is);
  r.expect_magic(kMagic);
  const std::size_t version_at = r.offset();
  if (r.u32("version") != kVersion) throw ParseError("unsupported model version", version_at);
  const auto bounded = [&](const char* what, std::uint32_t limit) {
    const std::size_t at = r.offset();
    const std::uint32_t v = r.u32(what);
    if (v > limit) throw ParseError(std::string(what) + " out of range", at);
    return static_cast<Index>(v);
  };
  const std::size_t header_at = r.offset();
  const Index n = bounded("vertex count", 10'000'000);
  if (n < 3) throw ParseError("model needs at least 3 vertices", header_at);
  const Index id = bounded("identity dims", 4096);
  const Index ex = bounded("expression dims", 4096);
  const Index tx = bounded("texture dims", 4096);
  const Index tri_count = bounded("triangle count", 100'000'000);

  Positions shape(n, 3), texture(n, 3);
  Eigen::MatrixXd ib(3 * n, id), eb(3 * n, ex), tb(3 * n, tx);
  for (auto* m : {&shape, &texture}) {
    auto view = m->reshaped<Eigen::RowMajor>();
    r.f64s(view, "mean");
  }
  for (Eigen::MatrixXd* b : {&ib, &eb, &tb}) {
    auto view = b->reshaped<Eigen::RowMajor>();
    r.f64s(view, "basis");
  }
  std::vector<Triangle> tris(static_cast<std::size_t>(tri_count));
  for (Triangle& t : tris) {
    for (Index& v : t) {
      const std::size_t at = r.offset();
      v = r.u32("triangle index");
      if (v >= n) throw ParseError("triangle index out of range", at);
    }
  }
  if ((texture.array() < 0.0).any() || (texture.array() > 1.0).any()) {
    throw ParseError("mean texture leaves [0, 1]", header_at);
  }
  return MorphableModel(MeshTopology(n, std::move(tris)), std::move(shape), std::move(texture),
                        std::move(ib), std::move(eb), std::move(tb));
}

MorphableModel read_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_model: cannot open " + path);
  return read_model(in);
}

}  // namespace facegcn
