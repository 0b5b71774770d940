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

#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "facegcn/errors.h"
#include "facegcn/morphable.h"
#include "facegcn/ops.h"

namespace facegcn {
namespace {

const MorphableModel& model162() {
  static const MorphableModel m = synth_model(42, 162);
  return m;
}

Eigen::VectorXd random_vector(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

TEST(Coefficients, LayoutHas257Entries) {
  EXPECT_EQ(kCoefficientDims, 257);
  const CoefficientVector c = CoefficientVector::zeros();
  EXPECT_EQ(c.size(), 257);
  Eigen::VectorXd flat = Eigen::VectorXd::LinSpaced(257, 0, 256);
  const CoefficientVector back = CoefficientVector::from_flat(flat);
  EXPECT_EQ(back.identity[0], 0);
  EXPECT_EQ(back.expression[0], 80);
  EXPECT_EQ(back.texture[0], 144);
  EXPECT_EQ(back.pose[0], 224);
  EXPECT_EQ(back.lighting[0], 230);
  EXPECT_EQ(back.flat(), flat);
  EXPECT_THROW(CoefficientVector::from_flat(Eigen::VectorXd::Zero(256)), ContractViolation);
}

TEST(Shape, ZeroCoefficientsGiveMean) {
  const auto& m = model162();
  EXPECT_EQ(shape_from_coeffs(m, Eigen::VectorXd::Zero(80), Eigen::VectorXd::Zero(64)),
            m.shape_mean());
  const ad::Tensor s = shape_from_coeffs(m, ad::Tensor::zeros({80}), ad::Tensor::zeros({64}));
  EXPECT_EQ(s.shape(), (ad::Shape{162, 3}));
  EXPECT_EQ(s.matrix(), m.shape_mean());
}

TEST(Shape, UnitCoefficientAddsFirstColumn) {
  const auto& m = model162();
  Eigen::VectorXd ci = Eigen::VectorXd::Zero(80);
  ci[0] = 1;
  const Positions s = shape_from_coeffs(m, ci, Eigen::VectorXd::Zero(64));
  for (Index i = 0; i < 162; ++i) {
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(s(i, c), m.shape_mean()(i, c) + m.identity_basis()(3 * i + c, 0));
    }
  }
}

TEST(Shape, IsAffineInCoefficients) {
  const auto& m = model162();
  std::mt19937_64 rng(1);
  const Eigen::VectorXd a1 = random_vector(80, rng), a2 = random_vector(64, rng);
  const Eigen::VectorXd b1 = random_vector(80, rng), b2 = random_vector(64, rng);
  const Positions lhs = shape_from_coeffs(m, Eigen::VectorXd(a1 + b1), Eigen::VectorXd(a2 + b2));
  const Positions rhs = shape_from_coeffs(m, a1, a2) + shape_from_coeffs(m, b1, b2) - m.shape_mean();
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Shape, LengthMismatchIsContractViolation) {
  const auto& m = model162();
  EXPECT_THROW(shape_from_coeffs(m, Eigen::VectorXd::Zero(79), Eigen::VectorXd::Zero(64)),
               ContractViolation);
  EXPECT_THROW(shape_from_coeffs(m, ad::Tensor::zeros({80}), ad::Tensor::zeros({65})),
               ContractViolation);
}

TEST(Shape, JacobianIsTheIdentityBasis) {
  const auto& m = model162();
  const ad::Tensor ci = ad::Tensor::parameter({80}, Eigen::VectorXd::Zero(80));
  const ad::Tensor ce = ad::Tensor::zeros({64});
  ad::Tape tape;
  ad::Tensor s;
  {
    ad::TapeScope scope(tape);
    s = shape_from_coeffs(m, ci, ce);
  }
  // Row r of the Jacobian is the gradient of the r-th output entry.
  for (Index r : {Index(0), Index(7), Index(3 * 161 + 2)}) {
    ad::Tape t2;
    ad::Tensor pick;
    {
      ad::TapeScope scope(t2);
      const ad::Tensor e = ad::Tensor({162, 3}, Eigen::VectorXd::Unit(486, r));
      pick = ad::sum(ad::mul(shape_from_coeffs(m, ci, ce), e));
    }
    const Eigen::VectorXd row = ad::backward(t2, pick)[ci].values();
    EXPECT_EQ(row.transpose(), m.identity_basis().row(r));
  }
}

TEST(Texture, ZeroAndUnitCoefficients) {
  const auto& m = model162();
  EXPECT_EQ(texture_from_coeffs(m, Eigen::VectorXd::Zero(80)), m.texture_mean());
  Eigen::VectorXd ct = Eigen::VectorXd::Zero(80);
  ct[5] = 1;
  const Positions t = texture_from_coeffs(m, ct);
  EXPECT_EQ(vectorize(t), vectorize(m.texture_mean()) + m.texture_basis().col(5));
}

TEST(Texture, MatchesDenseProductOracle) {
  const auto& m = model162();
  std::mt19937_64 rng(2);
  const Eigen::VectorXd ct = random_vector(80, rng);
  const ad::Tensor t = texture_from_coeffs(m, ad::Tensor({80}, ct));
  // Naive loop over the vertex-major layout.
  for (Index i = 0; i < 162; ++i) {
    for (int c = 0; c < 3; ++c) {
      double v = m.texture_mean()(i, c);
      for (Index k = 0; k < 80; ++k) v += m.texture_basis()(3 * i + c, k) * ct[k];
      EXPECT_NEAR(t.matrix()(i, c), v, 1e-12);
    }
  }
  EXPECT_THROW(texture_from_coeffs(m, Eigen::VectorXd::Zero(81)), ContractViolation);
}

TEST(Vectorize, RoundTripIsVertexMajor) {
  Positions p(2, 3);
  p << 1, 2, 3, 4, 5, 6;
  const Eigen::VectorXd v = vectorize(p);
  EXPECT_EQ(v, (Eigen::VectorXd(6) << 1, 2, 3, 4, 5, 6).finished());
  EXPECT_EQ(unvectorize(v), p);
}

TEST(SynthModel, DeterministicPerSeed) {
  EXPECT_TRUE(synth_model(42, 162) == model162());
  EXPECT_FALSE(synth_model(43, 162) == model162());
}

TEST(SynthModel, DimensionsAndRanges) {
  const auto& m = model162();
  EXPECT_EQ(m.dims(), (BasisDims{80, 64, 80}));
  EXPECT_GE(m.texture_mean().minCoeff(), 0.2);
  EXPECT_LE(m.texture_mean().maxCoeff(), 0.9);
}

TEST(SynthModel, BasisNormsAreNonIncreasing) {
  const auto& m = model162();
  for (const Eigen::MatrixXd* b : {&m.identity_basis(), &m.expression_basis(), &m.texture_basis()}) {
    const Eigen::VectorXd norms = b->colwise().norm();
    Eigen::VectorXd sorted = norms;
    std::sort(sorted.data(), sorted.data() + sorted.size(), std::greater<>());
    EXPECT_EQ(norms, sorted);
  }
}

TEST(SynthModel, Level3IcosphereHas1280Triangles) {
  const MorphableModel m = synth_model(1, 642, {4, 4, 4});
  EXPECT_EQ(m.vertex_count(), 642);
  EXPECT_EQ(m.topology().triangles().size(), 1280u);
  // Closed genus-0 surface: V - E + F = 2.
  EXPECT_EQ(642 - m.topology().edge_count() + 1280, 2);
}

TEST(SynthModel, ArbitraryVertexCounts) {
  for (Index n : {4, 5, 30, 100}) {
    const MorphableModel m = synth_model(3, n, {3, 2, 3});
    EXPECT_EQ(m.vertex_count(), n);
    EXPECT_FALSE(m.topology().triangles().empty());
  }
  EXPECT_THROW(synth_model(3, 3), ContractViolation);
}

TEST(ModelIo, RoundTripIsBitExact) {
  std::stringstream ss;
  write_model(ss, model162());
  EXPECT_TRUE(read_model(ss) == model162());
}

TEST(ModelIo, TruncatedFileIsParseError) {
  std::stringstream ss;
  write_model(ss, model162());
  const std::string bytes = ss.str();
  for (std::size_t cut : {std::size_t(3), std::size_t(20), bytes.size() / 2, bytes.size() - 1}) {
    std::stringstream partial(bytes.substr(0, cut));
    EXPECT_THROW(read_model(partial), ParseError) << cut;
  }
}

TEST(ModelIo, BadMagicReportsOffset) {
  std::stringstream ss("FACE3DMX rest");
  try {
    read_model(ss);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
}

TEST(ModelIo, StandardDimsParseForAnyVertexCount) {
  for (Index n : {12, 42}) {
    std::stringstream ss;
    write_model(ss, synth_model(5, n));
    EXPECT_EQ(read_model(ss).dims(), (BasisDims{80, 64, 80}));
  }
}

}  // namespace
}  // namespace facegcn
