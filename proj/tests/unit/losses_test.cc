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

#include <gtest/gtest.h>

#include "facegcn/errors.h"
#include "facegcn/gcn.h"
#include "facegcn/gradcheck.h"
#include "facegcn/losses.h"
#include "facegcn/ops.h"

namespace facegcn::losses {
namespace {

using ad::Tensor;

Tensor random_image(std::mt19937_64& rng, Index h, Index w, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(h * w * 3);
  for (Index i = 0; i < v.size(); ++i) v[i] = u(rng);
  return Tensor({h, w, 3}, v);
}

Mask full_mask(Index pixels) { return Mask::Ones(pixels); }

// Flattens the image; lets tests pick embeddings directly.
Tensor flat_embed(const Tensor& image) { return ad::reshape(image, {image.size()}); }

Tensor tiny_image(std::initializer_list<double> v) {
  return Tensor({1, 2, 3}, Eigen::Map<const Eigen::VectorXd>(v.begin(), Index(v.size())));
}

TEST(PixelLoss, IdenticalImagesGiveZero) {
  std::mt19937_64 rng(1);
  const Tensor x = random_image(rng, 6, 5);
  EXPECT_EQ(pixel_loss(x, x, full_mask(30), full_mask(30)).item(), 0.0);
}

TEST(PixelLoss, ConstantDifference) {
  std::mt19937_64 rng(2);
  const Tensor x = random_image(rng, 4, 4);
  Eigen::VectorXd shifted = x.values();
  for (Index p = 0; p < 16; ++p) shifted[3 * p] -= 0.3;
  const Tensor y({4, 4, 3}, shifted);
  EXPECT_NEAR(pixel_loss(x, y, full_mask(16), full_mask(16)).item(), 0.3, 1e-9);
}

TEST(PixelLoss, MaskedHalfContributesNothing) {
  // Top half differs by (0.6, 0, 0), bottom half by (0, 0.3, 0.4) with norm 0.5.
  const Index h = 4, w = 3, n = h * w;
  Eigen::VectorXd a = Eigen::VectorXd::Zero(3 * n), b = Eigen::VectorXd::Zero(3 * n);
  Mask bottom = Mask::Zero(n);
  for (Index p = 0; p < n; ++p) {
    if (p / w < h / 2) {
      b[3 * p] = 0.6;
    } else {
      b[3 * p + 1] = 0.3;
      b[3 * p + 2] = 0.4;
      bottom[p] = 1.0;
    }
  }
  const Tensor x({h, w, 3}, a), y({h, w, 3}, b);
  EXPECT_NEAR(pixel_loss(x, y, full_mask(n), bottom).item(), 0.5, 1e-9);
  EXPECT_NEAR(pixel_loss(x, y, bottom, full_mask(n)).item(), 0.5, 1e-9);
  EXPECT_NEAR(pixel_loss(x, y, full_mask(n), full_mask(n)).item(), 0.55, 1e-9);
}

TEST(PixelLoss, EmptyIntersectionIsDegenerate) {
  std::mt19937_64 rng(3);
  const Tensor x = random_image(rng, 2, 2), y = random_image(rng, 2, 2);
  Mask a(4), b(4);
  a << 1, 1, 0, 0;
  b << 0, 0, 1, 1;
  EXPECT_THROW(pixel_loss(x, y, a, b), DegenerateMaskError);
}

TEST(PixelLoss, RejectsBadMasksAndShapes) {
  std::mt19937_64 rng(4);
  const Tensor x = random_image(rng, 2, 2), y = random_image(rng, 2, 3);
  EXPECT_THROW(pixel_loss(x, y, full_mask(4), full_mask(4)), ContractViolation);
  Mask soft = full_mask(4);
  soft[1] = 0.5;
  EXPECT_THROW(pixel_loss(x, x, soft, full_mask(4)), ContractViolation);
  EXPECT_THROW(pixel_loss(x, x, full_mask(5), full_mask(4)), ContractViolation);
}

TEST(PixelLoss, SymmetricAndZeroOnlyWhereMasksAgree) {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_image(rng, 5, 4), y = random_image(rng, 5, 4);
    Mask m(20);
    for (Index i = 0; i < 20; ++i) m[i] = coin(rng) ? 1.0 : 0.0;
    m[0] = 1.0;
    EXPECT_EQ(pixel_loss(x, y, m, full_mask(20)).item(), pixel_loss(y, x, m, full_mask(20)).item());
    EXPECT_GT(pixel_loss(x, y, m, full_mask(20)).item(), 0.0);
    // Copy x into y on the mask: the loss vanishes.
    Eigen::VectorXd z = y.values();
    for (Index p = 0; p < 20; ++p) {
      if (m[p] == 1.0) z.segment<3>(3 * p) = x.values().segment<3>(3 * p);
    }
    EXPECT_EQ(pixel_loss(x, Tensor({5, 4, 3}, z), m, full_mask(20)).item(), 0.0);
  }
}

TEST(PixelLoss, GradCheck) {
  std::mt19937_64 rng(6);
  const Tensor target = random_image(rng, 4, 4);
  Mask m = full_mask(16);
  m[3] = m[7] = 0.0;
  const auto f = [&](const Tensor& x) { return pixel_loss(x, target, m, full_mask(16)); };
  EXPECT_LT(ad::grad_check(f, random_image(rng, 4, 4)).max_rel_error, 1e-7);
}

TEST(IdentityLoss, CosineDistanceExamples) {
  const Tensor x = tiny_image({1, 2, 0, 0, -1, 3});
  EXPECT_NEAR(identity_loss(x, x, flat_embed).item(), 0.0, 1e-12);
  const Tensor orth = tiny_image({2, -1, 0, 0, 0, 0});
  EXPECT_NEAR(identity_loss(x, orth, flat_embed).item(), 1.0, 1e-12);
  const Tensor opposite = tiny_image({-1, -2, 0, 0, 1, -3});
  EXPECT_NEAR(identity_loss(x, opposite, flat_embed).item(), 2.0, 1e-12);
}

TEST(IdentityLoss, ZeroEmbeddingIsContractViolation) {
  const Tensor x = tiny_image({1, 2, 3, 4, 5, 6});
  EXPECT_THROW(identity_loss(x, Tensor::zeros({1, 2, 3}), flat_embed), ContractViolation);
}

TEST(IdentityLoss, InvariantUnderPositiveScaling) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = random_image(rng, 1, 2, -1, 1), y = random_image(rng, 1, 2, -1, 1);
    const double base = identity_loss(x, y, flat_embed).item();
    EXPECT_GE(base, 0.0);
    EXPECT_LE(base, 2.0);
    EXPECT_NEAR(identity_loss(ad::scale(x, 3.7), y, flat_embed).item(), base, 1e-12);
    EXPECT_NEAR(identity_loss(x, ad::scale(y, 0.01), flat_embed).item(), base, 1e-12);
  }
}

TEST(IdentityLoss, GradCheckThroughToyEmbedder) {
  std::mt19937_64 rng(8);
  const ToyEmbedder embed(16, 16, 16);
  const Tensor target = random_image(rng, 16, 16);
  const auto f = [&](const Tensor& x) { return identity_loss(x, target, embed); };
  EXPECT_LT(ad::grad_check(f, random_image(rng, 16, 16), 1e-5, 64).max_rel_error, 1e-6);
}

TEST(ToyEmbedder, DeterministicAndSeeded) {
  std::mt19937_64 rng(9);
  const Tensor x = random_image(rng, 16, 24);
  const ToyEmbedder a(32, 16, 24, 5), b(32, 16, 24, 5), c(32, 16, 24, 6);
  EXPECT_EQ(a(x).values(), b(x).values());
  EXPECT_NE(a(x).values(), c(x).values());
  EXPECT_EQ(a(x).shape(), (ad::Shape{32}));
  EXPECT_GT(a(x).values().norm(), 0.0);
}

TEST(ToyEmbedder, DependsOnlyOnBlockAverages) {
  std::mt19937_64 rng(10);
  const Index size = 64, block = size / 8;
  const Tensor x = random_image(rng, size, size);
  Eigen::VectorXd averaged(x.size());
  for (Index bi = 0; bi < 8; ++bi) {
    for (Index bj = 0; bj < 8; ++bj) {
      for (Index c = 0; c < 3; ++c) {
        double s = 0;
        for (Index i = 0; i < block; ++i) {
          for (Index j = 0; j < block; ++j) s += x[((bi * block + i) * size + bj * block + j) * 3 + c];
        }
        for (Index i = 0; i < block; ++i) {
          for (Index j = 0; j < block; ++j) {
            averaged[((bi * block + i) * size + bj * block + j) * 3 + c] = s / (block * block);
          }
        }
      }
    }
  }
  const ToyEmbedder embed(24, size, size);
  const Eigen::VectorXd fa = embed(x).values(), fb = embed(Tensor(x.shape(), averaged)).values();
  EXPECT_LT((fa - fb).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ToyEmbedder, FractionalCellsConserveArea) {
  // A constant image pools to the same constant in every cell, whatever the size.
  const Index h = 13, w = 10;
  const ToyEmbedder embed(8, h, w, 3);
  const ToyEmbedder ref(8, 8, 8, 3);
  const Tensor x = Tensor::full({h, w, 3}, 0.4), y = Tensor::full({8, 8, 3}, 0.4);
  EXPECT_LT((embed(x).values() - ref(y).values()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ToyEmbedder, RejectsWrongImageSize) {
  const ToyEmbedder embed(8, 16, 16);
  EXPECT_THROW(embed(Tensor::zeros({8, 16, 3})), ContractViolation);
}

TEST(VertexLoss, Examples) {
  std::mt19937_64 rng(11);
  const Index n = 17;
  Eigen::VectorXd v(3 * n);
  std::uniform_real_distribution<double> u(-1, 1);
  for (Index i = 0; i < v.size(); ++i) v[i] = u(rng);
  const Tensor a({n, 3}, v);
  EXPECT_EQ(vertex_loss(a, a).item(), 0.0);
  Eigen::VectorXd w = v;
  w[3 * 5] += 1.0;
  EXPECT_NEAR(vertex_loss(a, Tensor({n, 3}, w)).item(), 1.0 / n, 1e-12);
}

TEST(VertexLoss, MatchesScalarLoop) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 5 + trial * 7;
    Eigen::VectorXd a(3 * n), b(3 * n);
    for (Index i = 0; i < 3 * n; ++i) a[i] = u(rng), b[i] = u(rng);
    double want = 0;
    for (Index i = 0; i < n; ++i) {
      double s = 0;
      for (Index k = 0; k < 3; ++k) s += (a[3 * i + k] - b[3 * i + k]) * (a[3 * i + k] - b[3 * i + k]);
      want += std::sqrt(s);
    }
    want /= double(n);
    EXPECT_NEAR(vertex_loss(Tensor({n, 3}, a), Tensor({n, 3}, b)).item(), want, 1e-12);
  }
}

TEST(VertexLoss, MaskedAveragesValidVertices) {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(12), b = Eigen::VectorXd::Zero(12);
  b[0] = 3.0;   // vertex 0: distance 3
  b[4] = 4.0;   // vertex 1: distance 4
  b[6] = 100.0;  // vertex 2: invalid
  const Tensor ta({4, 3}, a), tb({4, 3}, b);
  EXPECT_NEAR(vertex_loss(ta, tb, {true, true, false, true}).item(), 7.0 / 3.0, 1e-12);
  EXPECT_EQ(vertex_loss(ta, tb, {false, false, false, false}).item(), 0.0);
  EXPECT_THROW(vertex_loss(ta, tb, {true}), ContractViolation);
}

TEST(VertexLoss, ShapeMismatchIsContractViolation) {
  EXPECT_THROW(vertex_loss(Tensor::zeros({4, 3}), Tensor::zeros({5, 3})), ContractViolation);
  EXPECT_THROW(vertex_loss(Tensor::zeros({4, 2}), Tensor::zeros({4, 2})), ContractViolation);
}

TEST(VertexLoss, GradCheck) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::VectorXd a(30), b(30);
  for (Index i = 0; i < 30; ++i) a[i] = u(rng), b[i] = u(rng);
  const Tensor target({10, 3}, b);
  const auto f = [&](const Tensor& x) { return vertex_loss(x, target); };
  const auto g = [&](const Tensor& x) {
    return vertex_loss(x, target, {true, false, true, true, false, true, true, true, true, false});
  };
  EXPECT_LT(ad::grad_check(f, Tensor({10, 3}, a)).max_rel_error, 1e-7);
  EXPECT_LT(ad::grad_check(g, Tensor({10, 3}, a)).max_rel_error, 1e-7);
}

struct Batch {
  std::vector<Tensor> real, fake;
};

Batch random_batch(std::mt19937_64& rng, Index count, Index size) {
  Batch b;
  for (Index i = 0; i < count; ++i) {
    b.real.push_back(random_image(rng, size, size));
    b.fake.push_back(random_image(rng, size, size));
  }
  return b;
}

Tensor unit_direction(std::mt19937_64& rng, const ad::Shape& shape) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd u(ad::shape_size(shape));
  for (Index i = 0; i < u.size(); ++i) u[i] = normal(rng);
  return Tensor(shape, u / u.norm());
}

double linear_score(const Tensor& u, const Tensor& x) { return u.values().dot(x.values()); }

TEST(Adversarial, ConstantCriticPenaltyIsLambda) {
  std::mt19937_64 rng(14);
  const Batch b = random_batch(rng, 3, 4);
  const auto critic = [](const Tensor&) { return Tensor::scalar(0.7); };
  const AdversarialTerms t = adversarial_loss(critic, b.real, b.fake, 10.0, rng);
  EXPECT_NEAR(t.penalty.item(), 1.0, 1e-12);
  EXPECT_NEAR(t.critic_loss.item(), 10.0, 1e-9);
  EXPECT_NEAR(t.generator_loss.item(), -0.7, 1e-12);
}

TEST(Adversarial, UnitLinearCriticHasZeroPenalty) {
  std::mt19937_64 rng(15);
  const Batch b = random_batch(rng, 4, 4);
  const Tensor u = unit_direction(rng, {4, 4, 3});
  const auto critic = [&](const Tensor& x) { return ad::sum(ad::mul(u, x)); };
  const AdversarialTerms t = adversarial_loss(critic, b.real, b.fake, 10.0, rng);
  EXPECT_NEAR(t.penalty.item(), 0.0, 1e-9);
  double want = 0;
  for (std::size_t i = 0; i < 4; ++i) want += linear_score(u, b.fake[i]) - linear_score(u, b.real[i]);
  EXPECT_NEAR(t.critic_loss.item(), want / 4.0, 1e-12);
}

TEST(Adversarial, DoubledLinearCriticPenaltyIsLambda) {
  std::mt19937_64 rng(16);
  const Batch b = random_batch(rng, 2, 4);
  const Tensor u = unit_direction(rng, {4, 4, 3});
  const auto critic = [&](const Tensor& x) { return ad::scale(ad::sum(ad::mul(u, x)), 2.0); };
  const double lambda = 10.0;
  const AdversarialTerms t = adversarial_loss(critic, b.real, b.fake, lambda, rng);
  EXPECT_NEAR(lambda * t.penalty.item(), lambda, 1e-9);
  double want = 0;
  for (std::size_t i = 0; i < 2; ++i) {
    want += 2 * linear_score(u, b.fake[i]) - 2 * linear_score(u, b.real[i]);
  }
  EXPECT_NEAR(t.critic_loss.item(), want / 2.0 + lambda, 1e-9);
  EXPECT_NEAR(t.generator_loss.item(),
              -(2 * linear_score(u, b.fake[0]) + 2 * linear_score(u, b.fake[1])) / 2.0, 1e-12);
}

TEST(Adversarial, RejectsEmptyOrMismatchedBatches) {
  std::mt19937_64 rng(17);
  const auto critic = [](const Tensor& x) { return ad::sum(x); };
  std::vector<Tensor> none;
  EXPECT_THROW(adversarial_loss(critic, none, none, 10.0, rng), ContractViolation);
  const Batch b = random_batch(rng, 2, 4);
  EXPECT_THROW(adversarial_loss(critic, b.real, std::span(b.fake).first(1), 10.0, rng),
               ContractViolation);
  EXPECT_THROW(adversarial_loss(critic, b.real, b.fake, -1.0, rng), ContractViolation);
}

TEST(Adversarial, NestedPenaltyGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(18);
  const Batch b = random_batch(rng, 2, 3);
  const auto f = [&](const Tensor& w) {
    const auto critic = [&](const Tensor& x) { return ad::sum(ad::mul(w, ad::tanh(x))); };
    std::mt19937_64 local(99);
    return adversarial_loss(critic, b.real, b.fake, 10.0, local).critic_loss;
  };
  const Tensor w = ad::scale(unit_direction(rng, {3, 3, 3}), 3.0);
  EXPECT_LT(ad::grad_check(f, w).max_rel_error, 1e-6);
}

TEST(Adversarial, NestedPenaltyGradientThroughDiscriminator) {
  std::mt19937_64 rng(19);
  gcn::GcnConfig config;
  config.critic_channels = {3, 4};
  const gcn::Discriminator critic = gcn::Discriminator::make(config, rng);
  const Batch b = random_batch(rng, 2, 8);
  const auto f = [&](const Tensor& w) {
    gcn::Discriminator d = critic;
    d.dense_weight = w;
    std::mt19937_64 local(7);
    const auto fn = [&](const Tensor& x) { return d.forward(x); };
    return adversarial_loss(fn, b.real, b.fake, 10.0, local).critic_loss;
  };
  EXPECT_LT(ad::grad_check(f, critic.dense_weight).max_rel_error, 1e-5);
}

TEST(Schedule, HoldThenLinearRamp) {
  LossWeights w;
  w.hold_steps = 10;
  w.warmup_steps = 20;
  const Sigmas s0 = w.at(0);
  EXPECT_EQ(s0.s1, 0.0);
  EXPECT_EQ(s0.s2, 0.2);
  EXPECT_EQ(s0.s3, 0.001);
  EXPECT_EQ(s0.s4, 1.0);
  EXPECT_EQ(w.at(9).s1, 0.0);
  EXPECT_EQ(w.at(10).s1, 0.0);
  EXPECT_DOUBLE_EQ(w.at(20).s1, 0.5);
  EXPECT_DOUBLE_EQ(w.at(20).s4, 0.5);
  EXPECT_EQ(w.at(30).s1, 1.0);
  EXPECT_EQ(w.at(30).s4, 0.0);
  EXPECT_EQ(w.at(1000).s1, 1.0);
  EXPECT_THROW(w.at(-1), ContractViolation);
  for (Index step = 0; step < 40; ++step) {
    EXPECT_EQ(w.at(step).s1 + w.at(step).s4, 1.0);
    if (step > 0) {
      EXPECT_GE(w.at(step).s1, w.at(step - 1).s1);
    }
  }
}

TEST(Schedule, ZeroLengthRampJumps) {
  LossWeights w;
  w.hold_steps = 3;
  w.warmup_steps = 0;
  EXPECT_EQ(w.at(2).s1, 0.0);
  EXPECT_EQ(w.at(3).s1, 1.0);
}

TEST(TotalLoss, CombinesTermsWithScheduleWeights) {
  LossTerms t;
  t.pixel = Tensor::scalar(1.0);
  t.identity = Tensor::scalar(2.0);
  t.adversarial = Tensor::scalar(3.0);
  t.vertex_texture = Tensor::scalar(5.0);
  t.vertex_projected = Tensor::scalar(7.0);
  LossWeights w;
  w.hold_steps = 2;
  w.warmup_steps = 4;
  EXPECT_EQ(total_loss(t, w, 0).item(), 12.0);
  EXPECT_NEAR(total_loss(t, w, 4).item(), 0.5 * (1.0 + 0.4 + 0.003) + 0.5 * 12.0, 1e-15);
  EXPECT_NEAR(total_loss(t, w, 6).item(), 1.0 + 0.4 + 0.003, 1e-15);
  LossTerms partial;
  partial.vertex_texture = Tensor::scalar(5.0);
  EXPECT_EQ(total_loss(partial, w, 0).item(), 5.0);
  EXPECT_EQ(total_loss(LossTerms{}, w, 0).item(), 0.0);
}

TEST(TotalLoss, StepZeroHasNoGradientThroughRenderedTerms) {
  const Tensor render_param = Tensor::parameter({3}, Eigen::Vector3d(0.1, 0.2, 0.3));
  const Tensor vertex_param = Tensor::parameter({3}, Eigen::Vector3d(1.0, -1.0, 0.5));
  LossWeights w;
  ad::Tape tape;
  Tensor loss;
  {
    ad::TapeScope scope(tape);
    LossTerms t;
    t.pixel = ad::sum(ad::mul(render_param, render_param));
    t.identity = ad::sum(render_param);
    t.vertex_texture = ad::sum(ad::mul(vertex_param, vertex_param));
    loss = total_loss(t, w, 0);
  }
  const ad::GradientMap g = ad::backward(tape, loss);
  EXPECT_FALSE(g.contains(render_param));
  EXPECT_TRUE(g.contains(vertex_param));
  EXPECT_EQ(g[render_param].values(), Eigen::VectorXd::Zero(3));
}

TEST(Metrics, IdenticalImages) {
  std::mt19937_64 rng(20);
  const Tensor x = random_image(rng, 16, 16);
  const ToyEmbedder embed(16, 16, 16);
  const Metrics m = compute_metrics(x, x, full_mask(256), embed);
  EXPECT_EQ(m.l1, 0.0);
  EXPECT_EQ(m.psnr, kPsnrIdentical);
  EXPECT_NEAR(m.ssim, 1.0, 1e-12);
  EXPECT_NEAR(m.cosine, 1.0, 1e-12);
}

TEST(Metrics, PsnrOfUnitMseIsZero) {
  EXPECT_EQ(psnr(1.0), 0.0);
  EXPECT_NEAR(psnr(0.01), 20.0, 1e-12);
  EXPECT_EQ(psnr(0.0), kPsnrIdentical);
  const ToyEmbedder embed(8, 8, 8);
  const Metrics m = compute_metrics(Tensor::full({8, 8, 3}, 1.0), Tensor::zeros({8, 8, 3}),
                                    full_mask(64), embed);
  EXPECT_EQ(m.psnr, 0.0);
  EXPECT_EQ(m.l1, 1.0);
}

TEST(Metrics, RegionRestrictsComparison) {
  std::mt19937_64 rng(21);
  const Tensor x = random_image(rng, 8, 8);
  Eigen::VectorXd v = x.values();
  Mask region = Mask::Zero(64);
  for (Index p = 0; p < 64; ++p) {
    if (p % 8 < 4) {
      region[p] = 1.0;
      v[3 * p] = std::min(1.0, v[3 * p] + 0.1);
    } else {
      v.segment<3>(3 * p).setZero();
    }
  }
  const Tensor y({8, 8, 3}, v);
  // Only the left half counts; outside it both images are zeroed.
  double l1 = 0, mse = 0;
  for (Index p = 0; p < 64; ++p) {
    if (region[p] == 0.0) continue;
    for (Index c = 0; c < 3; ++c) {
      const double d = x[3 * p + c] - v[3 * p + c];
      l1 += std::abs(d);
      mse += d * d;
    }
  }
  const ToyEmbedder embed(8, 8, 8);
  const Metrics m = compute_metrics(x, y, region, embed);
  EXPECT_NEAR(m.l1, l1 / 96.0, 1e-15);
  EXPECT_NEAR(m.psnr, 10 * std::log10(96.0 / mse), 1e-12);
  EXPECT_THROW(compute_metrics(x, y, Mask::Zero(64), embed), DegenerateMaskError);
}

TEST(Metrics, SymmetricAndBounded) {
  std::mt19937_64 rng(22);
  const ToyEmbedder embed(8, 12, 12);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = random_image(rng, 12, 12), y = random_image(rng, 12, 12);
    const Metrics a = compute_metrics(x, y, full_mask(144), embed);
    const Metrics b = compute_metrics(y, x, full_mask(144), embed);
    EXPECT_EQ(a.psnr, b.psnr);
    EXPECT_NEAR(a.ssim, b.ssim, 1e-14);
    EXPECT_GE(a.ssim, -1.0);
    EXPECT_LT(a.ssim, 1.0);
    EXPECT_LE(a.cosine, 1.0 + 1e-12);
  }
  // Anticorrelated structure drives SSIM negative but not below -1.
  const Tensor x = random_image(rng, 12, 12);
  const Tensor inverted = ad::add_scalar(ad::neg(x), 1.0);
  const double s = ssim(x, inverted);
  EXPECT_LT(s, 0.0);
  EXPECT_GE(s, -1.0);
}

TEST(Metrics, SsimMatchesDirectWindowSum) {
  // Interior pixel of a 16 x 16 image: the full 11 x 11 window is in bounds.
  std::mt19937_64 rng(23);
  const Tensor x = random_image(rng, 16, 16), y = random_image(rng, 16, 16);
  const Index ci = 7, cj = 8;
  double total = 0;
  for (Index c = 0; c < 3; ++c) {
    double wsum = 0, mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
    for (Index di = -5; di <= 5; ++di) {
      for (Index dj = -5; dj <= 5; ++dj) {
        const double w = std::exp(-(di * di + dj * dj) / (2 * 1.5 * 1.5));
        const double a = x[((ci + di) * 16 + cj + dj) * 3 + c];
        const double b = y[((ci + di) * 16 + cj + dj) * 3 + c];
        wsum += w;
        mx += w * a, my += w * b, xx += w * a * a, yy += w * b * b, xy += w * a * b;
      }
    }
    mx /= wsum, my /= wsum, xx /= wsum, yy /= wsum, xy /= wsum;
    const double c1 = 1e-4, c2 = 9e-4;
    total += (2 * mx * my + c1) * (2 * (xy - mx * my) + c2) /
             ((mx * mx + my * my + c1) * (xx - mx * mx + yy - my * my + c2));
  }
  Mask one = Mask::Zero(256);
  one[ci * 16 + cj] = 1.0;
  EXPECT_NEAR(ssim(x, y, one), total / 3.0, 1e-12);
}

}  // namespace
}  // namespace facegcn::losses
