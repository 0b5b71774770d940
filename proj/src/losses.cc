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

#include "facegcn/losses.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "facegcn/errors.h"
#include "facegcn/ops.h"

namespace facegcn::losses {

using ad::Shape;
using ad::Tensor;

namespace {

void require_image(const Tensor& x, const char* op) {
  if (x.rank() != 3 || x.dim(2) != 3) {
    throw ContractViolation(std::string(op) + ": expected an [H, W, 3] image, got " +
                            ad::shape_string(x.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ContractViolation(std::string(op) + ": shape mismatch " + ad::shape_string(a.shape()) +
                            " vs " + ad::shape_string(b.shape()));
  }
}

void require_mask(const Mask& m, Index pixels, const char* op, const char* name) {
  if (m.size() != pixels) {
    throw ContractViolation(std::string(op) + ": " + name + " has " + std::to_string(m.size()) +
                            " entries, image has " + std::to_string(pixels) + " pixels");
  }
  for (Index i = 0; i < m.size(); ++i) {
    if (m[i] != 0.0 && m[i] != 1.0) {
      throw ContractViolation(std::string(op) + ": " + name + " is not binary at pixel " +
                              std::to_string(i));
    }
  }
}

Tensor pixel_rows(const Tensor& image) {
  return ad::reshape(image, {image.dim(0) * image.dim(1), image.dim(2)});
}

// Area overlap of unit cells [i, i + 1) with `cells` equal bins over [0, n).
std::vector<std::array<double, 3>> bin_weights(Index n, Index cells) {
  std::vector<std::array<double, 3>> out;  // (cell, pixel, overlap)
  const double width = static_cast<double>(n) / static_cast<double>(cells);
  for (Index c = 0; c < cells; ++c) {
    const double lo = c * width, hi = (c + 1) * width;
    for (Index i = static_cast<Index>(std::floor(lo)); i < n && i < hi; ++i) {
      const double overlap = std::min<double>(hi, i + 1) - std::max<double>(lo, i);
      if (overlap > 0) out.push_back({double(c), double(i), overlap / width});
    }
  }
  return out;
}

constexpr Index kGrid = 8;

}  // namespace

Tensor pixel_loss(const Tensor& image, const Tensor& rendered, const Mask& face,
                  const Mask& projected) {
  require_image(image, "pixel_loss");
  require_same_shape(image, rendered, "pixel_loss");
  const Index pixels = image.dim(0) * image.dim(1);
  require_mask(face, pixels, "pixel_loss", "M_face");
  require_mask(projected, pixels, "pixel_loss", "M_proj");
  const Eigen::VectorXd weight = face.cwiseProduct(projected);
  const double count = weight.sum();
  if (count == 0.0) {
    throw DegenerateMaskError("pixel_loss: face and projection masks do not intersect");
  }
  const Tensor norms = ad::row_norm(pixel_rows(ad::sub(image, rendered)));
  const Tensor w({pixels, 1}, weight);
  return ad::scale(ad::sum(ad::mul(norms, w)), 1.0 / count);
}

ToyEmbedder::ToyEmbedder(Index dim, Index height, Index width, std::uint64_t seed)
    : height_(height), width_(width) {
  if (dim < 1 || height < 1 || width < 1) {
    throw ContractViolation("ToyEmbedder: dimension and image size must be positive");
  }
  const auto rows = bin_weights(height, kGrid);
  const auto cols = bin_weights(width, kGrid);
  std::vector<Eigen::Triplet<double>> triplets;
  for (const auto& r : rows) {
    for (const auto& c : cols) {
      const Index cell = Index(r[0]) * kGrid + Index(c[0]);
      const Index pixel = Index(r[1]) * width + Index(c[1]);
      triplets.emplace_back(cell, pixel, r[2] * c[2]);
    }
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> p(kGrid * kGrid, height * width);
  p.setFromTriplets(triplets.begin(), triplets.end());
  pooling_ = SparseMatrix(std::move(p));

  const Index features = kGrid * kGrid * 3;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(double(features)));
  Eigen::VectorXd w(features * dim);
  for (Index i = 0; i < w.size(); ++i) w[i] = normal(rng);
  projection_ = Tensor({features, dim}, std::move(w));
}

Tensor ToyEmbedder::operator()(const Tensor& image) const {
  require_image(image, "ToyEmbedder");
  if (image.dim(0) != height_ || image.dim(1) != width_) {
    throw ContractViolation("ToyEmbedder: built for " + std::to_string(height_) + "x" +
                            std::to_string(width_) + " images, got " +
                            ad::shape_string(image.shape()));
  }
  const Tensor pooled = ad::spmm(pooling_, pixel_rows(image));
  const Tensor flat = ad::reshape(pooled, {1, pooled.size()});
  return ad::reshape(ad::matmul(flat, projection_), {dim()});
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "cosine_similarity");
  if (a.values().squaredNorm() == 0.0 || b.values().squaredNorm() == 0.0) {
    throw ContractViolation("cosine_similarity: zero embedding");
  }
  return ad::div(ad::sum(ad::mul(a, b)), ad::mul(ad::norm(a), ad::norm(b)));
}

Tensor identity_loss(const Tensor& image, const Tensor& rendered, const EmbeddingFn& embed) {
  require_same_shape(image, rendered, "identity_loss");
  return ad::add_scalar(ad::neg(cosine_similarity(embed(image), embed(rendered))), 1.0);
}

Tensor vertex_loss(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || a.dim(1) != 3) {
    throw ContractViolation("vertex_loss: expected [n, 3] inputs, got " +
                            ad::shape_string(a.shape()));
  }
  require_same_shape(a, b, "vertex_loss");
  return ad::mean(ad::row_norm(ad::sub(a, b)));
}

Tensor vertex_loss(const Tensor& a, const Tensor& b, const std::vector<bool>& valid) {
  if (a.rank() != 2 || a.dim(1) != 3) {
    throw ContractViolation("vertex_loss: expected [n, 3] inputs, got " +
                            ad::shape_string(a.shape()));
  }
  require_same_shape(a, b, "vertex_loss");
  if (static_cast<Index>(valid.size()) != a.dim(0)) {
    throw ContractViolation("vertex_loss: validity flags do not match the vertex count");
  }
  Eigen::VectorXd w(a.dim(0));
  for (Index i = 0; i < w.size(); ++i) w[i] = valid[i] ? 1.0 : 0.0;
  const double count = w.sum();
  if (count == 0.0) return Tensor::scalar(0.0);
  const Tensor norms = ad::row_norm(ad::sub(a, b));
  return ad::scale(ad::sum(ad::mul(norms, Tensor({a.dim(0), 1}, w))), 1.0 / count);
}

AdversarialTerms adversarial_loss(const Critic& critic, std::span<const Tensor> real,
                                  std::span<const Tensor> fake, double lambda_gp,
                                  std::mt19937_64& rng) {
  if (real.empty() || real.size() != fake.size()) {
    throw ContractViolation("adversarial_loss: need equal, nonzero real and fake batches");
  }
  if (!(lambda_gp >= 0.0)) throw ContractViolation("adversarial_loss: lambda_gp must be >= 0");
  const double inv = 1.0 / static_cast<double>(real.size());

  std::optional<ad::Tape> local;
  std::optional<ad::TapeScope> scope;
  if (ad::active_tape() == nullptr) {
    local.emplace();
    scope.emplace(*local);
  }
  ad::Tape& tape = *ad::active_tape();

  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Tensor real_score, fake_score, penalty;
  for (std::size_t i = 0; i < real.size(); ++i) {
    require_same_shape(real[i], fake[i], "adversarial_loss");
    const Tensor dr = critic(real[i]);
    const Tensor df = critic(fake[i]);
    real_score = real_score.defined() ? ad::add(real_score, dr) : dr;
    fake_score = fake_score.defined() ? ad::add(fake_score, df) : df;

    const double e = uniform(rng);
    Tensor x_hat(real[i].shape(), e * real[i].values() + (1.0 - e) * fake[i].values(), true);
    const Tensor score = critic(x_hat);
    ad::BackwardOptions options;
    options.create_graph = true;
    options.inputs = {x_hat};
    const Tensor g = ad::backward(tape, score, options)[x_hat];
    const Tensor term = ad::pow(ad::add_scalar(ad::norm(g), -1.0), 2.0);
    penalty = penalty.defined() ? ad::add(penalty, term) : term;
  }
  real_score = ad::scale(real_score, inv);
  fake_score = ad::scale(fake_score, inv);
  penalty = ad::scale(penalty, inv);

  AdversarialTerms out;
  out.penalty = penalty;
  out.critic_loss = ad::add(ad::sub(fake_score, real_score), ad::scale(penalty, lambda_gp));
  out.generator_loss = ad::neg(fake_score);
  return out;
}

Sigmas LossWeights::at(Index step) const {
  if (step < 0) throw ContractViolation("LossWeights::at: negative step");
  double s1;
  if (step < hold_steps) {
    s1 = 0.0;
  } else if (warmup_steps <= 0) {
    s1 = 1.0;
  } else {
    s1 = std::min(1.0, static_cast<double>(step - hold_steps) / static_cast<double>(warmup_steps));
  }
  return {s1, sigma2, sigma3, 1.0 - s1};
}

Tensor total_loss(const LossTerms& terms, const LossWeights& weights, Index step) {
  const Sigmas s = weights.at(step);
  Tensor total;
  const auto add_term = [&total](const Tensor& t, double w) {
    if (!t.defined() || w == 0.0) return;
    const Tensor scaled = w == 1.0 ? t : ad::scale(t, w);
    total = total.defined() ? ad::add(total, scaled) : scaled;
  };
  if (s.s1 != 0.0) {
    add_term(terms.pixel, s.s1);
    add_term(terms.identity, s.s1 * s.s2);
    add_term(terms.adversarial, s.s1 * s.s3);
  }
  if (s.s4 != 0.0) {
    add_term(terms.vertex_texture, s.s4);
    add_term(terms.vertex_projected, s.s4);
  }
  return total.defined() ? total : Tensor::scalar(0.0);
}

double psnr(double mse) {
  if (!(mse > 0.0)) return kPsnrIdentical;
  return std::min(kPsnrIdentical, 10.0 * std::log10(1.0 / mse));
}

namespace {

using Plane = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Separable Gaussian filter with the window renormalized to the in-bounds taps.
Plane gaussian_filter(const Plane& x) {
  constexpr int kRadius = 5;
  constexpr double kSigma = 1.5;
  std::array<double, 2 * kRadius + 1> taps;
  for (int t = -kRadius; t <= kRadius; ++t) taps[t + kRadius] = std::exp(-t * t / (2 * kSigma * kSigma));
  const auto pass = [&](const Plane& in, bool along_rows) {
    Plane out(in.rows(), in.cols());
    const Index n = along_rows ? in.cols() : in.rows();
    for (Index i = 0; i < in.rows(); ++i) {
      for (Index j = 0; j < in.cols(); ++j) {
        const Index c = along_rows ? j : i;
        double acc = 0, norm = 0;
        for (int t = -kRadius; t <= kRadius; ++t) {
          const Index k = c + t;
          if (k < 0 || k >= n) continue;
          const double w = taps[t + kRadius];
          acc += w * (along_rows ? in(i, k) : in(k, j));
          norm += w;
        }
        out(i, j) = acc / norm;
      }
    }
    return out;
  };
  return pass(pass(x, true), false);
}

Plane channel(const Tensor& image, Index c) {
  const Index h = image.dim(0), w = image.dim(1);
  Plane p(h, w);
  for (Index i = 0; i < h * w; ++i) p.data()[i] = image.values()[i * 3 + c];
  return p;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b, const Mask& region) {
  require_image(a, "ssim");
  require_same_shape(a, b, "ssim");
  const Index pixels = a.dim(0) * a.dim(1);
  if (region.size() != 0) require_mask(region, pixels, "ssim", "region");
  const double weight = region.size() == 0 ? double(pixels) : region.sum();
  if (weight == 0.0) throw DegenerateMaskError("ssim: empty region");
  constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
  double total = 0.0;
  for (Index c = 0; c < 3; ++c) {
    const Plane x = channel(a, c), y = channel(b, c);
    const Plane mx = gaussian_filter(x), my = gaussian_filter(y);
    const Plane sxx = gaussian_filter(x.cwiseProduct(x)) - mx.cwiseProduct(mx);
    const Plane syy = gaussian_filter(y.cwiseProduct(y)) - my.cwiseProduct(my);
    const Plane sxy = gaussian_filter(x.cwiseProduct(y)) - mx.cwiseProduct(my);
    for (Index i = 0; i < pixels; ++i) {
      if (region.size() != 0 && region[i] == 0.0) continue;
      const double u = mx.data()[i], v = my.data()[i];
      const double num = (2 * u * v + kC1) * (2 * sxy.data()[i] + kC2);
      const double den = (u * u + v * v + kC1) * (sxx.data()[i] + syy.data()[i] + kC2);
      total += num / den;
    }
  }
  return total / (3.0 * weight);
}

Metrics compute_metrics(const Tensor& image, const Tensor& rendered, const Mask& region,
                        const EmbeddingFn& embed) {
  require_image(image, "compute_metrics");
  require_same_shape(image, rendered, "compute_metrics");
  const Index pixels = image.dim(0) * image.dim(1);
  require_mask(region, pixels, "compute_metrics", "region");
  const double count = region.sum();
  if (count == 0.0) throw DegenerateMaskError("compute_metrics: empty region");

  ad::NoGradScope no_grad;
  Eigen::VectorXd xa = image.values(), xb = rendered.values();
  for (Index i = 0; i < pixels; ++i) {
    if (region[i] == 0.0) xa.segment<3>(3 * i).setZero(), xb.segment<3>(3 * i).setZero();
  }
  const Eigen::VectorXd diff = xa - xb;
  Metrics m;
  m.l1 = diff.cwiseAbs().sum() / (3.0 * count);
  m.psnr = psnr(diff.squaredNorm() / (3.0 * count));
  const Tensor ma(image.shape(), std::move(xa)), mb(image.shape(), std::move(xb));
  m.ssim = ssim(ma, mb, region);
  const Tensor fa = embed(ma), fb = embed(mb);
  if (fa.values().squaredNorm() == 0.0 || fb.values().squaredNorm() == 0.0) {
    m.cosine = fa.values() == fb.values() ? 1.0 : 0.0;
  } else {
    m.cosine = cosine_similarity(fa, fb).item();
  }
  return m;
}

}  // namespace facegcn::losses
