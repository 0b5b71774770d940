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

#ifndef FACEGCN_LOSSES_H_
#define FACEGCN_LOSSES_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "facegcn/render.h"
#include "facegcn/sparse.h"
#include "facegcn/tensor.h"

namespace facegcn::losses {

using render::Mask;

// Mean per-pixel RGB distance over the pixels where both masks are set.
// Images are [H, W, 3]; throws DegenerateMaskError on an empty intersection.
ad::Tensor pixel_loss(const ad::Tensor& image, const ad::Tensor& rendered, const Mask& face,
                      const Mask& projected);

// Deterministic image -> feature vector map.
using EmbeddingFn = std::function<ad::Tensor(const ad::Tensor& image)>;

// Area-averages the image onto an 8 x 8 grid, flattens the 192 values and
// applies a fixed seeded Gaussian projection.
class ToyEmbedder {
 public:
  ToyEmbedder(Index dim, Index height, Index width, std::uint64_t seed = 0x0e3bedULL);
  ad::Tensor operator()(const ad::Tensor& image) const;
  Index dim() const { return projection_.dim(1); }

 private:
  Index height_, width_;
  SparseMatrix pooling_;   // [64, H * W]
  ad::Tensor projection_;  // [192, dim]
};

ad::Tensor cosine_similarity(const ad::Tensor& a, const ad::Tensor& b);

// 1 - cos(F(x), F(x')); a zero embedding is a ContractViolation.
ad::Tensor identity_loss(const ad::Tensor& image, const ad::Tensor& rendered,
                         const EmbeddingFn& embed);

// Mean over vertices of the Euclidean distance between rows of [n, 3] inputs.
ad::Tensor vertex_loss(const ad::Tensor& a, const ad::Tensor& b);
// Same, averaged over the vertices flagged valid only (0 if none are).
ad::Tensor vertex_loss(const ad::Tensor& a, const ad::Tensor& b, const std::vector<bool>& valid);

using Critic = std::function<ad::Tensor(const ad::Tensor& image)>;

struct AdversarialTerms {
  ad::Tensor critic_loss;     // E[D(fake)] - E[D(real)] + lambda * penalty
  ad::Tensor generator_loss;  // -E[D(fake)]
  ad::Tensor penalty;         // E[(|grad D(x_hat)| - 1)^2]
};

// WGAN-GP terms over a batch. Interpolates x_hat = e x + (1 - e) x' use one
// uniform e per sample drawn from `rng`. The penalty differentiates through
// the critic's input gradient, so it is recorded on the active tape when
// there is one.
AdversarialTerms adversarial_loss(const Critic& critic, std::span<const ad::Tensor> real,
                                  std::span<const ad::Tensor> fake, double lambda_gp,
                                  std::mt19937_64& rng);

struct Sigmas {
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
};

// sigma1 stays 0 for the first `hold_steps` (one warm-up epoch), then rises
// linearly to 1 over `warmup_steps`; sigma4 = 1 - sigma1; sigma2 and sigma3
// are fixed.
struct LossWeights {
  double sigma2 = 0.2;
  double sigma3 = 0.001;
  Index hold_steps = 4;
  Index warmup_steps = 4;

  Sigmas at(Index step) const;
};

// Any undefined term counts as zero. Terms whose weight is zero are left out
// of the graph entirely.
struct LossTerms {
  ad::Tensor pixel, identity, adversarial, vertex_texture, vertex_projected;
};

ad::Tensor total_loss(const LossTerms& terms, const LossWeights& weights, Index step);

inline constexpr double kPsnrIdentical = 99.0;

struct Metrics {
  double l1 = 0, psnr = 0, ssim = 0, cosine = 0;
};

// Region-restricted image metrics on [H, W, 3] images with values in [0, 1].
// Both images are zeroed outside `region` first; l1 and MSE average over the
// region's pixels and channels, SSIM (11 x 11 Gaussian window, sigma 1.5,
// K1 = 0.01, K2 = 0.03, L = 1, window renormalized at the border) averages
// its map over the region, and cosine compares the embeddings. PSNR of
// identical regions is kPsnrIdentical.
Metrics compute_metrics(const ad::Tensor& image, const ad::Tensor& rendered, const Mask& region,
                        const EmbeddingFn& embed);

double psnr(double mse);
// Mean SSIM over the pixels with weight > 0 (all pixels if `region` is empty).
double ssim(const ad::Tensor& a, const ad::Tensor& b, const Mask& region = {});

}  // namespace facegcn::losses

#endif  // FACEGCN_LOSSES_H_
