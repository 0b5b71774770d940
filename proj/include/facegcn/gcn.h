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

#ifndef FACEGCN_GCN_H_
#define FACEGCN_GCN_H_

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "facegcn/sampling.h"
#include "facegcn/sparse.h"
#include "facegcn/tensor.h"

namespace facegcn::gcn {

struct NamedTensor {
  std::string name;
  ad::Tensor tensor;
};
using ParameterList = std::vector<NamedTensor>;

Index parameter_count(const ParameterList& params);

struct GcnConfig {
  Index cheb_order = 6;
  Index embedding_dim = 128;
  // One residual block per hierarchy level, coarsest level first.
  std::vector<Index> decoder_widths{64, 32, 16, 8};
  Index refiner_width = 16;
  Index refiner_blocks = 2;
  std::vector<Index> critic_channels{8, 16, 16, 32, 32, 32};
};

// Uniform(-a, a) with a = sqrt(3 / fan_in), i.e. unit-variance preserving.
ad::Tensor fan_in_uniform(ad::Shape shape, Index fan_in, std::mt19937_64& rng);

struct ChebLayer {
  Index order = 1;  // K
  Index in = 0, out = 0;
  ad::Tensor theta;  // [K, in, out]
  ad::Tensor bias;   // [out]

  static ChebLayer make(Index order, Index in, Index out, std::mt19937_64& rng);
  static ChebLayer zeros(Index order, Index in, Index out);
  Index parameter_count() const { return order * in * out + out; }
  void collect(const std::string& prefix, ParameterList& out) const;
};

// [T_0 x, ..., T_{K-1} x] for the scaled Laplacian.
std::vector<ad::Tensor> cheb_basis(const SparseMatrix& scaled_laplacian, const ad::Tensor& x,
                                   Index order);

// y_j = sum_i sum_k theta[k, i, j] (T_k x)_i + bias_j.
ad::Tensor cheb_conv(const ChebLayer& layer, const SparseMatrix& scaled_laplacian,
                     const ad::Tensor& x);

// y = conv2(relu(conv1(x))) + shortcut(x); the shortcut is a K = 1 layer
// when the widths differ and the identity otherwise.
struct ResidualBlock {
  ChebLayer conv1, conv2;
  std::optional<ChebLayer> shortcut;

  static ResidualBlock make(Index order, Index in, Index out, std::mt19937_64& rng);
  Index parameter_count() const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

ad::Tensor residual_block(const ResidualBlock& block, const SparseMatrix& scaled_laplacian,
                          const ad::Tensor& x);

// Embedding -> per-vertex RGB on the finest level. A dense layer fills the
// coarsest level, then residual blocks run coarse to fine with an upsampling
// step (sparse up-matrix followed by a cheb conv) between consecutive blocks.
struct Decoder {
  ad::Tensor dense_weight;  // [E, n_coarse * widths[0]]
  ad::Tensor dense_bias;    // [n_coarse * widths[0]]
  std::vector<ResidualBlock> blocks;
  std::vector<ChebLayer> upsample;
  ChebLayer output;

  static Decoder make(const GcnConfig& config, const MeshHierarchy& hierarchy,
                      std::mt19937_64& rng);
  ad::Tensor forward(const ad::Tensor& embedding, const MeshHierarchy& hierarchy) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

// concat(T, T_p) -> down once -> residual blocks -> up once (sparse up-matrix
// then cheb conv) -> [n, width].
struct Refiner {
  std::vector<ResidualBlock> blocks;
  ChebLayer upsample;

  static Refiner make(const GcnConfig& config, std::mt19937_64& rng);
  ad::Tensor forward(const ad::Tensor& texture, const ad::Tensor& projected,
                     const MeshHierarchy& hierarchy) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

// tanh(cheb_conv(concat(decoder, refiner))) in (-1, 1).
struct Combiner {
  ChebLayer conv;

  static Combiner make(const GcnConfig& config, std::mt19937_64& rng);
  ad::Tensor forward(const ad::Tensor& decoded, const ad::Tensor& refined,
                     const MeshHierarchy& hierarchy) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

// (x + 1) / 2.
ad::Tensor to_albedo(const ad::Tensor& combined);

// Image critic: per layer a 3x3 same-padded conv, biased ReLU and 2x2 max
// pool; then global mean over pixels and a dense layer to one score.
struct Discriminator {
  std::vector<ad::Tensor> conv_weights;  // [3, 3, C_in, C_out]
  std::vector<ad::Tensor> conv_biases;   // [C_out]
  ad::Tensor dense_weight;               // [C_last, 1]
  ad::Tensor dense_bias;                 // [1]

  static Discriminator make(const GcnConfig& config, std::mt19937_64& rng);
  // image [H, W, 3] with H and W divisible by 2^layers; returns a scalar.
  ad::Tensor forward(const ad::Tensor& image) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

}  // namespace facegcn::gcn

#endif  // FACEGCN_GCN_H_
