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

#include "facegcn/gcn.h"

#include <cmath>

#include "facegcn/errors.h"
#include "facegcn/ops.h"

namespace facegcn::gcn {
namespace {

void check_features(const char* op, const ad::Tensor& x, Index rows, Index cols) {
  if (x.rank() != 2 || x.dim(0) != rows || x.dim(1) != cols) {
    throw ContractViolation(std::string(op) + ": input " + ad::shape_string(x.shape()) +
                            ", expected " + ad::shape_string({rows, cols}));
  }
}

}  // namespace

Index parameter_count(const ParameterList& params) {
  Index total = 0;
  for (const auto& p : params) total += p.tensor.size();
  return total;
}

ad::Tensor fan_in_uniform(ad::Shape shape, Index fan_in, std::mt19937_64& rng) {
  const double a = std::sqrt(3.0 / static_cast<double>(std::max<Index>(fan_in, 1)));
  std::uniform_real_distribution<double> u(-a, a);
  Eigen::VectorXd v(ad::shape_size(shape));
  for (Index i = 0; i < v.size(); ++i) v[i] = u(rng);
  return ad::Tensor::parameter(std::move(shape), std::move(v));
}

ChebLayer ChebLayer::make(Index order, Index in, Index out, std::mt19937_64& rng) {
  ChebLayer layer = zeros(order, in, out);
  layer.theta = fan_in_uniform({order, in, out}, order * in, rng);
  return layer;
}

ChebLayer ChebLayer::zeros(Index order, Index in, Index out) {
  if (order < 1 || in < 1 || out < 1) {
    throw ContractViolation("ChebLayer: order and widths must be positive");
  }
  ChebLayer layer;
  layer.order = order;
  layer.in = in;
  layer.out = out;
  layer.theta = ad::Tensor::parameter({order, in, out}, Eigen::VectorXd::Zero(order * in * out));
  layer.bias = ad::Tensor::parameter({out}, Eigen::VectorXd::Zero(out));
  return layer;
}

void ChebLayer::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".theta", theta});
  out.push_back({prefix + ".bias", bias});
}

std::vector<ad::Tensor> cheb_basis(const SparseMatrix& scaled_laplacian, const ad::Tensor& x,
                                   Index order) {
  if (order < 1) throw ContractViolation("cheb_basis: order K must be >= 1");
  if (x.rank() != 2 || x.dim(0) != scaled_laplacian.cols()) {
    throw ContractViolation("cheb_basis: input " + ad::shape_string(x.shape()) +
                            " does not match a " + std::to_string(scaled_laplacian.rows()) +
                            "-vertex Laplacian");
  }
  std::vector<ad::Tensor> terms{x};
  if (order > 1) terms.push_back(ad::spmm(scaled_laplacian, x));
  for (Index k = 2; k < order; ++k) {
    terms.push_back(ad::sub(ad::scale(ad::spmm(scaled_laplacian, terms[k - 1]), 2.0), terms[k - 2]));
  }
  return terms;
}

ad::Tensor cheb_conv(const ChebLayer& layer, const SparseMatrix& scaled_laplacian,
                     const ad::Tensor& x) {
  check_features("cheb_conv", x, scaled_laplacian.rows(), layer.in);
  const std::vector<ad::Tensor> terms = cheb_basis(scaled_laplacian, x, layer.order);
  const ad::Tensor stacked = terms.size() == 1 ? terms[0] : ad::concat_cols(terms);
  const ad::Tensor weights = ad::reshape(layer.theta, {layer.order * layer.in, layer.out});
  return ad::add_bias(ad::matmul(stacked, weights), layer.bias);
}

ResidualBlock ResidualBlock::make(Index order, Index in, Index out, std::mt19937_64& rng) {
  ResidualBlock block;
  block.conv1 = ChebLayer::make(order, in, out, rng);
  block.conv2 = ChebLayer::make(order, out, out, rng);
  if (in != out) block.shortcut = ChebLayer::make(1, in, out, rng);
  return block;
}

Index ResidualBlock::parameter_count() const {
  return conv1.parameter_count() + conv2.parameter_count() +
         (shortcut ? shortcut->parameter_count() : 0);
}

void ResidualBlock::collect(const std::string& prefix, ParameterList& out) const {
  conv1.collect(prefix + ".conv1", out);
  conv2.collect(prefix + ".conv2", out);
  if (shortcut) shortcut->collect(prefix + ".shortcut", out);
}

ad::Tensor residual_block(const ResidualBlock& block, const SparseMatrix& scaled_laplacian,
                          const ad::Tensor& x) {
  check_features("residual_block", x, scaled_laplacian.rows(), block.conv1.in);
  if (block.conv2.in != block.conv1.out ||
      (!block.shortcut && block.conv1.in != block.conv2.out)) {
    throw ContractViolation("residual_block: inconsistent layer widths");
  }
  const ad::Tensor h = ad::relu(cheb_conv(block.conv1, scaled_laplacian, x));
  const ad::Tensor y = cheb_conv(block.conv2, scaled_laplacian, h);
  const ad::Tensor skip = block.shortcut ? cheb_conv(*block.shortcut, scaled_laplacian, x) : x;
  return ad::add(y, skip);
}

namespace {

void check_hierarchy(const char* who, const MeshHierarchy& h, std::size_t levels) {
  if (h.levels() != levels || h.laplacians.size() != levels || h.samplers.size() + 1 != levels) {
    throw ConfigError(std::string(who) + ": network expects a " + std::to_string(levels) +
                      "-level mesh hierarchy, got " + std::to_string(h.levels()));
  }
}

}  // namespace

Decoder Decoder::make(const GcnConfig& config, const MeshHierarchy& hierarchy,
                      std::mt19937_64& rng) {
  const auto& widths = config.decoder_widths;
  if (widths.empty()) throw ConfigError("Decoder: empty channel schedule");
  check_hierarchy("Decoder", hierarchy, widths.size());
  const Index coarse = hierarchy.topologies.back().vertex_count();
  const Index k = config.cheb_order;
  Decoder d;
  d.dense_weight = fan_in_uniform({config.embedding_dim, coarse * widths[0]},
                                  config.embedding_dim, rng);
  d.dense_bias = ad::Tensor::parameter({coarse * widths[0]},
                                       Eigen::VectorXd::Zero(coarse * widths[0]));
  Index width = widths[0];
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i > 0) d.upsample.push_back(ChebLayer::make(k, width, width, rng));
    d.blocks.push_back(ResidualBlock::make(k, width, widths[i], rng));
    width = widths[i];
  }
  d.output = ChebLayer::make(k, width, 3, rng);
  return d;
}

ad::Tensor Decoder::forward(const ad::Tensor& embedding, const MeshHierarchy& hierarchy) const {
  check_hierarchy("Decoder", hierarchy, blocks.size());
  const Index e = dense_weight.dim(0);
  if (embedding.size() != e || embedding.rank() > 2) {
    throw ContractViolation("Decoder: embedding " + ad::shape_string(embedding.shape()) +
                            " does not have " + std::to_string(e) + " entries");
  }
  const std::size_t levels = blocks.size();
  const Index coarse = hierarchy.topologies.back().vertex_count();
  const Index width = blocks.front().conv1.in;
  if (dense_weight.dim(1) != coarse * width) {
    throw ConfigError("Decoder: dense layer sized for a different coarsest level");
  }
  ad::Tensor x = ad::add_bias(ad::matmul(ad::reshape(embedding, {1, e}), dense_weight), dense_bias);
  x = ad::reshape(x, {coarse, width});
  for (std::size_t i = 0; i < levels; ++i) {
    const std::size_t level = levels - 1 - i;
    if (i > 0) {
      x = ad::spmm(hierarchy.samplers[level].up, x);
      x = cheb_conv(upsample[i - 1], hierarchy.laplacians[level].scaled, x);
    }
    x = residual_block(blocks[i], hierarchy.laplacians[level].scaled, x);
  }
  return cheb_conv(output, hierarchy.laplacians[0].scaled, x);
}

void Decoder::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".dense.weight", dense_weight});
  out.push_back({prefix + ".dense.bias", dense_bias});
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i > 0) upsample[i - 1].collect(prefix + ".up" + std::to_string(i), out);
    blocks[i].collect(prefix + ".block" + std::to_string(i), out);
  }
  output.collect(prefix + ".output", out);
}

Refiner Refiner::make(const GcnConfig& config, std::mt19937_64& rng) {
  if (config.refiner_blocks < 1) throw ConfigError("Refiner: need at least one block");
  Refiner r;
  Index width = 6;
  for (Index i = 0; i < config.refiner_blocks; ++i) {
    r.blocks.push_back(ResidualBlock::make(config.cheb_order, width, config.refiner_width, rng));
    width = config.refiner_width;
  }
  r.upsample = ChebLayer::make(config.cheb_order, width, width, rng);
  return r;
}

ad::Tensor Refiner::forward(const ad::Tensor& texture, const ad::Tensor& projected,
                            const MeshHierarchy& hierarchy) const {
  if (hierarchy.levels() < 2) throw ConfigError("Refiner: needs at least two mesh levels");
  const Index n = hierarchy.topologies[0].vertex_count();
  check_features("Refiner (texture)", texture, n, 3);
  check_features("Refiner (projected colors)", projected, n, 3);
  const ad::Tensor parts[] = {texture, projected};
  ad::Tensor x = ad::spmm(hierarchy.samplers[0].down, ad::concat_cols(parts));
  for (const ResidualBlock& b : blocks) x = residual_block(b, hierarchy.laplacians[1].scaled, x);
  x = ad::spmm(hierarchy.samplers[0].up, x);
  return cheb_conv(upsample, hierarchy.laplacians[0].scaled, x);
}

void Refiner::collect(const std::string& prefix, ParameterList& out) const {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].collect(prefix + ".block" + std::to_string(i), out);
  }
  upsample.collect(prefix + ".up", out);
}

Combiner Combiner::make(const GcnConfig& config, std::mt19937_64& rng) {
  return {ChebLayer::make(config.cheb_order, 3 + config.refiner_width, 3, rng)};
}

ad::Tensor Combiner::forward(const ad::Tensor& decoded, const ad::Tensor& refined,
                             const MeshHierarchy& hierarchy) const {
  if (decoded.rank() != 2 || refined.rank() != 2 || decoded.dim(0) != refined.dim(0)) {
    throw ContractViolation("Combiner: inputs " + ad::shape_string(decoded.shape()) + " and " +
                            ad::shape_string(refined.shape()) + " differ in vertex count");
  }
  const ad::Tensor parts[] = {decoded, refined};
  return ad::tanh(cheb_conv(conv, hierarchy.laplacians[0].scaled, ad::concat_cols(parts)));
}

void Combiner::collect(const std::string& prefix, ParameterList& out) const {
  conv.collect(prefix + ".conv", out);
}

ad::Tensor to_albedo(const ad::Tensor& combined) {
  return ad::add_scalar(ad::scale(combined, 0.5), 0.5);
}

Discriminator Discriminator::make(const GcnConfig& config, std::mt19937_64& rng) {
  if (config.critic_channels.empty()) throw ConfigError("Discriminator: no layers");
  Discriminator d;
  Index in = 3;
  for (Index c : config.critic_channels) {
    d.conv_weights.push_back(fan_in_uniform({3, 3, in, c}, 9 * in, rng));
    d.conv_biases.push_back(ad::Tensor::parameter({c}, Eigen::VectorXd::Zero(c)));
    in = c;
  }
  d.dense_weight = fan_in_uniform({in, 1}, in, rng);
  d.dense_bias = ad::Tensor::parameter({1}, Eigen::VectorXd::Zero(1));
  return d;
}

ad::Tensor Discriminator::forward(const ad::Tensor& image) const {
  const Index layers = static_cast<Index>(conv_weights.size());
  const Index factor = Index(1) << layers;
  if (image.rank() != 3 || image.dim(2) != 3 || image.dim(0) % factor != 0 ||
      image.dim(1) % factor != 0 || image.dim(0) == 0 || image.dim(1) == 0) {
    throw ContractViolation("Discriminator: image " + ad::shape_string(image.shape()) +
                            " must be [H, W, 3] with H and W divisible by " +
                            std::to_string(factor));
  }
  ad::Tensor h = image;
  for (Index l = 0; l < layers; ++l) {
    h = ad::maxpool2d(ad::biased_relu(ad::conv2d(h, conv_weights[l]), conv_biases[l]));
  }
  const Index pixels = h.dim(0) * h.dim(1), channels = h.dim(2);
  const ad::Tensor pooled =
      ad::scale(ad::col_sum(ad::reshape(h, {pixels, channels})), 1.0 / static_cast<double>(pixels));
  return ad::sum(ad::add_bias(ad::matmul(pooled, dense_weight), dense_bias));
}

void Discriminator::collect(const std::string& prefix, ParameterList& out) const {
  for (std::size_t i = 0; i < conv_weights.size(); ++i) {
    out.push_back({prefix + ".conv" + std::to_string(i) + ".weight", conv_weights[i]});
    out.push_back({prefix + ".conv" + std::to_string(i) + ".bias", conv_biases[i]});
  }
  out.push_back({prefix + ".dense.weight", dense_weight});
  out.push_back({prefix + ".dense.bias", dense_bias});
}

}  // namespace facegcn::gcn
