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

#ifndef FACEGCN_OPS_H_
#define FACEGCN_OPS_H_

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "facegcn/sparse.h"
#include "facegcn/tensor.h"

// Differentiable operation vocabulary. Every op checks its shape rule and
// throws ContractViolation naming the op and the offending shapes. Backward
// rules are written with these same ops, so gradients can be differentiated
// once more (the gradient penalty relies on this for the critic ops).
namespace facegcn::ad {

using IndexList = std::vector<Index>;

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);  // a * safe_reciprocal(b)
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor relu(const Tensor& x);
// max(0, x + b) with b broadcast over the last (channel) axis.
Tensor biased_relu(const Tensor& x, const Tensor& bias);
// x + b with b broadcast over the last axis.
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor tanh(const Tensor& x);
Tensor sin(const Tensor& x);
Tensor cos(const Tensor& x);
// Square root with gradient 0 at x = 0.
Tensor sqrt(const Tensor& x);
Tensor pow(const Tensor& x, double exponent);
// 1/x, defined as 0 where x == 0 (gradient 0 there as well).
Tensor safe_reciprocal(const Tensor& x);
// Gradient passes only strictly inside (lo, hi).
Tensor clamp(const Tensor& x, double lo, double hi);

// Reductions and broadcasts on rank-2 tensors.
Tensor sum(const Tensor& x);   // -> scalar
Tensor mean(const Tensor& x);  // -> scalar
Tensor expand(const Tensor& scalar, const Shape& shape);
Tensor row_sum(const Tensor& x);                 // [n,c] -> [n,1]
Tensor col_sum(const Tensor& x);                 // [n,c] -> [1,c]
Tensor broadcast_cols(const Tensor& x, Index c); // [n,1] -> [n,c]
Tensor broadcast_rows(const Tensor& x, Index n); // [1,c] -> [n,c]
Tensor row_norm(const Tensor& x);                // [n,c] -> [n,1]
Tensor norm(const Tensor& x);                    // -> scalar

// Layout.
Tensor reshape(const Tensor& x, const Shape& shape);
Tensor transpose(const Tensor& x);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, Index begin, Index end);
Tensor pad_cols(const Tensor& x, Index begin, Index total);

// Products.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor spmm(const SparseMatrix& s, const Tensor& x);

// Row gather/scatter with shared index lists.
Tensor gather_rows(const Tensor& x, std::shared_ptr<const IndexList> index);
Tensor scatter_rows(const Tensor& x, std::shared_ptr<const IndexList> index,
                    Index rows);

// Images are channel-last [H, W, C].
Tensor im2col(const Tensor& image, Index kernel);
Tensor col2im(const Tensor& cols, Index height, Index width, Index channels,
              Index kernel);
// Stride-1 same-padded convolution, weights [k, k, C_in, C_out].
Tensor conv2d(const Tensor& image, const Tensor& weights);
// 2x2 stride-2 max pooling; ties route to the first maximal element in
// row-major window order.
Tensor maxpool2d(const Tensor& image);

// Arbitrary op with a caller-provided backward rule.
Tensor custom_op(std::string_view name, std::vector<Tensor> inputs, Tensor value,
                 GradFn grad, bool higher_order = false);

struct OpAttrs {
  std::vector<double> reals;
  std::vector<Index> ints;
  Shape shape;
  std::optional<SparseMatrix> sparse;
};

// Name-based dispatch over the vocabulary above. Unknown names raise
// UnsupportedOperation.
Tensor forward_op(std::string_view name, std::span<const Tensor> inputs,
                  const OpAttrs& attrs = {});
std::vector<std::string> registered_ops();

}  // namespace facegcn::ad

#endif  // FACEGCN_OPS_H_
