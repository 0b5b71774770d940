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

#include "facegcn/ops.h"

#include <cmath>
#include <functional>
#include <map>
#include <utility>

#include "facegcn/errors.h"

namespace facegcn::ad {

namespace {

using Grads = std::vector<Tensor>;

[[noreturn]] void fail(std::string_view op, const std::string& detail) {
  throw ContractViolation("op '" + std::string(op) + "': " + detail);
}

void require_same(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    fail(op, "shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) +
                 " do not match");
  }
}

void require_rank(std::string_view op, const Tensor& x, Index rank) {
  if (x.rank() != rank) {
    fail(op, "expected rank " + std::to_string(rank) + ", got shape " +
                 shape_string(x.shape()));
  }
}

// Wraps a rule into the node signature, dropping gradients nobody asked for.
template <typename Fn>
GradFnHolder rule(Fn fn) {
  return {[fn = std::move(fn)](const Tensor& g, const std::vector<bool>& needs) {
    Grads out = fn(g, needs);
    for (std::size_t i = 0; i < out.size() && i < needs.size(); ++i) {
      if (!needs[i]) out[i] = Tensor();
    }
    return out;
  }};
}

Tensor mask_like(const Tensor& x, const Eigen::VectorXd& mask) {
  return Tensor(x.shape(), mask);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  return record("add", {a, b}, a.shape(), a.values() + b.values(),
                rule([](const Tensor& g, const std::vector<bool>&) { return Grads{g, g}; }));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  return record("sub", {a, b}, a.shape(), a.values() - b.values(),
                rule([](const Tensor& g, const std::vector<bool>& needs) {
                  return Grads{g, needs[1] ? neg(g) : Tensor()};
                }));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  return record("mul", {a, b}, a.shape(), a.values().cwiseProduct(b.values()),
                rule([a, b](const Tensor& g, const std::vector<bool>& needs) {
                  return Grads{needs[0] ? mul(g, b) : Tensor(),
                               needs[1] ? mul(g, a) : Tensor()};
                }));
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same("div", a, b);
  return mul(a, safe_reciprocal(b));
}

Tensor scale(const Tensor& a, double s) {
  return record("scale", {a}, a.shape(), a.values() * s,
                rule([s](const Tensor& g, const std::vector<bool>&) {
                  return Grads{scale(g, s)};
                }));
}

Tensor add_scalar(const Tensor& a, double s) {
  return record("add_scalar", {a}, a.shape(), a.values().array() + s,
                rule([](const Tensor& g, const std::vector<bool>&) { return Grads{g}; }));
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor relu(const Tensor& x) {
  const Eigen::VectorXd mask = (x.values().array() > 0.0).cast<double>();
  return record("relu", {x}, x.shape(), x.values().cwiseProduct(mask),
                rule([m = mask_like(x, mask)](const Tensor& g, const std::vector<bool>&) {
                  return Grads{mul(g, m)};
                }));
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() < 1) fail("add_bias", "input must have a channel axis");
  const Index c = x.shape().back();
  if (bias.size() != c) {
    fail("add_bias", "bias " + shape_string(bias.shape()) + " does not match channels of " +
                         shape_string(x.shape()));
  }
  const Index n = x.size() / std::max<Index>(c, 1);
  Tensor flat = reshape(x, {n, c});
  Tensor b = broadcast_rows(reshape(bias, {1, c}), n);
  return reshape(add(flat, b), x.shape());
}

Tensor biased_relu(const Tensor& x, const Tensor& bias) {
  return relu(add_bias(x, bias));
}

Tensor tanh(const Tensor& x) {
  return record("tanh", {x}, x.shape(), x.values().array().tanh(),
                rule([x](const Tensor& g, const std::vector<bool>&) {
                  const Tensor y = tanh(x);
                  return Grads{mul(g, add_scalar(neg(mul(y, y)), 1.0))};
                }));
}

Tensor sin(const Tensor& x) {
  return record("sin", {x}, x.shape(), x.values().array().sin(),
                rule([x](const Tensor& g, const std::vector<bool>&) {
                  return Grads{mul(g, cos(x))};
                }));
}

Tensor cos(const Tensor& x) {
  return record("cos", {x}, x.shape(), x.values().array().cos(),
                rule([x](const Tensor& g, const std::vector<bool>&) {
                  return Grads{mul(g, neg(sin(x)))};
                }));
}

Tensor sqrt(const Tensor& x) {
  if ((x.values().array() < 0.0).any()) fail("sqrt", "negative input");
  return record("sqrt", {x}, x.shape(), x.values().array().sqrt(),
                rule([x](const Tensor& g, const std::vector<bool>&) {
                  return Grads{mul(g, scale(safe_reciprocal(sqrt(x)), 0.5))};
                }));
}

Tensor pow(const Tensor& x, double exponent) {
  return record("pow", {x}, x.shape(), x.values().array().pow(exponent),
                rule([x, exponent](const Tensor& g, const std::vector<bool>&) {
                  if (exponent == 0.0) return Grads{Tensor::zeros(x.shape())};
                  if (exponent == 1.0) return Grads{g};
                  return Grads{mul(g, scale(pow(x, exponent - 1.0), exponent))};
                }));
}

Tensor safe_reciprocal(const Tensor& x) {
  const Eigen::VectorXd v =
      x.values().unaryExpr([](double t) { return t == 0.0 ? 0.0 : 1.0 / t; });
  return record("safe_reciprocal", {x}, x.shape(), v,
                rule([x](const Tensor& g, const std::vector<bool>&) {
                  const Tensor r = safe_reciprocal(x);
                  return Grads{mul(g, neg(mul(r, r)))};
                }));
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) fail("clamp", "lo > hi");
  const Eigen::VectorXd mask =
      (x.values().array() > lo && x.values().array() < hi).cast<double>();
  return record("clamp", {x}, x.shape(), x.values().cwiseMax(lo).cwiseMin(hi),
                rule([m = mask_like(x, mask)](const Tensor& g, const std::vector<bool>&) {
                  return Grads{mul(g, m)};
                }));
}

Tensor sum(const Tensor& x) {
  return record("sum", {x}, {}, Eigen::VectorXd::Constant(1, x.values().sum()),
                rule([shape = x.shape()](const Tensor& g, const std::vector<bool>&) {
                  return Grads{expand(g, shape)};
                }));
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) fail("mean", "empty input");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor expand(const Tensor& s, const Shape& shape) {
  if (s.size() != 1) fail("expand", "input must hold one value, got " + shape_string(s.shape()));
  return record("expand", {s}, shape, Eigen::VectorXd::Constant(shape_size(shape), s.values()[0]),
                rule([sshape = s.shape()](const Tensor& g, const std::vector<bool>&) {
                  return Grads{reshape(sum(g), sshape)};
                }));
}

Tensor row_sum(const Tensor& x) {
  require_rank("row_sum", x, 2);
  const Index c = x.dim(1);
  Eigen::VectorXd v = x.matrix().rowwise().sum();
  return record("row_sum", {x}, {x.dim(0), 1}, std::move(v),
                rule([c](const Tensor& g, const std::vector<bool>&) {
                  return Grads{broadcast_cols(g, c)};
                }));
}

Tensor col_sum(const Tensor& x) {
  require_rank("col_sum", x, 2);
  const Index n = x.dim(0);
  Eigen::VectorXd v = x.matrix().colwise().sum().transpose();
  return record("col_sum", {x}, {1, x.dim(1)}, std::move(v),
                rule([n](const Tensor& g, const std::vector<bool>&) {
                  return Grads{broadcast_rows(g, n)};
                }));
}

Tensor broadcast_cols(const Tensor& x, Index c) {
  if (x.rank() != 2 || x.dim(1) != 1) {
    fail("broadcast_cols", "expected [n,1], got " + shape_string(x.shape()));
  }
  const Index n = x.dim(0);
  Eigen::VectorXd v(n * c);
  Eigen::Map<RowMatrix>(v.data(), n, c) = x.values().replicate(1, c);
  return record("broadcast_cols", {x}, {n, c}, std::move(v),
                rule([](const Tensor& g, const std::vector<bool>&) {
                  return Grads{row_sum(g)};
                }));
}

Tensor broadcast_rows(const Tensor& x, Index n) {
  if (x.rank() != 2 || x.dim(0) != 1) {
    fail("broadcast_rows", "expected [1,c], got " + shape_string(x.shape()));
  }
  const Index c = x.dim(1);
  Eigen::VectorXd v(n * c);
  Eigen::Map<RowMatrix>(v.data(), n, c) = x.matrix().replicate(n, 1);
  return record("broadcast_rows", {x}, {n, c}, std::move(v),
                rule([](const Tensor& g, const std::vector<bool>&) {
                  return Grads{col_sum(g)};
                }));
}

Tensor row_norm(const Tensor& x) {
  require_rank("row_norm", x, 2);
  return sqrt(row_sum(mul(x, x)));
}

Tensor norm(const Tensor& x) { return sqrt(sum(mul(x, x))); }

Tensor reshape(const Tensor& x, const Shape& shape) {
  if (shape_size(shape) != x.size()) {
    fail("reshape", "cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  return record("reshape", {x}, shape, x.values(),
                rule([from = x.shape()](const Tensor& g, const std::vector<bool>&) {
                  return Grads{reshape(g, from)};
                }));
}

Tensor transpose(const Tensor& x) {
  require_rank("transpose", x, 2);
  const Index m = x.dim(0), n = x.dim(1);
  Eigen::VectorXd v(m * n);
  Eigen::Map<RowMatrix>(v.data(), n, m) = x.matrix().transpose();
  return record("transpose", {x}, {n, m}, std::move(v),
                rule([](const Tensor& g, const std::vector<bool>&) {
                  return Grads{transpose(g)};
                }));
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) fail("concat_cols", "no inputs");
  const Index n = parts[0].rank() == 2 ? parts[0].dim(0) : -1;
  Index total = 0;
  std::vector<Index> offsets;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.dim(0) != n) {
      fail("concat_cols", "row count mismatch at " + shape_string(p.shape()));
    }
    offsets.push_back(total);
    total += p.dim(1);
  }
  Eigen::VectorXd v(n * total);
  Eigen::Map<RowMatrix> out(v.data(), n, total);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    out.middleCols(offsets[i], parts[i].dim(1)) = parts[i].matrix();
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  std::vector<Index> widths;
  for (const Tensor& p : parts) widths.push_back(p.dim(1));
  return record("concat_cols", inputs, {n, total}, std::move(v),
                rule([offsets, widths](const Tensor& g, const std::vector<bool>& needs) {
                  Grads out(offsets.size());
                  for (std::size_t i = 0; i < offsets.size(); ++i) {
                    if (needs[i]) out[i] = slice_cols(g, offsets[i], offsets[i] + widths[i]);
                  }
                  return out;
                }));
}

Tensor slice_cols(const Tensor& x, Index begin, Index end) {
  require_rank("slice_cols", x, 2);
  if (begin < 0 || end > x.dim(1) || begin > end) {
    fail("slice_cols", "range [" + std::to_string(begin) + "," + std::to_string(end) +
                           ") outside " + shape_string(x.shape()));
  }
  const Index n = x.dim(0), w = end - begin, total = x.dim(1);
  Eigen::VectorXd v(n * w);
  Eigen::Map<RowMatrix>(v.data(), n, w) = x.matrix().middleCols(begin, w);
  return record("slice_cols", {x}, {n, w}, std::move(v),
                rule([begin, total](const Tensor& g, const std::vector<bool>&) {
                  return Grads{pad_cols(g, begin, total)};
                }));
}

Tensor pad_cols(const Tensor& x, Index begin, Index total) {
  require_rank("pad_cols", x, 2);
  const Index n = x.dim(0), w = x.dim(1);
  if (begin < 0 || begin + w > total) fail("pad_cols", "padding range out of bounds");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n * total);
  Eigen::Map<RowMatrix>(v.data(), n, total).middleCols(begin, w) = x.matrix();
  return record("pad_cols", {x}, {n, total}, std::move(v),
                rule([begin, w](const Tensor& g, const std::vector<bool>&) {
                  return Grads{slice_cols(g, begin, begin + w)};
                }));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    fail("matmul", "shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) +
                       " do not conform");
  }
  const Index m = a.dim(0), n = b.dim(1);
  Eigen::VectorXd v(m * n);
  Eigen::Map<RowMatrix>(v.data(), m, n).noalias() = a.matrix() * b.matrix();
  return record("matmul", {a, b}, {m, n}, std::move(v),
                rule([a, b](const Tensor& g, const std::vector<bool>& needs) {
                  return Grads{needs[0] ? matmul(g, transpose(b)) : Tensor(),
                               needs[1] ? matmul(transpose(a), g) : Tensor()};
                }));
}

Tensor spmm(const SparseMatrix& s, const Tensor& x) {
  if (x.rank() != 2 || x.dim(0) != s.cols()) {
    fail("spmm", "sparse " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                     " times " + shape_string(x.shape()));
  }
  const Index m = s.rows(), f = x.dim(1);
  Eigen::VectorXd v(m * f);
  Eigen::Map<RowMatrix>(v.data(), m, f).noalias() = s.eigen() * x.matrix();
  return record("spmm", {x}, {m, f}, std::move(v),
                rule([st = s.transpose()](const Tensor& g, const std::vector<bool>&) {
                  return Grads{spmm(st, g)};
                }));
}

Tensor gather_rows(const Tensor& x, std::shared_ptr<const IndexList> index) {
  require_rank("gather_rows", x, 2);
  const Index n = x.dim(0), c = x.dim(1);
  const Index m = static_cast<Index>(index->size());
  Eigen::VectorXd v(m * c);
  const double* src = x.values().data();
  for (Index r = 0; r < m; ++r) {
    const Index i = (*index)[static_cast<std::size_t>(r)];
    if (i < 0 || i >= n) fail("gather_rows", "index " + std::to_string(i) + " out of range");
    for (Index k = 0; k < c; ++k) v[r * c + k] = src[i * c + k];
  }
  return record("gather_rows", {x}, {m, c}, std::move(v),
                rule([index, n](const Tensor& g, const std::vector<bool>&) {
                  return Grads{scatter_rows(g, index, n)};
                }));
}

Tensor scatter_rows(const Tensor& x, std::shared_ptr<const IndexList> index, Index rows) {
  require_rank("scatter_rows", x, 2);
  const Index m = x.dim(0), c = x.dim(1);
  if (static_cast<Index>(index->size()) != m) {
    fail("scatter_rows", "index count does not match " + shape_string(x.shape()));
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(rows * c);
  const double* src = x.values().data();
  for (Index r = 0; r < m; ++r) {
    const Index i = (*index)[static_cast<std::size_t>(r)];
    if (i < 0 || i >= rows) fail("scatter_rows", "index " + std::to_string(i) + " out of range");
    for (Index k = 0; k < c; ++k) v[i * c + k] += src[r * c + k];
  }
  return record("scatter_rows", {x}, {rows, c}, std::move(v),
                rule([index](const Tensor& g, const std::vector<bool>&) {
                  return Grads{gather_rows(g, index)};
                }));
}

Tensor im2col(const Tensor& image, Index kernel) {
  require_rank("im2col", image, 3);
  if (kernel < 1 || kernel % 2 == 0) fail("im2col", "kernel size must be odd");
  const Index h = image.dim(0), w = image.dim(1), c = image.dim(2);
  const Index r = kernel / 2, width = kernel * kernel * c;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(h * w * width);
  const double* src = image.values().data();
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      double* row = v.data() + (y * w + x) * width;
      for (Index dy = 0; dy < kernel; ++dy) {
        const Index sy = y + dy - r;
        if (sy < 0 || sy >= h) continue;
        for (Index dx = 0; dx < kernel; ++dx) {
          const Index sx = x + dx - r;
          if (sx < 0 || sx >= w) continue;
          const double* px = src + (sy * w + sx) * c;
          double* dst = row + (dy * kernel + dx) * c;
          for (Index k = 0; k < c; ++k) dst[k] = px[k];
        }
      }
    }
  }
  return record("im2col", {image}, {h * w, width}, std::move(v),
                rule([h, w, c, kernel](const Tensor& g, const std::vector<bool>&) {
                  return Grads{col2im(g, h, w, c, kernel)};
                }));
}

Tensor col2im(const Tensor& cols, Index h, Index w, Index c, Index kernel) {
  if (kernel < 1 || kernel % 2 == 0) fail("col2im", "kernel size must be odd");
  const Index width = kernel * kernel * c;
  if (cols.rank() != 2 || cols.dim(0) != h * w || cols.dim(1) != width) {
    fail("col2im", "shape " + shape_string(cols.shape()) + " does not match image " +
                       shape_string({h, w, c}));
  }
  const Index r = kernel / 2;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(h * w * c);
  const double* src = cols.values().data();
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      const double* row = src + (y * w + x) * width;
      for (Index dy = 0; dy < kernel; ++dy) {
        const Index sy = y + dy - r;
        if (sy < 0 || sy >= h) continue;
        for (Index dx = 0; dx < kernel; ++dx) {
          const Index sx = x + dx - r;
          if (sx < 0 || sx >= w) continue;
          double* px = v.data() + (sy * w + sx) * c;
          const double* s = row + (dy * kernel + dx) * c;
          for (Index k = 0; k < c; ++k) px[k] += s[k];
        }
      }
    }
  }
  return record("col2im", {cols}, {h, w, c}, std::move(v),
                rule([kernel](const Tensor& g, const std::vector<bool>&) {
                  return Grads{im2col(g, kernel)};
                }));
}

Tensor conv2d(const Tensor& image, const Tensor& weights) {
  require_rank("conv2d", image, 3);
  if (weights.rank() != 4 || weights.dim(0) != weights.dim(1) ||
      weights.dim(2) != image.dim(2)) {
    fail("conv2d", "weights " + shape_string(weights.shape()) + " incompatible with image " +
                       shape_string(image.shape()));
  }
  const Index k = weights.dim(0), ci = weights.dim(2), co = weights.dim(3);
  Tensor cols = im2col(image, k);
  Tensor y = matmul(cols, reshape(weights, {k * k * ci, co}));
  return reshape(y, {image.dim(0), image.dim(1), co});
}

Tensor maxpool2d(const Tensor& image) {
  require_rank("maxpool2d", image, 3);
  const Index h = image.dim(0), w = image.dim(1), c = image.dim(2);
  if (h % 2 != 0 || w % 2 != 0) {
    fail("maxpool2d", "spatial size " + shape_string(image.shape()) + " is not even");
  }
  const Index oh = h / 2, ow = w / 2;
  auto index = std::make_shared<IndexList>(static_cast<std::size_t>(oh * ow * c));
  const double* src = image.values().data();
  for (Index y = 0; y < oh; ++y) {
    for (Index x = 0; x < ow; ++x) {
      for (Index k = 0; k < c; ++k) {
        Index best = ((2 * y) * w + 2 * x) * c + k;
        for (Index dy = 0; dy < 2; ++dy) {
          for (Index dx = 0; dx < 2; ++dx) {
            const Index at = ((2 * y + dy) * w + 2 * x + dx) * c + k;
            if (src[at] > src[best]) best = at;
          }
        }
        (*index)[static_cast<std::size_t>((y * ow + x) * c + k)] = best;
      }
    }
  }
  Tensor picked = gather_rows(reshape(image, {h * w * c, 1}), std::move(index));
  return reshape(picked, {oh, ow, c});
}

Tensor custom_op(std::string_view name, std::vector<Tensor> inputs, Tensor value, GradFn grad,
                 bool higher_order) {
  return record(name, std::move(inputs), value.shape(), value.values(),
                {std::move(grad), higher_order});
}

namespace {

using OpFn = std::function<Tensor(std::span<const Tensor>, const OpAttrs&)>;

struct OpEntry {
  std::size_t arity;  // 0 = variadic
  OpFn fn;
};

const std::map<std::string, OpEntry, std::less<>>& registry() {
  static const std::map<std::string, OpEntry, std::less<>> ops = [] {
    std::map<std::string, OpEntry, std::less<>> m;
    auto real = [](const OpAttrs& a, std::size_t i, std::string_view op) {
      if (a.reals.size() <= i) fail(op, "missing real attribute");
      return a.reals[i];
    };
    auto integer = [](const OpAttrs& a, std::size_t i, std::string_view op) {
      if (a.ints.size() <= i) fail(op, "missing integer attribute");
      return a.ints[i];
    };
    m["add"] = {2, [](auto in, auto&) { return add(in[0], in[1]); }};
    m["sub"] = {2, [](auto in, auto&) { return sub(in[0], in[1]); }};
    m["mul"] = {2, [](auto in, auto&) { return mul(in[0], in[1]); }};
    m["div"] = {2, [](auto in, auto&) { return div(in[0], in[1]); }};
    m["matmul"] = {2, [](auto in, auto&) { return matmul(in[0], in[1]); }};
    m["spmm"] = {1, [](auto in, const OpAttrs& a) {
                   if (!a.sparse) fail("spmm", "missing sparse attribute");
                   return spmm(*a.sparse, in[0]);
                 }};
    m["concat_cols"] = {0, [](auto in, auto&) { return concat_cols(in); }};
    m["biased_relu"] = {2, [](auto in, auto&) { return biased_relu(in[0], in[1]); }};
    m["relu"] = {1, [](auto in, auto&) { return relu(in[0]); }};
    m["tanh"] = {1, [](auto in, auto&) { return tanh(in[0]); }};
    m["sin"] = {1, [](auto in, auto&) { return sin(in[0]); }};
    m["cos"] = {1, [](auto in, auto&) { return cos(in[0]); }};
    m["sqrt"] = {1, [](auto in, auto&) { return sqrt(in[0]); }};
    m["slice_cols"] = {1, [integer](auto in, const OpAttrs& a) {
                         return slice_cols(in[0], integer(a, 0, "slice_cols"),
                                           integer(a, 1, "slice_cols"));
                       }};
    m["sum"] = {1, [](auto in, auto&) { return sum(in[0]); }};
    m["mean"] = {1, [](auto in, auto&) { return mean(in[0]); }};
    m["l2norm"] = {1, [](auto in, auto&) { return norm(in[0]); }};
    m["row_norm"] = {1, [](auto in, auto&) { return row_norm(in[0]); }};
    m["pow"] = {1, [real](auto in, const OpAttrs& a) {
                  return pow(in[0], real(a, 0, "pow"));
                }};
    m["scale"] = {1, [real](auto in, const OpAttrs& a) {
                    return scale(in[0], real(a, 0, "scale"));
                  }};
    m["clamp"] = {1, [real](auto in, const OpAttrs& a) {
                    return clamp(in[0], real(a, 0, "clamp"), real(a, 1, "clamp"));
                  }};
    m["reshape"] = {1, [](auto in, const OpAttrs& a) { return reshape(in[0], a.shape); }};
    m["transpose"] = {1, [](auto in, auto&) { return transpose(in[0]); }};
    m["conv2d"] = {2, [](auto in, auto&) { return conv2d(in[0], in[1]); }};
    m["maxpool2d"] = {1, [](auto in, auto&) { return maxpool2d(in[0]); }};
    return m;
  }();
  return ops;
}

}  // namespace

Tensor forward_op(std::string_view name, std::span<const Tensor> inputs, const OpAttrs& attrs) {
  const auto& ops = registry();
  auto it = ops.find(name);
  if (it == ops.end()) {
    throw UnsupportedOperation("forward_op: unsupported operation '" + std::string(name) + "'");
  }
  if (it->second.arity != 0 && inputs.size() != it->second.arity) {
    fail(name, "expected " + std::to_string(it->second.arity) + " inputs, got " +
                   std::to_string(inputs.size()));
  }
  return it->second.fn(inputs, attrs);
}

std::vector<std::string> registered_ops() {
  std::vector<std::string> names;
  for (const auto& [name, entry] : registry()) names.push_back(name);
  return names;
}

}  // namespace facegcn::ad
