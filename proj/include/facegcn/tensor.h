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

#ifndef FACEGCN_TENSOR_H_
#define FACEGCN_TENSOR_H_

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace facegcn::ad {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Index shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tape;

namespace detail {
struct TensorAccess;
struct TensorImpl {
  std::uint64_t id = 0;
  Shape shape;
  Eigen::VectorXd data;
  bool requires_grad = false;
  const Tape* tape = nullptr;  // producing tape, null for leaves
  std::size_t node = 0;
};
}  // namespace detail

// Dense row-major array of doubles with shared, reference-counted storage.
// Copying a Tensor copies the handle; two handles with the same id() refer
// to the same value.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, Eigen::VectorXd values, bool requires_grad = false);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor from_matrix(const Eigen::Ref<const RowMatrix>& m);
  // Trainable leaf.
  static Tensor parameter(Shape shape, Eigen::VectorXd values);

  bool defined() const { return impl_ != nullptr; }
  std::uint64_t id() const;
  const Shape& shape() const;
  Index rank() const { return static_cast<Index>(shape().size()); }
  Index dim(Index axis) const;
  Index size() const;

  const Eigen::VectorXd& values() const;
  // Rank-2 view; rank-1 tensors are viewed as a single row.
  Eigen::Map<const RowMatrix> matrix() const;
  double item() const;
  double operator[](Index i) const { return values()[i]; }

  bool requires_grad() const;
  // True when no recorded operation produced this tensor.
  bool is_leaf() const;
  // Same values under a fresh id, never recorded.
  Tensor detach() const;

  // In-place update for leaves (optimizer steps, finite differences).
  Eigen::VectorXd& mutable_values();

 private:
  friend struct detail::TensorAccess;
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Backward rule: receives the gradient of the op output and a mask of the
// inputs whose gradients are wanted. Returns one entry per input (undefined
// tensors for inputs that were not requested). Rules that are themselves
// written with recorded ops support one further level of differentiation.
using GradFn = std::function<std::vector<Tensor>(const Tensor& grad,
                                                 const std::vector<bool>& needs)>;

struct GradFnHolder {
  GradFn fn;
  bool higher_order = true;
};

class Tape {
 public:
  struct Node {
    std::string op;
    std::vector<Tensor> inputs;
    std::uint64_t output_id = 0;
    Shape output_shape;
    GradFn grad_fn;
    bool higher_order = true;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  void clear() { nodes_.clear(); }

 private:
  friend struct detail::TensorAccess;
  std::vector<Node> nodes_;
};

// Makes `tape` the recording target for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording for the current thread.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

// Creates the output tensor of an op. When a tape is active and any input
// requires a gradient the op is appended to the tape.
Tensor record(std::string_view op, std::vector<Tensor> inputs, Shape shape,
              Eigen::VectorXd values, GradFnHolder grad);

class GradientMap {
 public:
  bool contains(const Tensor& t) const;
  // Gradient for `t`, or zeros of t's shape when t was unreachable.
  Tensor operator[](const Tensor& t) const;
  std::size_t size() const { return grads_.size(); }

 private:
  friend struct detail::TensorAccess;
  std::unordered_map<std::uint64_t, Tensor> grads_;
};

struct BackwardOptions {
  // Record the backward pass so the returned gradients can be differentiated
  // again (used by the gradient penalty).
  bool create_graph = false;
  // Restrict propagation to paths reaching these tensors; empty means every
  // tensor that requires a gradient.
  std::vector<Tensor> inputs;
};

GradientMap backward(Tape& tape, const Tensor& loss,
                     const BackwardOptions& options = {});

}  // namespace facegcn::ad

#endif  // FACEGCN_TENSOR_H_
