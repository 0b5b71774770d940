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

#include "facegcn/tensor.h"

#include <atomic>
#include <optional>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "facegcn/errors.h"

namespace facegcn::ad {

namespace {

std::atomic<std::uint64_t> next_id{1};
thread_local Tape* current_tape = nullptr;

}  // namespace

namespace detail {

struct TensorAccess {
  static TensorImpl& impl(const Tensor& t) { return *t.impl_; }
  static std::vector<Tape::Node>& nodes(Tape& tape) { return tape.nodes_; }
  static std::unordered_map<std::uint64_t, Tensor>& grads(GradientMap& m) {
    return m.grads_;
  }
  static Tensor make(Shape shape, Eigen::VectorXd values, bool requires_grad) {
    return Tensor(std::move(shape), std::move(values), requires_grad);
  }
};

}  // namespace detail

using detail::TensorAccess;

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, Eigen::VectorXd values, bool requires_grad) {
  for (Index d : shape) {
    if (d < 0) throw ContractViolation("Tensor: negative dimension in " + shape_string(shape));
  }
  if (shape_size(shape) != values.size()) {
    throw ContractViolation("Tensor: shape " + shape_string(shape) + " holds " +
                            std::to_string(shape_size(shape)) + " values, got " +
                            std::to_string(values.size()));
  }
  impl_ = std::make_shared<detail::TensorImpl>();
  impl_->id = next_id.fetch_add(1, std::memory_order_relaxed);
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape) {
  const Index n = shape_size(shape);
  return Tensor(std::move(shape), Eigen::VectorXd::Zero(n));
}

Tensor Tensor::full(Shape shape, double value) {
  const Index n = shape_size(shape);
  return Tensor(std::move(shape), Eigen::VectorXd::Constant(n, value));
}

Tensor Tensor::scalar(double value) {
  return Tensor({}, Eigen::VectorXd::Constant(1, value));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v[i++] = x;
  const Index n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::from_matrix(const Eigen::Ref<const RowMatrix>& m) {
  Eigen::VectorXd v(m.size());
  Eigen::Map<RowMatrix>(v.data(), m.rows(), m.cols()) = m;
  return Tensor({m.rows(), m.cols()}, std::move(v));
}

Tensor Tensor::parameter(Shape shape, Eigen::VectorXd values) {
  return Tensor(std::move(shape), std::move(values), true);
}

std::uint64_t Tensor::id() const { return impl_ ? impl_->id : 0; }

const Shape& Tensor::shape() const {
  if (!impl_) throw ContractViolation("Tensor: use of undefined tensor");
  return impl_->shape;
}

Index Tensor::dim(Index axis) const {
  const Shape& s = shape();
  if (axis < 0) axis += static_cast<Index>(s.size());
  if (axis < 0 || axis >= static_cast<Index>(s.size())) {
    throw ContractViolation("Tensor::dim: axis out of range for " + shape_string(s));
  }
  return s[static_cast<std::size_t>(axis)];
}

Index Tensor::size() const { return values().size(); }

const Eigen::VectorXd& Tensor::values() const {
  if (!impl_) throw ContractViolation("Tensor: use of undefined tensor");
  return impl_->data;
}

Eigen::Map<const RowMatrix> Tensor::matrix() const {
  const Shape& s = shape();
  if (s.size() == 2) return {values().data(), s[0], s[1]};
  if (s.size() <= 1) return {values().data(), 1, values().size()};
  throw ContractViolation("Tensor::matrix: rank-2 view of " + shape_string(s));
}

double Tensor::item() const {
  if (size() != 1) {
    throw ContractViolation("Tensor::item: tensor of shape " + shape_string(shape()));
  }
  return values()[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

bool Tensor::is_leaf() const { return !impl_ || impl_->tape == nullptr; }

Tensor Tensor::detach() const { return Tensor(shape(), values(), false); }

Eigen::VectorXd& Tensor::mutable_values() {
  if (!impl_) throw ContractViolation("Tensor: use of undefined tensor");
  if (impl_->tape != nullptr) {
    throw ContractViolation("Tensor::mutable_values: tensor is a recorded op output");
  }
  return impl_->data;
}

TapeScope::TapeScope(Tape& tape) : previous_(current_tape) { current_tape = &tape; }
TapeScope::~TapeScope() { current_tape = previous_; }

NoGradScope::NoGradScope() : previous_(current_tape) { current_tape = nullptr; }
NoGradScope::~NoGradScope() { current_tape = previous_; }

Tape* active_tape() { return current_tape; }

Tensor record(std::string_view op, std::vector<Tensor> inputs, Shape shape,
              Eigen::VectorXd values, GradFnHolder grad) {
  Tensor out = TensorAccess::make(std::move(shape), std::move(values), false);
  Tape* tape = current_tape;
  if (tape == nullptr) return out;
  bool any = false;
  for (const Tensor& in : inputs) any = any || in.requires_grad();
  if (!any) return out;

  auto& nodes = TensorAccess::nodes(*tape);
  auto& impl = TensorAccess::impl(out);
  impl.requires_grad = true;
  impl.tape = tape;
  impl.node = nodes.size();
  nodes.push_back(Tape::Node{std::string(op), std::move(inputs), impl.id, impl.shape,
                             std::move(grad.fn), grad.higher_order});
  return out;
}

bool GradientMap::contains(const Tensor& t) const {
  return grads_.count(t.id()) != 0;
}

Tensor GradientMap::operator[](const Tensor& t) const {
  auto it = grads_.find(t.id());
  if (it != grads_.end()) return it->second;
  return Tensor::zeros(t.shape());
}

namespace {

Tensor accumulate(const Tensor& a, const Tensor& b) {
  // Plain sum when not recording; a recorded add otherwise.
  if (!a.requires_grad() && !b.requires_grad()) {
    return Tensor(a.shape(), a.values() + b.values());
  }
  Tensor sum = record("add", {a, b}, a.shape(), a.values() + b.values(),
                      {[](const Tensor& g, const std::vector<bool>&) {
                         return std::vector<Tensor>{g, g};
                       }});
  return sum;
}

}  // namespace

GradientMap backward(Tape& tape, const Tensor& loss, const BackwardOptions& options) {
  if (loss.size() != 1) {
    throw ContractViolation("backward: loss must be scalar, got shape " +
                            shape_string(loss.shape()));
  }
  GradientMap result;
  auto& grads = TensorAccess::grads(result);
  if (!loss.requires_grad()) return result;

  auto& nodes = TensorAccess::nodes(tape);
  const auto& loss_impl = TensorAccess::impl(loss);
  if (loss.is_leaf()) {
    grads.emplace(loss.id(), Tensor::full(loss.shape(), 1.0));
    return result;
  }
  if (loss_impl.tape != &tape) {
    throw ContractViolation("backward: loss was not recorded on this tape");
  }
  const std::size_t end = loss_impl.node;

  // Propagation mask: which tensor ids lie downstream of the requested inputs.
  std::unordered_set<std::uint64_t> relevant;
  const bool restrict = !options.inputs.empty();
  if (restrict) {
    for (const Tensor& t : options.inputs) relevant.insert(t.id());
    for (std::size_t i = 0; i <= end; ++i) {
      for (const Tensor& in : nodes[i].inputs) {
        if (relevant.count(in.id())) {
          relevant.insert(nodes[i].output_id);
          break;
        }
      }
    }
  }

  grads.emplace(loss.id(), Tensor::full(loss.shape(), 1.0));

  std::optional<TapeScope> record_scope;
  std::optional<NoGradScope> no_grad_scope;
  if (options.create_graph) {
    record_scope.emplace(tape);
  } else {
    no_grad_scope.emplace();
  }

  for (std::size_t i = end + 1; i-- > 0;) {
    // Copy what we need: the node vector may grow while recording.
    const std::uint64_t out_id = nodes[i].output_id;
    auto git = grads.find(out_id);
    if (git == grads.end()) continue;
    const std::vector<Tensor> inputs = nodes[i].inputs;
    std::vector<bool> needs(inputs.size());
    bool any = false;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      needs[k] = inputs[k].requires_grad() &&
                 (!restrict || relevant.count(inputs[k].id()) != 0);
      any = any || needs[k];
    }
    if (!any) continue;
    if (options.create_graph && !nodes[i].higher_order) {
      throw UnsupportedOperation("backward: op '" + nodes[i].op +
                                 "' does not support higher-order gradients");
    }
    const GradFn fn = nodes[i].grad_fn;
    const Tensor grad_out = git->second;
    std::vector<Tensor> in_grads = fn(grad_out, needs);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      if (!needs[k] || k >= in_grads.size() || !in_grads[k].defined()) continue;
      if (in_grads[k].shape() != inputs[k].shape()) {
        throw std::logic_error("backward: op '" + nodes[i].op + "' produced gradient " +
                               shape_string(in_grads[k].shape()) + " for input " +
                               shape_string(inputs[k].shape()));
      }
      auto [it, inserted] = grads.emplace(inputs[k].id(), in_grads[k]);
      if (!inserted) it->second = accumulate(it->second, in_grads[k]);
    }
  }
  return result;
}

}  // namespace facegcn::ad
