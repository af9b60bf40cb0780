#include "hicd/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>
#include <utility>

#include "hicd/error.hpp"

namespace hicd {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto extent : shape) {
    if (extent == 0) throw DimensionError("tensor: zero extent in shape " + shape_to_string(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor: shape " + shape_to_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->values = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

Tensor Tensor::from_op(std::string_view op, Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                       BackwardFn backward) {
  Tensor out(std::move(shape), std::move(values));
  out.node_->op = op;
  if (!g_grad_enabled) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->inputs.reserve(inputs.size());
  for (auto& in : inputs) out.node_->inputs.push_back(in.node_);
  out.node_->backward = std::move(backward);
  return out;
}

const Shape& Tensor::shape() const {
  if (!node_) throw StateError("tensor: undefined");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw DimensionError("tensor: axis " + std::to_string(axis) + " out of range for " + shape_to_string(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return node_ ? node_->values.size() : 0; }

std::span<const double> Tensor::values() const {
  if (!node_) throw StateError("tensor: undefined");
  return node_->values;
}

std::span<double> Tensor::mutable_values() {
  if (!node_) throw StateError("tensor: undefined");
  if (node_->backward) throw StateError("tensor: op results are immutable");
  return node_->values;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractViolation("item: tensor of shape " + shape_to_string(shape()) + " is not a scalar");
  return node_->values[0];
}

double Tensor::at(std::size_t flat_index) const {
  if (flat_index >= numel()) throw DimensionError("at: index out of range");
  return node_->values[flat_index];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!node_) throw StateError("tensor: undefined");
  if (node_->backward && !flag) throw StateError("tensor: cannot clear requires_grad on an op result; use detach()");
  node_->requires_grad = flag;
}

bool Tensor::is_leaf() const { return node_ && !node_->backward; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!node_) throw StateError("tensor: undefined");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->values, false); }

std::string_view Tensor::op_name() const { return node_ ? node_->op : std::string_view("undefined"); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

ComputationTape ComputationTape::record(const Tensor& root) {
  ComputationTape tape;
  if (!root.defined()) throw StateError("tape: undefined root");
  tape.root_ = root.node_;
  if (!root.requires_grad()) return tape;

  // Iterative post-order DFS; inputs are emitted before their consumers.
  std::unordered_map<detail::Node*, bool> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node_.get(), 0);
  visited[root.node_.get()] = true;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && !visited[child]) {
        visited[child] = true;
        stack.emplace_back(child, 0);
      }
      continue;
    }
    tape.nodes_.push_back(node);
    stack.pop_back();
  }
  return tape;
}

std::vector<TapeRecord> ComputationTape::records() const {
  std::unordered_map<const detail::Node*, std::size_t> ids;
  for (std::size_t i = 0; i < nodes_.size(); ++i) ids[nodes_[i]] = i;
  std::vector<TapeRecord> out;
  out.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    TapeRecord rec{nodes_[i]->op, i, {}};
    for (const auto& in : nodes_[i]->inputs) {
      if (auto it = ids.find(in.get()); it != ids.end()) rec.input_ids.push_back(it->second);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::size_t ComputationTape::run_backward() {
  if (nodes_.empty()) throw ContractViolation("backward: loss does not depend on any tensor requiring a gradient");
  auto* root = nodes_.back();
  if (root->values.size() != 1) {
    throw ContractViolation("backward: loss must be a scalar, got shape " + shape_to_string(root->shape));
  }
  if (root->grad.empty()) root->grad.assign(1, 0.0);
  root->grad[0] += 1.0;

  std::size_t invoked = 0;
  InputGrads input_grads;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    detail::Node* node = *it;
    if (!node->backward) continue;
    if (node->grad.empty()) continue;
    input_grads.clear();
    for (auto& in : node->inputs) {
      if (in->requires_grad) {
        if (in->grad.empty()) in->grad.assign(in->values.size(), 0.0);
        input_grads.emplace_back(in->grad);
      } else {
        input_grads.emplace_back();
      }
    }
    node->backward(node->grad, input_grads);
    ++invoked;
    // Intermediate gradients are not needed once propagated.
    std::vector<double>().swap(node->grad);
  }
  return invoked;
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ContractViolation("backward: undefined loss");
  if (loss.numel() != 1) {
    throw ContractViolation("backward: loss must be a scalar, got shape " + shape_to_string(loss.shape()));
  }
  auto tape = ComputationTape::record(loss);
  tape.run_backward();
}

}  // namespace hicd
