#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hicd {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {
struct Node;
}

/// Gradient of one output with respect to the op's inputs. Spans are empty for
/// inputs that do not require a gradient; ops must only write into the
/// non-empty ones, and must accumulate (+=) rather than assign.
using InputGrads = std::vector<std::span<double>>;
using BackwardFn = std::function<void(std::span<const double> grad_output, InputGrads& input_grads)>;

/// Dense row-major array of doubles with optional reverse-mode gradient tracking.
///
/// Tensor is a handle: copies share the same node. Values are immutable once a
/// node has been produced by an op; only leaves may be mutated in place (the
/// optimizer does this between steps).
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  /// Records an op result. Gradient tracking is attached only when grad mode is
  /// enabled and at least one input requires a gradient.
  static Tensor from_op(std::string_view op, Shape shape, std::vector<double> values,
                        std::vector<Tensor> inputs, BackwardFn backward);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  /// Writable view of a leaf's values. Throws StateError on op results.
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t flat_index) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// Copy of the values with no gradient history.
  Tensor detach() const;
  std::string_view op_name() const;

  const detail::Node* node() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend class ComputationTape;

  std::shared_ptr<detail::Node> node_;
};

namespace detail {
struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
};
}  // namespace detail

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

struct TapeRecord {
  std::string_view op;
  std::size_t id;
  std::vector<std::size_t> input_ids;
};

/// Topologically ordered view of the graph reachable from a root tensor.
/// Every record's inputs appear before it.
class ComputationTape {
 public:
  static ComputationTape record(const Tensor& root);

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  std::vector<TapeRecord> records() const;

  /// Seeds the root with ones and propagates in reverse order. Returns the
  /// number of nodes whose backward function was invoked.
  std::size_t run_backward();

 private:
  std::vector<detail::Node*> nodes_;
  std::shared_ptr<detail::Node> root_;
};

/// Accumulates d(loss)/d(leaf) into every leaf that requires a gradient.
void backward(const Tensor& loss);

}  // namespace hicd
