#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "teamemb/tensor.hpp"

namespace teamemb {

// Handle to a node of a dynamically recorded computation graph. Copies share
// the node. Leaves created with `parameter` accumulate gradients across
// backward passes until zeroed; intermediate results own fresh buffers.
template <typename T>
class BasicVar {
 public:
  struct Node;
  // Reads self.value.grad() and accumulates into the parents' gradients.
  using BackwardFn = std::function<void(Node& self)>;

  struct Node {
    BasicTensor<T> value;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    BackwardFn backward;

    // Gradient buffer of parent `i`, or an empty span when it needs none.
    std::span<T> parent_grad(std::size_t i) {
      Node& p = *parents[i];
      return p.requires_grad ? p.value.grad() : std::span<T>{};
    }
    const BasicTensor<T>& parent_value(std::size_t i) const { return parents[i]->value; }
  };

  BasicVar() = default;

  static BasicVar parameter(BasicTensor<T> value);
  static BasicVar constant(BasicTensor<T> value);

  // Builds an op result. The closure is dropped when no parent needs a
  // gradient, so inference graphs do not retain their inputs.
  static BasicVar from_op(BasicTensor<T> value, std::vector<BasicVar> parents,
                          BackwardFn backward);

  bool defined() const { return node_ != nullptr; }
  const BasicTensor<T>& value() const { return node_->value; }
  BasicTensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  std::span<const T> grad() const { return node_->value.grad(); }
  std::span<T> mutable_grad() { return node_->value.grad(); }
  void zero_grad() { node_->value.zero_grad(); }

  // Seeds d(self)/d(self) = 1 on a single-element result and propagates.
  void backward() const;

 private:
  explicit BasicVar(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

using Var = BasicVar<float>;
using VarD = BasicVar<double>;

extern template class BasicVar<float>;
extern template class BasicVar<double>;

}  // namespace teamemb
