#include "teamemb/autograd.hpp"

#include <unordered_set>
#include <utility>

namespace teamemb {

template <typename T>
BasicVar<T> BasicVar<T>::parameter(BasicTensor<T> value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->value.zero_grad();
  return BasicVar(std::move(node));
}

template <typename T>
BasicVar<T> BasicVar<T>::constant(BasicTensor<T> value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return BasicVar(std::move(node));
}

template <typename T>
BasicVar<T> BasicVar<T>::from_op(BasicTensor<T> value, std::vector<BasicVar> parents,
                                 BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const BasicVar& p : parents) {
    if (p.node_->requires_grad) node->requires_grad = true;
  }
  if (node->requires_grad) {
    node->parents.reserve(parents.size());
    for (BasicVar& p : parents) node->parents.push_back(std::move(p.node_));
    node->backward = std::move(backward);
  }
  return BasicVar(std::move(node));
}

template <typename T>
void BasicVar<T>::backward() const {
  if (node_->value.size() != 1) {
    throw DimensionError("backward() needs a single-element result, got shape " +
                         shape_string(node_->value.shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order of the graph.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (n->backward) {
      n->value.zero_grad();
    } else {
      n->value.enable_grad();
    }
  }
  node_->value.grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

template class BasicVar<float>;
template class BasicVar<double>;

}  // namespace teamemb
