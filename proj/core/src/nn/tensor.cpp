#include "clothdiff/nn/tensor.hpp"

#include <unordered_set>

#include "clothdiff/error.hpp"

namespace clothdiff::nn {

namespace {

std::shared_ptr<Node> make_node(const std::vector<int>& shape, std::vector<double> values,
                                bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->values = std::move(values);
  n->requires_grad = requires_grad;
  if (static_cast<int64_t>(n->values.size()) != n->numel())
    throw DomainError("tensor: value count does not match shape " + shape_str(shape));
  return n;
}

}  // namespace

Tensor Tensor::zeros(const std::vector<int>& shape, bool requires_grad) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return wrap(make_node(shape, std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(const std::vector<int>& shape, double value, bool requires_grad) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return wrap(make_node(shape, std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from_values(const std::vector<int>& shape, std::vector<double> values, bool requires_grad) {
  return wrap(make_node(shape, std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return wrap(make_node({}, {value}, requires_grad));
}

Tensor Tensor::randn(const std::vector<int>& shape, Rng& rng, double stddev, bool requires_grad) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(0.0, stddev);
  return wrap(make_node(shape, std::move(v), requires_grad));
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) throw DomainError("tensor: gradient not populated");
  return node_->grad;
}

double Tensor::item() const {
  if (numel() != 1) throw DomainError("tensor: item() on non-scalar of shape " + shape_str(shape()));
  return node_->values[0];
}

double Tensor::at(const std::vector<int>& index) const {
  if (static_cast<int>(index.size()) != ndim()) throw DomainError("tensor: index rank mismatch");
  int64_t flat = 0;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= node_->shape[i]) throw DomainError("tensor: index out of range");
    flat = flat * node_->shape[i] + index[i];
  }
  return node_->values[flat];
}

Tensor Tensor::detach() const {
  return wrap(make_node(node_->shape, node_->values, false));
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw DomainError("backward: undefined tensor");
  if (loss.numel() != 1) throw DomainError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));

  // topological order by iterative DFS over grad-requiring subgraph
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  if (loss.node()->requires_grad) stack.push_back({loss.node(), 0});
  visited.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].node();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // interior grads are per-sweep scratch; only leaves accumulate across calls
  for (Node* n : order)
    if (n->backward_fn) n->grad.assign(n->values.size(), 0.0);

  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() == n->values.size()) n->backward_fn(*n);
  }
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace clothdiff::nn
