#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "clothdiff/rng.hpp"

namespace clothdiff::nn {

class Tensor;

// One value in the dynamically-recorded compute graph. Interior nodes are
// created by ops during the forward pass and own a closure that pulls the
// node's gradient back into its parents; leaves have no closure.
struct Node {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;  // allocated lazily, same length as values
  bool requires_grad{false};
  std::vector<Tensor> parents;
  std::function<void(const Node&)> backward_fn;

  int64_t numel() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

// Value-semantic handle to a graph node. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const std::vector<int>& shape, bool requires_grad = false);
  static Tensor full(const std::vector<int>& shape, double value, bool requires_grad = false);
  static Tensor from_values(const std::vector<int>& shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor randn(const std::vector<int>& shape, Rng& rng, double stddev = 1.0,
                      bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape[i < 0 ? node_->shape.size() + i : i]; }
  int64_t numel() const { return node_->numel(); }

  const std::vector<double>& values() const { return node_->values; }
  std::vector<double>& mutable_values() { return node_->values; }
  const std::vector<double>& grad() const;
  bool has_grad() const { return node_ && node_->grad.size() == node_->values.size(); }
  void zero_grad() { node_->grad.clear(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  double item() const;
  double at(const std::vector<int>& index) const;

  // Leaf copy of the values, detached from the graph.
  Tensor detach() const;

  Node* node() const { return node_.get(); }

  static Tensor wrap(std::shared_ptr<Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<Node> node_;
};

// Reverse-mode sweep from a scalar loss. Populates `grad` on every
// requires_grad node reachable from the loss, accumulating across reuses.
void backward(const Tensor& loss);

// Thread-local graph recording switch; ops create no closures while off.
bool grad_enabled();

struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

std::string shape_str(const std::vector<int>& shape);

}  // namespace clothdiff::nn
