#pragma once

// Minimal reverse-mode autodiff over dense (N,C,D,H,W) tensors. Nodes record
// their parents and a backward closure; backward() visits the recorded graph
// in reverse creation order exactly once. A graph is single-threaded during
// record/backward; independent graphs may run concurrently (the sequence
// counter and op counter are thread-local).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "swdl/rng.hpp"
#include "swdl/volume.hpp"

namespace swdl::nn {

struct Shape5 {
  std::int64_t n = 1, c = 1, d = 1, h = 1, w = 1;

  std::int64_t numel() const { return n * c * d * h * w; }
  std::int64_t voxels() const { return d * h * w; }
  Shape3 spatial() const { return Shape3{int(d), int(h), int(w)}; }
  bool operator==(const Shape5&) const = default;
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(d) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

// Per-thread op invocation counts, keyed by op name. Used by tests to verify
// the inference contract (no pyramid ops, no DelPU-decoder layers).
class OpCounter {
 public:
  void bump(const std::string& key) { counts_[key]++; }
  std::uint64_t get(const std::string& key) const {
    const auto it = counts_.find(key);
    return it == counts_.end() ? 0 : it->second;
  }
  void reset() { counts_.clear(); }
  const std::map<std::string, std::uint64_t>& counts() const { return counts_; }

 private:
  std::map<std::string, std::uint64_t> counts_;
};

inline OpCounter& op_counter() {
  thread_local OpCounter counter;
  return counter;
}

template <typename T>
struct Node {
  Shape5 shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until backward touches this node
  bool requires_grad = false;
  std::uint64_t seq = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void()> backward_fn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

inline std::uint64_t next_seq() {
  thread_local std::uint64_t counter = 0;
  return ++counter;
}

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape5 s, bool requires_grad = false) {
    Tensor t;
    t.node_ = std::make_shared<Node<T>>();
    t.node_->shape = s;
    t.node_->value.assign(size_t(s.numel()), T(0));
    t.node_->requires_grad = requires_grad;
    t.node_->seq = next_seq();
    return t;
  }

  static Tensor from_data(Shape5 s, std::vector<T> values, bool requires_grad = false) {
    if (std::int64_t(values.size()) != s.numel())
      throw std::invalid_argument("Tensor: data length does not match shape " + s.str());
    Tensor t = zeros(s, requires_grad);
    t.node_->value = std::move(values);
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape5& shape() const { return node_->shape; }
  std::vector<T>& data() { return node_->value; }
  const std::vector<T>& data() const { return node_->value; }
  std::vector<T>& grad() { return node_->grad; }
  const std::vector<T>& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }
  void zero_grad() { node_->grad.clear(); }

  std::shared_ptr<Node<T>> node() const { return node_; }

  // Internal: construct an op result.
  static Tensor make_op(Shape5 s, const char* op, std::vector<Tensor> parents) {
    Tensor t = zeros(s, false);
    t.node_->op = op;
    for (auto& p : parents) {
      t.node_->requires_grad = t.node_->requires_grad || p.node()->requires_grad;
      t.node_->parents.push_back(p.node());
    }
    op_counter().bump(op);
    return t;
  }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Reverse-topological sweep from a scalar loss. Each reachable node with a
// backward closure runs exactly once, highest sequence number first.
template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.shape().numel() != 1)
    throw std::invalid_argument("backward: output must be scalar, got " + loss.shape().str());

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack{loss.node().get()};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    Node<T>* cur = stack.back();
    stack.pop_back();
    order.push_back(cur);
    for (const auto& p : cur->parents)
      if (seen.insert(p.get()).second) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(),
            [](const Node<T>* a, const Node<T>* b) { return a->seq > b->seq; });

  loss.node()->ensure_grad();
  loss.node()->grad[0] += T(1);
  for (Node<T>* n : order)
    if (n->backward_fn && n->requires_grad) n->backward_fn();
}

// Trainable tensor plus its SGD momentum buffer (zero-initialized).
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
  std::vector<T> momentum;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> t)
      : name(std::move(n)), tensor(std::move(t)),
        momentum(size_t(tensor.shape().numel()), T(0)) {
    tensor.set_requires_grad(true);
  }
};

// g <- grad + wd*w; buf <- momentum*buf + g; w <- w - lr*buf; grads cleared.
template <typename T>
void sgd_step(const std::vector<Parameter<T>*>& params, double lr, double momentum,
              double weight_decay) {
  for (auto* p : params)
    if (p->tensor.grad().size() != p->tensor.data().size())
      throw std::runtime_error("sgd_step: missing gradient for " + p->name);
  for (auto* p : params) {
    auto& w = p->tensor.data();
    auto& g = p->tensor.grad();
    auto& buf = p->momentum;
    for (size_t i = 0; i < w.size(); ++i) {
      const T gi = g[i] + T(weight_decay) * w[i];
      buf[i] = T(momentum) * buf[i] + gi;
      w[i] -= T(lr) * buf[i];
    }
    p->tensor.zero_grad();
  }
}

// Kaiming-uniform fan-in init: U(-b, b) with b = sqrt(6 / fan_in).
template <typename T>
void kaiming_uniform(Tensor<T>& t, std::int64_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / double(fan_in));
  for (auto& v : t.data()) v = T(rng.uniform(-bound, bound));
}

// Central finite differences against recorded gradients on a random coordinate
// subsample. 64-bit only; returns the max relative error.
struct GradCheckOptions {
  double eps = 1e-4;
  int min_coords = 32;
  std::uint64_t seed = 1234;
};

inline double grad_check(const std::function<Tensor<double>()>& f,
                         std::vector<Tensor<double>> inputs,
                         GradCheckOptions opts = {}) {
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }
  Tensor<double> out = f();
  if (out.shape().numel() != 1)
    throw std::invalid_argument("grad_check: computation must produce a scalar");
  backward(out);

  std::vector<std::vector<double>> analytic;
  std::int64_t total = 0;
  for (auto& in : inputs) {
    in.node()->ensure_grad();
    analytic.push_back(in.grad());
    total += in.shape().numel();
  }

  Rng rng(opts.seed);
  const std::int64_t n_probe = std::min<std::int64_t>(total, opts.min_coords);
  double max_rel = 0;
  for (std::int64_t probe = 0; probe < n_probe; ++probe) {
    std::int64_t coord = std::int64_t(rng.uniform_index(std::uint64_t(total)));
    size_t which = 0;
    while (coord >= inputs[which].shape().numel()) {
      coord -= inputs[which].shape().numel();
      ++which;
    }
    auto& buf = inputs[which].data();
    const double saved = buf[size_t(coord)];
    buf[size_t(coord)] = saved + opts.eps;
    const double up = f().data()[0];
    buf[size_t(coord)] = saved - opts.eps;
    const double down = f().data()[0];
    buf[size_t(coord)] = saved;
    const double fd = (up - down) / (2 * opts.eps);
    const double ad = analytic[which][size_t(coord)];
    const double rel = std::abs(ad - fd) / std::max(std::abs(ad) + std::abs(fd), 1e-2);
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace swdl::nn
