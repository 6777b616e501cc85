#include "hsr/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "hsr/error.hpp"

namespace hsr {

namespace {
thread_local bool grad_disabled = false;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(grad_disabled) { grad_disabled = true; }
NoGradGuard::~NoGradGuard() { grad_disabled = previous_; }

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return filled(shape, 0.0, requires_grad);
}

Tensor Tensor::filled(const Shape& shape, double value, bool requires_grad) {
  return from(shape, std::vector<double>(shape.numel(), value), requires_grad);
}

Tensor Tensor::from(const Shape& shape, std::vector<double> values, bool requires_grad) {
  if (values.size() != shape.numel()) {
    throw ShapeError("tensor data length " + std::to_string(values.size()) +
                     " does not match shape " + shape.str());
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = shape;
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1, 1, 1, 1}, {value}, requires_grad);
}

detail::Node& Tensor::checked() const {
  if (!node_) throw std::logic_error("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::span<const double> Tensor::data() const { return checked().data; }

std::span<double> Tensor::mutable_data() {
  auto& node = checked();
  if (!node.inputs.empty()) throw std::logic_error("cannot write into a non-leaf tensor");
  return node.data;
}

bool Tensor::requires_grad() const { return checked().requires_grad; }

bool Tensor::has_grad() const { return !checked().grad.empty(); }

std::span<const double> Tensor::grad() const { return checked().grad; }

std::span<double> Tensor::mutable_grad() {
  auto& node = checked();
  if (node.grad.empty()) node.grad.assign(node.data.size(), 0.0);
  return node.grad;
}

void Tensor::zero_grad() {
  auto& node = checked();
  std::fill(node.grad.begin(), node.grad.end(), 0.0);
}

double Tensor::item() const {
  const auto& node = checked();
  if (node.data.size() != 1) throw ShapeError("item() on non-scalar tensor " + node.shape.str());
  return node.data[0];
}

double Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  const auto& s = shape();
  return data()[((n * s.c + c) * s.h + h) * s.w + w];
}

Tensor Tensor::detach() const {
  const auto& node = checked();
  return from(node.shape, node.data, false);
}

Tensor Tensor::make_result(const Shape& shape, std::vector<double> values,
                           std::vector<Tensor> inputs, detail::BackwardFn backward) {
  auto node = std::make_shared<detail::Node>();
  node->shape = shape;
  node->data = std::move(values);
  bool any = false;
  if (!grad_disabled)
    for (const auto& in : inputs) any = any || in.requires_grad();
  if (any) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + loss.shape().str());
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Work buffers keep this pass separate from previously accumulated grads.
  std::unordered_map<detail::Node*, std::vector<double>> work;
  work[loss.node().get()] = {1.0};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    auto found = work.find(node);
    if (found == work.end()) continue;
    std::vector<double> g = std::move(found->second);
    work.erase(found);

    if (node->backward) {
      std::vector<std::span<double>> slots(node->inputs.size());
      for (std::size_t i = 0; i < node->inputs.size(); ++i) {
        detail::Node* in = node->inputs[i].get();
        if (!in->requires_grad) continue;
        auto& buf = work[in];
        if (buf.empty()) buf.assign(in->data.size(), 0.0);
        slots[i] = buf;
      }
      node->backward(g, slots);
    }

    if (node->grad.empty()) {
      node->grad = std::move(g);
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) node->grad[i] += g[i];
    }
  }
}

}  // namespace hsr
