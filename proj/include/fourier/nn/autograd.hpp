#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "fourier/error.hpp"
#include "fourier/tensor.hpp"

// Reverse-mode differentiation over a recorded tape of the ops in ops.hpp.
// A Graph records every node that depends on a parameter; backward() walks
// the tape in reverse and leaves gradients in Parameter::grad.
namespace fourier::nn {

namespace detail {
using fourier::detail::require;
using fourier::detail::require_config;
}  // namespace detail

template <typename T>
struct Parameter {
  Parameter(std::string name_, Tensor<T> init) : name(std::move(name_)), data(std::move(init)), grad(data.shape()) {}

  void zero_grad() { grad.fill(T{}); }

  std::string name;
  Tensor<T> data;
  Tensor<T> grad;
};

/// Owns parameters in registration order; addresses stay stable.
template <typename T>
class ParameterSet {
 public:
  Parameter<T>& add(std::string name, Tensor<T> init) {
    for (const auto& p : params_)
      detail::require_config(p->name != name, "duplicate parameter name '" + name + "'");
    params_.push_back(std::make_unique<Parameter<T>>(std::move(name), std::move(init)));
    return *params_.back();
  }

  Parameter<T>& at(std::size_t i) { return *params_.at(i); }
  const Parameter<T>& at(std::size_t i) const { return *params_.at(i); }
  std::size_t size() const noexcept { return params_.size(); }

  Parameter<T>* find(const std::string& name) {
    for (auto& p : params_)
      if (p->name == name) return p.get();
    return nullptr;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->data.size();
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
};

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  std::function<void()> backward;
  bool requires_grad = false;

  Tensor<T>& grad_buffer() {
    if (grad.size() != value.size()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
class Graph {
 public:
  /// With record = false nothing is kept for backward and intermediates are
  /// freed as soon as the caller drops them.
  explicit Graph(bool record = true) : record_(record) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const noexcept { return record_; }

  Var<T> constant(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    return n;
  }

  Var<T> param(Parameter<T>& p) {
    auto n = std::make_shared<Node<T>>();
    n->value = p.data;
    if (record_) {
      n->requires_grad = true;
      Node<T>* self = n.get();
      Parameter<T>* target = &p;
      n->backward = [self, target] {
        for (std::size_t i = 0; i < self->grad.size(); ++i) target->grad[i] += self->grad[i];
      };
      tape_.push_back(n);
    }
    return n;
  }

  /// Output node of an op. It joins the tape when any input needs a gradient;
  /// the op then installs `backward` reading `grad` and writing its inputs.
  Var<T> result(Tensor<T> value, std::initializer_list<Var<T>> inputs) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    if (record_) {
      for (const Var<T>& in : inputs)
        if (in && in->requires_grad) n->requires_grad = true;
      if (n->requires_grad) tape_.push_back(n);
    }
    return n;
  }

  void backward(const Var<T>& loss) {
    detail::require(loss->value.size() == 1, "backward: loss must be a scalar");
    detail::require(record_, "backward: graph was built without recording");
    loss->grad_buffer()[0] = T{1};
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
      Node<T>& n = **it;
      if (n.backward && !n.grad.empty()) n.backward();
    }
  }

  std::size_t tape_size() const noexcept { return tape_.size(); }

 private:
  bool record_;
  std::vector<Var<T>> tape_;
};

}  // namespace fourier::nn
