#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "fourier/nn/autograd.hpp"
#include "fourier/nn/ops.hpp"

namespace fourier::nn {

enum class Activation { gelu, relu };

/// Weight initializer: normal(0, stddev) for projections, zeros for biases
/// and ones for normalization gains. Draw order follows registration order,
/// so a fixed seed reproduces the same parameters.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed, double stddev = 0.02) : rng_(seed), stddev_(stddev) {}

  template <typename T>
  Tensor<T> normal(Shape shape) {
    Tensor<T> t(std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev_);
    for (auto& v : t.values()) v = static_cast<T>(dist(rng_));
    return t;
  }

 private:
  std::mt19937_64 rng_;
  double stddev_;
};

template <typename T>
struct Linear {
  Parameter<T>* weight = nullptr;
  Parameter<T>* bias = nullptr;

  static Linear make(ParameterSet<T>& ps, const std::string& name, std::size_t in, std::size_t out, Initializer& init,
                     bool with_bias = true) {
    Linear l;
    l.weight = &ps.add(name + ".weight", init.normal<T>({in, out}));
    if (with_bias) l.bias = &ps.add(name + ".bias", Tensor<T>({out}));
    return l;
  }

  Var<T> operator()(Graph<T>& g, const Var<T>& x) const {
    return linear(g, x, g.param(*weight), bias ? g.param(*bias) : Var<T>{});
  }
};

template <typename T>
struct LayerNorm {
  Parameter<T>* gain = nullptr;
  Parameter<T>* bias = nullptr;
  double eps = 1e-12;

  static LayerNorm make(ParameterSet<T>& ps, const std::string& name, std::size_t dim) {
    LayerNorm n;
    n.gain = &ps.add(name + ".gain", Tensor<T>({dim}, T(1)));
    n.bias = &ps.add(name + ".bias", Tensor<T>({dim}));
    return n;
  }

  Var<T> operator()(Graph<T>& g, const Var<T>& x) const {
    return layer_norm(g, x, g.param(*gain), g.param(*bias), eps);
  }
};

/// Position-wise two-layer network.
template <typename T>
struct FeedForward {
  Linear<T> up;
  Linear<T> down;
  Activation activation = Activation::gelu;

  static FeedForward make(ParameterSet<T>& ps, const std::string& name, std::size_t dim, std::size_t hidden,
                          Initializer& init, Activation act) {
    return {Linear<T>::make(ps, name + ".up", dim, hidden, init), Linear<T>::make(ps, name + ".down", hidden, dim, init),
            act};
  }

  Var<T> operator()(Graph<T>& g, const Var<T>& x) const {
    auto h = up(g, x);
    h = activation == Activation::gelu ? gelu(g, h) : relu(g, h);
    return down(g, h);
  }
};

template <typename T>
struct MultiHeadAttention {
  Linear<T> query, key, value, output;
  std::size_t heads = 1;

  static MultiHeadAttention make(ParameterSet<T>& ps, const std::string& name, std::size_t dim, std::size_t heads,
                                 Initializer& init) {
    detail::require_config(heads >= 1 && dim % heads == 0,
                           "model dim " + std::to_string(dim) + " is not divisible by " + std::to_string(heads) + " heads");
    return {Linear<T>::make(ps, name + ".query", dim, dim, init), Linear<T>::make(ps, name + ".key", dim, dim, init),
            Linear<T>::make(ps, name + ".value", dim, dim, init), Linear<T>::make(ps, name + ".output", dim, dim, init),
            heads};
  }

  /// Queries from `x`, keys and values from `context` (pass x for self-attention).
  Var<T> operator()(Graph<T>& g, const Var<T>& x, const Var<T>& context, const AttentionMask& mask) const {
    Var<T> mixed;
    {
      auto q = query(g, x);
      auto k = key(g, context);
      auto v = value(g, context);
      mixed = attention(g, q, k, v, heads, mask);
    }
    return output(g, mixed);
  }
};

template <typename T>
Tensor<T> sinusoidal_positions(std::size_t max_len, std::size_t dim) {
  Tensor<T> table({max_len, dim});
  for (std::size_t pos = 0; pos < max_len; ++pos)
    for (std::size_t i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double angle = static_cast<double>(pos) * rate;
      table(pos, i) = static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  return table;
}

enum class Positional { sinusoidal, learned };

/// Token lookup plus additive positional encoding.
template <typename T>
struct Embedding {
  Parameter<T>* table = nullptr;
  Parameter<T>* positions = nullptr;  // learned only
  Tensor<T> fixed_positions;          // sinusoidal only

  static Embedding make(ParameterSet<T>& ps, const std::string& name, std::size_t vocab, std::size_t dim,
                        std::size_t max_len, Positional kind, Initializer& init) {
    Embedding e;
    e.table = &ps.add(name + ".tokens", init.normal<T>({vocab, dim}));
    if (kind == Positional::learned) {
      e.positions = &ps.add(name + ".positions", init.normal<T>({max_len, dim}));
    } else {
      e.fixed_positions = sinusoidal_positions<T>(max_len, dim);
    }
    return e;
  }

  std::size_t max_len() const { return positions ? positions->data.dim(0) : fixed_positions.dim(0); }

  Var<T> operator()(Graph<T>& g, const TokenBatch& tokens) const {
    detail::require(tokens.length <= max_len(), "embed: sequence length " + std::to_string(tokens.length) +
                                                    " exceeds max_len " + std::to_string(max_len()));
    auto x = embedding(g, g.param(*table), tokens);
    return add_rows(g, x, positions ? g.param(*positions) : g.constant(fixed_positions));
  }
};

}  // namespace fourier::nn
