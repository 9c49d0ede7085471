#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "fourier/error.hpp"
#include "fourier/nn/autograd.hpp"
#include "fourier/spectral.hpp"
#include "fourier/tensor.hpp"

// Differentiable ops. Each computes its forward value eagerly and, when the
// graph is recording and an input needs a gradient, installs the matching
// backward closure on the output node.
namespace fourier::nn {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

/// Integer token ids laid out [batch, length].
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<int> ids;

  int at(std::size_t b, std::size_t n) const { return ids[b * length + n]; }
};

/// Keys j < limit(b, i) are visible to query i of batch row b.
struct AttentionMask {
  enum class Kind { none, causal, padding };

  Kind kind = Kind::none;
  std::vector<std::size_t> lengths;  // per batch row, Kind::padding only

  static AttentionMask none() { return {}; }
  static AttentionMask causal() { return {Kind::causal, {}}; }
  static AttentionMask padding(std::vector<std::size_t> lengths) { return {Kind::padding, std::move(lengths)}; }

  std::size_t limit(std::size_t b, std::size_t i, std::size_t keys) const {
    switch (kind) {
      case Kind::none: return keys;
      case Kind::causal: return std::min(keys, i + 1);
      case Kind::padding: return std::clamp<std::size_t>(lengths.at(b), 1, keys);
    }
    return keys;
  }
};

namespace detail {

template <typename T>
MatMap<T> matrix(Tensor<T>& t, std::size_t rows, std::size_t cols, std::size_t stride, std::size_t offset = 0) {
  return MatMap<T>(t.data() + offset, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols),
                   Eigen::OuterStride<>(static_cast<Eigen::Index>(stride)));
}

template <typename T>
ConstMatMap<T> matrix(const Tensor<T>& t, std::size_t rows, std::size_t cols, std::size_t stride,
                      std::size_t offset = 0) {
  return ConstMatMap<T>(t.data() + offset, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols),
                        Eigen::OuterStride<>(static_cast<Eigen::Index>(stride)));
}

/// View of a tensor as [rows, last dim].
template <typename Tens>
auto rows_of(Tens& t) {
  const std::size_t cols = t.shape().back();
  return matrix(t, t.size() / cols, cols, cols);
}

template <typename T>
bool needs(const Var<T>& v) {
  return v && v->requires_grad;
}

template <typename T>
void accumulate(const Var<T>& target, const Tensor<T>& g) {
  auto& buf = target->grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

// Scores, masked softmax and weighted sum for one (batch, head) pair.
template <typename T>
void attention_head(const ConstMatMap<T>& q, const ConstMatMap<T>& k, const ConstMatMap<T>& v, T scale,
                    const AttentionMask& mask, std::size_t b, Eigen::Ref<RowMat<T>> probs, MatMap<T> out) {
  const auto nq = q.rows(), nk = k.rows();
  probs.noalias() = (q * k.transpose()) * scale;
  for (Eigen::Index i = 0; i < nq; ++i) {
    const auto limit = static_cast<Eigen::Index>(mask.limit(b, static_cast<std::size_t>(i), static_cast<std::size_t>(nk)));
    auto row = probs.row(i);
    auto live = row.head(limit);
    const T peak = live.maxCoeff();
    live = (live.array() - peak).exp();
    live /= live.sum();
    if (limit < nk) row.tail(nk - limit).setZero();
  }
  out.noalias() = probs * v;
}

}  // namespace detail

template <typename T>
Var<T> add(Graph<T>& g, const Var<T>& a, const Var<T>& b) {
  detail::require(a->value.shape() == b->value.shape(),
                  "add: shape mismatch " + shape_string(a->value.shape()) + " vs " + shape_string(b->value.shape()));
  Tensor<T> out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b->value[i];
  auto r = g.result(std::move(out), {a, b});
  if (r->requires_grad) {
    Node<T>* self = r.get();
    r->backward = [self, a, b] {
      if (detail::needs(a)) detail::accumulate(a, self->grad);
      if (detail::needs(b)) detail::accumulate(b, self->grad);
    };
  }
  return r;
}

template <typename T>
Var<T> scale(Graph<T>& g, const Var<T>& a, std::type_identity_t<T> s) {
  Tensor<T> out = a->value;
  for (auto& v : out.values()) v *= s;
  auto r = g.result(std::move(out), {a});
  if (r->requires_grad) {
    Node<T>* self = r.get();
    r->backward = [self, a, s] {
      auto& buf = a->grad_buffer();
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += s * self->grad[i];
    };
  }
  return r;
}

/// x[b, n, :] += rows[n, :] for n < time length (rows may be longer).
template <typename T>
Var<T> add_rows(Graph<T>& g, const Var<T>& x, const Var<T>& rows) {
  const auto& xs = x->value.shape();
  detail::require(xs.size() == 3 && rows->value.rank() == 2 && rows->value.dim(1) == xs[2] && rows->value.dim(0) >= xs[1],
                  "add_rows: table " + shape_string(rows->value.shape()) + " does not cover " + shape_string(xs));
  const std::size_t batch = xs[0], n = xs[1], d = xs[2];
  Tensor<T> out = x->value;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t j = 0; j < d; ++j) out(b, t, j) += rows->value(t, j);
  auto r = g.result(std::move(out), {x, rows});
  if (r->requires_grad) {
    Node<T>* self = r.get();
    r->backward = [self, x, rows, batch, n, d] {
      if (detail::needs(x)) detail::accumulate(x, self->grad);
      if (detail::needs(rows)) {
        auto& buf = rows->grad_buffer();
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t t = 0; t < n; ++t)
            for (std::size_t j = 0; j < d; ++j) buf(t, j) += self->grad(b, t, j);
      }
    };
  }
  return r;
}

/// y = x W + b over the last axis. W is [in, out]; bias may be null.
template <typename T>
Var<T> linear(Graph<T>& g, const Var<T>& x, const Var<T>& w, const Var<T>& bias = nullptr) {
  const std::size_t din = x->value.shape().back();
  detail::require(w->value.rank() == 2 && w->value.dim(0) == din,
                  "linear: weight " + shape_string(w->value.shape()) + " does not match input " +
                      shape_string(x->value.shape()));
  const std::size_t dout = w->value.dim(1);
  const std::size_t rows = x->value.size() / din;
  if (bias) detail::require(bias->value.size() == dout, "linear: bias size mismatch");
  Shape shape = x->value.shape();
  shape.back() = dout;
  Tensor<T> out(shape);
  {
    auto y = detail::matrix(out, rows, dout, dout);
    y.noalias() = detail::matrix(x->value, rows, din, din) * detail::matrix(w->value, din, dout, dout);
    if (bias) y.rowwise() += detail::matrix(bias->value, 1, dout, dout).row(0);
  }
  auto r = g.result(std::move(out), {x, w, bias});
  if (r->requires_grad) {
    Node<T>* self = r.get();
    r->backward = [self, x, w, bias, rows, din, dout] {
      const auto dy = detail::matrix(std::as_const(self->grad), rows, dout, dout);
      if (detail::needs(x))
        detail::matrix(x->grad_buffer(), rows, din, din).noalias() +=
            dy * detail::matrix(w->value, din, dout, dout).transpose();
      if (detail::needs(w))
        detail::matrix(w->grad_buffer(), din, dout, dout).noalias() +=
            detail::matrix(x->value, rows, din, din).transpose() * dy;
      if (detail::needs(bias))
        detail::matrix(bias->grad_buffer(), 1, dout, dout).row(0) += dy.colwise().sum();
    };
  }
  return r;
}

/// Normalizes each row over the last axis with the biased variance
/// (divide by D), then applies gain and bias.
template <typename T>
Var<T> layer_norm(Graph<T>& g, const Var<T>& x, const Var<T>& gain, const Var<T>& bias, double eps = 1e-12) {
  const std::size_t d = x->value.shape().back();
  detail::require(d >= 2, "layer_norm: normalized dimension must be at least 2");
  detail::require(gain->value.size() == d && bias->value.size() == d, "layer_norm: affine parameter size mismatch");
  const std::size_t rows = x->value.size() / d;
  Tensor<T> out(x->value.shape());
  Tensor<T> xhat(x->value.shape());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x->value.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += in[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (in[j] - mean) * inv_std[r];
      xhat[r * d + j] = static_cast<T>(h);
      out[r * d + j] = static_cast<T>(h * gain->value[j] + bias->value[j]);
    }
  }
  auto res = g.result(std::move(out), {x, gain, bias});
  if (res->requires_grad) {
    Node<T>* self = res.get();
    res->backward = [self, x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, d] {
      const Tensor<T>& dy = self->grad;
      Tensor<T>* dx = detail::needs(x) ? &x->grad_buffer() : nullptr;
      Tensor<T>* dg = detail::needs(gain) ? &gain->grad_buffer() : nullptr;
      Tensor<T>* db = detail::needs(bias) ? &bias->grad_buffer() : nullptr;
      for (std::size_t r = 0; r < rows; ++r) {
        double mean_dh = 0.0, mean_dh_h = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double dh = static_cast<double>(dy[r * d + j]) * gain->value[j];
          mean_dh += dh;
          mean_dh_h += dh * xhat[r * d + j];
          if (dg) (*dg)[j] += dy[r * d + j] * xhat[r * d + j];
          if (db) (*db)[j] += dy[r * d + j];
        }
        if (!dx) continue;
        mean_dh /= static_cast<double>(d);
        mean_dh_h /= static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j) {
          const double dh = static_cast<double>(dy[r * d + j]) * gain->value[j];
          (*dx)[r * d + j] += static_cast<T>(inv_std[r] * (dh - mean_dh - xhat[r * d + j] * mean_dh_h));
        }
      }
    };
  }
  return res;
}

template <typename T>
Var<T> relu(Graph<T>& g, const Var<T>& x) {
  Tensor<T> out = x->value;
  for (auto& v : out.values()) v = std::max(v, T{});
  auto r = g.result(std::move(out), {x});
  if (r->requires_grad) {
    Node<T>* self = r.get();
    r->backward = [self, x] {
      auto& buf = x->grad_buffer();
      for (std::size_t i = 0; i < buf.size(); ++i)
        if (x->value[i] > T{}) buf[i] += self->grad[i];
    };
  }
  return r;
}

/// Tanh approximation of GELU. The local derivative is stored during the
/// forward pass when a backward pass will need it.
template <typename T>
Var<T> gelu(Graph<T>& g, const Var<T>& x) {
  const T c = static_cast<T>(0.7978845608028654);  // sqrt(2 / pi)
  const T a = static_cast<T>(0.044715);
  const bool keep = g.recording() && detail::needs(x);
  Tensor<T> out(x->value.shape());
  Tensor<T> slope;
  if (keep) slope = Tensor<T>(x->value.shape());
  {
    const auto in = detail::rows_of(std::as_const(x->value)).array();
    const auto t = (c * (in + a * in.cube())).tanh().eval();
    detail::rows_of(out).array() = T(0.5) * in * (T(1) + t);
    if (keep)
      detail::rows_of(slope).array() =
          T(0.5) * (T(1) + t) + T(0.5) * in * (T(1) - t.square()) * c * (T(1) + T(3) * a * in.square());
  }
  auto r = g.result(std::move(out), {x});
  if (r->requires_grad) {
    Node<T>* self = r.get();
    r->backward = [self, x, slope = std::move(slope)] {
      auto& buf = x->grad_buffer();
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += slope[i] * self->grad[i];
    };
  }
  return r;
}

/// Scaled dot-product attention over already-projected q [B, Nq, D],
/// k and v [B, Nk, D], split into `heads` contiguous head slices of D.
template <typename T>
Var<T> attention(Graph<T>& g, const Var<T>& q, const Var<T>& k, const Var<T>& v, std::size_t heads,
                 const AttentionMask& mask) {
  const auto& qs = q->value.shape();
  const auto& ks = k->value.shape();
  detail::require(qs.size() == 3 && ks.size() == 3 && v->value.shape() == ks && qs[0] == ks[0] && qs[2] == ks[2],
                  "attention: q " + shape_string(qs) + " incompatible with k/v " + shape_string(ks));
  detail::require_config(heads >= 1 && qs[2] % heads == 0,
                         "attention: dim " + std::to_string(qs[2]) + " not divisible by " + std::to_string(heads) + " heads");
  if (mask.kind == AttentionMask::Kind::padding)
    detail::require(mask.lengths.size() == qs[0], "attention: padding mask needs one length per batch row");
  const std::size_t batch = qs[0], nq = qs[1], nk = ks[1], d = qs[2], dh = d / heads;
  const T sc = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  Tensor<T> out({batch, nq, d});
  const bool keep = g.recording() && (detail::needs(q) || detail::needs(k) || detail::needs(v));
  Tensor<T> probs;
  if (keep) probs = Tensor<T>({batch * heads, nq, nk});
  RowMat<T> scratch;
  if (!keep) scratch.resize(static_cast<Eigen::Index>(nq), static_cast<Eigen::Index>(nk));

  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t qoff = b * nq * d + h * dh, koff = b * nk * d + h * dh;
      const auto qm = detail::matrix(std::as_const(q->value), nq, dh, d, qoff);
      const auto km = detail::matrix(std::as_const(k->value), nk, dh, d, koff);
      const auto vm = detail::matrix(std::as_const(v->value), nk, dh, d, koff);
      auto om = detail::matrix(out, nq, dh, d, qoff);
      if (keep) {
        auto pm = detail::matrix(probs, nq, nk, nk, (b * heads + h) * nq * nk);
        detail::attention_head<T>(qm, km, vm, sc, mask, b, pm, om);
      } else {
        detail::attention_head<T>(qm, km, vm, sc, mask, b, scratch, om);
      }
    }
  }

  auto r = g.result(std::move(out), {q, k, v});
  if (r->requires_grad) {
    Node<T>* self = r.get();
    r->backward = [self, q, k, v, probs = std::move(probs), batch, heads, nq, nk, d, dh, sc] {
      RowMat<T> dp(static_cast<Eigen::Index>(nq), static_cast<Eigen::Index>(nk));
      Tensor<T>* dq = detail::needs(q) ? &q->grad_buffer() : nullptr;
      Tensor<T>* dk = detail::needs(k) ? &k->grad_buffer() : nullptr;
      Tensor<T>* dv = detail::needs(v) ? &v->grad_buffer() : nullptr;
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t h = 0; h < heads; ++h) {
          const std::size_t qoff = b * nq * d + h * dh, koff = b * nk * d + h * dh;
          const auto pm = detail::matrix(probs, nq, nk, nk, (b * heads + h) * nq * nk);
          const auto dout = detail::matrix(std::as_const(self->grad), nq, dh, d, qoff);
          if (dv) detail::matrix(*dv, nk, dh, d, koff).noalias() += pm.transpose() * dout;
          if (!dq && !dk) continue;
          dp.noalias() = dout * detail::matrix(v->value, nk, dh, d, koff).transpose();
          // dS = P * (dP - rowsum(P * dP))
          auto weighted = (pm.array() * dp.array()).rowwise().sum().eval();
          dp = (pm.array() * (dp.array().colwise() - weighted)).matrix() * sc;
          if (dq) detail::matrix(*dq, nq, dh, d, qoff).noalias() += dp * detail::matrix(std::as_const(k->value), nk, dh, d, koff);
          if (dk) detail::matrix(*dk, nk, dh, d, koff).noalias() += dp.transpose() * detail::matrix(std::as_const(q->value), nq, dh, d, qoff);
        }
      }
    };
  }
  return r;
}

/// Probabilities of one attention call, [B * heads, Nq, Nk]; inspection only.
template <typename T>
Tensor<T> attention_probabilities(const Tensor<T>& q, const Tensor<T>& k, std::size_t heads, const AttentionMask& mask) {
  const std::size_t batch = q.dim(0), nq = q.dim(1), nk = k.dim(1), d = q.dim(2), dh = d / heads;
  detail::require_config(d % heads == 0, "attention: dim not divisible by heads");
  const T sc = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  Tensor<T> probs({batch * heads, nq, nk});
  Tensor<T> sink({nq, dh});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t h = 0; h < heads; ++h) {
      auto pm = detail::matrix(probs, nq, nk, nk, (b * heads + h) * nq * nk);
      const auto km = detail::matrix(k, nk, dh, d, b * nk * d + h * dh);
      detail::attention_head<T>(detail::matrix(q, nq, dh, d, b * nq * d + h * dh), km, km, sc, mask, b, pm,
                                detail::matrix(sink, nq, dh, dh));
    }
  return probs;
}

/// Token lookup: table [vocab, D], tokens [B, N] -> [B, N, D].
template <typename T>
Var<T> embedding(Graph<T>& g, const Var<T>& table, const TokenBatch& tokens) {
  detail::require(table->value.rank() == 2, "embedding: table must be [vocab, dim]");
  const std::size_t vocab = table->value.dim(0), d = table->value.dim(1);
  detail::require(tokens.ids.size() == tokens.batch * tokens.length, "embedding: token batch shape mismatch");
  for (int id : tokens.ids)
    detail::require(id >= 0 && static_cast<std::size_t>(id) < vocab,
                    "embedding: token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(vocab));
  Tensor<T> out({tokens.batch, tokens.length, d});
  for (std::size_t i = 0; i < tokens.ids.size(); ++i)
    std::copy_n(table->value.data() + static_cast<std::size_t>(tokens.ids[i]) * d, d, out.data() + i * d);
  auto r = g.result(std::move(out), {table});
  if (r->requires_grad) {
    Node<T>* self = r.get();
    r->backward = [self, table, ids = tokens.ids, d] {
      auto& buf = table->grad_buffer();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        T* dst = buf.data() + static_cast<std::size_t>(ids[i]) * d;
        const T* src = self->grad.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
      }
    };
  }
  return r;
}

/// Spectral downsampling along time; backward applies the transpose of the
/// (linear) truncate-and-rescale map.
template <typename T>
Var<T> spectral_filter(Graph<T>& g, const Var<T>& x, double ratio,
                       TruncationStrategy strategy = TruncationStrategy::high_frequency_cut) {
  std::vector<std::size_t> kept;
  Tensor<T> out = spectral_downsample(x->value, ratio, strategy, &kept);
  auto r = g.result(std::move(out), {x});
  if (r->requires_grad) {
    Node<T>* self = r.get();
    const std::size_t n = x->value.dim(1);
    r->backward = [self, x, kept = std::move(kept), n] {
      detail::accumulate(x, spectral_downsample_adjoint(self->grad, n, kept));
    };
  }
  return r;
}

/// Output position n copies input position floor(n * M / N).
template <typename T>
Var<T> upsample_nearest(Graph<T>& g, const Var<T>& x, std::size_t target_len) {
  detail::require(x->value.rank() == 3, "upsample_nearest: expected [batch, time, dim]");
  const std::size_t batch = x->value.dim(0), m = x->value.dim(1), d = x->value.dim(2);
  detail::require(m >= 1 && m <= target_len, "upsample_nearest: target length " + std::to_string(target_len) +
                                                 " shorter than source length " + std::to_string(m));
  std::vector<std::size_t> src(target_len);
  for (std::size_t n = 0; n < target_len; ++n) src[n] = n * m / target_len;
  Tensor<T> out({batch, target_len, d});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t n = 0; n < target_len; ++n) std::copy_n(&x->value(b, src[n], 0), d, &out(b, n, 0));
  auto r = g.result(std::move(out), {x});
  if (r->requires_grad) {
    Node<T>* self = r.get();
    r->backward = [self, x, src = std::move(src), batch, d] {
      auto& buf = x->grad_buffer();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t n = 0; n < src.size(); ++n)
          for (std::size_t j = 0; j < d; ++j) buf(b, src[n], j) += self->grad(b, n, j);
    };
  }
  return r;
}

/// [B, N, D] -> [B, D] mean over time.
template <typename T>
Var<T> mean_pool(Graph<T>& g, const Var<T>& x) {
  detail::require(x->value.rank() == 3, "mean_pool: expected [batch, time, dim]");
  const std::size_t batch = x->value.dim(0), n = x->value.dim(1), d = x->value.dim(2);
  Tensor<T> out({batch, d});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t j = 0; j < d; ++j) out(b, j) += x->value(b, t, j);
    for (std::size_t j = 0; j < d; ++j) out(b, j) /= static_cast<T>(n);
  }
  auto r = g.result(std::move(out), {x});
  if (r->requires_grad) {
    Node<T>* self = r.get();
    r->backward = [self, x, batch, n, d] {
      auto& buf = x->grad_buffer();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < n; ++t)
          for (std::size_t j = 0; j < d; ++j) buf(b, t, j) += self->grad(b, j) / static_cast<T>(n);
    };
  }
  return r;
}

template <typename T>
Var<T> first_token(Graph<T>& g, const Var<T>& x) {
  detail::require(x->value.rank() == 3, "first_token: expected [batch, time, dim]");
  const std::size_t batch = x->value.dim(0), d = x->value.dim(2);
  Tensor<T> out({batch, d});
  for (std::size_t b = 0; b < batch; ++b) std::copy_n(&x->value(b, 0, 0), d, &out(b, 0));
  auto r = g.result(std::move(out), {x});
  if (r->requires_grad) {
    Node<T>* self = r.get();
    r->backward = [self, x, batch, d] {
      auto& buf = x->grad_buffer();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < d; ++j) buf(b, 0, j) += self->grad(b, j);
    };
  }
  return r;
}

/// Mean negative log-likelihood over rows of logits ([R, C] or [B, N, C])
/// whose target differs from `ignore_index`.
template <typename T>
Var<T> cross_entropy(Graph<T>& g, const Var<T>& logits, std::span<const int> targets, int ignore_index = -1) {
  const std::size_t classes = logits->value.shape().back();
  const std::size_t rows = logits->value.size() / classes;
  detail::require(targets.size() == rows, "cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                                              std::to_string(rows) + " rows");
  Tensor<T> probs(logits->value.shape());
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int t = targets[r];
    if (t == ignore_index) continue;
    detail::require(t >= 0 && static_cast<std::size_t>(t) < classes,
                    "cross_entropy: target " + std::to_string(t) + " outside " + std::to_string(classes) + " classes");
    const T* z = logits->value.data() + r * classes;
    double peak = z[0];
    for (std::size_t c = 1; c < classes; ++c) peak = std::max(peak, static_cast<double>(z[c]));
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(z[c] - peak);
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] = static_cast<T>(std::exp(z[c] - peak) / sum);
    total += std::log(sum) + peak - z[t];
    ++counted;
  }
  detail::require(counted > 0, "cross_entropy: every target is ignored");
  Tensor<T> out({1}, static_cast<T>(total / static_cast<double>(counted)));
  auto res = g.result(std::move(out), {logits});
  if (res->requires_grad) {
    Node<T>* self = res.get();
    res->backward = [self, logits, probs = std::move(probs), tgt = std::vector<int>(targets.begin(), targets.end()),
                     ignore_index, classes, counted] {
      auto& buf = logits->grad_buffer();
      const T s = self->grad[0] / static_cast<T>(counted);
      for (std::size_t r = 0; r < tgt.size(); ++r) {
        if (tgt[r] == ignore_index) continue;
        for (std::size_t c = 0; c < classes; ++c) buf[r * classes + c] += s * probs[r * classes + c];
        buf[r * classes + static_cast<std::size_t>(tgt[r])] -= s;
      }
    };
  }
  return res;
}

template <typename T>
Var<T> sum_squares(Graph<T>& g, const Var<T>& x) {
  double acc = 0.0;
  for (T v : x->value.values()) acc += static_cast<double>(v) * v;
  auto r = g.result(Tensor<T>({1}, static_cast<T>(acc)), {x});
  if (r->requires_grad) {
    Node<T>* self = r.get();
    r->backward = [self, x] {
      auto& buf = x->grad_buffer();
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += T(2) * x->value[i] * self->grad[0];
    };
  }
  return r;
}

/// sum_i x_i w_i for a fixed weight tensor; turns any op output into a
/// generic scalar for gradient checks.
template <typename T>
Var<T> weighted_sum(Graph<T>& g, const Var<T>& x, const Tensor<T>& weights) {
  detail::require(weights.size() == x->value.size(), "weighted_sum: weight count mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) acc += static_cast<double>(x->value[i]) * weights[i];
  auto r = g.result(Tensor<T>({1}, static_cast<T>(acc)), {x});
  if (r->requires_grad) {
    Node<T>* self = r.get();
    r->backward = [self, x, weights] {
      auto& buf = x->grad_buffer();
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += weights[i] * self->grad[0];
    };
  }
  return r;
}

}  // namespace fourier::nn
