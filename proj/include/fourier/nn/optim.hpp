#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fourier/nn/autograd.hpp"

namespace fourier::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;   // decoupled, scaled by the scheduled rate
  std::size_t warmup_steps = 0;
  std::size_t decay_steps = 0;  // linear decay to zero after warmup; 0 keeps the rate flat
  double clip_norm = 0.0;       // global gradient-norm clip; 0 disables
};

/// Adam with linear warmup. Moments are kept in double regardless of T.
template <typename T>
class Adam {
 public:
  Adam(ParameterSet<T>& params, AdamConfig cfg) : params_(params), cfg_(cfg) {
    for (const auto& p : params_) {
      m_.emplace_back(p->data.size(), 0.0);
      v_.emplace_back(p->data.size(), 0.0);
    }
  }

  double rate(std::size_t step) const {
    double scale = 1.0;
    if (cfg_.warmup_steps > 0 && step < cfg_.warmup_steps)
      scale = static_cast<double>(step + 1) / static_cast<double>(cfg_.warmup_steps);
    else if (cfg_.decay_steps > 0) {
      const double done = static_cast<double>(step - cfg_.warmup_steps) / static_cast<double>(cfg_.decay_steps);
      scale = std::max(0.0, 1.0 - done);
    }
    return cfg_.lr * scale;
  }

  double grad_norm() const {
    double sq = 0.0;
    for (const auto& p : params_)
      for (T gv : p->grad.values()) sq += static_cast<double>(gv) * gv;
    return std::sqrt(sq);
  }

  /// Applies one update from the accumulated gradients; returns the rate used.
  double step() {
    const double lr = rate(t_);
    ++t_;
    double clip = 1.0;
    if (cfg_.clip_norm > 0.0) {
      const double norm = grad_norm();
      if (norm > cfg_.clip_norm) clip = cfg_.clip_norm / norm;
    }
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::size_t i = 0;
    for (auto& p : params_) {
      auto& m = m_[i];
      auto& v = v_[i];
      ++i;
      for (std::size_t j = 0; j < p->data.size(); ++j) {
        const double g = static_cast<double>(p->grad[j]) * clip;
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
        const double update = (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.eps) +
                              cfg_.weight_decay * static_cast<double>(p->data[j]);
        // Skipping zero steps keeps a zero rate bitwise inert (x - 0 can flip -0).
        const T delta = static_cast<T>(lr * update);
        if (delta != T{}) p->data[j] -= delta;
      }
    }
    return lr;
  }

  std::size_t steps_taken() const noexcept { return t_; }

 private:
  ParameterSet<T>& params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t t_ = 0;
};

}  // namespace fourier::nn
