#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fourier/error.hpp"
#include "fourier/fft.hpp"

// Orthonormal DCT-II and its inverse (DCT-III).
//
//   y_k = a_k sum_n x_n cos(pi k (2n + 1) / 2N),  a_0 = sqrt(1/N), a_k = sqrt(2/N)
//   x_n = sum_k a_k y_k cos(pi k (2n + 1) / 2N)
//
// The naive O(N^2) pair is the reference; the plan-based pair computes the
// same maps with one length-N complex FFT of the even/odd interleaved input.
namespace fourier {

using RealSequence = std::vector<double>;

namespace detail {

inline void require_sequence(std::span<const double> x, const char* op) {
  require(!x.empty(), std::string(op) + ": empty input");
  for (double v : x) require(std::isfinite(v), std::string(op) + ": non-finite input");
}

// cos(pi * m / 2N) with m reduced mod 4N first, so the argument never grows.
inline double quarter_cos(std::size_t k, std::size_t n, std::size_t len) {
  const std::size_t period = 4 * len;
  const std::size_t m = (k % period) * ((2 * n + 1) % period) % period;
  return std::cos(std::numbers::pi * static_cast<double>(m) / static_cast<double>(2 * len));
}

inline double dct_alpha(std::size_t k, std::size_t len) {
  return std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(len));
}

}  // namespace detail

inline RealSequence dct_naive(std::span<const double> x) {
  detail::require_sequence(x, "dct_naive");
  const std::size_t len = x.size();
  RealSequence y(len);
  for (std::size_t k = 0; k < len; ++k) {
    double acc = 0.0;
    for (std::size_t n = 0; n < len; ++n) acc += x[n] * detail::quarter_cos(k, n, len);
    y[k] = detail::dct_alpha(k, len) * acc;
  }
  return y;
}

inline RealSequence idct_naive(std::span<const double> y) {
  detail::require_sequence(y, "idct_naive");
  const std::size_t len = y.size();
  RealSequence x(len);
  for (std::size_t n = 0; n < len; ++n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < len; ++k)
      acc += detail::dct_alpha(k, len) * y[k] * detail::quarter_cos(k, n, len);
    x[n] = acc;
  }
  return x;
}

/// Precomputed tables for one sequence length. Immutable once built, so a
/// single plan can be shared by any number of threads.
class DctPlan {
 public:
  explicit DctPlan(std::size_t length) : length_(length) {
    detail::require(length >= 1, "build_plan: length must be positive");
    permutation_.resize(length);
    const std::size_t evens = (length + 1) / 2;
    for (std::size_t i = 0; i < length; ++i)
      permutation_[i] = i < evens ? 2 * i : 2 * (length - 1 - i) + 1;

    cos_table_.resize(length);
    sin_table_.resize(length);
    alpha_.resize(length);
    for (std::size_t k = 0; k < length; ++k) {
      const double angle = std::numbers::pi * static_cast<double>(k) / static_cast<double>(2 * length);
      cos_table_[k] = std::cos(angle);
      sin_table_[k] = std::sin(angle);
      alpha_[k] = detail::dct_alpha(k, length);
    }
    fft_ = std::make_shared<const detail::FftPlan>(length);
  }

  std::size_t length() const noexcept { return length_; }
  /// u_i = x[permutation[i]]: even indices ascending, then odd indices descending.
  const std::vector<std::size_t>& permutation() const noexcept { return permutation_; }
  const std::vector<double>& cos_table() const noexcept { return cos_table_; }
  const std::vector<double>& sin_table() const noexcept { return sin_table_; }
  const std::vector<double>& alpha() const noexcept { return alpha_; }

  /// `work` is caller-owned scratch so batched callers avoid reallocating.
  void forward(std::span<const double> x, std::span<double> y, std::vector<detail::Complex>& work) const {
    work.resize(length_);
    for (std::size_t i = 0; i < length_; ++i) work[i] = {x[permutation_[i]], 0.0};
    fft_->forward(work);
    // Re(exp(-i pi k / 2N) v_k) with the exp(-2 pi i nk/N) FFT kernel.
    for (std::size_t k = 0; k < length_; ++k)
      y[k] = alpha_[k] * (cos_table_[k] * work[k].real() + sin_table_[k] * work[k].imag());
  }

  void inverse(std::span<const double> y, std::span<double> x, std::vector<detail::Complex>& work) const {
    work.resize(length_);
    // Undo the rotation: v_k = exp(i pi k / 2N) (Y_k - i Y_{N-k}), Y_k = y_k / a_k, Y_N = 0.
    for (std::size_t k = 0; k < length_; ++k) {
      const double re = y[k] / alpha_[k];
      const double im = k == 0 ? 0.0 : -y[length_ - k] / alpha_[length_ - k];
      const detail::Complex rot{cos_table_[k], sin_table_[k]};
      work[k] = rot * detail::Complex{re, im};
    }
    fft_->inverse(work);
    for (std::size_t i = 0; i < length_; ++i) x[permutation_[i]] = work[i].real();
  }

 private:
  std::size_t length_;
  std::vector<std::size_t> permutation_;
  std::vector<double> cos_table_;
  std::vector<double> sin_table_;
  std::vector<double> alpha_;
  std::shared_ptr<const detail::FftPlan> fft_;
};

inline DctPlan build_plan(std::size_t n) { return DctPlan(n); }

inline RealSequence dct_fft(std::span<const double> x, const DctPlan& plan) {
  detail::require(x.size() == plan.length(),
                  "dct_fft: input length " + std::to_string(x.size()) + " does not match plan length " +
                      std::to_string(plan.length()));
  detail::require_sequence(x, "dct_fft");
  RealSequence y(x.size());
  std::vector<detail::Complex> work;
  plan.forward(x, y, work);
  return y;
}

inline RealSequence idct_fft(std::span<const double> y, const DctPlan& plan) {
  detail::require(y.size() == plan.length(),
                  "idct_fft: input length " + std::to_string(y.size()) + " does not match plan length " +
                      std::to_string(plan.length()));
  detail::require_sequence(y, "idct_fft");
  RealSequence x(y.size());
  std::vector<detail::Complex> work;
  plan.inverse(y, x, work);
  return x;
}

/// Process-wide cache of plans keyed by length.
inline std::shared_ptr<const DctPlan> cached_plan(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::shared_ptr<const DctPlan>> plans;
  std::lock_guard lock(mu);
  auto& slot = plans[n];
  if (!slot) slot = std::make_shared<const DctPlan>(n);
  return slot;
}

}  // namespace fourier
