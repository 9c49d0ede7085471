#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "fourier/error.hpp"

// Complex FFT used internally by the DCT fast path and the power-spectrum
// analyzer. Power-of-two lengths run an iterative radix-2 transform; every
// other length goes through Bluestein's chirp-z identity on a padded
// power-of-two transform, so the cost is O(N log N) for all N.
namespace fourier::detail {

using Complex = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    require(n >= 1, "fft: length must be positive");
    if (is_power_of_two(n)) {
      init_radix2();
    } else {
      init_bluestein();
    }
  }

  std::size_t size() const noexcept { return n_; }

  /// In place, X_k = sum_n x_n exp(-2 pi i n k / N).
  void forward(std::span<Complex> data) const {
    require(data.size() == n_, "fft: buffer length does not match plan");
    if (bluestein_) {
      run_bluestein(data);
    } else {
      run_radix2(data, false);
    }
  }

  /// In place, x_n = (1/N) sum_k X_k exp(+2 pi i n k / N).
  void inverse(std::span<Complex> data) const {
    require(data.size() == n_, "fft: buffer length does not match plan");
    if (bluestein_) {
      for (auto& v : data) v = std::conj(v);
      run_bluestein(data);
      const double scale = 1.0 / static_cast<double>(n_);
      for (auto& v : data) v = std::conj(v) * scale;
    } else {
      run_radix2(data, true);
      const double scale = 1.0 / static_cast<double>(n_);
      for (auto& v : data) v *= scale;
    }
  }

 private:
  void init_radix2() {
    bit_reverse_.resize(n_);
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n_) ++bits;
    for (std::size_t i = 0; i < n_; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      bit_reverse_[i] = r;
    }
    twiddles_.resize(n_ / 2);
    for (std::size_t k = 0; k < n_ / 2; ++k) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_);
      twiddles_[k] = {std::cos(angle), std::sin(angle)};
    }
  }

  void run_radix2(std::span<Complex> a, bool conjugate) const {
    for (std::size_t i = 0; i < n_; ++i)
      if (i < bit_reverse_[i]) std::swap(a[i], a[bit_reverse_[i]]);
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t step = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t k = 0; k < half; ++k) {
          Complex w = twiddles_[k * step];
          if (conjugate) w = std::conj(w);
          const Complex u = a[start + k];
          const Complex v = a[start + k + half] * w;
          a[start + k] = u + v;
          a[start + k + half] = u - v;
        }
      }
    }
  }

  // X_k = conj(b_k) * sum_n (x_n conj(b_n)) b_{k-n},  b_j = exp(i pi j^2 / N).
  void init_bluestein() {
    bluestein_ = true;
    padded_ = next_power_of_two(2 * n_ - 1);
    inner_ = std::make_unique<FftPlan>(padded_);
    chirp_.resize(n_);
    const std::size_t period = 2 * n_;
    for (std::size_t j = 0; j < n_; ++j) {
      // j^2 mod 2N keeps the angle small for large j.
      const std::size_t sq = static_cast<std::size_t>((static_cast<unsigned __int128>(j) * j) % period);
      const double angle = std::numbers::pi * static_cast<double>(sq) / static_cast<double>(n_);
      chirp_[j] = {std::cos(angle), std::sin(angle)};
    }
    chirp_spectrum_.assign(padded_, Complex{});
    chirp_spectrum_[0] = chirp_[0];
    for (std::size_t j = 1; j < n_; ++j) {
      chirp_spectrum_[j] = chirp_[j];
      chirp_spectrum_[padded_ - j] = chirp_[j];
    }
    inner_->forward(chirp_spectrum_);
  }

  void run_bluestein(std::span<Complex> data) const {
    std::vector<Complex> work(padded_, Complex{});
    for (std::size_t n = 0; n < n_; ++n) work[n] = data[n] * std::conj(chirp_[n]);
    inner_->forward(work);
    for (std::size_t i = 0; i < padded_; ++i) work[i] *= chirp_spectrum_[i];
    inner_->inverse(work);
    for (std::size_t k = 0; k < n_; ++k) data[k] = work[k] * std::conj(chirp_[k]);
  }

  std::size_t n_;
  std::vector<std::size_t> bit_reverse_;
  std::vector<Complex> twiddles_;

  bool bluestein_ = false;
  std::size_t padded_ = 0;
  std::unique_ptr<FftPlan> inner_;
  std::vector<Complex> chirp_;
  std::vector<Complex> chirp_spectrum_;
};

}  // namespace fourier::detail
