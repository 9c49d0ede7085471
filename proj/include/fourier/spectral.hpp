#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "fourier/dct.hpp"
#include "fourier/error.hpp"
#include "fourier/fft.hpp"
#include "fourier/tensor.hpp"

namespace fourier {

enum class TruncationStrategy {
  high_frequency_cut,  // keep bins 0..M-1
  low_frequency_cut,   // keep the top M bins
  top_amplitude,       // keep the M bins with the largest mean |coefficient|
};

inline std::string to_string(TruncationStrategy s) {
  switch (s) {
    case TruncationStrategy::high_frequency_cut: return "high-frequency-cut";
    case TruncationStrategy::low_frequency_cut: return "low-frequency-cut";
    case TruncationStrategy::top_amplitude: return "top-amplitude";
  }
  return "unknown";
}

inline TruncationStrategy parse_strategy(std::string_view name) {
  if (name == "high-frequency-cut" || name == "high") return TruncationStrategy::high_frequency_cut;
  if (name == "low-frequency-cut" || name == "low") return TruncationStrategy::low_frequency_cut;
  if (name == "top-amplitude" || name == "top") return TruncationStrategy::top_amplitude;
  throw InvalidArgument("unknown truncation strategy '" + std::string(name) + "'");
}

/// ceil(r * n). Products within 1e-9 of an integer are snapped first so that
/// e.g. 0.3 * 10 yields 3, not 4.
inline std::size_t retained_length(std::size_t n, double ratio) {
  detail::require(ratio > 0.0 && ratio <= 1.0, "retain ratio must lie in (0, 1], got " + std::to_string(ratio));
  detail::require(n >= 1, "retained_length: empty time axis");
  const double exact = ratio * static_cast<double>(n);
  const double nearest = std::round(exact);
  const double value = std::abs(exact - nearest) <= 1e-9 * std::max(1.0, exact) ? nearest : std::ceil(exact);
  return std::clamp<std::size_t>(static_cast<std::size_t>(value), 1, n);
}

// Worker count for slice-parallel batched transforms. Results do not depend
// on it: each (batch, dim) slice is transformed independently.
inline std::atomic<int>& spectral_threads() {
  static std::atomic<int> threads{1};
  return threads;
}

inline void set_spectral_threads(int n) { spectral_threads().store(std::max(1, n)); }

namespace detail {

template <typename Fn>
void parallel_slices(std::size_t count, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(spectral_threads().load()), count);
  if (workers <= 1) {
    fn(std::size_t{0}, count);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : pool) t.join();
}

template <typename T>
void require_hidden(const Tensor<T>& h, const char* op) {
  require(h.rank() == 3, std::string(op) + ": expected [batch, time, dim], got " + shape_string(h.shape()));
  require(h.dim(1) >= 1, std::string(op) + ": empty time axis");
}

// Applies `kernel(in, out, work)` to every (batch, dim) time slice of `in`
// (time length n_in) writing time length n_out slices of `out`.
template <typename T, typename Kernel>
void map_time_slices(const Tensor<T>& in, Tensor<T>& out, Kernel&& kernel) {
  const std::size_t batch = in.dim(0), n_in = in.dim(1), dim = in.dim(2), n_out = out.dim(1);
  parallel_slices(batch * dim, [&](std::size_t begin, std::size_t end) {
    std::vector<double> src(n_in), dst(n_out);
    std::vector<Complex> work;
    for (std::size_t s = begin; s < end; ++s) {
      const std::size_t b = s / dim, d = s % dim;
      const T* base = in.data() + b * n_in * dim + d;
      for (std::size_t n = 0; n < n_in; ++n) src[n] = static_cast<double>(base[n * dim]);
      kernel(std::span<const double>(src), std::span<double>(dst), work);
      T* obase = out.data() + b * n_out * dim + d;
      for (std::size_t n = 0; n < n_out; ++n) obase[n * dim] = static_cast<T>(dst[n]);
    }
  });
}

}  // namespace detail

/// DCT coefficients along the time axis. `kept` lists the source bins that
/// survive truncation, in the order they appear along the frequency axis.
template <typename T>
struct SpectrumTensor {
  Tensor<T> coeffs;  // [batch, M, dim]
  std::size_t source_length = 0;
  std::vector<std::size_t> kept;

  std::size_t bins() const { return coeffs.dim(1); }
};

template <typename T>
SpectrumTensor<T> dct_time(const Tensor<T>& h) {
  detail::require_hidden(h, "dct_time");
  const auto plan = cached_plan(h.dim(1));
  SpectrumTensor<T> s{Tensor<T>(h.shape()), h.dim(1), {}};
  s.kept.resize(h.dim(1));
  std::iota(s.kept.begin(), s.kept.end(), std::size_t{0});
  detail::map_time_slices(h, s.coeffs, [&](auto in, auto out, auto& work) { plan->forward(in, out, work); });
  return s;
}

template <typename T>
Tensor<T> idct_time(const Tensor<T>& coeffs) {
  detail::require_hidden(coeffs, "idct_time");
  const auto plan = cached_plan(coeffs.dim(1));
  Tensor<T> h(coeffs.shape());
  detail::map_time_slices(coeffs, h, [&](auto in, auto out, auto& work) { plan->inverse(in, out, work); });
  return h;
}

namespace detail {

template <typename T>
std::vector<std::size_t> top_amplitude_bins(const Tensor<T>& coeffs, std::size_t keep) {
  const std::size_t batch = coeffs.dim(0), bins = coeffs.dim(1), dim = coeffs.dim(2);
  std::vector<double> mean_abs(bins, 0.0);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t k = 0; k < bins; ++k)
      for (std::size_t d = 0; d < dim; ++d) mean_abs[k] += std::abs(static_cast<double>(coeffs(b, k, d)));
  std::vector<std::size_t> order(bins);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Ties go to the lower bin.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return mean_abs[a] > mean_abs[c]; });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

template <typename T>
std::vector<std::size_t> kept_bins(const Tensor<T>* coeffs, std::size_t n, std::size_t keep, TruncationStrategy s) {
  std::vector<std::size_t> kept(keep);
  switch (s) {
    case TruncationStrategy::high_frequency_cut:
      std::iota(kept.begin(), kept.end(), std::size_t{0});
      break;
    case TruncationStrategy::low_frequency_cut:
      std::iota(kept.begin(), kept.end(), n - keep);
      break;
    case TruncationStrategy::top_amplitude:
      kept = top_amplitude_bins(*coeffs, keep);
      break;
  }
  return kept;
}

}  // namespace detail

template <typename T>
SpectrumTensor<T> truncate_spectrum(const SpectrumTensor<T>& s, double ratio,
                                    TruncationStrategy strategy = TruncationStrategy::high_frequency_cut) {
  detail::require(s.bins() == s.source_length, "truncate_spectrum: spectrum is already truncated");
  const std::size_t n = s.source_length;
  const std::size_t keep = retained_length(n, ratio);
  const auto kept = detail::kept_bins(&s.coeffs, n, keep, strategy);
  const std::size_t batch = s.coeffs.dim(0), dim = s.coeffs.dim(2);
  SpectrumTensor<T> out{Tensor<T>({batch, keep, dim}), n, kept};
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t m = 0; m < keep; ++m)
      std::copy_n(&s.coeffs(b, kept[m], 0), dim, &out.coeffs(b, m, 0));
  return out;
}

/// Transform, truncate to ceil(rN) bins, rescale by sqrt(M/N), inverse at the
/// shorter length. The rescale keeps constants and single DCT tones at their
/// time-domain amplitude. When `kept_out` is given it receives the retained
/// bins, which is what the adjoint needs.
template <typename T>
Tensor<T> spectral_downsample(const Tensor<T>& h, double ratio,
                              TruncationStrategy strategy = TruncationStrategy::high_frequency_cut,
                              std::vector<std::size_t>* kept_out = nullptr) {
  detail::require_hidden(h, "spectral_downsample");
  const std::size_t n = h.dim(1);
  const std::size_t keep = retained_length(n, ratio);
  std::vector<std::size_t> kept;
  if (strategy == TruncationStrategy::top_amplitude) {
    kept = detail::top_amplitude_bins(dct_time(h).coeffs, keep);
  } else {
    kept = detail::kept_bins<T>(nullptr, n, keep, strategy);
  }
  const auto long_plan = cached_plan(n);
  const auto short_plan = cached_plan(keep);
  const double scale = std::sqrt(static_cast<double>(keep) / static_cast<double>(n));
  Tensor<T> out({h.dim(0), keep, h.dim(2)});
  detail::map_time_slices(h, out, [&](auto in, auto dst, auto& work) {
    std::vector<double> full(n), part(keep);
    long_plan->forward(in, full, work);
    for (std::size_t m = 0; m < keep; ++m) part[m] = scale * full[kept[m]];
    short_plan->inverse(part, dst, work);
  });
  if (kept_out) *kept_out = std::move(kept);
  return out;
}

/// Transpose of the downsampling map for a fixed set of retained bins:
/// forward DCT at the short length, rescale, scatter into the retained bins,
/// inverse DCT at the source length.
template <typename T>
Tensor<T> spectral_downsample_adjoint(const Tensor<T>& grad, std::size_t source_length,
                                      std::span<const std::size_t> kept) {
  detail::require_hidden(grad, "spectral_downsample_adjoint");
  const std::size_t keep = grad.dim(1);
  detail::require(kept.size() == keep, "spectral_downsample_adjoint: kept bins do not match gradient length");
  const auto long_plan = cached_plan(source_length);
  const auto short_plan = cached_plan(keep);
  const double scale = std::sqrt(static_cast<double>(keep) / static_cast<double>(source_length));
  Tensor<T> out({grad.dim(0), source_length, grad.dim(2)});
  detail::map_time_slices(grad, out, [&](auto in, auto dst, auto& work) {
    std::vector<double> part(keep), full(source_length, 0.0);
    short_plan->forward(in, part, work);
    for (std::size_t m = 0; m < keep; ++m) full[kept[m]] = scale * part[m];
    long_plan->inverse(full, dst, work);
  });
  return out;
}

/// Running mean of per-bin Fourier amplitudes along time, averaged over
/// dims, batch rows and every tensor added. Amplitudes use |X_k| / sqrt(N)
/// and only bins 0..floor(N/2) are reported.
class PowerSpectrum {
 public:
  template <typename T>
  void add(const Tensor<T>& h) {
    detail::require_hidden(h, "power_spectrum");
    const std::size_t batch = h.dim(0), n = h.dim(1), dim = h.dim(2);
    if (count_ == 0) {
      length_ = n;
      dim_ = dim;
      sums_.assign(n / 2 + 1, 0.0);
      fft_ = std::make_shared<const detail::FftPlan>(n);
    }
    detail::require(n == length_ && dim == dim_,
                    "power_spectrum: inconsistent shapes in stream (expected time " + std::to_string(length_) +
                        ", dim " + std::to_string(dim_) + ")");
    std::vector<detail::Complex> work(n);
    const double norm = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t d = 0; d < dim; ++d) {
        for (std::size_t t = 0; t < n; ++t) work[t] = {static_cast<double>(h(b, t, d)), 0.0};
        fft_->forward(work);
        for (std::size_t k = 0; k < sums_.size(); ++k) sums_[k] += std::abs(work[k]) * norm;
      }
    }
    count_ += batch * dim;
  }

  std::vector<double> curve() const {
    detail::require(count_ > 0, "power_spectrum: empty stream");
    std::vector<double> out(sums_.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = sums_[k] / static_cast<double>(count_);
    return out;
  }

  std::size_t slices() const noexcept { return count_; }
  std::size_t length() const noexcept { return length_; }

 private:
  std::size_t length_ = 0;
  std::size_t dim_ = 0;
  std::size_t count_ = 0;
  std::vector<double> sums_;
  std::shared_ptr<const detail::FftPlan> fft_;
};

template <typename T>
std::vector<double> power_spectrum(std::span<const Tensor<T>> stream) {
  PowerSpectrum acc;
  for (const auto& h : stream) acc.add(h);
  return acc.curve();
}

inline double spectral_centroid(std::span<const double> curve) {
  detail::require(!curve.empty(), "spectral_centroid: empty curve");
  double weighted = 0.0, total = 0.0;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    detail::require(curve[k] >= 0.0, "spectral_centroid: negative amplitude");
    weighted += static_cast<double>(k) * curve[k];
    total += curve[k];
  }
  if (total == 0.0) throw UndefinedCentroid();
  return weighted / total;
}

}  // namespace fourier
