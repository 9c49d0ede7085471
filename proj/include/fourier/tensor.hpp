#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <new>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fourier/error.hpp"

namespace fourier {

// Byte accounting for every tensor buffer. Peak memory in benchmark reports
// comes from here rather than from OS RSS.
namespace memory {

struct Counters {
  std::atomic<std::int64_t> current{0};
  std::atomic<std::int64_t> peak{0};
};

inline Counters& counters() {
  static Counters c;
  return c;
}

inline void on_allocate(std::size_t bytes) {
  auto& c = counters();
  const auto now = c.current.fetch_add(static_cast<std::int64_t>(bytes)) +
                   static_cast<std::int64_t>(bytes);
  auto prev = c.peak.load();
  while (now > prev && !c.peak.compare_exchange_weak(prev, now)) {
  }
}

inline void on_release(std::size_t bytes) {
  counters().current.fetch_sub(static_cast<std::int64_t>(bytes));
}

inline std::int64_t current_bytes() { return counters().current.load(); }
inline std::int64_t peak_bytes() { return counters().peak.load(); }
inline void reset_peak() { counters().peak.store(counters().current.load()); }

}  // namespace memory

// Buffers start on a cache-line boundary so vectorized reductions peel the
// same leading elements on every run; results are then bit-reproducible.
inline constexpr std::size_t kTensorAlignment = 64;

template <typename T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <typename U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    T* p = static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kTensorAlignment}));
    memory::on_allocate(n * sizeof(T));
    return p;
  }
  void deallocate(T* p, std::size_t n) noexcept {
    memory::on_release(n * sizeof(T));
    ::operator delete(p, n * sizeof(T), std::align_val_t{kTensorAlignment});
  }

  template <typename U>
  bool operator==(const TrackingAllocator<U>&) const noexcept {
    return true;
  }
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
  os << ']';
  return os.str();
}

/// Dense row-major array. Rank-3 tensors are laid out [batch, time, dim]
/// with dim contiguous.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using Storage = std::vector<T, TrackingAllocator<T>>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{})
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::span<const T> values) : shape_(std::move(shape)) {
    detail::require(values.size() == shape_size(shape_),
                    "tensor: value count does not match shape " + shape_string(shape_));
    data_.assign(values.begin(), values.end());
  }
  Tensor(Shape shape, std::initializer_list<T> values)
      : Tensor(std::move(shape), std::span<const T>(values.begin(), values.size())) {}

  template <typename U>
  static Tensor cast(const Tensor<U>& other) {
    Tensor out(other.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = static_cast<T>(other.data()[i]);
    return out;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return {data_.data(), data_.size()}; }
  std::span<const T> values() const noexcept { return {data_.data(), data_.size()}; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  T& operator()(std::size_t b, std::size_t n, std::size_t d) {
    return data_[(b * shape_[1] + n) * shape_[2] + d];
  }
  const T& operator()(std::size_t b, std::size_t n, std::size_t d) const {
    return data_[(b * shape_[1] + n) * shape_[2] + d];
  }

  void reshape(Shape shape) {
    detail::require(shape_size(shape) == data_.size(),
                    "tensor: cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    shape_ = std::move(shape);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  Shape shape_;
  Storage data_;
};

template <typename T>
T max_abs(const Tensor<T>& t) {
  T m{};
  for (const T& v : t.values()) m = std::max(m, std::abs(v));
  return m;
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.shape() == b.shape(), "max_abs_diff: shape mismatch");
  T m{};
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace fourier
