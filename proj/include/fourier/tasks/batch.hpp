#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "fourier/nn/ops.hpp"
#include "fourier/tasks/dataset.hpp"
#include "fourier/tokens.hpp"

namespace fourier::tasks {

struct Batch {
  nn::TokenBatch inputs;             // [B, L], right-padded
  std::vector<std::size_t> lengths;  // unpadded input lengths
  std::vector<unsigned char> mask;   // [B, L], 1 on real tokens
  std::vector<int> labels;           // classification tasks
  nn::TokenBatch target_in;          // [B, T]: BOS + target, right-padded (sequence tasks)
  std::vector<int> target_out;       // [B * T]: target + EOS; pad id where nothing is predicted
  std::vector<std::size_t> indices;  // dataset rows in this batch

  std::size_t size() const noexcept { return inputs.batch; }
  std::size_t padding() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), static_cast<unsigned char>(0)));
  }
};

/// Builds one padded batch from the given rows. `pad_to` fixes the input
/// length (0 pads to the longest row).
inline Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& rows, int pad_token, std::size_t pad_to = 0) {
  detail::require(!rows.empty(), "make_batch: no rows");
  Batch b;
  b.indices = rows;
  std::size_t longest = 0, longest_target = 0;
  bool sequence = false;
  for (auto r : rows) {
    const auto& ex = ds.examples.at(r);
    longest = std::max(longest, ex.input.size());
    longest_target = std::max(longest_target, ex.target.size());
    sequence = sequence || !ex.target.empty();
  }
  const std::size_t len = pad_to ? pad_to : longest;
  detail::require(longest <= len, "make_batch: example of length " + std::to_string(longest) + " exceeds pad length " +
                                      std::to_string(len));
  detail::require(len >= 1, "make_batch: all inputs are empty");
  b.inputs = {rows.size(), len, std::vector<int>(rows.size() * len, pad_token)};
  b.mask.assign(rows.size() * len, 0);
  const std::size_t t_len = longest_target + 1;
  if (sequence) {
    b.target_in = {rows.size(), t_len, std::vector<int>(rows.size() * t_len, pad_token)};
    b.target_out.assign(rows.size() * t_len, pad_token);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& ex = ds.examples[rows[i]];
    std::copy(ex.input.begin(), ex.input.end(), b.inputs.ids.begin() + static_cast<std::ptrdiff_t>(i * len));
    std::fill_n(b.mask.begin() + static_cast<std::ptrdiff_t>(i * len), ex.input.size(), static_cast<unsigned char>(1));
    b.lengths.push_back(ex.input.size());
    b.labels.push_back(ex.label);
    if (sequence) {
      b.target_in.ids[i * t_len] = tokens::bos;
      for (std::size_t t = 0; t < ex.target.size(); ++t) {
        b.target_in.ids[i * t_len + t + 1] = ex.target[t];
        b.target_out[i * t_len + t] = ex.target[t];
      }
      b.target_out[i * t_len + ex.target.size()] = tokens::eos;
    }
  }
  return b;
}

/// Deterministic epoch-wise batching. Each epoch visits every example once,
/// in an order drawn from (seed, epoch); the last batch may be short.
class BatchIterator {
 public:
  BatchIterator(const Dataset& ds, std::size_t batch_size, int pad_token, std::uint64_t seed, std::size_t pad_to = 0,
                bool shuffle = true)
      : ds_(ds), batch_size_(batch_size), pad_(pad_token), seed_(seed), pad_to_(pad_to), shuffle_(shuffle) {
    detail::require(!ds.empty(), "batch_iter: empty dataset");
    detail::require(batch_size >= 1, "batch_iter: batch_size must be at least 1");
    start_epoch(0);
  }

  void start_epoch(std::size_t epoch) {
    epoch_ = epoch;
    cursor_ = 0;
    order_.resize(ds_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (shuffle_) {
      Rng rng(seed_ ^ (0x9E3779B97F4A7C15ull * (epoch + 1)));
      rng.shuffle(order_);
    }
  }

  /// Fills `out` with the next batch; false at the end of the epoch.
  bool next(Batch& out) {
    if (cursor_ >= order_.size()) return false;
    const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
    std::vector<std::size_t> rows(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                  order_.begin() + static_cast<std::ptrdiff_t>(end));
    cursor_ = end;
    out = make_batch(ds_, rows, pad_, pad_to_);
    return true;
  }

  /// Next batch, rolling into the following epoch when this one runs out.
  Batch next_cycling() {
    Batch b;
    if (!next(b)) {
      start_epoch(epoch_ + 1);
      next(b);
    }
    return b;
  }

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batches_per_epoch() const noexcept { return (ds_.size() + batch_size_ - 1) / batch_size_; }

 private:
  const Dataset& ds_;
  std::size_t batch_size_;
  int pad_;
  std::uint64_t seed_;
  std::size_t pad_to_;
  bool shuffle_;
  std::size_t epoch_ = 0;
  std::size_t cursor_ = 0;
  std::vector<std::size_t> order_;
};

}  // namespace fourier::tasks
