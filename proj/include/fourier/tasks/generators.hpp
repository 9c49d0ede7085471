#pragma once

#include <algorithm>
#include <vector>

#include "fourier/tasks/dataset.hpp"
#include "fourier/tasks/listops.hpp"

namespace fourier::tasks {

/// Topic of a byte value when the byte range is split into `topics` classes.
inline std::size_t byte_topic(int byte, std::size_t topics) { return static_cast<std::size_t>(byte) % topics; }

/// Fixed-length sequences of `max_len` bytes made of two halves. Each half
/// draws its bytes from one topic (bytes b with b % topics == t) and the two
/// topics differ. Label 1 when the first half's topic id is the smaller one.
/// Every unordered topic pair appears in both classes equally often, so the
/// byte histogram carries no signal; only which content sits in which
/// distant half does.
inline Dataset gen_byte_classify(const DatasetSpec& spec) {
  detail::require_config(spec.kind == TaskKind::byte_classify, "gen_byte_classify: spec is not a byte-classify task");
  detail::require_config(spec.max_len >= 2 && spec.max_len <= 65536,
                         "gen_byte_classify: length must lie in 2..65536, got " + std::to_string(spec.max_len));
  detail::require_config(spec.topics >= 2 && spec.topics <= 128,
                         "gen_byte_classify: topics must lie in 2..128, got " + std::to_string(spec.topics));
  Dataset ds{spec, {}};
  Rng rng(spec.seed);
  const std::size_t n = spec.max_len, half = n / 2, per_topic = 256 / spec.topics;
  auto draw = [&](std::size_t topic) { return static_cast<int>(topic + spec.topics * rng.below(per_topic)); };
  ds.examples.reserve(spec.size);
  for (std::size_t i = 0; i < spec.size; ++i) {
    const int label = static_cast<int>(rng.below(2));
    std::size_t low = rng.below(spec.topics);
    std::size_t high = (low + 1 + rng.below(spec.topics - 1)) % spec.topics;
    if (low > high) std::swap(low, high);
    const std::size_t first = label == 1 ? low : high, second = label == 1 ? high : low;
    Example ex;
    ex.label = label;
    ex.input.resize(n);
    for (std::size_t t = 0; t < n; ++t) ex.input[t] = draw(t < half ? first : second);
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

inline Example make_copy_example(std::vector<int> source, bool reverse) {
  Example ex;
  ex.target = source;
  if (reverse) std::reverse(ex.target.begin(), ex.target.end());
  ex.input = std::move(source);
  return ex;
}

/// Random symbol strings ('a', 'b', ... for `alphabet` symbols) with length
/// uniform in [min_len, max_len]; the target is the source, or its reverse.
inline Dataset gen_copy_task(const DatasetSpec& spec) {
  detail::require_config(spec.kind == TaskKind::seq2seq_copy, "gen_copy_task: spec is not a copy task");
  detail::require_config(spec.max_len >= 1 && spec.max_len <= 256,
                         "gen_copy_task: source length must lie in 1..256, got " + std::to_string(spec.max_len));
  detail::require_config(spec.min_len >= 1 && spec.min_len <= spec.max_len, "gen_copy_task: bad min_len");
  detail::require_config(spec.alphabet >= 1 && spec.alphabet <= 256, "gen_copy_task: alphabet must lie in 1..256");
  Dataset ds{spec, {}};
  Rng rng(spec.seed);
  ds.examples.reserve(spec.size);
  for (std::size_t i = 0; i < spec.size; ++i) {
    std::vector<int> source(rng.between(spec.min_len, spec.max_len));
    for (auto& v : source) v = static_cast<int>(('a' + rng.below(spec.alphabet)) % 256);
    ds.examples.push_back(make_copy_example(std::move(source), spec.reverse));
  }
  return ds;
}

inline Dataset generate(const DatasetSpec& spec) {
  switch (spec.kind) {
    case TaskKind::listops_mini: return gen_listops(spec);
    case TaskKind::byte_classify: return gen_byte_classify(spec);
    case TaskKind::seq2seq_copy: return gen_copy_task(spec);
  }
  throw ConfigError("dataset: unknown task");
}

/// Default desk-scale spec for each task; callers override size and seed.
inline DatasetSpec default_spec(TaskKind kind) {
  DatasetSpec s;
  s.kind = kind;
  switch (kind) {
    case TaskKind::listops_mini:
      s.min_len = 1;
      s.max_len = 128;
      s.max_depth = 3;
      break;
    case TaskKind::byte_classify:
      s.max_len = 512;
      s.topics = 8;
      break;
    case TaskKind::seq2seq_copy:
      s.min_len = 1;
      s.max_len = 64;
      s.alphabet = 26;
      break;
  }
  return s;
}

}  // namespace fourier::tasks
