#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <new>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "fourier/bench/report.hpp"
#include "fourier/model/transformer.hpp"
#include "fourier/tensor.hpp"

namespace fourier::bench {

struct BenchResult {
  std::string config_id;  // "<name>/filtered" or "<name>/vanilla"
  std::size_t length = 0;
  std::size_t batch = 0;
  std::size_t repeats = 0;
  double median_s = 0, p10_s = 0, p90_s = 0;
  std::int64_t peak_bytes = 0;  // tensor high-water mark above the pre-run baseline
  std::string baseline;         // config id the speedup is measured against
  double speedup = 1.0;         // baseline median / this median
  bool capped = false;          // allocation failed; timings are NaN
};

struct BenchOptions {
  std::size_t batch = 16;
  std::size_t repeats = 5;
  std::size_t warmup = 1;
  std::uint64_t seed = 0;
};

/// Linear-interpolated quantile of an unsorted sample, q in [0, 1].
inline double quantile(std::vector<double> v, double q) {
  detail::require(!v.empty(), "quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

namespace detail {

using fourier::detail::require;

template <typename T>
void forward_once(const model::Transformer<T>& m, const nn::TokenBatch& tokens, model::ForwardOptions opt) {
  nn::Graph<T> g(false);
  if (m.config().mode == model::Mode::encoder_only)
    m.encode(g, tokens, nullptr, opt);
  else
    m.memory(g, tokens, nullptr, opt);
}

struct Samples {
  std::vector<double> seconds;
  std::int64_t peak = 0;
  bool capped = false;
};

}  // namespace detail

/// Forward passes of `models` (each with its own options) on one token batch.
/// Warmups run first; the timed repeats then alternate between variants so
/// slow drift on the machine hits all of them alike.
template <typename T>
std::vector<detail::Samples> time_variants(const model::Transformer<T>& m, const nn::TokenBatch& tokens,
                                           const std::vector<model::ForwardOptions>& variants, const BenchOptions& o) {
  std::vector<detail::Samples> out(variants.size());
  for (std::size_t v = 0; v < variants.size(); ++v) {
    try {
      const auto base = memory::current_bytes();
      memory::reset_peak();
      for (std::size_t w = 0; w < o.warmup; ++w) detail::forward_once(m, tokens, variants[v]);
      if (o.warmup == 0) detail::forward_once(m, tokens, variants[v]);  // peak memory still needs one pass
      out[v].peak = memory::peak_bytes() - base;
    } catch (const std::bad_alloc&) {
      out[v].capped = true;
    }
  }
  for (std::size_t r = 0; r < o.repeats; ++r) {
    for (std::size_t v = 0; v < variants.size(); ++v) {
      if (out[v].capped) continue;
      try {
        const auto t0 = std::chrono::steady_clock::now();
        detail::forward_once(m, tokens, variants[v]);
        out[v].seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      } catch (const std::bad_alloc&) {
        out[v].capped = true;
      }
    }
  }
  return out;
}

/// Times the filtered model against its vanilla twin (same weights, filters
/// replaced by the identity) at every length. Two rows per length.
template <typename T = float>
std::vector<BenchResult> bench_forward(const model::ModelConfig& cfg, const std::vector<std::size_t>& lengths,
                                       const BenchOptions& o) {
  detail::require(o.repeats >= 5, "bench_forward: at least 5 repeats are required");
  detail::require(o.batch >= 1, "bench_forward: batch must be positive");
  model::Transformer<T> m(cfg, o.seed);
  std::mt19937_64 rng(o.seed + 1);
  std::vector<BenchResult> rows;
  for (std::size_t n : lengths) {
    detail::require(n >= 1 && n <= cfg.max_len,
                    "bench_forward: length " + std::to_string(n) + " outside 1.." + std::to_string(cfg.max_len));
    nn::TokenBatch tokens{o.batch, n, std::vector<int>(o.batch * n)};
    for (auto& id : tokens.ids) id = static_cast<int>(rng() % 256);
    const auto samples = time_variants(m, tokens, {{.apply_filters = true}, {.apply_filters = false}}, o);
    const char* names[] = {"filtered", "vanilla"};
    const std::string vanilla_id = cfg.name + "/vanilla";
    double vanilla_median = std::numeric_limits<double>::quiet_NaN();
    std::vector<BenchResult> pair;
    for (std::size_t v = 0; v < 2; ++v) {
      BenchResult r;
      r.config_id = cfg.name + "/" + names[v];
      r.length = n;
      r.batch = o.batch;
      r.repeats = o.repeats;
      r.baseline = vanilla_id;
      r.capped = samples[v].capped;
      r.peak_bytes = samples[v].peak;
      if (r.capped) {
        r.median_s = r.p10_s = r.p90_s = r.speedup = std::numeric_limits<double>::quiet_NaN();
      } else {
        r.median_s = quantile(samples[v].seconds, 0.5);
        r.p10_s = quantile(samples[v].seconds, 0.1);
        r.p90_s = quantile(samples[v].seconds, 0.9);
      }
      if (v == 1) vanilla_median = r.median_s;
      pair.push_back(r);
    }
    for (auto& r : pair) {
      if (!r.capped) r.speedup = vanilla_median / r.median_s;
      rows.push_back(r);
    }
  }
  return rows;
}

inline void write_bench_csv(std::ostream& os, const std::vector<BenchResult>& rows, const ReportHeader& header) {
  header.write(os);
  os << "config_id,length,batch,repeats,median_s,p10_s,p90_s,peak_bytes,baseline,speedup,capped\n";
  for (const auto& r : rows)
    os << r.config_id << ',' << r.length << ',' << r.batch << ',' << r.repeats << ',' << csv_number(r.median_s) << ','
       << csv_number(r.p10_s) << ',' << csv_number(r.p90_s) << ',' << r.peak_bytes << ',' << r.baseline << ','
       << csv_number(r.speedup) << ',' << (r.capped ? 1 : 0) << '\n';
}

}  // namespace fourier::bench
