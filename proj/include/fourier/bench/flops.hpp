#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fourier/bench/report.hpp"
#include "fourier/model/config.hpp"
#include "fourier/spectral.hpp"

namespace fourier::bench {

/// Analytic operation counts for one forward pass. Every multiply-add is two
/// FLOPs. Counted: the four attention projections, the two attention matrix
/// products (scores and weighted values), both feed-forward matmuls, and the
/// transforms inside each spectral filter. Not counted: softmax, norms,
/// activations, residual adds, embedding lookup, the classifier / vocabulary
/// projection, and bridge upsample-add. A filter with r = 1 is the identity
/// and costs nothing.
struct FlopsModel {
  double transform_coeff = 5.0;  // FLOPs per n*log2(n) for one length-n transform of one channel

  static double dense(double rows, double in, double out) { return 2.0 * rows * in * out; }

  /// Self-attention block over n positions: Q, K, V, O projections + QK^T + PV.
  static double self_attention(double n, double d) { return 4.0 * dense(n, d, d) + 4.0 * n * n * d; }

  /// Cross-attention: Q and O on t target rows, K and V on m memory rows.
  static double cross_attention(double t, double m, double d) {
    return 2.0 * dense(t, d, d) + 2.0 * dense(m, d, d) + 4.0 * t * m * d;
  }

  static double feed_forward(double n, double d, double f) { return dense(n, d, f) + dense(n, f, d); }

  static double encoder_layer(double n, double d, double f) { return self_attention(n, d) + feed_forward(n, d, f); }

  static double decoder_layer(double t, double m, double d, double f) {
    return self_attention(t, d) + cross_attention(t, m, d) + feed_forward(t, d, f);
  }

  /// DCT of n points plus inverse DCT of the m retained ones, on each of d channels.
  double filter(std::size_t n, std::size_t m, double d) const {
    if (m == n) return 0.0;
    auto cost = [&](double len) { return len > 1 ? transform_coeff * len * std::log2(len) : 0.0; };
    return d * (cost(static_cast<double>(n)) + cost(static_cast<double>(m)));
  }
};

struct FlopsBreakdown {
  double encoder_layers = 0;
  double filters = 0;
  double decoder_layers = 0;
  double total() const { return encoder_layers + filters + decoder_layers; }
};

struct FlopsEstimate {
  FlopsBreakdown filtered;
  FlopsBreakdown vanilla;
  std::vector<std::size_t> encoder_lengths;  // per encoder layer, in the filtered model
  double ratio = 1.0;                        // vanilla / filtered
};

/// `input_len` source tokens; `output_len` decoder positions (ignored for
/// encoder-only models).
inline FlopsEstimate flops_estimate(const model::ModelConfig& cfg, std::size_t input_len, std::size_t output_len = 0,
                                    const FlopsModel& fm = {}) {
  cfg.validate();
  detail::require(input_len >= 1, "flops_estimate: input length must be positive");
  const double d = static_cast<double>(cfg.dim), f = static_cast<double>(cfg.ffn_dim),
               n0 = static_cast<double>(input_len);
  FlopsEstimate e;
  std::size_t n = input_len, next = 0;
  for (std::size_t l = 0; l < cfg.encoder_layers; ++l) {
    e.encoder_lengths.push_back(n);
    e.filtered.encoder_layers += FlopsModel::encoder_layer(static_cast<double>(n), d, f);
    e.vanilla.encoder_layers += FlopsModel::encoder_layer(n0, d, f);
    if (next < cfg.filters.size() && cfg.filters[next].after_layer == l) {
      const std::size_t m = retained_length(n, cfg.filters[next++].retain_ratio);
      e.filtered.filters += fm.filter(n, m, d);
      n = m;
    }
  }
  if (cfg.mode == model::Mode::encoder_decoder) {
    detail::require(output_len >= 1, "flops_estimate: encoder-decoder needs an output length");
    // The bridge restores the full input length, so the decoder costs the same in both models.
    const double t = static_cast<double>(output_len);
    const double dec = static_cast<double>(cfg.decoder_layers) * FlopsModel::decoder_layer(t, n0, d, f);
    e.filtered.decoder_layers = dec;
    e.vanilla.decoder_layers = dec;
  }
  e.ratio = e.vanilla.total() / e.filtered.total();
  return e;
}

inline std::string flops_assumptions(const FlopsModel& fm = {}) {
  std::ostringstream os;
  os << "# flops: 2 FLOPs per multiply-add\n"
     << "# flops: counted = attention Q/K/V/O projections, QK^T and PV products, feed-forward matmuls, "
        "spectral filter transforms ("
     << fm.transform_coeff << " * n * log2(n) per channel for the forward DCT and again for the inverse)\n"
     << "# flops: not counted = softmax, layer norms, activations, residual adds, embeddings, output/classifier "
        "projection, bridge upsample-add\n"
     << "# flops: a filter with r = 1 is the identity and counts 0\n"
     << "# flops: decoder cross-attention reads the bridged memory at full input length in both models\n";
  return os.str();
}

inline std::string format_flops_report(const model::ModelConfig& cfg, std::size_t input_len, std::size_t output_len,
                                       const FlopsEstimate& e, const FlopsModel& fm = {}) {
  std::ostringstream os;
  os << flops_assumptions(fm) << "# model: " << cfg.name << " layers=" << cfg.encoder_layers << "+" << cfg.decoder_layers
     << " dim=" << cfg.dim << " ffn=" << cfg.ffn_dim << "\n"
     << "# lengths: input=" << input_len << " output=" << output_len << "\n";
  os.precision(6);
  os << "part,filtered_flops,vanilla_flops\n"
     << "encoder_layers," << e.filtered.encoder_layers << "," << e.vanilla.encoder_layers << "\n"
     << "filters," << e.filtered.filters << "," << e.vanilla.filters << "\n"
     << "decoder_layers," << e.filtered.decoder_layers << "," << e.vanilla.decoder_layers << "\n"
     << "total," << e.filtered.total() << "," << e.vanilla.total() << "\n"
     << "ratio_vanilla_over_filtered," << e.ratio << ",\n";
  return os.str();
}

struct FlopsRow {
  std::size_t input_len = 0;
  std::size_t output_len = 0;
  FlopsEstimate estimate;
};

inline void write_flops_csv(std::ostream& os, const std::vector<FlopsRow>& rows, ReportHeader header,
                            const FlopsModel& fm = {}) {
  header.write(os);
  os << flops_assumptions(fm);
  os << "input_len,output_len,filtered_flops,vanilla_flops,ratio\n";
  for (const auto& r : rows)
    os << r.input_len << ',' << r.output_len << ',' << csv_number(r.estimate.filtered.total()) << ','
       << csv_number(r.estimate.vanilla.total()) << ',' << csv_number(r.estimate.ratio) << '\n';
}

}  // namespace fourier::bench
