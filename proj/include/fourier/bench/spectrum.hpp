#pragma once

#include <ostream>
#include <vector>

#include "fourier/bench/report.hpp"
#include "fourier/model/transformer.hpp"
#include "fourier/spectral.hpp"
#include "fourier/tasks/batch.hpp"

namespace fourier::bench {

struct LayerSpectrum {
  std::size_t layer = 0;             // 0 = embedding output, l = output of encoder layer l
  std::size_t length = 0;            // time length at this layer
  std::vector<double> curve;         // mean amplitude per frequency bin 0..length/2
  double centroid = 0.0;             // in bins
  double normalized_centroid = 0.0;  // centroid / (bins - 1), comparable across lengths
};

struct SpectrumReport {
  std::vector<LayerSpectrum> layers;
  std::size_t sequences = 0;
};

/// Per-layer averaged amplitude spectra of encoder hidden states over the
/// whole dataset. `layers` selects states by index (0 = embedding output);
/// empty means all of them. Batches are padded to `pad_to` so every sequence
/// in a layer shares one time length; 0 suits equal-length datasets.
template <typename T>
SpectrumReport spectrum_report(const model::Transformer<T>& m, const tasks::Dataset& ds, std::vector<std::size_t> layers,
                               std::size_t batch_size = 32, model::ForwardOptions opt = {},
                               std::size_t pad_to = 0) {
  const std::size_t states = m.config().encoder_layers + 1;
  if (layers.empty())
    for (std::size_t l = 0; l < states; ++l) layers.push_back(l);
  for (auto l : layers)
    fourier::detail::require(l < states, "spectrum_report: layer " + std::to_string(l) + " out of range 0.." +
                                             std::to_string(states - 1));
  opt.keep_layer_states = true;
  std::vector<PowerSpectrum> acc(layers.size());
  std::vector<std::size_t> lengths(layers.size());
  tasks::BatchIterator it(ds, batch_size, tokens::pad, 0, pad_to, false);
  SpectrumReport report;
  tasks::Batch b;
  while (it.next(b)) {
    nn::Graph<T> g(false);
    const auto enc = m.encode(g, b.inputs, nullptr, opt);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& h = enc.layer_states[layers[i]]->value;
      acc[i].add(h);
      lengths[i] = h.dim(1);
    }
    report.sequences += b.size();
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    LayerSpectrum s;
    s.layer = layers[i];
    s.length = lengths[i];
    s.curve = acc[i].curve();
    s.centroid = spectral_centroid(s.curve);
    s.normalized_centroid = s.curve.size() > 1 ? s.centroid / static_cast<double>(s.curve.size() - 1) : 0.0;
    report.layers.push_back(std::move(s));
  }
  return report;
}

/// Long format: one row per (layer, bin), with the layer's centroid repeated.
inline void write_spectrum_csv(std::ostream& os, const SpectrumReport& r, ReportHeader header) {
  header.notes["sequences"] = std::to_string(r.sequences);
  header.notes["amplitude"] = "|FFT_k| / sqrt(N) along time, averaged over dims and sequences; bins 0..N/2";
  header.write(os);
  os << "layer,length,bin,amplitude,centroid,normalized_centroid\n";
  for (const auto& l : r.layers)
    for (std::size_t k = 0; k < l.curve.size(); ++k)
      os << l.layer << ',' << l.length << ',' << k << ',' << csv_number(l.curve[k]) << ',' << csv_number(l.centroid)
         << ',' << csv_number(l.normalized_centroid) << '\n';
}

}  // namespace fourier::bench
