#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <vector>

#include "fourier/bench/report.hpp"
#include "fourier/model/train.hpp"

namespace fourier::bench {

struct SweepRow {
  double ratio = 1.0;
  double accuracy = 0.0;
  double loss = 0.0;
  double final_train_loss = 0.0;
  double seconds = 0.0;
  bool diverged = false;  // NaN guard tripped; metrics are NaN
};

/// Default grid 0.1, 0.2, ..., 1.0.
inline std::vector<double> default_ratio_grid() {
  std::vector<double> r;
  for (int i = 1; i <= 10; ++i) r.push_back(i / 10.0);
  return r;
}

/// The config with every filter's ratio replaced by `r`.
inline model::ModelConfig with_ratio(model::ModelConfig cfg, double r) {
  for (auto& f : cfg.filters) f.retain_ratio = r;
  return cfg;
}

/// Trains one encoder-only model per ratio from the same initialization seed
/// and batch order, then scores it on `val`.
template <typename T = float>
std::vector<SweepRow> retention_sweep(const model::ModelConfig& cfg, const tasks::Dataset& train,
                                      const tasks::Dataset& val, const std::vector<double>& ratios,
                                      const model::TrainConfig& tc,
                                      const std::function<void(const SweepRow&)>& on_row = {}) {
  fourier::detail::require(cfg.mode == model::Mode::encoder_only, "retention_sweep: encoder-only models only");
  fourier::detail::require(!cfg.filters.empty(), "retention_sweep: config has no filter to sweep");
  std::vector<SweepRow> rows;
  for (double r : ratios) {
    SweepRow row;
    row.ratio = r;
    const auto start = std::chrono::steady_clock::now();
    try {
      model::Transformer<T> m(with_ratio(cfg, r), tc.seed);
      const auto log = model::fit(m, train, tc);
      row.final_train_loss = log.empty() ? std::numeric_limits<double>::quiet_NaN() : log.back().loss;
      const auto ev = model::evaluate_classifier(m, val, tc.batch_size, tc.pad_to);
      row.accuracy = ev.accuracy;
      row.loss = ev.loss;
      if (!std::isfinite(row.loss)) throw NumericalError("retention_sweep: non-finite validation loss");
    } catch (const NumericalError&) {
      row.diverged = true;
      row.accuracy = row.loss = row.final_train_loss = std::numeric_limits<double>::quiet_NaN();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(row);
    if (on_row) on_row(row);
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, const ReportHeader& header) {
  header.write(os);
  os << "ratio,accuracy,val_loss,final_train_loss,seconds,diverged\n";
  for (const auto& r : rows)
    os << csv_number(r.ratio) << ',' << csv_number(r.accuracy) << ',' << csv_number(r.loss) << ','
       << csv_number(r.final_train_loss) << ',' << csv_number(r.seconds) << ',' << (r.diverged ? 1 : 0) << '\n';
}

}  // namespace fourier::bench
