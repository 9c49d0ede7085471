#pragma once

#include <Eigen/Core>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fourier/bench/flops.hpp"
#include "fourier/bench/report.hpp"
#include "fourier/bench/spectrum.hpp"
#include "fourier/bench/sweep.hpp"
#include "fourier/bench/timing.hpp"
#include "fourier/cli/run_config.hpp"
#include "fourier/dct.hpp"
#include "fourier/nn/checkpoint.hpp"
#include "fourier/version.hpp"

namespace fourier::cli {

namespace fs = std::filesystem;

/// Exit codes.
inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 1;
inline constexpr int exit_numerical = 2;

/// Values given on the command line or through SPECTRAL_* variables.
/// They override the config file.
struct Overrides {
  std::string config = "byte-classify";
  std::optional<std::uint64_t> seed;
  std::string out = "runs/latest";
  std::optional<double> ratio;
  std::optional<std::string> strategy;
  std::optional<std::size_t> threads;
  std::vector<std::size_t> lengths;
  std::string data;        // dataset directory written by write_dataset
  std::string checkpoint;  // checkpoint stem (path without .json/.bin)
  bool flops_only = false;
};

/// Exclusive claim on an output directory for the life of one run.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    fourier::detail::require_config(f != nullptr, "output directory " + dir.string() +
                                                      " is locked by another run (remove " + path_.string() +
                                                      " if that run is gone)");
    std::fclose(f);
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
};

inline nlohmann::json versions() {
  return {{"fourier", version_string},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"compiler", __VERSION__},
          {"cplusplus", __cplusplus}};
}

inline nlohmann::json make_manifest(const std::string& command, const RunConfig& run, const Overrides& o) {
  const nlohmann::json run_json = run;
  nlohmann::json m{{"command", command},
                   {"config_hash", bench::config_hash(run_json)},
                   {"seed", run.train.seed},
                   {"versions", versions()},
                   {"run", run_json}};
  if (!o.data.empty()) m["data_dir"] = o.data;
  if (!o.checkpoint.empty()) m["checkpoint"] = o.checkpoint;
  return m;
}

inline void write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream out(p, std::ios::binary);
  out << j.dump(2) << '\n';
  fourier::detail::require_config(static_cast<bool>(out), "cannot write " + p.string());
}

inline RunConfig resolve(const Overrides& o) {
  RunConfig run = load_run_config(o.config);
  if (o.seed) run.train.seed = *o.seed;
  if (o.ratio) {
    fourier::detail::require_config(*o.ratio > 0.0 && *o.ratio <= 1.0, "--ratio must lie in (0, 1]");
    run.model = bench::with_ratio(run.model, *o.ratio);
  }
  if (o.strategy) {
    TruncationStrategy s;
    try {
      s = parse_strategy(*o.strategy);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    for (auto& f : run.model.filters) f.strategy = s;
  }
  if (o.threads) run.threads = *o.threads;
  if (!o.lengths.empty()) run.bench.lengths = o.lengths;
  validate(run);
  return run;
}

inline void apply_threads(std::size_t n) {
  set_spectral_threads(static_cast<int>(n));
  Eigen::setNbThreads(static_cast<int>(n));
}

inline tasks::Dataset eval_split(const RunConfig& run, const Overrides& o) {
  return o.data.empty() ? tasks::generate(run.val_spec()) : tasks::read_dataset(o.data);
}

inline model::Transformer<float> load_trained(const Overrides& o) {
  fourier::detail::require_config(!o.checkpoint.empty(), "--checkpoint is required");
  const auto manifest = nn::read_checkpoint_manifest(o.checkpoint);
  model::ModelConfig cfg;
  try {
    cfg = manifest.at("meta").at("model").get<model::ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint has no model config: ") + e.what());
  }
  model::Transformer<float> m(cfg, 0);
  nn::load_checkpoint(m.parameters(), o.checkpoint);
  return m;
}

inline nlohmann::json eval_json(const model::Transformer<float>& m, const tasks::Dataset& ds, std::size_t batch) {
  const bool seq = m.config().mode == model::Mode::encoder_decoder;
  const auto r = seq ? model::evaluate_seq2seq(m, ds, batch) : model::evaluate_classifier(m, ds, batch);
  nlohmann::json j{{"examples", r.examples}, {"loss", r.loss}, {"accuracy", r.accuracy}};
  if (seq) j["sequence_accuracy"] = r.sequence_accuracy;
  return j;
}

// ------------------------------------------------------------- subcommands

inline int run_train(const Overrides& o, std::ostream& out, std::ostream& err) {
  const RunConfig run = resolve(o);
  apply_threads(run.threads);
  const fs::path dir = o.out;
  DirLock lock(dir);
  write_json(dir / "manifest.json", make_manifest("train", run, o));
  const auto train = o.data.empty() ? tasks::generate(run.data) : tasks::read_dataset(o.data);
  const auto val = tasks::generate(run.val_spec());
  model::Transformer<float> m(run.model, run.train.seed);
  std::ofstream metrics(dir / "metrics.jsonl", std::ios::binary);
  model::fit(m, train, run.train, {}, [&](const model::TrainLogEntry& e) {
    metrics << nlohmann::json{{"step", e.step}, {"loss", e.loss}, {"lr", e.lr}}.dump() << '\n';
    err << "step " << e.step << " loss " << e.loss << " (" << e.seconds << " s)\n";
  });
  auto final_eval = eval_json(m, val, run.eval_batch);
  final_eval["split"] = "val";
  metrics << final_eval.dump() << '\n';
  nn::save_checkpoint(m.parameters(), dir / "checkpoint",
                      {{"model", run.model}, {"train", run.train}, {"data", run.data}});
  out << "val accuracy " << final_eval["accuracy"].get<double>() << "\n";
  return exit_ok;
}

inline int run_eval(const Overrides& o, std::ostream& out, std::ostream&) {
  const RunConfig run = resolve(o);
  apply_threads(run.threads);
  const fs::path dir = o.out;
  DirLock lock(dir);
  write_json(dir / "manifest.json", make_manifest("eval", run, o));
  const auto m = load_trained(o);
  auto j = eval_json(m, eval_split(run, o), run.eval_batch);
  write_json(dir / "eval.json", j);
  out << j.dump() << "\n";
  return exit_ok;
}

inline int run_bench(const Overrides& o, std::ostream& out, std::ostream& err) {
  const RunConfig run = resolve(o);
  apply_threads(run.threads);
  const fs::path dir = o.out;
  DirLock lock(dir);
  const auto manifest = make_manifest("bench", run, o);
  write_json(dir / "manifest.json", manifest);
  bench::ReportHeader header{"flops", manifest["config_hash"], run.train.seed, {{"model", run.model.name}}};
  {
    std::ofstream f(dir / "flops.csv", std::ios::binary);
    const bool seq = run.model.mode == model::Mode::encoder_decoder;
    std::vector<bench::FlopsRow> rows;
    for (auto n : run.bench.lengths) {
      const std::size_t t = seq ? (run.bench.output_length ? run.bench.output_length : n) : 0;
      rows.push_back({n, t, bench::flops_estimate(run.model, n, t)});
    }
    bench::write_flops_csv(f, rows, header);
  }
  if (o.flops_only) {
    out << "wrote " << (dir / "flops.csv").string() << "\n";
    return exit_ok;
  }
  header.kind = "bench";
  header.notes["threads"] = std::to_string(run.threads);
  header.notes["peak_bytes"] = "high-water mark of tracked tensor buffers above the pre-run baseline";
  header.notes["timing"] = std::to_string(run.bench.warmup) + " warmup pass(es) excluded; repeats alternate variants";
  const auto rows = bench::bench_forward(
      run.model, run.bench.lengths,
      {.batch = run.bench.batch, .repeats = run.bench.repeats, .warmup = run.bench.warmup, .seed = run.train.seed});
  std::ofstream f(dir / "bench.csv", std::ios::binary);
  bench::write_bench_csv(f, rows, header);
  for (const auto& r : rows)
    err << r.config_id << " N=" << r.length << " median " << r.median_s << " s speedup " << r.speedup << "\n";
  out << "wrote " << (dir / "bench.csv").string() << "\n";
  return exit_ok;
}

inline int run_spectrum(const Overrides& o, std::ostream& out, std::ostream&) {
  const RunConfig run = resolve(o);
  apply_threads(run.threads);
  const fs::path dir = o.out;
  DirLock lock(dir);
  const auto manifest = make_manifest("spectrum", run, o);
  write_json(dir / "manifest.json", manifest);
  const auto m = load_trained(o);
  const auto ds = eval_split(run, o);
  std::size_t longest = 0;
  for (const auto& ex : ds.examples) longest = std::max(longest, ex.input.size());
  const auto rep = bench::spectrum_report(m, ds, run.spectrum_layers, run.eval_batch, {}, longest);
  std::ofstream f(dir / "spectrum.csv", std::ios::binary);
  bench::write_spectrum_csv(f, rep, {"spectrum", manifest["config_hash"], run.train.seed, {}});
  for (const auto& l : rep.layers) out << "layer " << l.layer << " centroid " << l.centroid << "\n";
  return exit_ok;
}

inline int run_sweep(const Overrides& o, std::ostream& out, std::ostream& err) {
  const RunConfig run = resolve(o);
  apply_threads(run.threads);
  const fs::path dir = o.out;
  DirLock lock(dir);
  const auto manifest = make_manifest("sweep", run, o);
  write_json(dir / "manifest.json", manifest);
  const auto train = o.data.empty() ? tasks::generate(run.data) : tasks::read_dataset(o.data);
  const auto val = tasks::generate(run.val_spec());
  const auto rows = bench::retention_sweep(run.model, train, val, run.sweep_ratios, run.train,
                                           [&](const bench::SweepRow& r) {
                                             err << "r=" << r.ratio << " accuracy " << r.accuracy
                                                 << (r.diverged ? " (diverged)" : "") << "\n";
                                           });
  std::ofstream f(dir / "sweep.csv", std::ios::binary);
  bench::write_sweep_csv(f, rows, {"sweep", manifest["config_hash"], run.train.seed, {{"steps", std::to_string(run.train.steps)}}});
  out << "wrote " << (dir / "sweep.csv").string() << "\n";
  return exit_ok;
}

/// Text file in, text file out: one sequence per line, whitespace-separated.
inline int run_dct(const std::string& input, const std::string& output, bool inverse, bool naive, std::ostream& out) {
  std::ifstream in(input);
  fourier::detail::require_config(static_cast<bool>(in), "dct: cannot read " + input);
  fourier::detail::require_config(!output.empty(), "dct: --out is required");
  write_json(output + ".manifest.json",
             {{"command", "dct"}, {"input", input}, {"inverse", inverse}, {"naive", naive}, {"versions", versions()}});
  std::ofstream o(output, std::ios::binary);
  std::string line;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<double> x;
    for (std::string tok; ls >> tok;) {
      try {
        std::size_t used = 0;
        x.push_back(std::stod(tok, &used));
        fourier::detail::require_config(used == tok.size(), "dct: bad number '" + tok + "'");
      } catch (const std::logic_error&) {
        throw ConfigError("dct: bad number '" + tok + "' in " + input);
      }
    }
    if (x.empty()) continue;
    const auto y = naive ? (inverse ? idct_naive(x) : dct_naive(x))
                         : (inverse ? idct_fft(x, *cached_plan(x.size())) : dct_fft(x, *cached_plan(x.size())));
    for (std::size_t i = 0; i < y.size(); ++i) o << (i ? " " : "") << bench::csv_number(y[i]);
    o << '\n';
    ++count;
  }
  fourier::detail::require_config(static_cast<bool>(o), "dct: cannot write " + output);
  out << "transformed " << count << " sequence(s)\n";
  return exit_ok;
}

// ---------------------------------------------------------------- dispatch

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Spectral-filter transformer toolkit"};
  app.require_subcommand(1);
  Overrides o;
  std::string dct_in, dct_out;
  bool inverse = false, naive = false;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", o.config, "Run config JSON, manifest, or model preset name")->envname("SPECTRAL_CONFIG");
    s->add_option("--seed", o.seed, "Training seed (initialization and batch order)")->envname("SPECTRAL_SEED");
    s->add_option("--out", o.out, "Output directory")->envname("SPECTRAL_OUT");
    s->add_option("--ratio", o.ratio, "Retain ratio for every filter")->envname("SPECTRAL_RATIO");
    s->add_option("--strategy", o.strategy, "Truncation strategy: high, low or top")->envname("SPECTRAL_STRATEGY");
    s->add_option("--threads", o.threads, "Worker threads for spectral slices")->envname("SPECTRAL_THREADS");
    s->add_option("--data", o.data, "Dataset directory (manifest.json + data.jsonl)")->envname("SPECTRAL_DATA");
    s->add_option("--checkpoint", o.checkpoint, "Checkpoint stem")->envname("SPECTRAL_CHECKPOINT");
  };
  auto* train = app.add_subcommand("train", "Fit a model; write checkpoint and metrics.jsonl");
  auto* eval = app.add_subcommand("eval", "Loss and accuracy of a checkpoint on a split");
  auto* bench = app.add_subcommand("bench", "Forward-pass timing of filtered vs vanilla; FLOPs report");
  auto* spectrum = app.add_subcommand("spectrum", "Per-layer amplitude spectra of a checkpoint");
  auto* sweep = app.add_subcommand("sweep", "Retention-ratio sweep");
  auto* dct = app.add_subcommand("dct", "Orthonormal DCT-II of each line of a text file");
  for (auto* s : {train, eval, bench, spectrum, sweep}) common(s);
  bench->add_option("--lengths", o.lengths, "Comma-separated sequence lengths")->delimiter(',')->envname("SPECTRAL_LENGTHS");
  bench->add_flag("--flops-only", o.flops_only, "Write only the FLOPs report");
  dct->add_option("input", dct_in, "Input file")->required();
  dct->add_option("--out", dct_out, "Output file")->required();
  dct->add_flag("--inverse", inverse, "Apply the inverse transform");
  dct->add_flag("--naive", naive, "Use the O(N^2) reference path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return exit_config;
  }

  try {
    if (*train) return run_train(o, out, err);
    if (*eval) return run_eval(o, out, err);
    if (*bench) return run_bench(o, out, err);
    if (*spectrum) return run_spectrum(o, out, err);
    if (*sweep) return run_sweep(o, out, err);
    if (*dct) return run_dct(dct_in, dct_out, inverse, naive, out);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return exit_numerical;
  } catch (const UndefinedCentroid& e) {
    err << "numerical failure: " << e.what() << "\n";
    return exit_numerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_config;
  }
  return exit_config;
}

}  // namespace fourier::cli
