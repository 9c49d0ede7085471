#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fourier/bench/sweep.hpp"
#include "fourier/model/config.hpp"
#include "fourier/model/train.hpp"
#include "fourier/tasks/generators.hpp"

namespace fourier::cli {

struct BenchSettings {
  std::vector<std::size_t> lengths{1024, 4096};
  std::size_t batch = 16;
  std::size_t repeats = 5;
  std::size_t warmup = 1;
  std::size_t output_length = 0;  // decoder positions for the FLOPs report; 0 uses the input length
};

/// Everything one invocation needs. The manifest stores the resolved copy,
/// so `--config <out>/manifest.json` replays a run.
struct RunConfig {
  model::ModelConfig model = model::preset("byte-classify");
  tasks::DatasetSpec data = tasks::default_spec(tasks::TaskKind::byte_classify);
  std::size_t val_size = 500;
  std::uint64_t val_seed = 1;
  model::TrainConfig train;
  BenchSettings bench;
  std::vector<double> sweep_ratios = bench::default_ratio_grid();
  std::vector<std::size_t> spectrum_layers;  // empty = all
  std::size_t eval_batch = 64;
  std::size_t threads = 1;

  tasks::DatasetSpec val_spec() const {
    auto s = data;
    s.size = val_size;
    s.seed = val_seed;
    return s;
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& r) {
  j = {{"model", r.model},
       {"data", r.data},
       {"val", {{"size", r.val_size}, {"seed", r.val_seed}}},
       {"train", r.train},
       {"bench",
        {{"lengths", r.bench.lengths},
         {"batch", r.bench.batch},
         {"repeats", r.bench.repeats},
         {"warmup", r.bench.warmup},
         {"output_length", r.bench.output_length}}},
       {"sweep", {{"ratios", r.sweep_ratios}}},
       {"spectrum", {{"layers", r.spectrum_layers}}},
       {"eval_batch", r.eval_batch},
       {"threads", r.threads}};
}

namespace detail {

using fourier::detail::require_config;

inline void only_keys(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
  require_config(j.is_object(), where + ": expected an object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (const char* key : keys) ok = ok || k == key;
    require_config(ok, where + ": unknown key '" + k + "'");
  }
}

}  // namespace detail

inline void from_json(const nlohmann::json& j, RunConfig& r) {
  detail::only_keys(j, {"model", "data", "val", "train", "bench", "sweep", "spectrum", "eval_batch", "threads"}, "run");
  try {
    if (j.contains("model")) {
      const auto& m = j["model"];
      r.model = m.is_string() ? model::preset(m.get<std::string>()) : m.get<model::ModelConfig>();
    }
    if (j.contains("data")) r.data = j["data"].get<tasks::DatasetSpec>();
    if (j.contains("val")) {
      detail::only_keys(j["val"], {"size", "seed"}, "val");
      r.val_size = j["val"].value("size", r.val_size);
      r.val_seed = j["val"].value("seed", r.val_seed);
    }
    if (j.contains("train")) r.train = j["train"].get<model::TrainConfig>();
    if (j.contains("bench")) {
      const auto& b = j["bench"];
      detail::only_keys(b, {"lengths", "batch", "repeats", "warmup", "output_length"}, "bench");
      r.bench.lengths = b.value("lengths", r.bench.lengths);
      r.bench.batch = b.value("batch", r.bench.batch);
      r.bench.repeats = b.value("repeats", r.bench.repeats);
      r.bench.warmup = b.value("warmup", r.bench.warmup);
      r.bench.output_length = b.value("output_length", r.bench.output_length);
    }
    if (j.contains("sweep")) {
      detail::only_keys(j["sweep"], {"ratios"}, "sweep");
      r.sweep_ratios = j["sweep"].value("ratios", r.sweep_ratios);
    }
    if (j.contains("spectrum")) {
      detail::only_keys(j["spectrum"], {"layers"}, "spectrum");
      r.spectrum_layers = j["spectrum"].value("layers", r.spectrum_layers);
    }
    r.eval_batch = j.value("eval_batch", r.eval_batch);
    r.threads = j.value("threads", r.threads);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
}

/// Task that pairs with each model preset.
inline RunConfig preset_run(const std::string& name) {
  RunConfig r;
  r.model = model::preset(name);
  if (name == "listops-mini") {
    r.data = tasks::default_spec(tasks::TaskKind::listops_mini);
    r.data.size = 5000;
    r.train.steps = 600;
  } else if (name == "seq2seq-copy" || name == "bart-like-flops") {
    r.data = tasks::default_spec(tasks::TaskKind::seq2seq_copy);
    r.data.size = 5000;
    r.train.steps = 1500;
    r.train.batch_size = 32;
    r.bench.lengths = {32, 64};
  } else {
    r.data = tasks::default_spec(tasks::TaskKind::byte_classify);
    r.data.size = 10000;
    r.train.steps = 400;
  }
  if (name == "bart-like-flops") {
    r.bench.lengths = {766};
    r.bench.output_length = 53;
  }
  return r;
}

/// Consistency checks across sections (a model alone validates itself).
inline void validate(const RunConfig& r) {
  r.model.validate();
  const bool seq = r.data.kind == tasks::TaskKind::seq2seq_copy;
  detail::require_config(seq == (r.model.mode == model::Mode::encoder_decoder),
                         std::string("run config: task ") + tasks::to_string(r.data.kind) + " does not fit a " +
                             model::to_string(r.model.mode) + " model");
  if (r.data.kind == tasks::TaskKind::listops_mini)
    detail::require_config(r.model.num_classes == 10, "run config: listops-mini needs num_classes = 10");
  if (r.data.kind == tasks::TaskKind::byte_classify)
    detail::require_config(r.model.num_classes == 2, "run config: byte-classify needs num_classes = 2");
  const std::size_t longest = seq ? r.data.max_len + 1 : r.data.max_len;
  detail::require_config(longest <= r.model.max_len, "run config: data length " + std::to_string(r.data.max_len) +
                                                         " exceeds model max_len " + std::to_string(r.model.max_len));
  detail::require_config(r.val_size >= 1, "run config: val.size must be positive");
  detail::require_config(r.eval_batch >= 1, "run config: eval_batch must be positive");
  detail::require_config(r.threads >= 1, "run config: threads must be positive");
  detail::require_config(r.bench.repeats >= 5, "run config: bench.repeats must be at least 5");
  for (double x : r.sweep_ratios) detail::require_config(x > 0.0 && x <= 1.0, "run config: sweep ratio outside (0, 1]");
}

/// `spec` is a JSON file (a run config, or a manifest holding one under
/// "run") or the name of a model preset.
inline RunConfig load_run_config(const std::string& spec) {
  if (!std::filesystem::exists(spec)) {
    const auto names = model::preset_names();
    detail::require_config(std::find(names.begin(), names.end(), spec) != names.end(),
                           "config: '" + spec + "' is neither a file nor a preset");
    return preset_run(spec);
  }
  std::ifstream in(spec);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  detail::require_config(!j.is_discarded(), "config: " + spec + " is not valid JSON");
  if (j.contains("run") && j.contains("config_hash")) j = j["run"];
  return j.get<RunConfig>();
}

}  // namespace fourier::cli
