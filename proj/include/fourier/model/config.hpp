#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fourier/error.hpp"
#include "fourier/nn/layers.hpp"
#include "fourier/spectral.hpp"
#include "fourier/tokens.hpp"

namespace fourier::model {

namespace detail {
using fourier::detail::require;
using fourier::detail::require_config;
}  // namespace detail

namespace tokens = fourier::tokens;

enum class Mode { encoder_only, encoder_decoder };
enum class PoolHead { mean_pool, first_token };

struct FilterSpec {
  std::size_t after_layer = 0;
  double retain_ratio = 1.0;
  TruncationStrategy strategy = TruncationStrategy::high_frequency_cut;

  bool operator==(const FilterSpec&) const = default;
};

struct ModelConfig {
  std::string name = "custom";
  Mode mode = Mode::encoder_only;
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 0;
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t ffn_dim = 128;
  std::size_t vocab_size = tokens::vocab_size;
  std::size_t max_len = 512;
  std::size_t num_classes = 2;  // encoder-only classification head
  std::vector<FilterSpec> filters;
  PoolHead head = PoolHead::mean_pool;
  nn::Activation activation = nn::Activation::gelu;
  nn::Positional positional = nn::Positional::sinusoidal;
  double init_std = 0.02;

  bool operator==(const ModelConfig&) const = default;

  void validate() const {
    using detail::require_config;
    require_config(encoder_layers >= 1, "model: at least one encoder layer required");
    require_config(dim >= 2, "model: dim must be at least 2");
    require_config(heads >= 1 && dim % heads == 0,
                   "model: dim " + std::to_string(dim) + " not divisible by " + std::to_string(heads) + " heads");
    require_config(ffn_dim >= 1 && vocab_size >= 1 && max_len >= 1, "model: ffn_dim, vocab_size and max_len must be positive");
    require_config(init_std > 0.0, "model: init_std must be positive");
    if (mode == Mode::encoder_only) {
      require_config(decoder_layers == 0, "model: encoder-only mode has zero decoder layers");
      require_config(num_classes >= 2, "model: classification head needs at least two classes");
    } else {
      require_config(decoder_layers >= 1, "model: encoder-decoder mode needs decoder layers");
    }
    for (std::size_t i = 0; i < filters.size(); ++i) {
      const auto& f = filters[i];
      require_config(f.after_layer < encoder_layers, "model: filter after layer " + std::to_string(f.after_layer) +
                                                         " but only " + std::to_string(encoder_layers) + " layers");
      require_config(f.retain_ratio > 0.0 && f.retain_ratio <= 1.0,
                     "model: retain_ratio must lie in (0, 1], got " + std::to_string(f.retain_ratio));
      if (i > 0)
        require_config(f.after_layer > filters[i - 1].after_layer, "model: filter positions must strictly increase");
    }
  }

  /// Sequence length entering each block for an input of length n.
  std::vector<std::size_t> block_lengths(std::size_t n) const {
    std::vector<std::size_t> out{n};
    for (const auto& f : filters) out.push_back(retained_length(out.back(), f.retain_ratio));
    return out;
  }
};

// ------------------------------------------------------------------- JSON

inline const char* to_string(Mode m) { return m == Mode::encoder_only ? "encoder-only" : "encoder-decoder"; }
inline const char* to_string(PoolHead h) { return h == PoolHead::mean_pool ? "mean-pool" : "first-token"; }
inline const char* to_string(nn::Activation a) { return a == nn::Activation::gelu ? "gelu" : "relu"; }
inline const char* to_string(nn::Positional p) { return p == nn::Positional::sinusoidal ? "sinusoidal" : "learned"; }

namespace detail {

template <typename E>
E parse_enum(const std::string& s, std::initializer_list<std::pair<const char*, E>> options, const char* what) {
  for (const auto& [name, value] : options)
    if (s == name) return value;
  throw ConfigError(std::string("model: unknown ") + what + " '" + s + "'");
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const FilterSpec& f) {
  j = {{"after_layer", f.after_layer}, {"retain_ratio", f.retain_ratio}, {"strategy", to_string(f.strategy)}};
}

inline void from_json(const nlohmann::json& j, FilterSpec& f) {
  try {
    f.after_layer = j.at("after_layer").get<std::size_t>();
    f.retain_ratio = j.at("retain_ratio").get<double>();
    f.strategy = j.contains("strategy") ? parse_strategy(j.at("strategy").get<std::string>())
                                        : TruncationStrategy::high_frequency_cut;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("filter: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("filter: ") + e.what());
  }
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"name", c.name},
       {"mode", to_string(c.mode)},
       {"encoder_layers", c.encoder_layers},
       {"decoder_layers", c.decoder_layers},
       {"dim", c.dim},
       {"heads", c.heads},
       {"ffn_dim", c.ffn_dim},
       {"vocab_size", c.vocab_size},
       {"max_len", c.max_len},
       {"num_classes", c.num_classes},
       {"filters", c.filters},
       {"head", to_string(c.head)},
       {"activation", to_string(c.activation)},
       {"positional", to_string(c.positional)},
       {"init_std", c.init_std}};
}

/// Missing keys keep their defaults; unknown keys are rejected so typos surface.
inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  static const std::vector<std::string> known{"name",      "mode",        "encoder_layers", "decoder_layers", "dim",
                                              "heads",     "ffn_dim",     "vocab_size",     "max_len",        "num_classes",
                                              "filters",   "head",        "activation",     "positional",     "init_std"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("model: unknown key '" + key + "'");
  try {
    c.name = j.value("name", c.name);
    if (j.contains("mode"))
      c.mode = detail::parse_enum<Mode>(j["mode"].get<std::string>(),
                                        {{"encoder-only", Mode::encoder_only}, {"encoder-decoder", Mode::encoder_decoder}},
                                        "mode");
    c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
    c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
    c.dim = j.value("dim", c.dim);
    c.heads = j.value("heads", c.heads);
    c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.max_len = j.value("max_len", c.max_len);
    c.num_classes = j.value("num_classes", c.num_classes);
    if (j.contains("filters")) c.filters = j["filters"].get<std::vector<FilterSpec>>();
    if (j.contains("head"))
      c.head = detail::parse_enum<PoolHead>(j["head"].get<std::string>(),
                                            {{"mean-pool", PoolHead::mean_pool}, {"first-token", PoolHead::first_token}},
                                            "head");
    if (j.contains("activation"))
      c.activation = detail::parse_enum<nn::Activation>(
          j["activation"].get<std::string>(), {{"gelu", nn::Activation::gelu}, {"relu", nn::Activation::relu}},
          "activation");
    if (j.contains("positional"))
      c.positional = detail::parse_enum<nn::Positional>(
          j["positional"].get<std::string>(),
          {{"sinusoidal", nn::Positional::sinusoidal}, {"learned", nn::Positional::learned}}, "positional");
    c.init_std = j.value("init_std", c.init_std);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

// ----------------------------------------------------------------- presets

inline std::vector<std::string> preset_names() {
  return {"lra-text", "listops-mini", "byte-classify", "seq2seq-copy", "bart-like-flops"};
}

inline ModelConfig preset(const std::string& name) {
  ModelConfig c;
  c.name = name;
  if (name == "lra-text") {
    // Speed-benchmark host: long byte sequences, 80% of the length removed after the first layer.
    c.encoder_layers = 4;
    c.dim = 256;
    c.heads = 4;
    c.ffn_dim = 1024;
    c.max_len = 4096;
    c.filters = {{0, 0.2}};
  } else if (name == "listops-mini") {
    c.encoder_layers = 4;
    c.dim = 64;
    c.heads = 4;
    c.ffn_dim = 128;
    c.max_len = 128;
    c.num_classes = 10;
    c.filters = {{0, 0.5}};
  } else if (name == "byte-classify") {
    c.encoder_layers = 4;
    c.dim = 32;
    c.heads = 2;
    c.ffn_dim = 64;
    c.max_len = 512;
    c.filters = {{0, 0.2}};
  } else if (name == "seq2seq-copy") {
    c.mode = Mode::encoder_decoder;
    c.encoder_layers = 2;
    c.decoder_layers = 2;
    c.dim = 64;
    c.heads = 4;
    c.ffn_dim = 128;
    c.max_len = 72;
    c.filters = {{0, 0.5}};
    c.init_std = 0.1;  // at 0.02 the copy task stalls for thousands of steps before attention aligns
  } else if (name == "bart-like-flops") {
    // FLOPs-estimator only: 12+12 layers, width 1024, two encoder blocks.
    c.mode = Mode::encoder_decoder;
    c.encoder_layers = 12;
    c.decoder_layers = 12;
    c.dim = 1024;
    c.heads = 16;
    c.ffn_dim = 4096;
    c.vocab_size = 50265;
    c.max_len = 8192;
    c.filters = {{1, 0.5}};  // first block = the first two layers
  } else {
    throw ConfigError("model: unknown preset '" + name + "'");
  }
  c.validate();
  return c;
}

inline ModelConfig load_model_config(const std::string& path) {
  std::ifstream in(path);
  detail::require_config(static_cast<bool>(in), "model: cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model: malformed JSON in '" + path + "': " + e.what());
  }
  ModelConfig c = j.contains("model") ? j["model"].get<ModelConfig>() : j.get<ModelConfig>();
  c.validate();
  return c;
}

}  // namespace fourier::model
