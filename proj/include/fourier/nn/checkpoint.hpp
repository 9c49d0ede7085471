#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fourier/error.hpp"
#include "fourier/nn/autograd.hpp"

// Checkpoints are two files: <stem>.json lists every parameter with its
// shape and element offset, <stem>.bin holds all values back to back as
// little-endian IEEE-754 doubles.
namespace fourier::nn {

inline constexpr const char* kCheckpointFormat = "fourier-checkpoint/1";

namespace detail {

inline void put_f64(std::vector<unsigned char>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<unsigned char>(bits >> (8 * b)));
}

inline double get_f64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

inline std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

}  // namespace detail

/// Writes `<stem>.json` and `<stem>.bin`. `extra` is stored under "meta".
template <typename T>
void save_checkpoint(const ParameterSet<T>& params, const std::filesystem::path& stem,
                     const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["dtype"] = "float64-le";
  manifest["blob"] = detail::with_suffix(stem, ".bin").filename().string();
  manifest["meta"] = extra;
  manifest["tensors"] = nlohmann::json::array();

  std::vector<unsigned char> blob;
  std::size_t offset = 0;
  for (const auto& p : params) {
    manifest["tensors"].push_back({{"name", p->name}, {"shape", p->data.shape()}, {"offset", offset}});
    for (T v : p->data.values()) detail::put_f64(blob, static_cast<double>(v));
    offset += p->data.size();
  }
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  std::ofstream bin(detail::with_suffix(stem, ".bin"), std::ios::binary);
  bin.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  detail::require_config(static_cast<bool>(bin), "checkpoint: failed writing " + stem.string() + ".bin");
  std::ofstream js(detail::with_suffix(stem, ".json"));
  js << manifest.dump(2) << '\n';
  detail::require_config(static_cast<bool>(js), "checkpoint: failed writing " + stem.string() + ".json");
}

inline nlohmann::json read_checkpoint_manifest(const std::filesystem::path& stem) {
  std::ifstream js(detail::with_suffix(stem, ".json"));
  detail::require_config(static_cast<bool>(js), "checkpoint: cannot open " + stem.string() + ".json");
  nlohmann::json manifest;
  try {
    js >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint: malformed manifest: " + std::string(e.what()));
  }
  detail::require_config(manifest.value("format", "") == kCheckpointFormat, "checkpoint: unknown format");
  return manifest;
}

/// Fills every parameter of `params` from the checkpoint. Names and shapes
/// must match; extra tensors in the file are an error too.
template <typename T>
void load_checkpoint(ParameterSet<T>& params, const std::filesystem::path& stem) {
  const auto manifest = read_checkpoint_manifest(stem);
  const auto bin_path = stem.has_parent_path() ? stem.parent_path() / manifest.at("blob").get<std::string>()
                                               : std::filesystem::path(manifest.at("blob").get<std::string>());
  std::ifstream bin(bin_path, std::ios::binary);
  detail::require_config(static_cast<bool>(bin), "checkpoint: cannot open " + bin_path.string());
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  const auto& tensors = manifest.at("tensors");
  detail::require_config(tensors.size() == params.size(),
                         "checkpoint: holds " + std::to_string(tensors.size()) + " tensors, model has " +
                             std::to_string(params.size()));
  for (const auto& entry : tensors) {
    const auto name = entry.at("name").get<std::string>();
    Parameter<T>* p = params.find(name);
    detail::require_config(p != nullptr, "checkpoint: model has no parameter '" + name + "'");
    detail::require_config(entry.at("shape").get<Shape>() == p->data.shape(),
                           "checkpoint: shape mismatch for '" + name + "'");
    const auto offset = entry.at("offset").get<std::size_t>();
    detail::require_config((offset + p->data.size()) * 8 <= blob.size(), "checkpoint: blob too short for '" + name + "'");
    for (std::size_t i = 0; i < p->data.size(); ++i)
      p->data[i] = static_cast<T>(detail::get_f64(blob.data() + (offset + i) * 8));
  }
}

}  // namespace fourier::nn
