#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "fourier/error.hpp"

namespace fourier::tasks {

namespace detail {
using fourier::detail::require;
using fourier::detail::require_config;
}  // namespace detail

enum class TaskKind { listops_mini, byte_classify, seq2seq_copy };

inline const char* to_string(TaskKind k) {
  switch (k) {
    case TaskKind::listops_mini: return "listops-mini";
    case TaskKind::byte_classify: return "byte-classify";
    case TaskKind::seq2seq_copy: return "seq2seq-copy";
  }
  return "?";
}

inline TaskKind parse_task(const std::string& s) {
  if (s == "listops-mini" || s == "listops") return TaskKind::listops_mini;
  if (s == "byte-classify") return TaskKind::byte_classify;
  if (s == "seq2seq-copy" || s == "copy") return TaskKind::seq2seq_copy;
  throw ConfigError("dataset: unknown task '" + s + "'");
}

struct DatasetSpec {
  TaskKind kind = TaskKind::byte_classify;
  std::size_t size = 1000;
  std::uint64_t seed = 0;
  std::size_t min_len = 1;
  std::size_t max_len = 512;
  std::size_t max_depth = 3;  // listops
  std::size_t topics = 8;     // byte-classify
  std::size_t alphabet = 26;  // seq2seq-copy: symbols are bytes 'a'..
  bool reverse = false;       // seq2seq-copy

  bool operator==(const DatasetSpec&) const = default;
};

inline void to_json(nlohmann::json& j, const DatasetSpec& s) {
  j = {{"task", to_string(s.kind)}, {"size", s.size},         {"seed", s.seed},     {"min_len", s.min_len},
       {"max_len", s.max_len},      {"max_depth", s.max_depth}, {"topics", s.topics}, {"alphabet", s.alphabet},
       {"reverse", s.reverse}};
}

inline void from_json(const nlohmann::json& j, DatasetSpec& s) {
  try {
    if (j.contains("task")) s.kind = parse_task(j.at("task").get<std::string>());
    s.size = j.value("size", s.size);
    s.seed = j.value("seed", s.seed);
    s.min_len = j.value("min_len", s.min_len);
    s.max_len = j.value("max_len", s.max_len);
    s.max_depth = j.value("max_depth", s.max_depth);
    s.topics = j.value("topics", s.topics);
    s.alphabet = j.value("alphabet", s.alphabet);
    s.reverse = j.value("reverse", s.reverse);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("dataset: ") + e.what());
  }
}

/// One example. Classification tasks set `label`; sequence tasks set `target`.
struct Example {
  std::vector<int> input;
  int label = -1;
  std::vector<int> target;

  std::size_t length() const noexcept { return input.size(); }
  bool operator==(const Example&) const = default;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<Example> examples;

  std::size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }
};

/// Deterministic integer draws on top of a 64-bit Mersenne twister; the
/// standard distributions are implementation-defined, these are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }
  /// Uniform in [0, n).
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  /// Uniform in [lo, hi].
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  template <typename Vec>
  void shuffle(Vec& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

// ------------------------------------------------------------ persistence

/// `<dir>/manifest.json` (spec, seed, count) and `<dir>/data.jsonl`.
inline void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "data.jsonl", std::ios::binary);
    for (const auto& ex : ds.examples) {
      nlohmann::json line{{"input", ex.input}};
      if (ex.label >= 0) line["label"] = ex.label;
      if (!ex.target.empty()) line["target"] = ex.target;
      out << line.dump() << '\n';
    }
    detail::require_config(static_cast<bool>(out), "dataset: failed writing " + (dir / "data.jsonl").string());
  }
  std::ofstream man(dir / "manifest.json", std::ios::binary);
  man << nlohmann::json{{"spec", ds.spec}, {"seed", ds.spec.seed}, {"count", ds.examples.size()}}.dump(2) << '\n';
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream man(dir / "manifest.json");
  detail::require_config(static_cast<bool>(man), "dataset: no manifest in " + dir.string());
  Dataset ds;
  nlohmann::json m;
  try {
    man >> m;
    ds.spec = m.at("spec").get<DatasetSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("dataset: bad manifest: ") + e.what());
  }
  std::ifstream in(dir / "data.jsonl");
  detail::require_config(static_cast<bool>(in), "dataset: no data.jsonl in " + dir.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    detail::require_config(!j.is_discarded() && j.contains("input"), "dataset: malformed line in data.jsonl");
    Example ex;
    ex.input = j["input"].get<std::vector<int>>();
    ex.label = j.value("label", -1);
    if (j.contains("target")) ex.target = j["target"].get<std::vector<int>>();
    ds.examples.push_back(std::move(ex));
  }
  detail::require_config(ds.examples.size() == m.value("count", std::size_t{0}), "dataset: count mismatch with manifest");
  return ds;
}

}  // namespace fourier::tasks
