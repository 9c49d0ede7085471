#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fourier/bench/flops.hpp"
#include "fourier/bench/spectrum.hpp"
#include "fourier/bench/sweep.hpp"
#include "fourier/bench/timing.hpp"
#include "fourier/tasks/generators.hpp"

using namespace fourier;
using namespace fourier::bench;

namespace {

model::ModelConfig tiny(std::size_t layers, std::size_t dim, std::size_t ffn) {
  model::ModelConfig c;
  c.name = "tiny";
  c.encoder_layers = layers;
  c.dim = dim;
  c.heads = 1;
  c.ffn_dim = ffn;
  c.max_len = 512;
  return c;
}

// Runs one encoder layer's matrix products with explicit loops and counts
// every multiply-add. Values are irrelevant; only the loop trip counts matter.
std::size_t brute_force_layer_macs(std::size_t n, std::size_t d, std::size_t f) {
  std::size_t macs = 0;
  std::vector<double> x(n * d, 1.0), w(d * d, 0.5), acc(n * d);
  auto project = [&] {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double s = 0;
        for (std::size_t k = 0; k < d; ++k, ++macs) s += x[i * d + k] * w[k * d + j];
        acc[i * d + j] = s;
      }
  };
  for (int p = 0; p < 4; ++p) project();  // Q, K, V, O
  std::vector<double> scores(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < d; ++k, ++macs) scores[i * n + j] += x[i * d + k] * x[j * d + k];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t j = 0; j < n; ++j, ++macs) acc[i * d + k] += scores[i * n + j] * x[j * d + k];
  std::vector<double> hidden(n * f);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j)
      for (std::size_t k = 0; k < d; ++k, ++macs) hidden[i * f + j] += x[i * d + k];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < f; ++k, ++macs) acc[i * d + j] += hidden[i * f + k];
  return macs;
}

}  // namespace

// ------------------------------------------------------------------- flops

TEST(Flops, MatchesBruteForceSingleLayer) {
  const auto e = flops_estimate(tiny(1, 2, 8), 4);
  EXPECT_EQ(e.filtered.encoder_layers, 2.0 * static_cast<double>(brute_force_layer_macs(4, 2, 8)));
  EXPECT_EQ(e.filtered.total(), e.vanilla.total());
}

TEST(Flops, FilteredTwoLayerHandCount) {
  auto c = tiny(2, 2, 8);
  c.filters = {{0, 0.5}};
  const auto e = flops_estimate(c, 4);
  const double layer4 = 2.0 * static_cast<double>(brute_force_layer_macs(4, 2, 8));
  const double layer2 = 2.0 * static_cast<double>(brute_force_layer_macs(2, 2, 8));
  // DCT of 4 points and IDCT of 2, on 2 channels, at 5 n log2 n each.
  const double transforms = 2.0 * (5.0 * 4 * 2 + 5.0 * 2 * 1);
  EXPECT_DOUBLE_EQ(e.filtered.total(), layer4 + layer2 + transforms);
  EXPECT_DOUBLE_EQ(e.vanilla.total(), 2 * layer4);
  EXPECT_EQ(e.encoder_lengths, (std::vector<std::size_t>{4, 2}));
}

TEST(Flops, UnitRatiosGiveExactlyOne) {
  for (const auto& name : model::preset_names()) {
    auto c = with_ratio(model::preset(name), 1.0);
    for (std::size_t n : {1u, 17u, 766u}) {
      const auto e = flops_estimate(c, std::min<std::size_t>(n, c.max_len), 9);
      EXPECT_EQ(e.ratio, 1.0) << name << " n=" << n;
      EXPECT_EQ(e.filtered.total(), e.vanilla.total());
    }
  }
}

TEST(Flops, BartLikeAnchors) {
  auto c = model::preset("bart-like-flops");
  const auto cnn = flops_estimate(c, 766, 53);
  EXPECT_GE(cnn.ratio, 1.3);
  EXPECT_LE(cnn.ratio, 2.0);
  const auto eli5 = flops_estimate(with_ratio(c, 0.3), 5140, 693);
  EXPECT_GE(eli5.ratio, 1.5);
  EXPECT_LE(eli5.ratio, 3.0);
  EXPECT_GT(eli5.ratio, cnn.ratio);
}

TEST(Flops, EncoderDecoderNeedsOutputLength) {
  EXPECT_THROW(flops_estimate(model::preset("seq2seq-copy"), 10, 0), InvalidArgument);
  EXPECT_THROW(flops_estimate(tiny(1, 2, 2), 0), InvalidArgument);
}

TEST(Flops, ReportListsAssumptions) {
  const auto c = model::preset("bart-like-flops");
  const auto text = format_flops_report(c, 766, 53, flops_estimate(c, 766, 53));
  EXPECT_NE(text.find("2 FLOPs per multiply-add"), std::string::npos);
  EXPECT_NE(text.find("not counted"), std::string::npos);
  EXPECT_NE(text.find("ratio_vanilla_over_filtered"), std::string::npos);
}

// ------------------------------------------------------------------ timing

TEST(Quantile, InterpolatesSortedSample) {
  EXPECT_DOUBLE_EQ(quantile({5, 1, 3, 2, 4}, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4, 5}, 0.1), 1.4);
  EXPECT_DOUBLE_EQ(quantile({7}, 0.9), 7.0);
  EXPECT_THROW(quantile({}, 0.5), InvalidArgument);
}

TEST(BenchForward, SchemaAndOrdering) {
  auto c = tiny(2, 16, 32);
  c.filters = {{0, 0.25}};
  const auto rows = bench_forward(c, {32, 64}, {.batch = 2, .repeats = 5, .warmup = 1, .seed = 3});
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.repeats, 5u);
    EXPECT_LE(r.p10_s, r.median_s);
    EXPECT_LE(r.median_s, r.p90_s);
    EXPECT_GT(r.peak_bytes, 0);
    EXPECT_FALSE(r.capped);
    EXPECT_EQ(r.baseline, "tiny/vanilla");
  }
  EXPECT_EQ(rows[0].config_id, "tiny/filtered");
  EXPECT_EQ(rows[1].config_id, "tiny/vanilla");
  EXPECT_EQ(rows[1].speedup, 1.0);
  // Without a tape the full-length first layer sets the high-water mark in both variants.
  EXPECT_LE(rows[2].peak_bytes, rows[3].peak_bytes);
}

TEST(BenchForward, SelfComparisonIsNearOne) {
  auto c = tiny(2, 64, 128);  // no filters: both variants run the same computation
  const auto rows = bench_forward(c, {256}, {.batch = 4, .repeats = 9, .warmup = 2, .seed = 1});
  EXPECT_NEAR(rows[0].speedup, 1.0, 0.1);
}

TEST(BenchForward, RejectsTooFewRepeatsAndLongInputs) {
  EXPECT_THROW(bench_forward(tiny(1, 8, 8), {8}, {.repeats = 4}), InvalidArgument);
  EXPECT_THROW(bench_forward(tiny(1, 8, 8), {513}, {.repeats = 5}), InvalidArgument);
}

TEST(BenchForward, CsvHasHeaderAndOneLinePerRow) {
  const auto rows = bench_forward(tiny(1, 8, 8), {8, 16}, {.batch = 1, .repeats = 5});
  std::ostringstream os;
  write_bench_csv(os, rows, {"bench", config_hash(nlohmann::json(tiny(1, 8, 8))), 0, {{"flops", "n/a"}}});
  std::istringstream in(os.str());
  std::size_t comments = 0, lines = 0;
  for (std::string line; std::getline(in, line);) (line.rfind('#', 0) == 0 ? comments : lines)++;
  EXPECT_EQ(lines, 1 + rows.size());
  EXPECT_GE(comments, 3u);
  EXPECT_NE(os.str().find("# config_hash: "), std::string::npos);
}

TEST(ConfigHash, StableAndSensitive) {
  const auto a = config_hash(nlohmann::json(tiny(1, 8, 8)));
  EXPECT_EQ(a, config_hash(nlohmann::json(tiny(1, 8, 8))));
  EXPECT_NE(a, config_hash(nlohmann::json(tiny(1, 8, 16))));
  EXPECT_EQ(a.size(), 16u);
}

// ---------------------------------------------------------------- spectrum

TEST(Spectrum, ConstantProbeConcentratesAtBinZero) {
  auto c = tiny(2, 8, 16);
  c.positional = nn::Positional::learned;
  c.filters = {{0, 0.5}};
  model::Transformer<double> m(c, 4);
  m.parameters().find("encoder.embed.positions")->data.fill(0.0);
  tasks::Dataset ds;
  for (int i = 0; i < 6; ++i) ds.examples.push_back({std::vector<int>(32, 40 + i), 0, {}});
  const auto rep = spectrum_report(m, ds, {}, 4);
  ASSERT_EQ(rep.layers.size(), 3u);
  EXPECT_EQ(rep.sequences, 6u);
  for (const auto& l : rep.layers) {
    EXPECT_GT(l.curve[0], 1e-3);
    for (std::size_t k = 1; k < l.curve.size(); ++k) EXPECT_LT(l.curve[k], 1e-10) << "layer " << l.layer;
    EXPECT_NEAR(l.centroid, 0.0, 1e-9);
  }
  EXPECT_EQ(rep.layers[1].length, 32u);  // layer 0 output, before its filter
  EXPECT_EQ(rep.layers[2].length, 16u);
}

TEST(Spectrum, UntrainedControlReportsEveryRequestedLayer) {
  model::Transformer<float> m(tiny(3, 16, 32), 5);
  auto spec = tasks::default_spec(tasks::TaskKind::byte_classify);
  spec.size = 10;
  spec.max_len = 64;
  const auto rep = spectrum_report(m, tasks::generate(spec), {0, 3}, 4);
  ASSERT_EQ(rep.layers.size(), 2u);
  EXPECT_EQ(rep.layers[1].layer, 3u);
  for (const auto& l : rep.layers) {
    EXPECT_EQ(l.curve.size(), 33u);
    EXPECT_GT(l.centroid, 0.0);
    EXPECT_NEAR(l.normalized_centroid, l.centroid / 32.0, 1e-12);
  }
}

TEST(Spectrum, LayerOutOfRangeIsInvalidArgument) {
  model::Transformer<float> m(tiny(2, 8, 8), 1);
  tasks::Dataset ds;
  ds.examples.push_back({{1, 2, 3}, 0, {}});
  EXPECT_THROW(spectrum_report(m, ds, {3}), InvalidArgument);
}

TEST(Spectrum, CsvLongFormat) {
  SpectrumReport r;
  r.sequences = 2;
  r.layers.push_back({0, 4, {1.0, 0.5, 0.25}, 0.4285714285714286, 0.2142857142857143});
  std::ostringstream os;
  write_spectrum_csv(os, r, {"spectrum", "abc", 1, {}});
  EXPECT_NE(os.str().find("layer,length,bin,amplitude,centroid,normalized_centroid\n0,4,0,1,"), std::string::npos);
  EXPECT_NE(os.str().find("# sequences: 2"), std::string::npos);
}

// ------------------------------------------------------------------- sweep

namespace {
tasks::Dataset small_bytes(std::size_t n, std::uint64_t seed) {
  auto s = tasks::default_spec(tasks::TaskKind::byte_classify);
  s.size = n;
  s.max_len = 32;
  s.seed = seed;
  return tasks::generate(s);
}
}  // namespace

TEST(Sweep, DefaultGridHasTenRatios) {
  const auto g = default_ratio_grid();
  ASSERT_EQ(g.size(), 10u);
  EXPECT_DOUBLE_EQ(g.front(), 0.1);
  EXPECT_DOUBLE_EQ(g.back(), 1.0);
}

TEST(Sweep, OneRowPerRatioAllPopulated) {
  auto c = tiny(2, 8, 16);
  c.filters = {{0, 0.5}};
  model::TrainConfig tc;
  tc.steps = 5;
  tc.batch_size = 8;
  const auto rows = retention_sweep(c, small_bytes(32, 1), small_bytes(16, 2), {0.3, 1.0}, tc);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_FALSE(r.diverged);
    EXPECT_GE(r.accuracy, 0.0);
    EXPECT_LE(r.accuracy, 1.0);
    EXPECT_TRUE(std::isfinite(r.loss));
  }
  EXPECT_DOUBLE_EQ(rows[0].ratio, 0.3);
}

TEST(Sweep, DivergentRunIsFlaggedNotThrown) {
  auto c = tiny(1, 8, 8);
  c.filters = {{0, 0.5}};
  model::TrainConfig tc;
  tc.steps = 4;
  tc.batch_size = 8;
  tc.optim.lr = 1e300;  // overflows to inf in float parameters
  tc.optim.warmup_steps = 0;
  tc.optim.clip_norm = 0;
  const auto rows = retention_sweep(c, small_bytes(16, 1), small_bytes(8, 2), {0.5}, tc);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_TRUE(rows[0].diverged);
  EXPECT_TRUE(std::isnan(rows[0].accuracy));
  std::ostringstream os;
  write_sweep_csv(os, rows, {"sweep", "h", 0, {}});
  EXPECT_NE(os.str().find("0.5,nan,nan,nan,"), std::string::npos);
}

TEST(Sweep, RequiresEncoderWithFilter) {
  model::TrainConfig tc;
  EXPECT_THROW(retention_sweep(tiny(1, 8, 8), small_bytes(4, 1), small_bytes(4, 2), {0.5}, tc), InvalidArgument);
}
