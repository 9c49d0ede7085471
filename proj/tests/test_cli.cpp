#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "fourier/cli/dispatch.hpp"

namespace fs = std::filesystem;
using fourier::cli::dispatch;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "fourier_cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("fourier_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    config_ = (dir_ / "tiny.json").string();
    std::ofstream(config_) << R"({
      "model": {"name": "tiny", "encoder_layers": 2, "dim": 16, "heads": 2, "ffn_dim": 32, "max_len": 64,
                "num_classes": 10, "filters": [{"after_layer": 0, "retain_ratio": 0.5}]},
      "data": {"task": "listops-mini", "size": 96, "seed": 3, "max_len": 48, "max_depth": 2},
      "val": {"size": 24, "seed": 4},
      "train": {"steps": 12, "batch_size": 16, "log_every": 4, "seed": 3},
      "bench": {"batch": 2, "repeats": 5, "warmup": 1},
      "sweep": {"ratios": [0.5, 1.0]},
      "eval_batch": 8
    })";
  }
  void TearDown() override {
    for (const char* v : {"SPECTRAL_SEED", "SPECTRAL_RATIO", "SPECTRAL_OUT"}) ::unsetenv(v);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
  std::string config_;
};

}  // namespace

TEST_F(Cli, UnknownFlagPrintsUsageAndExitsOne) {
  const auto r = run({"train", "--no-such-flag"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST_F(Cli, MissingOrUnknownSubcommandExitsOne) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
}

TEST_F(Cli, HelpExitsZero) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  for (const char* sub : {"train", "eval", "bench", "spectrum", "sweep", "dct"}) EXPECT_NE(r.out.find(sub), std::string::npos);
}

TEST_F(Cli, TrainTwiceWithSameSeedGivesIdenticalMetrics) {
  ASSERT_EQ(run({"train", "--config", config_, "--seed", "7", "--out", path("a")}).code, 0);
  ASSERT_EQ(run({"train", "--config", config_, "--seed", "7", "--out", path("b")}).code, 0);
  const auto a = slurp(dir_ / "a" / "metrics.jsonl");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir_ / "b" / "metrics.jsonl"));
  EXPECT_EQ(slurp(dir_ / "a" / "checkpoint.bin"), slurp(dir_ / "b" / "checkpoint.bin"));
  ASSERT_EQ(run({"train", "--config", config_, "--seed", "8", "--out", path("c")}).code, 0);
  EXPECT_NE(a, slurp(dir_ / "c" / "metrics.jsonl"));
}

TEST_F(Cli, ManifestAloneReproducesRun) {
  ASSERT_EQ(run({"train", "--config", config_, "--seed", "11", "--ratio", "0.3", "--out", path("a")}).code, 0);
  const auto m = read_json(dir_ / "a" / "manifest.json");
  EXPECT_EQ(m["command"], "train");
  EXPECT_EQ(m["seed"], 11);
  EXPECT_EQ(m["config_hash"].get<std::string>().size(), 16u);
  EXPECT_TRUE(m["versions"].contains("fourier"));
  EXPECT_DOUBLE_EQ(m["run"]["model"]["filters"][0]["retain_ratio"].get<double>(), 0.3);
  ASSERT_EQ(run({"train", "--config", path("a/manifest.json"), "--out", path("b")}).code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "metrics.jsonl"), slurp(dir_ / "b" / "metrics.jsonl"));
  EXPECT_EQ(read_json(dir_ / "b" / "manifest.json")["config_hash"], m["config_hash"]);
}

TEST_F(Cli, PrecedenceIsFileThenEnvThenFlag) {
  ASSERT_EQ(run({"train", "--config", config_, "--out", path("file")}).code, 0);
  EXPECT_EQ(read_json(dir_ / "file" / "manifest.json")["seed"], 3);
  ::setenv("SPECTRAL_SEED", "5", 1);
  ASSERT_EQ(run({"train", "--config", config_, "--out", path("env")}).code, 0);
  EXPECT_EQ(read_json(dir_ / "env" / "manifest.json")["seed"], 5);
  ASSERT_EQ(run({"train", "--config", config_, "--seed", "9", "--out", path("flag")}).code, 0);
  EXPECT_EQ(read_json(dir_ / "flag" / "manifest.json")["seed"], 9);
}

TEST_F(Cli, LockedOutputDirectoryIsRefused) {
  fs::create_directories(dir_ / "busy");
  std::ofstream(dir_ / "busy" / ".lock") << "";
  const auto r = run({"train", "--config", config_, "--out", path("busy")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("locked"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "busy" / "manifest.json"));
  ASSERT_EQ(run({"train", "--config", config_, "--out", path("free")}).code, 0);
  EXPECT_FALSE(fs::exists(dir_ / "free" / ".lock"));  // released afterwards
}

TEST_F(Cli, DivergenceExitsTwo) {
  auto j = read_json(config_);
  j["train"]["lr"] = 1e300;
  j["train"]["warmup_steps"] = 0;
  j["train"]["clip_norm"] = 0;
  std::ofstream(path("bad.json")) << j.dump();
  const auto r = run({"train", "--config", path("bad.json"), "--out", path("o")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("non-finite"), std::string::npos);
}

TEST_F(Cli, ConfigErrorsExitOne) {
  auto j = read_json(config_);
  j["model"]["mode"] = "encoder-decoder";
  j["model"]["decoder_layers"] = 1;
  std::ofstream(path("mismatch.json")) << j.dump();
  EXPECT_EQ(run({"train", "--config", path("mismatch.json"), "--out", path("o")}).code, 1);
  std::ofstream(path("broken.json")) << "{not json";
  EXPECT_EQ(run({"train", "--config", path("broken.json"), "--out", path("o")}).code, 1);
  EXPECT_EQ(run({"train", "--config", "not-a-preset", "--out", path("o")}).code, 1);
  EXPECT_EQ(run({"train", "--config", config_, "--ratio", "1.5", "--out", path("o")}).code, 1);
  EXPECT_EQ(run({"train", "--config", config_, "--strategy", "middle", "--out", path("o")}).code, 1);
  EXPECT_EQ(run({"eval", "--config", config_, "--out", path("o")}).code, 1);  // no checkpoint
}

TEST_F(Cli, EvalAndSpectrumReadTheCheckpoint) {
  ASSERT_EQ(run({"train", "--config", config_, "--out", path("t")}).code, 0);
  const auto ckpt = path("t/checkpoint");
  ASSERT_EQ(run({"eval", "--config", config_, "--checkpoint", ckpt, "--out", path("e")}).code, 0);
  const auto e = read_json(dir_ / "e" / "eval.json");
  EXPECT_EQ(e["examples"], 24);
  // The final line of metrics.jsonl scored the same split with the same weights.
  std::istringstream lines(slurp(dir_ / "t" / "metrics.jsonl"));
  std::string line, last;
  while (std::getline(lines, line)) last = line;
  EXPECT_EQ(nlohmann::json::parse(last)["accuracy"], e["accuracy"]);

  ASSERT_EQ(run({"spectrum", "--config", config_, "--checkpoint", ckpt, "--out", path("s")}).code, 0);
  const auto csv = slurp(dir_ / "s" / "spectrum.csv");
  EXPECT_NE(csv.find("layer,length,bin,amplitude"), std::string::npos);
  EXPECT_NE(csv.find("\n2,"), std::string::npos);

  auto j = read_json(config_);
  j["spectrum"]["layers"] = {0, 7};
  std::ofstream(path("far.json")) << j.dump();
  EXPECT_EQ(run({"spectrum", "--config", path("far.json"), "--checkpoint", ckpt, "--out", path("s2")}).code, 1);
}

TEST_F(Cli, BenchWritesTwoRowsPerLength) {
  ASSERT_EQ(run({"bench", "--config", config_, "--lengths", "16,32", "--out", path("b")}).code, 0);
  std::istringstream in(slurp(dir_ / "b" / "bench.csv"));
  std::size_t data = 0;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.rfind('#', 0) == 0) continue;
    if (!header) {
      header = true;
      continue;
    }
    ++data;
  }
  EXPECT_EQ(data, 2u * 2u);  // two lengths x {filtered, vanilla}
  EXPECT_NE(slurp(dir_ / "b" / "flops.csv").find("2 FLOPs per multiply-add"), std::string::npos);
}

TEST_F(Cli, FlopsOnlyForBartPreset) {
  ASSERT_EQ(run({"bench", "--config", "bart-like-flops", "--flops-only", "--out", path("f")}).code, 0);
  EXPECT_FALSE(fs::exists(dir_ / "f" / "bench.csv"));
  const auto csv = slurp(dir_ / "f" / "flops.csv");
  EXPECT_NE(csv.find("\n766,53,"), std::string::npos);
}

TEST_F(Cli, SweepWritesOneRowPerRatio) {
  ASSERT_EQ(run({"sweep", "--config", config_, "--out", path("w")}).code, 0);
  const auto csv = slurp(dir_ / "w" / "sweep.csv");
  EXPECT_NE(csv.find("\n0.5,"), std::string::npos);
  EXPECT_NE(csv.find("\n1,"), std::string::npos);
}

TEST_F(Cli, DctInverseRoundTrip) {
  std::ofstream(path("x.txt")) << "1 2 3 4 5\n0.25 -7.5 3e2\n\n42\n3.14159 2.71828 1.41421 1.73205 0 -1 -2 -3\n";
  ASSERT_EQ(run({"dct", path("x.txt"), "--out", path("y.txt")}).code, 0);
  ASSERT_EQ(run({"dct", path("y.txt"), "--inverse", "--out", path("z.txt")}).code, 0);
  EXPECT_TRUE(fs::exists(path("y.txt.manifest.json")));
  std::istringstream a(slurp(path("x.txt"))), b(slurp(path("z.txt")));
  std::string la, lb;
  std::size_t rows = 0;
  while (std::getline(a, la)) {
    if (la.empty()) continue;
    ASSERT_TRUE(std::getline(b, lb));
    std::istringstream xa(la), xb(lb);
    double u, v;
    while (xa >> u) {
      ASSERT_TRUE(xb >> v);
      EXPECT_NEAR(u, v, 1e-6);
    }
    ++rows;
  }
  EXPECT_EQ(rows, 4u);
  // the naive path agrees with the fast path
  ASSERT_EQ(run({"dct", path("x.txt"), "--naive", "--out", path("n.txt")}).code, 0);
  std::istringstream fa(slurp(path("y.txt"))), fb(slurp(path("n.txt")));
  for (double u, v; fa >> u && fb >> v;) EXPECT_NEAR(u, v, 1e-9 * (1 + std::abs(u)));
}

TEST_F(Cli, DctRejectsGarbage) {
  std::ofstream(path("bad.txt")) << "1 2 x\n";
  EXPECT_EQ(run({"dct", path("bad.txt"), "--out", path("o.txt")}).code, 1);
  EXPECT_EQ(run({"dct", path("missing.txt"), "--out", path("o.txt")}).code, 1);
  EXPECT_EQ(run({"dct", path("bad.txt")}).code, 1);  // --out is required
}

TEST_F(Cli, ShippedConfigsLoadAndValidate) {
  const fs::path configs = fs::path(FOURIER_SOURCE_DIR) / "configs";
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(configs)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(fourier::cli::validate(fourier::cli::load_run_config(e.path().string()))) << e.path();
    ++n;
  }
  EXPECT_GE(n, 4u);
}
