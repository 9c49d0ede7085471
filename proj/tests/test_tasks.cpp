#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "fourier/tasks/batch.hpp"
#include "fourier/tasks/generators.hpp"

using namespace fourier;
using namespace fourier::tasks;

namespace {

// Independent oracle: repeatedly rewrites the innermost "[OP d d ...]" of
// the text form into its digit until one digit remains.
int rewrite_eval(std::string s) {
  for (;;) {
    const auto close = s.find(']');
    if (close == std::string::npos) break;
    const auto open = s.rfind('[', close);
    std::istringstream in(s.substr(open + 1, close - open - 1));
    std::string op;
    in >> op;
    std::vector<int> v;
    for (int d; in >> d;) v.push_back(d);
    int r = 0;
    if (op == "MAX") r = *std::max_element(v.begin(), v.end());
    else if (op == "MIN") r = *std::min_element(v.begin(), v.end());
    else if (op == "SM") {
      for (int d : v) r += d;
      r %= 10;
    } else {
      std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2), v.end());
      r = v[(v.size() - 1) / 2];
    }
    s = s.substr(0, open) + std::to_string(r) + s.substr(close + 1);
  }
  return std::stoi(s);
}

DatasetSpec spec_of(TaskKind kind, std::size_t size, std::uint64_t seed) {
  auto s = default_spec(kind);
  s.size = size;
  s.seed = seed;
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("fourier_test_tasks_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(ListOps, SingleOperator) { EXPECT_EQ(evaluate(parse_listops("[MAX 2 4 1]")), 4); }
TEST(ListOps, NestedSumMod) { EXPECT_EQ(evaluate(parse_listops("[SM [MAX 1 9] 3]")), 2); }
TEST(ListOps, SingletonOperand) { EXPECT_EQ(evaluate(parse_listops("[MIN 5]")), 5); }

TEST(ListOps, MedianTakesLowerMiddle) {
  EXPECT_EQ(evaluate(parse_listops("[MED 9 1 5]")), 5);
  EXPECT_EQ(evaluate(parse_listops("[MED 8 2 6 4]")), 4);
}

TEST(ListOps, TextAndByteFormsAgree) {
  const auto n = parse_listops("[MAX 2 [SM 1 9] 4]");
  const auto bytes = encode(n);
  EXPECT_EQ(std::string(bytes.begin(), bytes.end()), "A2S19]4]");
  EXPECT_EQ(format(decode_listops(bytes)), "[MAX 2 [SM 1 9] 4]");
  EXPECT_EQ(depth(n), 2u);
}

TEST(ListOps, MalformedInputRejected) {
  EXPECT_THROW(parse_listops("[MAX 2 4"), InvalidArgument);
  EXPECT_THROW(parse_listops("[FOO 1]"), InvalidArgument);
  EXPECT_THROW(parse_listops("[MAX]"), InvalidArgument);
  EXPECT_THROW(parse_listops("3 4"), InvalidArgument);
  EXPECT_THROW(decode_listops({'A', '1'}), InvalidArgument);
}

TEST(ListOps, EvaluatorAgreesWithRewriteOracleOn10kExpressions) {
  auto spec = spec_of(TaskKind::listops_mini, 10000, 42);
  spec.max_depth = 4;
  spec.max_len = 512;
  const auto ds = gen_listops(spec);
  ASSERT_EQ(ds.size(), 10000u);
  std::set<int> labels;
  for (const auto& ex : ds.examples) {
    const auto text = format(decode_listops(ex.input));
    ASSERT_EQ(ex.label, rewrite_eval(text)) << text;
    labels.insert(ex.label);
  }
  EXPECT_EQ(labels.size(), 10u);
}

TEST(ListOps, RespectsBounds) {
  auto spec = spec_of(TaskKind::listops_mini, 500, 3);
  spec.min_len = 10;
  spec.max_len = 60;
  spec.max_depth = 2;
  for (const auto& ex : gen_listops(spec).examples) {
    EXPECT_GE(ex.input.size(), 10u);
    EXPECT_LE(ex.input.size(), 60u);
    EXPECT_LE(depth(decode_listops(ex.input)), 2u);
    EXPECT_GE(ex.label, 0);
    EXPECT_LE(ex.label, 9);
  }
}

TEST(ListOps, OutOfRangeSpecIsConfigError) {
  auto spec = spec_of(TaskKind::listops_mini, 10, 0);
  spec.max_depth = 5;
  EXPECT_THROW(gen_listops(spec), ConfigError);
  spec.max_depth = 3;
  spec.max_len = 513;
  EXPECT_THROW(gen_listops(spec), ConfigError);
  spec.max_len = 100;
  spec.min_len = 101;
  EXPECT_THROW(gen_listops(spec), ConfigError);
}

TEST(ByteClassify, LabelsBalancedOn10k) {
  const auto ds = gen_byte_classify(spec_of(TaskKind::byte_classify, 10000, 9));
  std::size_t ones = 0;
  for (const auto& ex : ds.examples) ones += ex.label == 1 ? 1 : 0;
  EXPECT_NEAR(static_cast<double>(ones) / 10000.0, 0.5, 0.02);
}

TEST(ByteClassify, LabelsExactByConstruction) {
  const auto spec = spec_of(TaskKind::byte_classify, 2000, 10);
  for (const auto& ex : gen_byte_classify(spec).examples) {
    ASSERT_EQ(ex.input.size(), spec.max_len);
    const std::size_t half = spec.max_len / 2;
    const auto first = byte_topic(ex.input.front(), spec.topics), second = byte_topic(ex.input.back(), spec.topics);
    for (std::size_t t = 0; t < spec.max_len; ++t) {
      ASSERT_GE(ex.input[t], 0);
      ASSERT_LT(ex.input[t], 256);
      ASSERT_EQ(byte_topic(ex.input[t], spec.topics), t < half ? first : second);
    }
    ASSERT_NE(first, second);
    EXPECT_EQ(ex.label, first < second ? 1 : 0);
  }
}

TEST(ByteClassify, TopicPairsAppearInBothClasses) {
  const auto spec = spec_of(TaskKind::byte_classify, 4000, 11);
  std::map<std::pair<std::size_t, std::size_t>, std::array<int, 2>> counts;
  for (const auto& ex : gen_byte_classify(spec).examples) {
    auto a = byte_topic(ex.input.front(), spec.topics), b = byte_topic(ex.input.back(), spec.topics);
    counts[{std::min(a, b), std::max(a, b)}][static_cast<std::size_t>(ex.label)]++;
  }
  EXPECT_EQ(counts.size(), spec.topics * (spec.topics - 1) / 2);
  for (const auto& [pair, c] : counts) {
    EXPECT_GT(c[0], 0);
    EXPECT_GT(c[1], 0);
  }
}

TEST(ByteClassify, BoundsChecked) {
  auto spec = spec_of(TaskKind::byte_classify, 4, 0);
  spec.max_len = 1;
  EXPECT_THROW(gen_byte_classify(spec), ConfigError);
  spec.max_len = 64;
  spec.topics = 1;
  EXPECT_THROW(gen_byte_classify(spec), ConfigError);
}

TEST(CopyTask, IdentityAndReverse) {
  EXPECT_EQ(make_copy_example({5, 6, 7}, false).target, (std::vector<int>{5, 6, 7}));
  EXPECT_EQ(make_copy_example({5, 6, 7}, true).target, (std::vector<int>{7, 6, 5}));
  auto spec = spec_of(TaskKind::seq2seq_copy, 200, 4);
  spec.reverse = true;
  for (const auto& ex : gen_copy_task(spec).examples) {
    EXPECT_TRUE(std::equal(ex.input.rbegin(), ex.input.rend(), ex.target.begin(), ex.target.end()));
    EXPECT_GE(ex.input.size(), spec.min_len);
    EXPECT_LE(ex.input.size(), spec.max_len);
  }
}

TEST(CopyTask, SourceLengthBound) {
  auto spec = spec_of(TaskKind::seq2seq_copy, 2, 0);
  spec.max_len = 257;
  EXPECT_THROW(gen_copy_task(spec), ConfigError);
}

TEST(Persistence, SameSeedWritesIdenticalBytes) {
  for (auto kind : {TaskKind::listops_mini, TaskKind::byte_classify, TaskKind::seq2seq_copy}) {
    const auto a = scratch("a"), b = scratch("b");
    write_dataset(generate(spec_of(kind, 300, 77)), a);
    write_dataset(generate(spec_of(kind, 300, 77)), b);
    EXPECT_EQ(slurp(a / "data.jsonl"), slurp(b / "data.jsonl")) << to_string(kind);
    EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  }
}

TEST(Persistence, DifferentSeedsDiffer) {
  EXPECT_NE(generate(spec_of(TaskKind::seq2seq_copy, 50, 1)).examples,
            generate(spec_of(TaskKind::seq2seq_copy, 50, 2)).examples);
}

TEST(Persistence, JsonlRoundTrip) {
  const auto dir = scratch("rt");
  for (auto kind : {TaskKind::listops_mini, TaskKind::seq2seq_copy}) {
    const auto ds = generate(spec_of(kind, 120, 5));
    write_dataset(ds, dir);
    const auto back = read_dataset(dir);
    EXPECT_EQ(back.spec, ds.spec);
    EXPECT_EQ(back.examples, ds.examples);
  }
}

TEST(Persistence, CorruptManifestIsConfigError) {
  const auto dir = scratch("bad");
  write_dataset(generate(spec_of(TaskKind::seq2seq_copy, 3, 5)), dir);
  std::ofstream(dir / "data.jsonl", std::ios::app) << "{\"input\": [1]}\n";
  EXPECT_THROW(read_dataset(dir), ConfigError);
  EXPECT_THROW(read_dataset(scratch("missing")), ConfigError);
}

TEST(BatchIter, TenByFourGivesFourFourTwo) {
  const auto ds = generate(spec_of(TaskKind::seq2seq_copy, 10, 1));
  BatchIterator it(ds, 4, tokens::pad, 3);
  std::vector<std::size_t> sizes;
  std::multiset<std::size_t> seen;
  for (Batch b; it.next(b);) {
    sizes.push_back(b.size());
    seen.insert(b.indices.begin(), b.indices.end());
  }
  EXPECT_EQ(sizes, (std::vector<std::size_t>{4, 4, 2}));
  EXPECT_EQ(seen, (std::multiset<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
  EXPECT_EQ(it.batches_per_epoch(), 3u);
}

TEST(BatchIter, SameSeedSameOrderAcrossEpochs) {
  const auto ds = generate(spec_of(TaskKind::listops_mini, 37, 1));
  auto order = [&](std::uint64_t seed) {
    BatchIterator it(ds, 5, tokens::pad, seed);
    std::vector<std::size_t> rows;
    for (int i = 0; i < 20; ++i) {
      const auto b = it.next_cycling();
      rows.insert(rows.end(), b.indices.begin(), b.indices.end());
    }
    return rows;
  };
  EXPECT_EQ(order(8), order(8));
  EXPECT_NE(order(8), order(9));
  const auto rows = order(8);
  // epochs differ from one another
  EXPECT_FALSE(std::equal(rows.begin(), rows.begin() + 37, rows.begin() + 37));
}

TEST(BatchIter, EqualLengthsNeedNoPadding) {
  const auto ds = generate(spec_of(TaskKind::byte_classify, 9, 1));
  BatchIterator it(ds, 4, tokens::pad, 0);
  for (Batch b; it.next(b);) {
    EXPECT_EQ(b.padding(), 0u);
    EXPECT_TRUE(std::all_of(b.mask.begin(), b.mask.end(), [](unsigned char m) { return m == 1; }));
  }
}

TEST(BatchIter, RightPaddingAndMasks) {
  Dataset ds;
  ds.examples = {make_copy_example({1, 2, 3}, false), make_copy_example({4}, false)};
  const auto b = make_batch(ds, {0, 1}, tokens::pad);
  EXPECT_EQ(b.inputs.ids, (std::vector<int>{1, 2, 3, 4, tokens::pad, tokens::pad}));
  EXPECT_EQ(b.mask, (std::vector<unsigned char>{1, 1, 1, 1, 0, 0}));
  EXPECT_EQ(b.lengths, (std::vector<std::size_t>{3, 1}));
  EXPECT_EQ(b.padding(), 2u);
  EXPECT_EQ(b.target_in.ids, (std::vector<int>{tokens::bos, 1, 2, 3, tokens::bos, 4, tokens::pad, tokens::pad}));
  EXPECT_EQ(b.target_out, (std::vector<int>{1, 2, 3, tokens::eos, 4, tokens::eos, tokens::pad, tokens::pad}));
  EXPECT_EQ(make_batch(ds, {1}, tokens::pad, 6).inputs.length, 6u);
  EXPECT_THROW(make_batch(ds, {0}, tokens::pad, 2), InvalidArgument);
}

TEST(BatchIter, EmptyDatasetRejected) {
  Dataset ds;
  EXPECT_THROW(BatchIterator(ds, 4, tokens::pad, 0), InvalidArgument);
  const auto one = generate(spec_of(TaskKind::seq2seq_copy, 1, 0));
  EXPECT_THROW(BatchIterator(one, 0, tokens::pad, 0), InvalidArgument);
}

TEST(DatasetSpecJson, RoundTripsAndRejectsUnknownTask) {
  auto s = spec_of(TaskKind::seq2seq_copy, 17, 3);
  s.reverse = true;
  EXPECT_EQ(nlohmann::json(s).get<DatasetSpec>(), s);
  EXPECT_THROW(nlohmann::json({{"task", "poetry"}}).get<DatasetSpec>(), ConfigError);
}
