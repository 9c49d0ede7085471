#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "fourier/tasks/dataset.hpp"

// ListOps-mini: nested prefix expressions over digits. The text form reads
// "[MAX 2 [SM 1 9] 4]". On the model side each operator becomes one opening
// byte ('A' MAX, 'I' MIN, 'E' MED, 'S' SM), digits are '0'..'9' and ']'
// closes, so the example above is the byte string "A2S19]4]".
namespace fourier::tasks {

enum class ListOp { max, min, median, sum_mod };

struct ListNode {
  int value = 0;  // leaves only
  ListOp op = ListOp::max;
  std::vector<ListNode> args;  // empty for a leaf

  bool leaf() const noexcept { return args.empty(); }
};

namespace listops {

inline constexpr int close_byte = ']';

inline char op_byte(ListOp op) {
  switch (op) {
    case ListOp::max: return 'A';
    case ListOp::min: return 'I';
    case ListOp::median: return 'E';
    case ListOp::sum_mod: return 'S';
  }
  return '?';
}

inline const char* op_name(ListOp op) {
  switch (op) {
    case ListOp::max: return "MAX";
    case ListOp::min: return "MIN";
    case ListOp::median: return "MED";
    case ListOp::sum_mod: return "SM";
  }
  return "?";
}

inline bool op_from_byte(int b, ListOp& op) {
  switch (b) {
    case 'A': op = ListOp::max; return true;
    case 'I': op = ListOp::min; return true;
    case 'E': op = ListOp::median; return true;
    case 'S': op = ListOp::sum_mod; return true;
    default: return false;
  }
}

}  // namespace listops

/// Value in 0..9. MED takes the lower median (sorted[(n - 1) / 2]).
inline int evaluate(const ListNode& node) {
  if (node.leaf()) return node.value;
  std::vector<int> vals;
  vals.reserve(node.args.size());
  for (const auto& a : node.args) vals.push_back(evaluate(a));
  switch (node.op) {
    case ListOp::max: return *std::max_element(vals.begin(), vals.end());
    case ListOp::min: return *std::min_element(vals.begin(), vals.end());
    case ListOp::median:
      std::sort(vals.begin(), vals.end());
      return vals[(vals.size() - 1) / 2];
    case ListOp::sum_mod: {
      int s = 0;
      for (int v : vals) s += v;
      return s % 10;
    }
  }
  return 0;
}

inline std::size_t depth(const ListNode& node) {
  std::size_t d = 0;
  for (const auto& a : node.args) d = std::max(d, depth(a));
  return node.leaf() ? 0 : d + 1;
}

inline std::string format(const ListNode& node) {
  if (node.leaf()) return std::to_string(node.value);
  std::string s = std::string("[") + listops::op_name(node.op);
  for (const auto& a : node.args) s += " " + format(a);
  return s + "]";
}

inline void encode(const ListNode& node, std::vector<int>& out) {
  if (node.leaf()) {
    out.push_back('0' + node.value);
    return;
  }
  out.push_back(listops::op_byte(node.op));
  for (const auto& a : node.args) encode(a, out);
  out.push_back(listops::close_byte);
}

inline std::vector<int> encode(const ListNode& node) {
  std::vector<int> out;
  encode(node, out);
  return out;
}

namespace listops {

class TextParser {
 public:
  explicit TextParser(std::string_view s) : s_(s) {}

  ListNode parse() {
    ListNode n = node();
    skip();
    if (pos_ != s_.size()) fail("trailing characters");
    return n;
  }

 private:
  ListNode node() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    if (s_[pos_] >= '0' && s_[pos_] <= '9') return ListNode{s_[pos_++] - '0', ListOp::max, {}};
    if (s_[pos_] != '[') fail("expected digit or '['");
    ++pos_;
    std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] >= 'A' && s_[pos_] <= 'Z') ++pos_;
    const std::string_view name = s_.substr(start, pos_ - start);
    ListNode n;
    if (name == "MAX") n.op = ListOp::max;
    else if (name == "MIN") n.op = ListOp::min;
    else if (name == "MED") n.op = ListOp::median;
    else if (name == "SM") n.op = ListOp::sum_mod;
    else fail("unknown operator '" + std::string(name) + "'");
    for (;;) {
      skip();
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        break;
      }
      n.args.push_back(node());
    }
    if (n.args.empty()) fail("operator without operands");
    return n;
  }

  void skip() {
    while (pos_ < s_.size() && s_[pos_] == ' ') ++pos_;
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw InvalidArgument("listops: " + why + " at offset " + std::to_string(pos_));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

inline ListNode decode_bytes(const std::vector<int>& bytes, std::size_t& pos) {
  detail::require(pos < bytes.size(), "listops: truncated byte expression");
  const int b = bytes[pos++];
  if (b >= '0' && b <= '9') return ListNode{b - '0', ListOp::max, {}};
  ListNode n;
  detail::require(op_from_byte(b, n.op), "listops: unexpected byte " + std::to_string(b));
  while (true) {
    detail::require(pos < bytes.size(), "listops: unterminated operator");
    if (bytes[pos] == close_byte) {
      ++pos;
      break;
    }
    n.args.push_back(decode_bytes(bytes, pos));
  }
  detail::require(!n.args.empty(), "listops: operator without operands");
  return n;
}

inline ListNode random_node(Rng& rng, std::size_t depth_left) {
  ListNode n;
  n.op = static_cast<ListOp>(rng.below(4));
  const std::size_t arity = rng.between(2, 5);
  for (std::size_t i = 0; i < arity; ++i) {
    if (depth_left > 1 && rng.unit() < 0.35)
      n.args.push_back(random_node(rng, depth_left - 1));
    else
      n.args.push_back(ListNode{static_cast<int>(rng.below(10)), ListOp::max, {}});
  }
  return n;
}

}  // namespace listops

inline ListNode parse_listops(std::string_view text) { return listops::TextParser(text).parse(); }

inline ListNode decode_listops(const std::vector<int>& bytes) {
  std::size_t pos = 0;
  ListNode n = listops::decode_bytes(bytes, pos);
  detail::require(pos == bytes.size(), "listops: trailing bytes");
  return n;
}

/// Random expressions with depth in 1..max_depth whose byte length lies in
/// [min_len, max_len]; label = exact value.
inline Dataset gen_listops(const DatasetSpec& spec) {
  detail::require_config(spec.kind == TaskKind::listops_mini, "gen_listops: spec is not a listops task");
  detail::require_config(spec.max_depth >= 1 && spec.max_depth <= 4,
                         "gen_listops: depth must lie in 1..4, got " + std::to_string(spec.max_depth));
  detail::require_config(spec.max_len >= 4 && spec.max_len <= 512,
                         "gen_listops: max_len must lie in 4..512, got " + std::to_string(spec.max_len));
  detail::require_config(spec.min_len <= spec.max_len, "gen_listops: min_len exceeds max_len");
  Dataset ds{spec, {}};
  Rng rng(spec.seed);
  ds.examples.reserve(spec.size);
  std::size_t attempts = 0;
  while (ds.examples.size() < spec.size) {
    detail::require_config(++attempts < 1000 * (spec.size + 10), "gen_listops: length bounds unsatisfiable");
    const ListNode expr = listops::random_node(rng, spec.max_depth);
    auto bytes = encode(expr);
    if (bytes.size() > spec.max_len || bytes.size() < spec.min_len) continue;
    ds.examples.push_back(Example{std::move(bytes), evaluate(expr), {}});
  }
  return ds;
}

}  // namespace fourier::tasks
