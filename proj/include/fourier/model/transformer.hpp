#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fourier/model/config.hpp"
#include "fourier/nn/autograd.hpp"
#include "fourier/nn/layers.hpp"
#include "fourier/nn/ops.hpp"

namespace fourier::model {

using nn::AttentionMask;
using nn::Graph;
using nn::TokenBatch;
using nn::Var;

struct ForwardOptions {
  /// false runs the vanilla twin: same weights and block boundaries, but
  /// every spectral filter is replaced by the identity.
  bool apply_filters = true;
  /// Keep the embedding output and every layer output (for spectra).
  bool keep_layer_states = false;
};

template <typename T>
struct EncoderOutput {
  std::vector<Var<T>> blocks;        // residual stream at the end of each block (encoder-decoder, or on request)
  std::vector<std::size_t> lengths;  // time length of every block
  std::vector<Var<T>> layer_states;  // [embedding, layer 0 out, layer 1 out, ...], pre-filter
  Var<T> pooled;                     // [B, D], encoder-only
};

template <typename T>
struct EncoderLayer {
  nn::LayerNorm<T> norm1, norm2;
  nn::MultiHeadAttention<T> attn;
  nn::FeedForward<T> ff;

  static EncoderLayer make(nn::ParameterSet<T>& ps, const std::string& name, const ModelConfig& c, nn::Initializer& init) {
    EncoderLayer l;
    l.norm1 = nn::LayerNorm<T>::make(ps, name + ".norm1", c.dim);
    l.attn = nn::MultiHeadAttention<T>::make(ps, name + ".attn", c.dim, c.heads, init);
    l.norm2 = nn::LayerNorm<T>::make(ps, name + ".norm2", c.dim);
    l.ff = nn::FeedForward<T>::make(ps, name + ".ff", c.dim, c.ffn_dim, init, c.activation);
    return l;
  }

  Var<T> operator()(Graph<T>& g, Var<T> h, const AttentionMask& mask) const {
    {
      auto x = norm1(g, h);
      h = nn::add(g, h, attn(g, x, x, mask));
    }
    return nn::add(g, h, ff(g, norm2(g, h)));
  }
};

template <typename T>
struct DecoderLayer {
  nn::LayerNorm<T> norm1, norm2, norm3;
  nn::MultiHeadAttention<T> self_attn, cross_attn;
  nn::FeedForward<T> ff;

  static DecoderLayer make(nn::ParameterSet<T>& ps, const std::string& name, const ModelConfig& c, nn::Initializer& init) {
    DecoderLayer l;
    l.norm1 = nn::LayerNorm<T>::make(ps, name + ".norm1", c.dim);
    l.self_attn = nn::MultiHeadAttention<T>::make(ps, name + ".self_attn", c.dim, c.heads, init);
    l.norm2 = nn::LayerNorm<T>::make(ps, name + ".norm2", c.dim);
    l.cross_attn = nn::MultiHeadAttention<T>::make(ps, name + ".cross_attn", c.dim, c.heads, init);
    l.norm3 = nn::LayerNorm<T>::make(ps, name + ".norm3", c.dim);
    l.ff = nn::FeedForward<T>::make(ps, name + ".ff", c.dim, c.ffn_dim, init, c.activation);
    return l;
  }

  Var<T> operator()(Graph<T>& g, Var<T> h, const Var<T>& memory, const AttentionMask& memory_mask) const {
    {
      auto x = norm1(g, h);
      h = nn::add(g, h, self_attn(g, x, x, AttentionMask::causal()));
    }
    h = nn::add(g, h, cross_attn(g, norm2(g, h), memory, memory_mask));
    return nn::add(g, h, ff(g, norm3(g, h)));
  }
};

/// Encoder-only classifier or encoder-decoder, with spectral filters
/// between encoder layers as listed in the config.
template <typename T>
class Transformer {
 public:
  Transformer(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    nn::Initializer init(seed, cfg_.init_std);
    enc_embed_ = nn::Embedding<T>::make(params_, "encoder.embed", cfg_.vocab_size, cfg_.dim, cfg_.max_len,
                                        cfg_.positional, init);
    for (std::size_t l = 0; l < cfg_.encoder_layers; ++l)
      encoder_.push_back(EncoderLayer<T>::make(params_, "encoder.layer" + std::to_string(l), cfg_, init));
    if (cfg_.mode == Mode::encoder_only) {
      final_norm_ = nn::LayerNorm<T>::make(params_, "encoder.final_norm", cfg_.dim);
      classifier_ = nn::Linear<T>::make(params_, "classifier", cfg_.dim, cfg_.num_classes, init);
    } else {
      bridge_norm_ = nn::LayerNorm<T>::make(params_, "bridge.norm", cfg_.dim);
      dec_embed_ = nn::Embedding<T>::make(params_, "decoder.embed", cfg_.vocab_size, cfg_.dim, cfg_.max_len,
                                          cfg_.positional, init);
      for (std::size_t l = 0; l < cfg_.decoder_layers; ++l)
        decoder_.push_back(DecoderLayer<T>::make(params_, "decoder.layer" + std::to_string(l), cfg_, init));
      final_norm_ = nn::LayerNorm<T>::make(params_, "decoder.final_norm", cfg_.dim);
      output_ = nn::Linear<T>::make(params_, "decoder.output", cfg_.dim, cfg_.vocab_size, init);
    }
  }

  Transformer(const Transformer&) = delete;
  Transformer& operator=(const Transformer&) = delete;
  Transformer(Transformer&&) noexcept = default;
  Transformer& operator=(Transformer&&) noexcept = default;

  const ModelConfig& config() const noexcept { return cfg_; }
  nn::ParameterSet<T>& parameters() noexcept { return params_; }
  const nn::ParameterSet<T>& parameters() const noexcept { return params_; }

  /// `lengths` (optional) gives the unpadded length of each row; it masks
  /// attention keys only until a filter shortens the sequence, since filtered
  /// positions no longer correspond to tokens. A filter keeping every
  /// coefficient is the identity and leaves the mask in place.
  EncoderOutput<T> encode(Graph<T>& g, const TokenBatch& tokens, const std::vector<std::size_t>* lengths = nullptr,
                          ForwardOptions opt = {}) const {
    detail::require(tokens.batch >= 1 && tokens.length >= 1, "encode: empty token batch");
    EncoderOutput<T> out;
    const bool keep_blocks = cfg_.mode == Mode::encoder_decoder || opt.keep_layer_states;
    AttentionMask mask = lengths ? AttentionMask::padding(*lengths) : AttentionMask::none();
    Var<T> h = enc_embed_(g, tokens);
    if (opt.keep_layer_states) out.layer_states.push_back(h);
    out.lengths.push_back(tokens.length);
    std::size_t next = 0;
    for (std::size_t l = 0; l < encoder_.size(); ++l) {
      h = encoder_[l](g, h, mask);
      if (opt.keep_layer_states) out.layer_states.push_back(h);
      if (next < cfg_.filters.size() && cfg_.filters[next].after_layer == l) {
        const FilterSpec& f = cfg_.filters[next++];
        if (keep_blocks) out.blocks.push_back(h);
        if (opt.apply_filters) {
          const std::size_t before = h->value.dim(1);
          h = nn::spectral_filter(g, h, f.retain_ratio, f.strategy);
          if (h->value.dim(1) != before) mask = AttentionMask::none();
        }
        out.lengths.push_back(h->value.dim(1));
      }
    }
    if (keep_blocks) out.blocks.push_back(h);
    if (cfg_.mode == Mode::encoder_only) {
      auto normed = final_norm_(g, h);
      out.pooled = cfg_.head == PoolHead::mean_pool ? nn::mean_pool(g, normed) : nn::first_token(g, normed);
    }
    return out;
  }

  /// Class logits [B, num_classes].
  Var<T> classify(Graph<T>& g, const TokenBatch& tokens, const std::vector<std::size_t>* lengths = nullptr,
                  ForwardOptions opt = {}) const {
    detail::require(cfg_.mode == Mode::encoder_only, "classify: model is not encoder-only");
    return classifier_(g, encode(g, tokens, lengths, opt).pooled);
  }

  /// Upsample every block output to the input length, sum, renormalize.
  Var<T> bridge(Graph<T>& g, const EncoderOutput<T>& enc) const {
    detail::require(cfg_.mode == Mode::encoder_decoder, "bridge: model has no decoder");
    return bridge_to_decoder(g, enc.blocks, enc.lengths.front(), bridge_norm_);
  }

  /// Teacher-forced logits [B, T, vocab] for decoder inputs `target_in`.
  Var<T> decode(Graph<T>& g, const Var<T>& memory, const TokenBatch& target_in,
                const std::vector<std::size_t>* memory_lengths = nullptr) const {
    detail::require(cfg_.mode == Mode::encoder_decoder, "decode: model has no decoder");
    detail::require(target_in.length >= 1, "decode: empty target sequence");
    detail::require(memory->value.dim(0) == target_in.batch, "decode: memory and target batch differ");
    const AttentionMask mask = memory_lengths ? AttentionMask::padding(*memory_lengths) : AttentionMask::none();
    Var<T> h = dec_embed_(g, target_in);
    for (const auto& layer : decoder_) h = layer(g, h, memory, mask);
    return output_(g, final_norm_(g, h));
  }

  /// Encoder plus bridge; the memory a decoder reads.
  Var<T> memory(Graph<T>& g, const TokenBatch& source, const std::vector<std::size_t>* lengths = nullptr,
                ForwardOptions opt = {}) const {
    return bridge(g, encode(g, source, lengths, opt));
  }

  /// Argmax decoding from BOS; each row stops at EOS (not included) or after
  /// max_steps tokens. Ties go to the lowest token id.
  std::vector<std::vector<int>> greedy_decode(const Tensor<T>& memory, std::size_t max_steps,
                                              const std::vector<std::size_t>* memory_lengths = nullptr) const {
    const std::size_t batch = memory.dim(0);
    std::vector<std::vector<int>> result(batch);
    std::vector<bool> done(batch, false);
    TokenBatch prefix{batch, 1, std::vector<int>(batch, tokens::bos)};
    Graph<T> g(false);
    auto mem = g.constant(memory);
    for (std::size_t step = 0; step < max_steps; ++step) {
      const auto logits = decode(g, mem, prefix, memory_lengths);
      const std::size_t t = prefix.length, v = cfg_.vocab_size;
      TokenBatch next{batch, t + 1, std::vector<int>(batch * (t + 1))};
      bool all_done = true;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* row = logits->value.data() + (b * t + (t - 1)) * v;
        int best = 0;
        for (std::size_t c = 1; c < v; ++c)
          if (row[c] > row[best]) best = static_cast<int>(c);
        for (std::size_t i = 0; i < t; ++i) next.ids[b * (t + 1) + i] = prefix.at(b, i);
        next.ids[b * (t + 1) + t] = best;
        if (!done[b]) {
          if (best == tokens::eos)
            done[b] = true;
          else
            result[b].push_back(best);
        }
        all_done = all_done && done[b];
      }
      if (all_done) break;
      prefix = std::move(next);
    }
    return result;
  }

  /// Nearest-neighbour upsample of each block to `length`, elementwise sum,
  /// then the given normalization.
  static Var<T> bridge_to_decoder(Graph<T>& g, const std::vector<Var<T>>& blocks, std::size_t length,
                                  const nn::LayerNorm<T>& norm) {
    detail::require(!blocks.empty(), "bridge: no block outputs");
    Var<T> sum;
    for (const auto& b : blocks) {
      auto up = b->value.dim(1) == length ? b : nn::upsample_nearest(g, b, length);
      sum = sum ? nn::add(g, sum, up) : up;
    }
    return norm(g, sum);
  }

 private:
  ModelConfig cfg_;
  nn::ParameterSet<T> params_;
  nn::Embedding<T> enc_embed_, dec_embed_;
  std::vector<EncoderLayer<T>> encoder_;
  std::vector<DecoderLayer<T>> decoder_;
  nn::LayerNorm<T> final_norm_, bridge_norm_;
  nn::Linear<T> classifier_, output_;
};

/// Copies every parameter value from `src` into `dst` by name.
template <typename T, typename U>
void copy_parameters(const Transformer<U>& src, Transformer<T>& dst) {
  for (const auto& p : src.parameters()) {
    auto* q = dst.parameters().find(p->name);
    detail::require(q != nullptr && q->data.shape() == p->data.shape(), "copy_parameters: no matching '" + p->name + "'");
    q->data = Tensor<T>::cast(p->data);
  }
}

}  // namespace fourier::model
