#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fourier/error.hpp"
#include "fourier/model/transformer.hpp"
#include "fourier/nn/optim.hpp"
#include "fourier/tasks/batch.hpp"

namespace fourier::model {

struct TrainConfig {
  std::size_t steps = 1000;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;    // parameter init and batch order
  std::size_t pad_to = 0;    // 0 pads each batch to its longest row
  std::size_t log_every = 50;
  nn::AdamConfig optim{.lr = 1e-3, .beta1 = 0.9, .beta2 = 0.98, .eps = 1e-8, .warmup_steps = 100, .clip_norm = 1.0};

  bool operator==(const TrainConfig& o) const {
    return steps == o.steps && batch_size == o.batch_size && seed == o.seed && pad_to == o.pad_to &&
           log_every == o.log_every && optim.lr == o.optim.lr && optim.beta1 == o.optim.beta1 &&
           optim.beta2 == o.optim.beta2 && optim.eps == o.optim.eps && optim.weight_decay == o.optim.weight_decay &&
           optim.warmup_steps == o.optim.warmup_steps && optim.decay_steps == o.optim.decay_steps &&
           optim.clip_norm == o.optim.clip_norm;
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"steps", c.steps},
       {"batch_size", c.batch_size},
       {"seed", c.seed},
       {"pad_to", c.pad_to},
       {"log_every", c.log_every},
       {"lr", c.optim.lr},
       {"beta1", c.optim.beta1},
       {"beta2", c.optim.beta2},
       {"adam_eps", c.optim.eps},
       {"weight_decay", c.optim.weight_decay},
       {"warmup_steps", c.optim.warmup_steps},
       {"decay_steps", c.optim.decay_steps},
       {"clip_norm", c.optim.clip_norm}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  try {
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.pad_to = j.value("pad_to", c.pad_to);
    c.log_every = j.value("log_every", c.log_every);
    c.optim.lr = j.value("lr", c.optim.lr);
    c.optim.beta1 = j.value("beta1", c.optim.beta1);
    c.optim.beta2 = j.value("beta2", c.optim.beta2);
    c.optim.eps = j.value("adam_eps", c.optim.eps);
    c.optim.weight_decay = j.value("weight_decay", c.optim.weight_decay);
    c.optim.warmup_steps = j.value("warmup_steps", c.optim.warmup_steps);
    c.optim.decay_steps = j.value("decay_steps", c.optim.decay_steps);
    c.optim.clip_norm = j.value("clip_norm", c.optim.clip_norm);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  detail::require_config(c.batch_size >= 1, "train: batch_size must be at least 1");
  detail::require_config(c.optim.lr >= 0.0, "train: lr must be non-negative");
}

/// Training objective on one batch: class cross-entropy for encoder-only
/// models, teacher-forced token cross-entropy (padding ignored) otherwise.
template <typename T>
Var<T> batch_loss(Graph<T>& g, const Transformer<T>& model, const tasks::Batch& batch, ForwardOptions opt = {}) {
  if (model.config().mode == Mode::encoder_only) {
    auto logits = model.classify(g, batch.inputs, &batch.lengths, opt);
    return nn::cross_entropy(g, logits, batch.labels);
  }
  auto memory = model.memory(g, batch.inputs, &batch.lengths, opt);
  auto logits = model.decode(g, memory, batch.target_in, &batch.lengths);
  return nn::cross_entropy(g, logits, batch.target_out, tokens::pad);
}

/// Forward, backward and one optimizer update. Throws NumericalError when
/// the loss is not finite; parameters are left untouched in that case.
template <typename T>
double train_step(Transformer<T>& model, nn::Adam<T>& optimizer, const tasks::Batch& batch, ForwardOptions opt = {}) {
  model.parameters().zero_grad();
  Graph<T> g(true);
  auto loss = batch_loss(g, model, batch, opt);
  const double value = static_cast<double>(loss->value[0]);
  if (!std::isfinite(value))
    throw NumericalError("train_step: non-finite loss " + std::to_string(value) + " at optimizer step " +
                         std::to_string(optimizer.steps_taken()));
  g.backward(loss);
  optimizer.step();
  return value;
}

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;        // classification accuracy, or exact-token accuracy for sequences
  double sequence_accuracy = 0; // sequences reproduced exactly (sequence tasks)
  std::size_t examples = 0;
};

/// Index of the largest entry; ties resolve to the lowest index.
template <typename T>
int argmax(const T* row, std::size_t n) {
  int best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (row[i] > row[best]) best = static_cast<int>(i);
  return best;
}

template <typename T>
EvalResult evaluate_classifier(const Transformer<T>& model, const tasks::Dataset& ds, std::size_t batch_size,
                               std::size_t pad_to = 0, ForwardOptions opt = {}) {
  tasks::BatchIterator it(ds, batch_size, tokens::pad, 0, pad_to, false);
  EvalResult r;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  tasks::Batch b;
  while (it.next(b)) {
    Graph<T> g(false);
    auto logits = model.classify(g, b.inputs, &b.lengths, opt);
    loss_sum += static_cast<double>(nn::cross_entropy(g, logits, b.labels)->value[0]) * static_cast<double>(b.size());
    const std::size_t c = model.config().num_classes;
    for (std::size_t i = 0; i < b.size(); ++i)
      if (argmax(logits->value.data() + i * c, c) == b.labels[i]) ++correct;
    r.examples += b.size();
  }
  r.loss = loss_sum / static_cast<double>(r.examples);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.examples);
  return r;
}

/// Greedy decoding against the reference. A target of length L scores
/// L + 1 positions (its tokens and the final EOS); a prediction that stops
/// early or runs on loses the positions it gets wrong.
template <typename T>
EvalResult evaluate_seq2seq(const Transformer<T>& model, const tasks::Dataset& ds, std::size_t batch_size,
                            std::size_t pad_to = 0, ForwardOptions opt = {}) {
  tasks::BatchIterator it(ds, batch_size, tokens::pad, 0, pad_to, false);
  EvalResult r;
  std::size_t correct = 0, total = 0, exact = 0;
  double loss_sum = 0.0;
  tasks::Batch b;
  while (it.next(b)) {
    Graph<T> g(false);
    auto memory = model.memory(g, b.inputs, &b.lengths, opt);
    loss_sum += static_cast<double>(
                    nn::cross_entropy(g, model.decode(g, memory, b.target_in, &b.lengths), b.target_out, tokens::pad)
                        ->value[0]) *
                static_cast<double>(b.size());
    std::size_t longest = 0;
    for (auto idx : b.indices) longest = std::max(longest, ds.examples[idx].target.size());
    const auto decoded = model.greedy_decode(memory->value, longest + 1, &b.lengths);
    for (std::size_t i = 0; i < b.size(); ++i) {
      const auto& ref = ds.examples[b.indices[i]].target;
      const auto& hyp = decoded[i];
      for (std::size_t t = 0; t <= ref.size(); ++t) {
        const int want = t < ref.size() ? ref[t] : tokens::eos;
        const int got = t < hyp.size() ? hyp[t] : (t == hyp.size() ? tokens::eos : -1);
        correct += want == got ? 1 : 0;
      }
      total += ref.size() + 1;
      exact += hyp == ref ? 1 : 0;
    }
    r.examples += b.size();
  }
  r.loss = loss_sum / static_cast<double>(r.examples);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  r.sequence_accuracy = static_cast<double>(exact) / static_cast<double>(r.examples);
  return r;
}

struct TrainLogEntry {
  std::size_t step = 0;
  double loss = 0.0;  // mean over the logging window
  double lr = 0.0;
  double seconds = 0.0;
};

/// Runs cfg.steps optimizer steps over `train`, cycling epochs. `on_log`
/// receives one entry every cfg.log_every steps (and after the last step).
template <typename T>
std::vector<TrainLogEntry> fit(Transformer<T>& model, const tasks::Dataset& train, const TrainConfig& cfg,
                               ForwardOptions opt = {}, const std::function<void(const TrainLogEntry&)>& on_log = {}) {
  nn::Adam<T> optimizer(model.parameters(), cfg.optim);
  tasks::BatchIterator it(train, cfg.batch_size, tokens::pad, cfg.seed, cfg.pad_to);
  std::vector<TrainLogEntry> log;
  const auto start = std::chrono::steady_clock::now();
  double window = 0.0;
  std::size_t in_window = 0;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const double lr = optimizer.rate(optimizer.steps_taken());
    window += train_step(model, optimizer, it.next_cycling(), opt);
    ++in_window;
    const bool last = step + 1 == cfg.steps;
    if ((cfg.log_every && (step + 1) % cfg.log_every == 0) || last) {
      TrainLogEntry e{step + 1, window / static_cast<double>(in_window), lr,
                      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
      log.push_back(e);
      if (on_log) on_log(e);
      window = 0.0;
      in_window = 0;
    }
  }
  return log;
}

}  // namespace fourier::model
