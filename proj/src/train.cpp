// Copyright 2026 The BCS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bcs/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <ostream>
#include <thread>

#include "bcs/error.hpp"
#include "bcs/optim.hpp"
#include "bcs/rng.hpp"

namespace bcs {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (max_epochs < 1) throw ConfigError("train.max_epochs must be at least 1");
  if (patience < 1 || patience > max_epochs) {
    throw ConfigError("train.patience must be in [1, max_epochs]");
  }
  if (beam_width < 1) throw ConfigError("train.beam_width must be at least 1");
  if (clip_norm < 0.0) throw ConfigError("train.clip_norm must be non-negative");
  if (length_alpha < 0.0) throw ConfigError("train.length_alpha must be non-negative");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},         {"lr", lr},
          {"max_epochs", max_epochs},         {"patience", patience},
          {"beam_width", beam_width},         {"seed", seed},
          {"clip_norm", clip_norm},           {"length_alpha", length_alpha},
          {"checkpoint_dir", checkpoint_dir}, {"eval_threads", eval_threads}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "batch_size")
        c.batch_size = value.get<std::size_t>();
      else if (key == "lr")
        c.lr = value.get<double>();
      else if (key == "max_epochs")
        c.max_epochs = value.get<int>();
      else if (key == "patience")
        c.patience = value.get<int>();
      else if (key == "beam_width")
        c.beam_width = value.get<std::size_t>();
      else if (key == "seed")
        c.seed = value.get<std::uint64_t>();
      else if (key == "clip_norm")
        c.clip_norm = value.get<double>();
      else if (key == "length_alpha")
        c.length_alpha = value.get<double>();
      else if (key == "checkpoint_dir")
        c.checkpoint_dir = value.get<std::string>();
      else if (key == "eval_threads")
        c.eval_threads = value.get<std::size_t>();
      else
        throw ConfigError("unknown train config key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("train." + key + ": " + e.what());
    }
  }
  return c;
}

nlohmann::json RunConfig::to_json() const {
  return {{"model", model.to_json()},
          {"train", train.to_json()},
          {"data",
           {{"min_freq_asm", data.min_freq_asm},
            {"min_freq_pseudo", data.min_freq_pseudo},
            {"min_freq_summary", data.min_freq_summary},
            {"shared_pseudo_summary_vocab", data.shared_pseudo_summary_vocab},
            {"split_strings", data.normalize.split_strings}}}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "model") {
      c.model = ModelConfig::from_json(value);
    } else if (key == "train") {
      c.train = TrainConfig::from_json(value);
    } else if (key == "data") {
      if (!value.is_object()) throw ConfigError("data config must be a JSON object");
      for (const auto& [k, v] : value.items()) {
        try {
          if (k == "min_freq_asm")
            c.data.min_freq_asm = v.get<int>();
          else if (k == "min_freq_pseudo")
            c.data.min_freq_pseudo = v.get<int>();
          else if (k == "min_freq_summary")
            c.data.min_freq_summary = v.get<int>();
          else if (k == "shared_pseudo_summary_vocab")
            c.data.shared_pseudo_summary_vocab = v.get<bool>();
          else if (k == "split_strings")
            c.data.normalize.split_strings = v.get<bool>();
          else
            throw ConfigError("unknown data config key '" + k + "'");
        } catch (const nlohmann::json::exception& e) {
          throw ConfigError("data." + k + ": " + e.what());
        }
      }
    } else {
      throw ConfigError("unknown config section '" + key + "'");
    }
  }
  c.train.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

bool EarlyStopping::update(int epoch, double metric) {
  if (!has_best_ || metric > best_) {
    has_best_ = true;
    best_ = metric;
    best_epoch_ = epoch;
    epochs_without_improvement_ = 0;
    return true;
  }
  ++epochs_without_improvement_;
  return false;
}

nlohmann::json EpochLog::to_json() const {
  return {{"epoch", epoch},           {"train_loss", train_loss},
          {"valid_bleu", valid_bleu}, {"valid_sentence_bleu", valid_sentence_bleu},
          {"improved", improved},     {"skipped_steps", skipped_steps}};
}

namespace {

Sentence id_sentence(const std::vector<int>& ids) {
  Sentence out;
  for (int id : ids) {
    if (id >= kNumSpecials) out.push_back("#" + std::to_string(id));
  }
  return out;
}

double mean_sentence_bleu(const std::vector<SampleResult>& results) {
  if (results.empty()) return 0.0;
  double total = 0.0;
  for (const auto& r : results) total += sentence_bleu(r.prediction, r.reference);
  return total / static_cast<double>(results.size());
}

}  // namespace

TrainResult train_model(Model<float>& model, const std::vector<PreparedSample>& train,
                        const std::vector<PreparedSample>& valid, const TrainConfig& cfg,
                        const TrainHooks& hooks) {
  cfg.validate();
  if (train.empty()) throw EmptyDatasetError("training split is empty");
  if (valid.empty()) throw EmptyDatasetError("validation split is empty");

  Rng rng(cfg.seed);
  Rng dropout_rng(cfg.seed ^ 0x5DEECE66DULL);
  AdamConfig adam;
  adam.lr = cfg.lr;
  AdamState<float> state;
  auto& params = model.parameters();

  DecodeOptions greedy;
  greedy.max_len = static_cast<std::size_t>(model.config().max_summary_len) + 1;
  greedy.beam_width = 1;

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  EarlyStopping stopper(cfg.patience);
  std::vector<Matrix<float>> best = model.snapshot();
  ForwardContext ctx;
  ctx.train = true;
  ctx.rng = &dropout_rng;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0.0;
    std::size_t token_sum = 0;
    const std::int64_t skipped_before = state.skipped;
    bool diverged = false;
    for (std::size_t start = 0; start < order.size() && !diverged; start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      Tape<float> tape;
      TapeScope<float> scope(tape);
      std::vector<Tensor<float>> parts;
      std::size_t tokens = 0;
      for (std::size_t k = start; k < end; ++k) {
        const PreparedSample& s = train[order[k]];
        std::size_t n = 0;
        parts.push_back(model.nll(s.input, s.target, ctx, &n));
        tokens += n;
      }
      if (tokens == 0) continue;
      const Tensor<float> total = sum_all(concat(parts, 0));
      const Tensor<float> loss = scale(total, 1.0f / static_cast<float>(tokens));
      if (!std::isfinite(loss.item())) {
        diverged = true;
        break;
      }
      zero_grads(params);
      tape.backward(loss);
      clip_grad_norm(params, cfg.clip_norm);
      adam_step(params, state, adam);
      loss_sum += static_cast<double>(total.item());
      token_sum += tokens;
    }
    if (diverged) {
      warn("training diverged in epoch " + std::to_string(epoch) +
           " (non-finite loss); keeping the last good checkpoint");
      result.diverged = true;
      break;
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = token_sum ? loss_sum / static_cast<double>(token_sum) : 0.0;
    log.skipped_steps = static_cast<std::size_t>(state.skipped - skipped_before);
    // Validation compares id sequences, so no vocabulary is needed here.
    std::vector<SampleResult> decoded =
        decode_samples(model, valid, Vocab{}, greedy, cfg.eval_threads);
    std::vector<Sentence> cands, refs;
    for (std::size_t i = 0; i < decoded.size(); ++i) {
      decoded[i].reference = id_sentence(valid[i].target);
      cands.push_back(decoded[i].prediction);
      refs.push_back(decoded[i].reference);
    }
    log.valid_bleu = corpus_bleu(cands, refs);
    log.valid_sentence_bleu = mean_sentence_bleu(decoded);
    log.improved = stopper.update(epoch, log.valid_bleu);
    if (log.improved) {
      best = model.snapshot();
      if (hooks.on_improve) hooks.on_improve(model, log);
    }
    if (hooks.log) *hooks.log << log.to_json().dump() << '\n';
    result.history.push_back(log);
    if (hooks.stop_after && hooks.stop_after(log)) break;
    if (stopper.should_stop()) {
      result.stopped_early = epoch < cfg.max_epochs;
      break;
    }
  }
  model.restore(best);
  result.best_epoch = stopper.best_epoch();
  result.best_bleu = std::max(stopper.best(), 0.0);
  return result;
}

double mean_token_loss(const Model<float>& model, const std::vector<PreparedSample>& samples) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& s : samples) {
    std::size_t n = 0;
    total += static_cast<double>(model.nll(s.input, s.target, {}, &n).item());
    tokens += n;
  }
  if (tokens == 0) throw ValidationError("mean_token_loss: no target tokens");
  return total / static_cast<double>(tokens);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

std::vector<SampleResult> decode_samples(const Model<float>& model,
                                         const std::vector<PreparedSample>& samples,
                                         const Vocab& summary_vocab, const DecodeOptions& options,
                                         std::size_t threads) {
  std::vector<SampleResult> results(samples.size());
  const bool words = summary_vocab.size() > 0;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < samples.size(); i = next++) {
      const Hypothesis h = decode_input(model, samples[i].input, options, options.beam_width > 1);
      SampleResult& r = results[i];
      r.id = samples[i].id;
      r.reference = samples[i].reference;
      r.log_prob = h.log_prob;
      const std::vector<int> ids = h.content(options.eos);
      if (words) {
        r.prediction = ids_to_words(ids, summary_vocab);
      } else {
        r.prediction = id_sentence(ids);
      }
    }
  };
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(samples.size(), 1));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

EvalReport evaluate(const Model<float>& model, const std::vector<PreparedSample>& samples,
                    const Vocab& summary_vocab, const DecodeOptions& options, std::size_t threads) {
  if (samples.empty()) throw EmptyDatasetError("evaluation split is empty");
  EvalReport report;
  report.samples = decode_samples(model, samples, summary_vocab, options, threads);
  std::vector<Sentence> cands, refs;
  for (const auto& r : report.samples) {
    cands.push_back(r.prediction);
    refs.push_back(r.reference);
  }
  report.metrics = compute_metrics(cands, refs);
  report.sentence_bleu = mean_sentence_bleu(report.samples);
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json per_sample = nlohmann::json::array();
  for (const auto& s : samples) {
    per_sample.push_back({{"id", s.id},
                          {"prediction", s.prediction},
                          {"reference", s.reference},
                          {"log_prob", s.log_prob},
                          {"bleu", bcs::sentence_bleu(s.prediction, s.reference)},
                          {"rouge_l", 100.0 * rouge_l_pair(s.prediction, s.reference)},
                          {"meteor", 100.0 * meteor_pair(s.prediction, s.reference)}});
  }
  return {{"bleu", metrics.bleu},    {"rouge_l", metrics.rouge_l},     {"meteor", metrics.meteor},
          {"n", metrics.n},          {"sentence_bleu", sentence_bleu}, {"notes", metric_notes()},
          {"per_sample", per_sample}};
}

}  // namespace bcs
