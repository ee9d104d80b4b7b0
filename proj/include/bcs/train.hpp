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

#ifndef BCS_TRAIN_HPP_
#define BCS_TRAIN_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "bcs/decode.hpp"
#include "bcs/features.hpp"
#include "bcs/metrics.hpp"
#include "bcs/model.hpp"
#include "json.hpp"

namespace bcs {

struct TrainConfig {
  std::size_t batch_size = 32;
  double lr = 1e-4;
  int max_epochs = 100;
  int patience = 10;
  std::size_t beam_width = 4;
  std::uint64_t seed = 0;
  double clip_norm = 5.0;
  double length_alpha = 0.7;
  std::string checkpoint_dir;
  // Threads used when decoding for evaluation; 0 = hardware concurrency.
  std::size_t eval_threads = 0;

  // Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Everything a `train` run needs: sections "model", "train", "data".
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  FeatureOptions data;

  nlohmann::json to_json() const;
  // Unknown sections or keys throw ConfigError.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
};

// Stops after `patience` consecutive epochs without strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}
  // Returns true when `metric` is a new best.
  bool update(int epoch, double metric);
  bool should_stop() const { return epochs_without_improvement_ >= patience_; }
  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }

 private:
  int patience_;
  double best_ = -1.0;
  int best_epoch_ = 0;
  bool has_best_ = false;
  int epochs_without_improvement_ = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;  // mean token cross-entropy over the epoch
  double valid_bleu = 0.0;  // corpus BLEU of greedy decodes
  double valid_sentence_bleu = 0.0;
  bool improved = false;
  std::size_t skipped_steps = 0;
  nlohmann::json to_json() const;
};

struct TrainResult {
  std::vector<EpochLog> history;
  int best_epoch = 0;
  double best_bleu = 0.0;
  bool stopped_early = false;
  bool diverged = false;
};

struct TrainHooks {
  // Called with the model holding the new best parameters.
  std::function<void(const Model<float>&, const EpochLog&)> on_improve;
  // Called after every epoch; returning true ends training.
  std::function<bool(const EpochLog&)> stop_after;
  std::ostream* log = nullptr;
};

// Mini-batch Adam with gradient clipping; greedy-decode validation BLEU
// after each epoch drives early stopping. On return the model holds the
// best-validation parameters. Throws EmptyDatasetError when either split is
// empty.
TrainResult train_model(Model<float>& model, const std::vector<PreparedSample>& train,
                        const std::vector<PreparedSample>& valid, const TrainConfig& cfg,
                        const TrainHooks& hooks = {});

// Mean token cross-entropy of `samples` under teacher forcing.
double mean_token_loss(const Model<float>& model, const std::vector<PreparedSample>& samples);

struct SampleResult {
  std::string id;
  Sentence prediction;
  Sentence reference;
  double log_prob = 0.0;
};

struct EvalReport {
  MetricReport metrics;
  double sentence_bleu = 0.0;  // mean over samples
  std::vector<SampleResult> samples;
  nlohmann::json to_json() const;
};

// Decodes every sample (beam search when options.beam_width > 1, greedy
// otherwise) on up to `threads` threads and scores the predictions.
std::vector<SampleResult> decode_samples(const Model<float>& model,
                                         const std::vector<PreparedSample>& samples,
                                         const Vocab& summary_vocab, const DecodeOptions& options,
                                         std::size_t threads = 0);
EvalReport evaluate(const Model<float>& model, const std::vector<PreparedSample>& samples,
                    const Vocab& summary_vocab, const DecodeOptions& options,
                    std::size_t threads = 0);

}  // namespace bcs

#endif  // BCS_TRAIN_HPP_
