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

#ifndef BCS_FEATURES_HPP_
#define BCS_FEATURES_HPP_

// Turns dataset samples into model inputs: token streams, vocabularies,
// id sequences and graphs.

#include <filesystem>
#include <string>
#include <vector>

#include "bcs/dataset.hpp"
#include "bcs/metrics.hpp"
#include "bcs/model.hpp"
#include "bcs/normalize.hpp"
#include "bcs/vocab.hpp"

namespace bcs {

struct Vocabularies {
  Vocab asm_vocab;
  Vocab pseudo;
  Vocab summary;

  // Writes asm_vocab.json, pseudo_vocab.json, summary_vocab.json.
  void save(const std::filesystem::path& dir) const;
  static Vocabularies load(const std::filesystem::path& dir);
};

struct FeatureOptions {
  int min_freq_asm = 2;
  int min_freq_pseudo = 2;
  int min_freq_summary = 2;
  // One vocabulary for pseudo code and summaries (min_freq_pseudo applies).
  bool shared_pseudo_summary_vocab = false;
  NormalizeOptions normalize;
};

// Normalised assembly stream of a sample: its stored tokens, or a fresh
// normalisation when none were stored.
TokenSeq sample_asm_tokens(const DatasetSample& sample, const NormalizeOptions& options = {});
TokenSeq function_asm_tokens(const DisasmFunction& f, const NormalizeOptions& options = {});
TokenSeq function_pseudo_tokens(const DisasmFunction& f);

// Vocabularies from the given (training) samples. Throws EmptyDatasetError
// when `samples` is empty.
Vocabularies build_vocabularies(const std::vector<DatasetSample>& samples,
                                const FeatureOptions& options = {});

// Copies the vocabulary sizes into `cfg`.
ModelConfig with_vocab_sizes(ModelConfig cfg, const Vocabularies& vocabs);

struct PreparedSample {
  std::string id;
  Split split = Split::kTrain;
  ModelInput input;
  std::vector<int> target;  // BOS summary EOS, truncated to max_summary_len + 2
  Sentence reference;       // lowercased summary words
};

ModelInput prepare_input(const DisasmFunction& f, const TokenSeq& asm_tokens,
                         const Vocabularies& vocabs, const ModelConfig& cfg);
PreparedSample prepare_sample(const DatasetSample& sample, const Vocabularies& vocabs,
                              const ModelConfig& cfg, const NormalizeOptions& options = {});
std::vector<PreparedSample> prepare_samples(const std::vector<DatasetSample>& samples,
                                            const Vocabularies& vocabs, const ModelConfig& cfg,
                                            const NormalizeOptions& options = {});

// Corpus statistics in the usual dataset-table layout.
struct DatasetStats {
  std::size_t functions = 0;
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
  std::size_t with_pseudo = 0;
  double avg_asm_tokens = 0.0;
  double avg_pseudo_tokens = 0.0;
  double avg_nodes = 0.0;
  double avg_edges = 0.0;  // directed edges, both directions
  double avg_forward_edges = 0.0;
  double avg_summary_tokens = 0.0;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

// Throws EmptyDatasetError on an empty corpus.
DatasetStats compute_stats(const std::vector<DatasetSample>& samples,
                           const NormalizeOptions& options = {});

// Summary words for generated ids (specials dropped).
Sentence ids_to_words(const std::vector<int>& ids, const Vocab& summary_vocab);

}  // namespace bcs

#endif  // BCS_FEATURES_HPP_
