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

#ifndef BCS_MODEL_HPP_
#define BCS_MODEL_HPP_

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "bcs/bicfg.hpp"
#include "bcs/rng.hpp"
#include "bcs/tensor.hpp"
#include "bcs/vocab.hpp"
#include "json.hpp"

namespace bcs {

// The three encoder outputs the decoder attends to.
enum class Source { kPseudo = 0, kAsm = 1, kGraph = 2 };
inline constexpr int kNumSources = 3;
std::string source_name(Source s);
Source parse_source(std::string_view name);

enum class FusionMode {
  kTriple,               // separate assembly, pseudo-code and graph encoders
  kConcatSingleEncoder,  // one encoder over assembly ++ SEP ++ pseudo (+ graph)
};
std::string fusion_mode_name(FusionMode m);
FusionMode parse_fusion_mode(std::string_view name);

using SourceOrder = std::array<Source, 3>;
// All six permutations of the cross-attention sources.
std::vector<SourceOrder> all_source_orders();

struct ModelConfig {
  int d_model = 256;
  int n_heads = 4;
  int ff_dim = 1024;
  int n_layers_asm = 3;
  int n_layers_pseudo = 3;
  int n_layers_dec = 3;
  int n_gat_layers = 2;
  int gat_heads = 4;
  int rel_clip_distance = 16;
  double dropout = 0.1;
  SourceOrder cross_attention_order = {Source::kPseudo, Source::kAsm, Source::kGraph};
  FusionMode fusion_mode = FusionMode::kTriple;
  // Graph source in CONCAT_SINGLE_ENCODER mode.
  bool concat_use_graph = true;
  // Relative embeddings on values as well as keys.
  bool relative_values = true;
  // Node features read the assembly embedding table instead of their own.
  bool share_node_embeddings = false;
  // Output projection reuses the summary embedding table.
  bool tie_output_embedding = false;
  int asm_vocab_size = 0;
  int pseudo_vocab_size = 0;
  int summary_vocab_size = 0;
  int max_asm_len = 400;
  int max_pseudo_len = 400;
  int max_summary_len = 30;
  int max_graph_nodes = 400;
  double gat_leaky_slope = 0.2;
  double layer_norm_eps = 1e-5;

  // Throws ConfigError naming the offending field.
  void validate() const;
  // d_model 8, one layer per stack, vocabularies of 20.
  static ModelConfig micro();

  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys throw ConfigError.
  static ModelConfig from_json(const nlohmann::json& j);
  bool operator==(const ModelConfig&) const = default;
};

// Edge kinds seen by the graph encoder: the six (type, direction) kinds
// plus the implicit self-loop.
inline constexpr int kSelfLoopKind = kNumEdgeKinds;
inline constexpr int kNumGraphEdgeKinds = kNumEdgeKinds + 1;

struct GraphEdgeRef {
  int src = 0;
  int dst = 0;
  int kind = 0;
};

// Id-level view of a BiCfg. Self-loops are not stored; the encoder adds them.
struct GraphInput {
  std::vector<std::vector<int>> node_tokens;
  std::vector<GraphEdgeRef> edges;
  std::size_t num_nodes() const { return node_tokens.size(); }
};

// Keeps the first `max_nodes` nodes and the edges among them.
GraphInput make_graph_input(const BiCfg& g, const Vocab& asm_vocab, std::size_t max_nodes);

struct ModelInput {
  std::vector<int> asm_ids;
  std::vector<int> pseudo_ids;
  GraphInput graph;
};

template <typename Scalar>
struct EncodedSequence {
  Tensor<Scalar> states;
  std::vector<bool> mask;  // true = attendable
  std::size_t size() const { return mask.size(); }
  bool any_valid() const {
    for (bool m : mask) {
      if (m) return true;
    }
    return false;
  }
};

template <typename Scalar>
struct EncoderMemory {
  std::array<EncodedSequence<Scalar>, 3> sources;  // indexed by Source
  const EncodedSequence<Scalar>& operator[](Source s) const { return sources[static_cast<int>(s)]; }
  EncodedSequence<Scalar>& operator[](Source s) { return sources[static_cast<int>(s)]; }
};

// Records the decoder sublayers in execution order (first decoder layer).
struct ForwardTrace {
  std::vector<std::string> events;
};

struct ForwardContext {
  bool train = false;
  Rng* rng = nullptr;  // required when train and dropout > 0
  ForwardTrace* trace = nullptr;
};

template <typename Scalar>
class Model {
 public:
  // Parameters are initialised from `seed`.
  Model(const ModelConfig& cfg, std::uint64_t seed);
  ~Model();
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;

  const ModelConfig& config() const;
  std::vector<Tensor<Scalar>>& parameters();
  const std::vector<Tensor<Scalar>>& parameters() const;
  const std::vector<std::string>& parameter_names() const;
  // Total number of scalar parameters.
  std::size_t parameter_count() const;

  std::vector<Matrix<Scalar>> snapshot() const;
  void restore(const std::vector<Matrix<Scalar>>& values);

  // Sources the decoder attends to, in execution order.
  std::vector<Source> decoder_sources() const;

  // Assembly encoder (in concat mode: the shared encoder over concat_ids).
  // PAD positions are masked.
  EncodedSequence<Scalar> ai_encode(const std::vector<int>& ids,
                                    const ForwardContext& ctx = {}) const;
  EncodedSequence<Scalar> ps_encode(const std::vector<int>& ids,
                                    const ForwardContext& ctx = {}) const;
  Tensor<Scalar> node_initial_features(const GraphInput& g) const;
  EncodedSequence<Scalar> gat_encode(const GraphInput& g, const Tensor<Scalar>& node_init,
                                     const ForwardContext& ctx = {}) const;
  // Stream fed to the single encoder in concat mode:
  // asm ++ SEP ++ (pseudo ids shifted past the assembly vocabulary).
  std::vector<int> concat_ids(const std::vector<int>& asm_ids,
                              const std::vector<int>& pseudo_ids) const;
  EncoderMemory<Scalar> encode(const ModelInput& input, const ForwardContext& ctx = {}) const;

  // Log-probabilities (prefix length x summary vocab) of the next token at
  // every prefix position. The prefix must start with BOS.
  Tensor<Scalar> decode(const EncoderMemory<Scalar>& memory, const std::vector<int>& prefix,
                        const ForwardContext& ctx = {}) const;
  // Next-token log-probabilities after `prefix`, renormalised in double.
  std::vector<double> next_log_probs(const EncoderMemory<Scalar>& memory,
                                     const std::vector<int>& prefix) const;
  // Next-token distribution after `prefix`.
  std::vector<double> decode_step(const EncoderMemory<Scalar>& memory,
                                  const std::vector<int>& prefix) const;

  // Summed token NLL under teacher forcing. `target` is BOS ... EOS,
  // optionally PAD-extended; `tokens` receives the non-PAD target count.
  Tensor<Scalar> nll(const ModelInput& input, const std::vector<int>& target,
                     const ForwardContext& ctx, std::size_t* tokens) const;
  // Mean token cross-entropy. Throws ValidationError without non-PAD targets.
  Tensor<Scalar> loss(const ModelInput& input, const std::vector<int>& target,
                      const ForwardContext& ctx = {}) const;

  // Probe: pre-softmax self-attention logits of one head of one assembly
  // encoder layer, computed on that layer's input.
  Matrix<Scalar> asm_attention_logits(const std::vector<int>& ids, int layer, int head) const;
  Matrix<Scalar> asm_attention_weights(const std::vector<int>& ids, int layer, int head) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace bcs

#endif  // BCS_MODEL_HPP_
