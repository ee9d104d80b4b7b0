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

#include "bcs/model.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <utility>

#include "bcs/error.hpp"

namespace bcs {

std::string source_name(Source s) {
  switch (s) {
    case Source::kPseudo:
      return "PSEUDO";
    case Source::kAsm:
      return "ASM";
    case Source::kGraph:
      return "GRAPH";
  }
  return "?";
}

Source parse_source(std::string_view name) {
  if (name == "PSEUDO") return Source::kPseudo;
  if (name == "ASM") return Source::kAsm;
  if (name == "GRAPH") return Source::kGraph;
  throw ConfigError("unknown cross-attention source '" + std::string(name) +
                    "' (expected PSEUDO, ASM or GRAPH)");
}

std::string fusion_mode_name(FusionMode m) {
  return m == FusionMode::kTriple ? "TRIPLE" : "CONCAT_SINGLE_ENCODER";
}

FusionMode parse_fusion_mode(std::string_view name) {
  if (name == "TRIPLE") return FusionMode::kTriple;
  if (name == "CONCAT_SINGLE_ENCODER") return FusionMode::kConcatSingleEncoder;
  throw ConfigError("unknown fusion_mode '" + std::string(name) + "'");
}

std::vector<SourceOrder> all_source_orders() {
  SourceOrder order = {Source::kPseudo, Source::kAsm, Source::kGraph};
  std::sort(order.begin(), order.end());
  std::vector<SourceOrder> out;
  do {
    out.push_back(order);
  } while (std::next_permutation(order.begin(), order.end()));
  return out;
}

// ---------------------------------------------------------------------------
// ModelConfig
// ---------------------------------------------------------------------------

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ConfigError(std::string("model.") + name + " must be positive");
  };
  auto non_negative = [](int v, const char* name) {
    if (v < 0) throw ConfigError(std::string("model.") + name + " must be non-negative");
  };
  positive(d_model, "d_model");
  positive(n_heads, "n_heads");
  positive(ff_dim, "ff_dim");
  non_negative(n_layers_asm, "n_layers_asm");
  non_negative(n_layers_pseudo, "n_layers_pseudo");
  positive(n_layers_dec, "n_layers_dec");
  non_negative(n_gat_layers, "n_gat_layers");
  positive(gat_heads, "gat_heads");
  non_negative(rel_clip_distance, "rel_clip_distance");
  positive(asm_vocab_size, "asm_vocab_size");
  positive(pseudo_vocab_size, "pseudo_vocab_size");
  positive(summary_vocab_size, "summary_vocab_size");
  positive(max_asm_len, "max_asm_len");
  positive(max_pseudo_len, "max_pseudo_len");
  positive(max_summary_len, "max_summary_len");
  positive(max_graph_nodes, "max_graph_nodes");
  if (d_model % n_heads != 0) throw ConfigError("model.d_model must be divisible by n_heads");
  if (d_model % gat_heads != 0) throw ConfigError("model.d_model must be divisible by gat_heads");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model.dropout must be in [0, 1)");
  if (!(layer_norm_eps > 0.0)) throw ConfigError("model.layer_norm_eps must be positive");
  std::set<Source> seen(cross_attention_order.begin(), cross_attention_order.end());
  if (seen.size() != 3) {
    throw ConfigError("model.cross_attention_order must be a permutation of PSEUDO, ASM, GRAPH");
  }
  if (asm_vocab_size < kNumSpecials || pseudo_vocab_size < kNumSpecials ||
      summary_vocab_size < kNumSpecials) {
    throw ConfigError("model vocabulary sizes must cover the special tokens");
  }
}

ModelConfig ModelConfig::micro() {
  ModelConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.ff_dim = 16;
  c.n_layers_asm = 1;
  c.n_layers_pseudo = 1;
  c.n_layers_dec = 1;
  c.n_gat_layers = 1;
  c.gat_heads = 2;
  c.rel_clip_distance = 4;
  c.dropout = 0.0;
  c.asm_vocab_size = 20;
  c.pseudo_vocab_size = 20;
  c.summary_vocab_size = 20;
  c.max_asm_len = 64;
  c.max_pseudo_len = 64;
  c.max_summary_len = 12;
  c.max_graph_nodes = 64;
  return c;
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json order = nlohmann::json::array();
  for (Source s : cross_attention_order) order.push_back(source_name(s));
  return {
      {"d_model", d_model},
      {"n_heads", n_heads},
      {"ff_dim", ff_dim},
      {"n_layers_asm", n_layers_asm},
      {"n_layers_pseudo", n_layers_pseudo},
      {"n_layers_dec", n_layers_dec},
      {"n_gat_layers", n_gat_layers},
      {"gat_heads", gat_heads},
      {"rel_clip_distance", rel_clip_distance},
      {"dropout", dropout},
      {"cross_attention_order", order},
      {"fusion_mode", fusion_mode_name(fusion_mode)},
      {"concat_use_graph", concat_use_graph},
      {"relative_values", relative_values},
      {"share_node_embeddings", share_node_embeddings},
      {"tie_output_embedding", tie_output_embedding},
      {"asm_vocab_size", asm_vocab_size},
      {"pseudo_vocab_size", pseudo_vocab_size},
      {"summary_vocab_size", summary_vocab_size},
      {"max_asm_len", max_asm_len},
      {"max_pseudo_len", max_pseudo_len},
      {"max_summary_len", max_summary_len},
      {"max_graph_nodes", max_graph_nodes},
      {"gat_leaky_slope", gat_leaky_slope},
      {"layer_norm_eps", layer_norm_eps},
  };
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  ModelConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "d_model")
        c.d_model = value.get<int>();
      else if (key == "n_heads")
        c.n_heads = value.get<int>();
      else if (key == "ff_dim")
        c.ff_dim = value.get<int>();
      else if (key == "n_layers_asm")
        c.n_layers_asm = value.get<int>();
      else if (key == "n_layers_pseudo")
        c.n_layers_pseudo = value.get<int>();
      else if (key == "n_layers_dec")
        c.n_layers_dec = value.get<int>();
      else if (key == "n_gat_layers")
        c.n_gat_layers = value.get<int>();
      else if (key == "gat_heads")
        c.gat_heads = value.get<int>();
      else if (key == "rel_clip_distance")
        c.rel_clip_distance = value.get<int>();
      else if (key == "dropout")
        c.dropout = value.get<double>();
      else if (key == "cross_attention_order") {
        const auto names = value.get<std::vector<std::string>>();
        if (names.size() != 3) {
          throw ConfigError("model.cross_attention_order must list exactly three sources");
        }
        for (std::size_t i = 0; i < 3; ++i) c.cross_attention_order[i] = parse_source(names[i]);
      } else if (key == "fusion_mode")
        c.fusion_mode = parse_fusion_mode(value.get<std::string>());
      else if (key == "concat_use_graph")
        c.concat_use_graph = value.get<bool>();
      else if (key == "relative_values")
        c.relative_values = value.get<bool>();
      else if (key == "share_node_embeddings")
        c.share_node_embeddings = value.get<bool>();
      else if (key == "tie_output_embedding")
        c.tie_output_embedding = value.get<bool>();
      else if (key == "asm_vocab_size")
        c.asm_vocab_size = value.get<int>();
      else if (key == "pseudo_vocab_size")
        c.pseudo_vocab_size = value.get<int>();
      else if (key == "summary_vocab_size")
        c.summary_vocab_size = value.get<int>();
      else if (key == "max_asm_len")
        c.max_asm_len = value.get<int>();
      else if (key == "max_pseudo_len")
        c.max_pseudo_len = value.get<int>();
      else if (key == "max_summary_len")
        c.max_summary_len = value.get<int>();
      else if (key == "max_graph_nodes")
        c.max_graph_nodes = value.get<int>();
      else if (key == "gat_leaky_slope")
        c.gat_leaky_slope = value.get<double>();
      else if (key == "layer_norm_eps")
        c.layer_norm_eps = value.get<double>();
      else
        throw ConfigError("unknown model config key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("model." + key + ": " + e.what());
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Graph input
// ---------------------------------------------------------------------------

GraphInput make_graph_input(const BiCfg& g, const Vocab& asm_vocab, std::size_t max_nodes) {
  GraphInput out;
  const std::size_t n = std::min(g.nodes.size(), max_nodes);
  out.node_tokens.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& tok : g.nodes[i].tokens) out.node_tokens[i].push_back(asm_vocab.id_of(tok));
  }
  for (const auto& e : g.edges) {
    if (e.src >= n || e.dst >= n) continue;
    out.edges.push_back(
        {static_cast<int>(e.src), static_cast<int>(e.dst), edge_kind_index(e.etype, e.direction)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

namespace {

template <typename S>
using T = Tensor<S>;

enum class Init { kXavier, kZeros, kOnes };

template <typename S>
struct ParamStore {
  std::vector<T<S>> params;
  std::vector<std::string> names;
  Rng rng;

  explicit ParamStore(std::uint64_t seed) : rng(seed) {}

  T<S> make(const std::string& name, Index rows, Index cols, Init init) {
    Matrix<S> m(rows, cols);
    switch (init) {
      case Init::kZeros:
        m.setZero();
        break;
      case Init::kOnes:
        m.setOnes();
        break;
      case Init::kXavier: {
        const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
        for (Index i = 0; i < rows; ++i) {
          for (Index j = 0; j < cols; ++j)
            m(i, j) = static_cast<S>((2.0 * uniform01(rng) - 1.0) * a);
        }
        break;
      }
    }
    T<S> t(std::move(m), true);
    params.push_back(t);
    names.push_back(name);
    return t;
  }
};

template <typename S>
T<S> apply_dropout(const T<S>& x, double rate, const ForwardContext& ctx) {
  if (!ctx.train || rate <= 0.0) return x;
  if (!ctx.rng) throw Error("dropout in training mode requires an rng");
  return dropout(x, rate, *ctx.rng, true);
}

template <typename S>
struct Linear {
  T<S> w, b;
  Linear() = default;
  Linear(ParamStore<S>& store, const std::string& name, Index in, Index out)
      : w(store.make(name + ".w", in, out, Init::kXavier)),
        b(store.make(name + ".b", 1, out, Init::kZeros)) {}
  T<S> operator()(const T<S>& x) const { return add(matmul(x, w), b); }
};

template <typename S>
struct LayerNormP {
  T<S> gain, bias;
  S eps = S(1e-5);
  LayerNormP() = default;
  LayerNormP(ParamStore<S>& store, const std::string& name, Index d, double eps_)
      : gain(store.make(name + ".gain", 1, d, Init::kOnes)),
        bias(store.make(name + ".bias", 1, d, Init::kZeros)),
        eps(static_cast<S>(eps_)) {}
  T<S> operator()(const T<S>& x) const { return layer_norm(x, gain, bias, eps); }
};

template <typename S>
struct FeedForward {
  Linear<S> l1, l2;
  FeedForward() = default;
  FeedForward(ParamStore<S>& store, const std::string& name, Index d, Index ff)
      : l1(store, name + ".l1", d, ff), l2(store, name + ".l2", ff, d) {}
  T<S> operator()(const T<S>& x, double rate, const ForwardContext& ctx) const {
    return l2(apply_dropout(relu(l1(x)), rate, ctx));
  }
};

inline IndexMatrix relative_index(Index n, int clip) {
  IndexMatrix idx(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      idx(i, j) = static_cast<int>(std::clamp<Index>(j - i, -clip, clip)) + clip;
    }
  }
  return idx;
}

// Multi-head self-attention with clipped relative-position embeddings on
// keys (and optionally values). One table per layer, shared by the heads.
template <typename S>
struct RelativeSelfAttention {
  Linear<S> wq, wk, wv, wo;
  T<S> rel_k, rel_v;
  int heads = 1;
  int dh = 1;
  int clip = 0;
  bool causal = false;
  bool rel_values = true;

  RelativeSelfAttention() = default;
  RelativeSelfAttention(ParamStore<S>& store, const std::string& name, const ModelConfig& cfg,
                        bool causal_)
      : wq(store, name + ".q", cfg.d_model, cfg.d_model),
        wk(store, name + ".k", cfg.d_model, cfg.d_model),
        wv(store, name + ".v", cfg.d_model, cfg.d_model),
        wo(store, name + ".o", cfg.d_model, cfg.d_model),
        heads(cfg.n_heads),
        dh(cfg.d_model / cfg.n_heads),
        clip(cfg.rel_clip_distance),
        causal(causal_),
        rel_values(cfg.relative_values) {
    rel_k = store.make(name + ".rel_k", 2 * clip + 1, dh, Init::kXavier);
    if (rel_values) rel_v = store.make(name + ".rel_v", 2 * clip + 1, dh, Init::kXavier);
  }

  BoolMatrix valid(const std::vector<bool>& mask) const {
    const Index n = static_cast<Index>(mask.size());
    BoolMatrix v(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) v(i, j) = mask[j] && (!causal || j <= i);
    }
    return v;
  }

  T<S> head_logits(const T<S>& q, const T<S>& k, int h, const IndexMatrix& idx) const {
    const T<S> qh = slice(q, 1, h * dh, dh);
    const T<S> kh = slice(k, 1, h * dh, dh);
    const T<S> content = matmul(qh, transpose(kh));
    const T<S> position = gather_cols(matmul(qh, transpose(rel_k)), idx);
    return scale(add(content, position), S(1) / std::sqrt(static_cast<S>(dh)));
  }

  T<S> operator()(const T<S>& x, const std::vector<bool>& mask) const {
    const Index n = x.rows();
    const IndexMatrix idx = relative_index(n, clip);
    const BoolMatrix ok = valid(mask);
    const T<S> q = wq(x), k = wk(x), v = wv(x);
    std::vector<T<S>> outs;
    for (int h = 0; h < heads; ++h) {
      const T<S> w = masked_softmax(head_logits(q, k, h, idx), ok);
      T<S> out = matmul(w, slice(v, 1, h * dh, dh));
      if (rel_values) out = add(out, matmul(scatter_cols(w, idx, 2 * clip + 1), rel_v));
      outs.push_back(out);
    }
    return wo(heads == 1 ? outs.front() : concat(outs, 1));
  }

  Matrix<S> probe_logits(const T<S>& x, int h) const {
    const IndexMatrix idx = relative_index(x.rows(), clip);
    return head_logits(wq(x), wk(x), h, idx).value();
  }
};

template <typename S>
struct CrossAttention {
  Linear<S> wq, wk, wv, wo;
  int heads = 1;
  int dh = 1;

  CrossAttention() = default;
  CrossAttention(ParamStore<S>& store, const std::string& name, const ModelConfig& cfg)
      : wq(store, name + ".q", cfg.d_model, cfg.d_model),
        wk(store, name + ".k", cfg.d_model, cfg.d_model),
        wv(store, name + ".v", cfg.d_model, cfg.d_model),
        wo(store, name + ".o", cfg.d_model, cfg.d_model),
        heads(cfg.n_heads),
        dh(cfg.d_model / cfg.n_heads) {}

  T<S> operator()(const T<S>& x, const EncodedSequence<S>& mem) const {
    BoolMatrix ok(x.rows(), static_cast<Index>(mem.size()));
    for (Index i = 0; i < ok.rows(); ++i) {
      for (Index j = 0; j < ok.cols(); ++j) ok(i, j) = mem.mask[static_cast<std::size_t>(j)];
    }
    const T<S> q = wq(x), k = wk(mem.states), v = wv(mem.states);
    const S inv = S(1) / std::sqrt(static_cast<S>(dh));
    std::vector<T<S>> outs;
    for (int h = 0; h < heads; ++h) {
      const T<S> logits =
          scale(matmul(slice(q, 1, h * dh, dh), transpose(slice(k, 1, h * dh, dh))), inv);
      outs.push_back(matmul(masked_softmax(logits, ok), slice(v, 1, h * dh, dh)));
    }
    return wo(heads == 1 ? outs.front() : concat(outs, 1));
  }
};

// Post-LN transformer encoder layer.
template <typename S>
struct EncoderLayer {
  RelativeSelfAttention<S> attn;
  LayerNormP<S> ln1;
  FeedForward<S> ff;
  LayerNormP<S> ln2;

  EncoderLayer(ParamStore<S>& store, const std::string& name, const ModelConfig& cfg)
      : attn(store, name + ".attn", cfg, false),
        ln1(store, name + ".ln1", cfg.d_model, cfg.layer_norm_eps),
        ff(store, name + ".ff", cfg.d_model, cfg.ff_dim),
        ln2(store, name + ".ln2", cfg.d_model, cfg.layer_norm_eps) {}

  T<S> operator()(const T<S>& x, const std::vector<bool>& mask, double rate,
                  const ForwardContext& ctx) const {
    const T<S> h = ln1(add(x, apply_dropout(attn(x, mask), rate, ctx)));
    return ln2(add(h, apply_dropout(ff(h, rate, ctx), rate, ctx)));
  }
};

template <typename S>
struct SequenceEncoder {
  T<S> table;
  std::vector<EncoderLayer<S>> layers;
  std::size_t max_len = 0;

  SequenceEncoder(ParamStore<S>& store, const std::string& name, const ModelConfig& cfg, int vocab,
                  int n_layers, std::size_t max_len_)
      : max_len(max_len_) {
    table = store.make(name + ".embed", vocab, cfg.d_model, Init::kXavier);
    for (int l = 0; l < n_layers; ++l)
      layers.emplace_back(store, name + ".layer" + std::to_string(l), cfg);
  }

  static std::vector<bool> mask_of(const std::vector<int>& ids) {
    std::vector<bool> mask(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) mask[i] = ids[i] != kPadId;
    return mask;
  }

  T<S> embed(const std::vector<int>& ids) const {
    for (int id : ids) {
      if (id < 0 || id >= table.rows()) {
        throw ValidationError("token id " + std::to_string(id) + " outside vocabulary of size " +
                              std::to_string(table.rows()));
      }
    }
    return embedding(table, std::span<const int>(ids));
  }

  EncodedSequence<S> operator()(const std::vector<int>& ids, double rate,
                                const ForwardContext& ctx) const {
    if (ids.size() > max_len) {
      throw ValidationError("sequence of " + std::to_string(ids.size()) +
                            " tokens exceeds maximum length " + std::to_string(max_len));
    }
    EncodedSequence<S> out;
    out.mask = mask_of(ids);
    if (ids.empty()) {
      out.states = T<S>::zeros(0, table.cols());
      return out;
    }
    T<S> x = apply_dropout(embed(ids), rate, ctx);
    for (const auto& layer : layers) x = layer(x, out.mask, rate, ctx);
    out.states = x;
    return out;
  }
};

template <typename S>
struct GatLayer {
  T<S> w, a_dst, a_src, edge_bias, edge_gain;
  LayerNormP<S> ln;
  int heads = 1;
  int dh = 1;
  S slope = S(0.2);

  GatLayer(ParamStore<S>& store, const std::string& name, const ModelConfig& cfg)
      : heads(cfg.gat_heads),
        dh(cfg.d_model / cfg.gat_heads),
        slope(static_cast<S>(cfg.gat_leaky_slope)) {
    w = store.make(name + ".w", cfg.d_model, cfg.d_model, Init::kXavier);
    a_dst = store.make(name + ".a_dst", heads, dh, Init::kXavier);
    a_src = store.make(name + ".a_src", heads, dh, Init::kXavier);
    edge_bias = store.make(name + ".edge_bias", kNumGraphEdgeKinds, heads, Init::kZeros);
    edge_gain = store.make(name + ".edge_gain", kNumGraphEdgeKinds, heads, Init::kOnes);
    ln = LayerNormP<S>(store, name + ".ln", cfg.d_model, cfg.layer_norm_eps);
  }

  T<S> operator()(const T<S>& x, const std::vector<int>& src, const std::vector<int>& dst,
                  const std::vector<int>& kind, double rate, const ForwardContext& ctx) const {
    const Index q = x.rows();
    const T<S> wh = matmul(x, w);
    std::vector<T<S>> outs;
    for (int h = 0; h < heads; ++h) {
      const T<S> wh_h = slice(wh, 1, h * dh, dh);
      const T<S> s_dst = matmul(wh_h, transpose(slice(a_dst, 0, h, 1)));
      const T<S> s_src = matmul(wh_h, transpose(slice(a_src, 0, h, 1)));
      const T<S> bias = gather_rows(slice(edge_bias, 1, h, 1), std::span<const int>(kind));
      const T<S> logits = leaky_relu(add(add(gather_rows(s_dst, std::span<const int>(dst)),
                                             gather_rows(s_src, std::span<const int>(src))),
                                         bias),
                                     slope);
      const T<S> alpha = segment_softmax(logits, std::span<const int>(dst), q);
      const T<S> coef =
          mul(alpha, gather_rows(slice(edge_gain, 1, h, 1), std::span<const int>(kind)));
      const T<S> msg = scale_rows(gather_rows(wh_h, std::span<const int>(src)), coef);
      outs.push_back(scatter_add_rows(msg, std::span<const int>(dst), q));
    }
    const T<S> agg = heads == 1 ? outs.front() : concat(outs, 1);
    return ln(add(x, apply_dropout(relu(agg), rate, ctx)));
  }
};

template <typename S>
struct DecoderLayer {
  RelativeSelfAttention<S> self_attn;
  LayerNormP<S> ln_self;
  std::array<std::optional<CrossAttention<S>>, 3> cross;
  std::array<std::optional<LayerNormP<S>>, 3> ln_cross;
  FeedForward<S> ff;
  LayerNormP<S> ln_ff;

  DecoderLayer(ParamStore<S>& store, const std::string& name, const ModelConfig& cfg,
               const std::vector<Source>& sources)
      : self_attn(store, name + ".self", cfg, true),
        ln_self(store, name + ".ln_self", cfg.d_model, cfg.layer_norm_eps) {
    for (Source s : sources) {
      const int k = static_cast<int>(s);
      const std::string sub = name + ".cross_" + source_name(s);
      cross[k].emplace(store, sub, cfg);
      ln_cross[k].emplace(store, sub + ".ln", cfg.d_model, cfg.layer_norm_eps);
    }
    ff = FeedForward<S>(store, name + ".ff", cfg.d_model, cfg.ff_dim);
    ln_ff = LayerNormP<S>(store, name + ".ln_ff", cfg.d_model, cfg.layer_norm_eps);
  }

  T<S> operator()(const T<S>& x, const EncoderMemory<S>& mem, const std::vector<Source>& order,
                  double rate, const ForwardContext& ctx, ForwardTrace* trace) const {
    const std::vector<bool> all(static_cast<std::size_t>(x.rows()), true);
    T<S> y = ln_self(add(x, apply_dropout(self_attn(x, all), rate, ctx)));
    if (trace) trace->events.push_back("self");
    for (Source s : order) {
      const int k = static_cast<int>(s);
      const EncodedSequence<S>& m = mem[s];
      if (m.any_valid()) {
        y = (*ln_cross[k])(add(y, apply_dropout((*cross[k])(y, m), rate, ctx)));
        if (trace) trace->events.push_back("cross:" + source_name(s));
      } else {
        // Nothing to attend to: only the residual path remains.
        y = (*ln_cross[k])(y);
        if (trace) trace->events.push_back("residual:" + source_name(s));
      }
    }
    y = ln_ff(add(y, apply_dropout(ff(y, rate, ctx), rate, ctx)));
    if (trace) trace->events.push_back("ffn");
    return y;
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

template <typename S>
struct Model<S>::Impl {
  ModelConfig cfg;
  ParamStore<S> store;
  std::vector<Source> order;
  std::optional<SequenceEncoder<S>> asm_enc;
  std::optional<SequenceEncoder<S>> pseudo_enc;
  T<S> node_table;
  bool has_graph = false;
  std::vector<GatLayer<S>> gat;
  T<S> summary_table;
  std::vector<DecoderLayer<S>> decoder;
  Linear<S> out;
  T<S> out_bias;  // used when tied

  Impl(const ModelConfig& c, std::uint64_t seed) : cfg(c), store(seed) {
    cfg.validate();
    const bool concat_mode = cfg.fusion_mode == FusionMode::kConcatSingleEncoder;
    has_graph = !concat_mode || cfg.concat_use_graph;
    for (Source s : cfg.cross_attention_order) {
      if (concat_mode && s == Source::kPseudo) continue;
      if (s == Source::kGraph && !has_graph) continue;
      order.push_back(s);
    }
    if (concat_mode) {
      const int vocab = cfg.asm_vocab_size + cfg.pseudo_vocab_size + 1;
      asm_enc.emplace(store, "concat_enc", cfg, vocab, cfg.n_layers_asm,
                      static_cast<std::size_t>(cfg.max_asm_len + cfg.max_pseudo_len + 1));
    } else {
      asm_enc.emplace(store, "asm_enc", cfg, cfg.asm_vocab_size, cfg.n_layers_asm,
                      static_cast<std::size_t>(cfg.max_asm_len));
      pseudo_enc.emplace(store, "pseudo_enc", cfg, cfg.pseudo_vocab_size, cfg.n_layers_pseudo,
                         static_cast<std::size_t>(cfg.max_pseudo_len));
    }
    if (has_graph) {
      if (cfg.share_node_embeddings) {
        node_table = asm_enc->table;
      } else {
        node_table =
            store.make("graph_enc.node_embed", cfg.asm_vocab_size, cfg.d_model, Init::kXavier);
      }
      for (int l = 0; l < cfg.n_gat_layers; ++l) {
        gat.emplace_back(store, "graph_enc.layer" + std::to_string(l), cfg);
      }
    }
    summary_table = store.make("dec.embed", cfg.summary_vocab_size, cfg.d_model, Init::kXavier);
    for (int l = 0; l < cfg.n_layers_dec; ++l) {
      decoder.emplace_back(store, "dec.layer" + std::to_string(l), cfg, order);
    }
    if (cfg.tie_output_embedding) {
      out_bias = store.make("dec.out.b", 1, cfg.summary_vocab_size, Init::kZeros);
    } else {
      out = Linear<S>(store, "dec.out", cfg.d_model, cfg.summary_vocab_size);
    }
  }
};

template <typename S>
Model<S>::Model(const ModelConfig& cfg, std::uint64_t seed)
    : impl_(std::make_unique<Impl>(cfg, seed)) {}
template <typename S>
Model<S>::~Model() = default;
template <typename S>
Model<S>::Model(Model&&) noexcept = default;
template <typename S>
Model<S>& Model<S>::operator=(Model&&) noexcept = default;

template <typename S>
const ModelConfig& Model<S>::config() const {
  return impl_->cfg;
}
template <typename S>
std::vector<Tensor<S>>& Model<S>::parameters() {
  return impl_->store.params;
}
template <typename S>
const std::vector<Tensor<S>>& Model<S>::parameters() const {
  return impl_->store.params;
}
template <typename S>
const std::vector<std::string>& Model<S>::parameter_names() const {
  return impl_->store.names;
}

template <typename S>
std::size_t Model<S>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : impl_->store.params) n += static_cast<std::size_t>(p.size());
  return n;
}

template <typename S>
std::vector<Matrix<S>> Model<S>::snapshot() const {
  std::vector<Matrix<S>> out;
  for (const auto& p : impl_->store.params) out.push_back(p.value());
  return out;
}

template <typename S>
void Model<S>::restore(const std::vector<Matrix<S>>& values) {
  auto& params = impl_->store.params;
  if (values.size() != params.size()) throw ShapeError("restore: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].rows() != params[i].rows() || values[i].cols() != params[i].cols()) {
      throw ShapeError("restore: shape mismatch for " + impl_->store.names[i]);
    }
    params[i].mutable_value() = values[i];
  }
}

template <typename S>
std::vector<Source> Model<S>::decoder_sources() const {
  return impl_->order;
}

template <typename S>
EncodedSequence<S> Model<S>::ai_encode(const std::vector<int>& ids,
                                       const ForwardContext& ctx) const {
  return (*impl_->asm_enc)(ids, impl_->cfg.dropout, ctx);
}

template <typename S>
EncodedSequence<S> Model<S>::ps_encode(const std::vector<int>& ids,
                                       const ForwardContext& ctx) const {
  if (!impl_->pseudo_enc) throw ConfigError("ps_encode: model has no separate pseudo-code encoder");
  return (*impl_->pseudo_enc)(ids, impl_->cfg.dropout, ctx);
}

template <typename S>
Tensor<S> Model<S>::node_initial_features(const GraphInput& g) const {
  if (!impl_->has_graph) throw ConfigError("node_initial_features: model has no graph encoder");
  const T<S>& table = impl_->node_table;
  const Index q = static_cast<Index>(g.num_nodes());
  std::vector<int> ids, owner;
  Matrix<S> inv = Matrix<S>::Zero(q, 1);
  bool warned = false;
  for (Index i = 0; i < q; ++i) {
    const auto& toks = g.node_tokens[static_cast<std::size_t>(i)];
    if (toks.empty()) {
      if (!warned) warn("graph node " + std::to_string(i) + " has no tokens; using a zero vector");
      warned = true;
      continue;
    }
    for (int id : toks) {
      if (id < 0 || id >= table.rows()) {
        throw ValidationError("node token id " + std::to_string(id) + " outside vocabulary");
      }
      ids.push_back(id);
      owner.push_back(static_cast<int>(i));
    }
    inv(i, 0) = S(1) / static_cast<S>(toks.size());
  }
  if (ids.empty()) return T<S>::zeros(q, table.cols());
  const T<S> sums =
      scatter_add_rows(embedding(table, std::span<const int>(ids)), std::span<const int>(owner), q);
  return scale_rows(sums, T<S>(std::move(inv)));
}

template <typename S>
EncodedSequence<S> Model<S>::gat_encode(const GraphInput& g, const Tensor<S>& node_init,
                                        const ForwardContext& ctx) const {
  if (!impl_->has_graph) throw ConfigError("gat_encode: model has no graph encoder");
  const Index q = static_cast<Index>(g.num_nodes());
  if (node_init.rows() != q || node_init.cols() != impl_->cfg.d_model) {
    throw ShapeError("gat_encode: node features " + node_init.shape_string() + " for " +
                     std::to_string(q) + " nodes");
  }
  EncodedSequence<S> out;
  out.mask.assign(static_cast<std::size_t>(q), true);
  if (q == 0) {
    out.states = node_init;
    return out;
  }
  std::vector<int> src, dst, kind;
  for (const auto& e : g.edges) {
    if (e.src < 0 || e.src >= q || e.dst < 0 || e.dst >= q) {
      throw ValidationError("graph edge " + std::to_string(e.src) + "->" + std::to_string(e.dst) +
                            " references a node outside the graph");
    }
    if (e.kind < 0 || e.kind >= kNumGraphEdgeKinds)
      throw ValidationError("graph edge kind out of range");
    src.push_back(e.src);
    dst.push_back(e.dst);
    kind.push_back(e.kind);
  }
  for (int i = 0; i < q; ++i) {
    src.push_back(i);
    dst.push_back(i);
    kind.push_back(kSelfLoopKind);
  }
  T<S> x = node_init;
  for (const auto& layer : impl_->gat) x = layer(x, src, dst, kind, impl_->cfg.dropout, ctx);
  out.states = x;
  return out;
}

template <typename S>
std::vector<int> Model<S>::concat_ids(const std::vector<int>& asm_ids,
                                      const std::vector<int>& pseudo_ids) const {
  const int sep = impl_->cfg.asm_vocab_size + impl_->cfg.pseudo_vocab_size;
  std::vector<int> ids = asm_ids;
  ids.push_back(sep);
  for (int id : pseudo_ids) ids.push_back(id + impl_->cfg.asm_vocab_size);
  return ids;
}

template <typename S>
EncoderMemory<S> Model<S>::encode(const ModelInput& input, const ForwardContext& ctx) const {
  EncoderMemory<S> mem;
  const auto empty = [this] {
    EncodedSequence<S> e;
    e.states = T<S>::zeros(0, impl_->cfg.d_model);
    return e;
  };
  if (impl_->cfg.fusion_mode == FusionMode::kConcatSingleEncoder) {
    mem[Source::kAsm] = ai_encode(concat_ids(input.asm_ids, input.pseudo_ids), ctx);
    mem[Source::kPseudo] = empty();
  } else {
    mem[Source::kAsm] = ai_encode(input.asm_ids, ctx);
    mem[Source::kPseudo] = ps_encode(input.pseudo_ids, ctx);
  }
  if (impl_->has_graph) {
    mem[Source::kGraph] = gat_encode(input.graph, node_initial_features(input.graph), ctx);
  } else {
    mem[Source::kGraph] = empty();
  }
  return mem;
}

template <typename S>
Tensor<S> Model<S>::decode(const EncoderMemory<S>& memory, const std::vector<int>& prefix,
                           const ForwardContext& ctx) const {
  if (prefix.empty()) throw ValidationError("decode: empty prefix (must start with BOS)");
  if (prefix.front() != kBosId) throw ValidationError("decode: prefix must start with BOS");
  for (int id : prefix) {
    if (id < 0 || id >= impl_->cfg.summary_vocab_size) {
      throw ValidationError("decode: summary id " + std::to_string(id) + " outside vocabulary");
    }
  }
  T<S> y = apply_dropout(embedding(impl_->summary_table, std::span<const int>(prefix)),
                         impl_->cfg.dropout, ctx);
  for (std::size_t l = 0; l < impl_->decoder.size(); ++l) {
    y = impl_->decoder[l](y, memory, impl_->order, impl_->cfg.dropout, ctx,
                          l == 0 ? ctx.trace : nullptr);
  }
  const T<S> logits = impl_->cfg.tie_output_embedding
                          ? add(matmul(y, transpose(impl_->summary_table)), impl_->out_bias)
                          : impl_->out(y);
  return log_softmax(logits);
}

template <typename S>
std::vector<double> Model<S>::next_log_probs(const EncoderMemory<S>& memory,
                                             const std::vector<int>& prefix) const {
  const T<S> lp = decode(memory, prefix);
  const Index last = lp.rows() - 1;
  std::vector<double> out(static_cast<std::size_t>(lp.cols()));
  double mx = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < lp.cols(); ++j) {
    out[static_cast<std::size_t>(j)] = static_cast<double>(lp.value()(last, j));
    mx = std::max(mx, out[static_cast<std::size_t>(j)]);
  }
  double total = 0.0;
  for (double v : out) total += std::exp(v - mx);
  const double lse = mx + std::log(total);
  for (double& v : out) v -= lse;
  return out;
}

template <typename S>
std::vector<double> Model<S>::decode_step(const EncoderMemory<S>& memory,
                                          const std::vector<int>& prefix) const {
  std::vector<double> p = next_log_probs(memory, prefix);
  for (double& v : p) v = std::exp(v);
  return p;
}

template <typename S>
Tensor<S> Model<S>::nll(const ModelInput& input, const std::vector<int>& target,
                        const ForwardContext& ctx, std::size_t* tokens) const {
  if (target.size() < 2) throw ValidationError("loss: target needs BOS and at least one token");
  const EncoderMemory<S> mem = encode(input, ctx);
  const std::vector<int> prefix(target.begin(), target.end() - 1);
  const std::vector<int> next(target.begin() + 1, target.end());
  std::size_t count = 0;
  for (int id : next) count += id != kPadId;
  if (tokens) *tokens = count;
  return nll_sum(decode(mem, prefix, ctx), std::span<const int>(next), kPadId);
}

template <typename S>
Tensor<S> Model<S>::loss(const ModelInput& input, const std::vector<int>& target,
                         const ForwardContext& ctx) const {
  std::size_t count = 0;
  const T<S> total = nll(input, target, ctx, &count);
  if (count == 0) throw ValidationError("loss: no non-PAD target positions");
  return scale(total, S(1) / static_cast<S>(count));
}

template <typename S>
Matrix<S> Model<S>::asm_attention_logits(const std::vector<int>& ids, int layer, int head) const {
  const auto& enc = *impl_->asm_enc;
  if (layer < 0 || layer >= static_cast<int>(enc.layers.size()))
    throw ConfigError("probe: bad layer");
  if (head < 0 || head >= impl_->cfg.n_heads) throw ConfigError("probe: bad head");
  const std::vector<bool> mask = SequenceEncoder<S>::mask_of(ids);
  T<S> x = enc.embed(ids);
  for (int l = 0; l < layer; ++l) x = enc.layers[static_cast<std::size_t>(l)](x, mask, 0.0, {});
  return enc.layers[static_cast<std::size_t>(layer)].attn.probe_logits(x, head);
}

template <typename S>
Matrix<S> Model<S>::asm_attention_weights(const std::vector<int>& ids, int layer, int head) const {
  const Matrix<S> logits = asm_attention_logits(ids, layer, head);
  const std::vector<bool> mask = SequenceEncoder<S>::mask_of(ids);
  BoolMatrix ok(logits.rows(), logits.cols());
  for (Index i = 0; i < ok.rows(); ++i) {
    for (Index j = 0; j < ok.cols(); ++j) ok(i, j) = mask[static_cast<std::size_t>(j)];
  }
  return masked_softmax(T<S>(logits), ok).value();
}

template class Model<float>;
template class Model<double>;

}  // namespace bcs
