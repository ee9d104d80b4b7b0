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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "bcs/error.hpp"
#include "support.hpp"

namespace bcs {
namespace {

using M = Matrix<double>;
using DModel = Model<double>;

Tensor<double>& param(DModel& m, const std::string& name) {
  const auto& names = m.parameter_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::runtime_error("no parameter " + name);
  return m.parameters()[static_cast<std::size_t>(it - names.begin())];
}

ModelConfig micro() { return ModelConfig::micro(); }

PreparedSample sample(std::uint64_t seed, const ModelConfig& cfg = micro()) {
  Rng rng(seed);
  return testing::toy_sample(rng, cfg, 6, 5, 6);
}

double max_abs_diff(const M& a, const M& b) { return (a - b).cwiseAbs().maxCoeff(); }

// --- config ---------------------------------------------------------------------

TEST(ModelConfig, DefaultsAndValidation) {
  ModelConfig c;
  EXPECT_EQ(c.d_model, 256);
  EXPECT_EQ(c.n_heads, 4);
  EXPECT_EQ(c.ff_dim, 1024);
  EXPECT_EQ(c.n_layers_asm, 3);
  EXPECT_EQ(c.n_layers_pseudo, 3);
  EXPECT_EQ(c.n_layers_dec, 3);
  EXPECT_EQ(c.n_gat_layers, 2);
  EXPECT_EQ(c.gat_heads, 4);
  EXPECT_EQ(c.rel_clip_distance, 16);
  EXPECT_DOUBLE_EQ(c.dropout, 0.1);
  EXPECT_EQ(c.cross_attention_order, (SourceOrder{Source::kPseudo, Source::kAsm, Source::kGraph}));
  ModelConfig bad = micro();
  bad.d_model = 9;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = micro();
  bad.cross_attention_order = {Source::kAsm, Source::kAsm, Source::kGraph};
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(ModelConfig, JsonRoundTripAndUnknownKeys) {
  ModelConfig c = micro();
  c.cross_attention_order = {Source::kGraph, Source::kPseudo, Source::kAsm};
  c.fusion_mode = FusionMode::kConcatSingleEncoder;
  EXPECT_EQ(ModelConfig::from_json(c.to_json()), c);
  nlohmann::json j = c.to_json();
  j["d_modle"] = 4;
  EXPECT_THROW(ModelConfig::from_json(j), ConfigError);
}

// --- encoders ---------------------------------------------------------------------

TEST(Encoders, ShapeLaws) {
  const DModel m(micro(), 1);
  const auto s = sample(2);
  EXPECT_EQ(m.ai_encode(s.input.asm_ids).states.shape(),
            (std::vector<Index>{static_cast<Index>(s.input.asm_ids.size()), 8}));
  EXPECT_EQ(m.ps_encode(s.input.pseudo_ids).states.shape(),
            (std::vector<Index>{static_cast<Index>(s.input.pseudo_ids.size()), 8}));
  const auto init = m.node_initial_features(s.input.graph);
  EXPECT_EQ(m.gat_encode(s.input.graph, init).states.rows(),
            static_cast<Index>(s.input.graph.num_nodes()));
}

TEST(Encoders, LeadingPadIsInvisible) {
  const DModel m(micro(), 3);
  const std::vector<int> ids = {5, 9, 7, 11};
  std::vector<int> padded = {kPadId, kPadId, kPadId};
  padded.insert(padded.end(), ids.begin(), ids.end());
  for (bool pseudo : {false, true}) {
    const auto a = pseudo ? m.ps_encode(ids) : m.ai_encode(ids);
    const auto b = pseudo ? m.ps_encode(padded) : m.ai_encode(padded);
    EXPECT_EQ(b.mask, (std::vector<bool>{false, false, false, true, true, true, true}));
    EXPECT_LE(max_abs_diff(a.states.value(), b.states.value().bottomRows(4)), 1e-5);
  }
}

TEST(Encoders, SymmetricOffsetsGiveSymmetricWeights) {
  DModel m(micro(), 4);
  // Make the relative key/value tables even in the offset.
  for (const char* name : {"asm_enc.layer0.attn.rel_k", "asm_enc.layer0.attn.rel_v"}) {
    M& t = param(m, name).mutable_value();
    const Index k = (t.rows() - 1) / 2;
    for (Index d = 1; d <= k; ++d) t.row(k - d) = t.row(k + d);
  }
  for (int head = 0; head < 2; ++head) {
    const M w = m.asm_attention_weights({6, 6}, 0, head);
    EXPECT_NEAR(w(0, 1), w(1, 0), 1e-12);
    EXPECT_NEAR(w(0, 0), w(1, 1), 1e-12);
  }
}

TEST(Encoders, RelativeClippingLaw) {
  const ModelConfig cfg = micro();
  const DModel m(cfg, 5);
  const int k = cfg.rel_clip_distance;
  const std::vector<int> ids(static_cast<std::size_t>(3 * k), 7);
  for (int head = 0; head < cfg.n_heads; ++head) {
    const M logits = m.asm_attention_logits(ids, 0, head);
    const double far_right = logits(0, k);
    const double far_left = logits(k, 0);
    for (Index i = 0; i < logits.rows(); ++i) {
      for (Index j = 0; j < logits.cols(); ++j) {
        if (j - i >= k) {
          EXPECT_NEAR(logits(i, j), far_right, 1e-12);
        }
        if (i - j >= k) {
          EXPECT_NEAR(logits(i, j), far_left, 1e-12);
        }
      }
    }
    // Within the window the offsets are distinguished.
    EXPECT_NE(logits(0, 1), logits(0, 2));
  }
}

TEST(Encoders, TooLongOrOutOfVocabularyIsRejected) {
  const DModel m(micro(), 1);
  EXPECT_THROW(m.ai_encode(std::vector<int>(65, 5)), ValidationError);
  EXPECT_THROW(m.ai_encode({5, 20}), ValidationError);
  EXPECT_THROW(m.ps_encode({-1}), ValidationError);
}

TEST(Encoders, PseudoParametersDisjointFromAssembly) {
  DModel m(micro(), 6);
  for (auto& p : m.parameters()) p.zero_grad();
  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    tape.backward(sum_all(m.ps_encode({5, 6, 7}).states));
  }
  double asm_grad = 0.0, pseudo_grad = 0.0;
  for (std::size_t i = 0; i < m.parameters().size(); ++i) {
    const double g = m.parameters()[i].grad().cwiseAbs().sum();
    if (m.parameter_names()[i].rfind("asm_enc.", 0) == 0) asm_grad += g;
    if (m.parameter_names()[i].rfind("pseudo_enc.", 0) == 0) pseudo_grad += g;
  }
  EXPECT_EQ(asm_grad, 0.0);
  EXPECT_GT(pseudo_grad, 0.0);
}

TEST(Encoders, EmptyPseudoIsFullyMaskedSource) {
  const DModel m(micro(), 7);
  PreparedSample s = sample(8);
  s.input.pseudo_ids.clear();
  const auto mem = m.encode(s.input);
  EXPECT_EQ(mem[Source::kPseudo].size(), 0u);
  EXPECT_FALSE(mem[Source::kPseudo].any_valid());
  const auto p = m.decode_step(mem, {kBosId});
  double total = 0.0;
  for (double x : p) total += x;
  EXPECT_NEAR(total, 1.0, 1e-6);
}

TEST(Encoders, ParametersAreDistinctTensors) {
  DModel m(micro(), 1);
  std::set<const void*> nodes;
  std::set<std::string> names(m.parameter_names().begin(), m.parameter_names().end());
  for (const auto& p : m.parameters()) nodes.insert(p.node().get());
  EXPECT_EQ(nodes.size(), m.parameters().size());
  EXPECT_EQ(names.size(), m.parameters().size());
}

// --- graph encoder ----------------------------------------------------------------

GraphInput chain(int n) {
  GraphInput g;
  for (int i = 0; i < n; ++i) g.node_tokens.push_back({4 + i});
  for (int i = 0; i + 1 < n; ++i) {
    g.edges.push_back({i, i + 1, edge_kind_index(EdgeType::kSeq, Direction::kFwd)});
    g.edges.push_back({i + 1, i, edge_kind_index(EdgeType::kSeq, Direction::kBwd)});
  }
  return g;
}

TEST(Gat, NodeInitialFeaturesAreTokenMeans) {
  DModel m(micro(), 9);
  const M& table = param(m, "graph_enc.node_embed").value();
  GraphInput g;
  g.node_tokens = {{5}, {5, 5}, {5, 9}, {5, 9, 5, 9}};
  const M f = m.node_initial_features(g).value();
  EXPECT_LE(max_abs_diff(f.row(0), table.row(5)), 1e-15);
  EXPECT_LE(max_abs_diff(f.row(1), table.row(5)), 1e-15);
  EXPECT_LE(max_abs_diff(f.row(2), 0.5 * (table.row(5) + table.row(9))), 1e-15);
  EXPECT_LE(max_abs_diff(f.row(3), f.row(2)), 1e-15);
}

TEST(Gat, EmptyNodeGetsZeroVector) {
  set_warnings_enabled(false);
  const DModel m(micro(), 9);
  GraphInput g;
  g.node_tokens = {{}, {5}};
  EXPECT_EQ(m.node_initial_features(g).value().row(0).cwiseAbs().sum(), 0.0);
  set_warnings_enabled(true);
}

TEST(Gat, IsolatedNodeSeesOnlyItself) {
  const DModel m(micro(), 10);
  GraphInput g = chain(3);
  g.node_tokens.push_back({8});  // node 3, no edges
  Tensor<double> init = m.node_initial_features(g);
  const M before = m.gat_encode(g, init).states.value();
  M perturbed = init.value();
  perturbed.topRows(3).array() += 0.7;
  const M after = m.gat_encode(g, Tensor<double>(perturbed)).states.value();
  EXPECT_LE(max_abs_diff(before.row(3), after.row(3)), 1e-12);
  EXPECT_GT(max_abs_diff(before.row(0), after.row(0)), 1e-6);
}

TEST(Gat, EdgeStorageOrderIsIrrelevant) {
  const DModel m(micro(), 11);
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const PreparedSample s = testing::toy_sample(rng, micro(), 6, 5, 4);
    GraphInput shuffled = s.input.graph;
    shuffle(shuffled.edges, rng);
    const auto init = m.node_initial_features(s.input.graph);
    EXPECT_LE(max_abs_diff(m.gat_encode(s.input.graph, init).states.value(),
                           m.gat_encode(shuffled, init).states.value()),
              1e-6);
  }
}

TEST(Gat, TwoLayersReachTwoHops) {
  ModelConfig cfg = micro();
  cfg.n_gat_layers = 2;
  const DModel m(cfg, 12);
  const GraphInput g = chain(3);
  const Tensor<double> init = m.node_initial_features(g);
  M perturbed = init.value();
  perturbed.row(2).array() += 1.0;
  const M a = m.gat_encode(g, init).states.value();
  const M b = m.gat_encode(g, Tensor<double>(perturbed)).states.value();
  EXPECT_GT(max_abs_diff(a.row(0), b.row(0)), 1e-6);
  cfg.n_gat_layers = 1;
  const DModel one(cfg, 12);
  const M c = one.gat_encode(g, init).states.value();
  const M d = one.gat_encode(g, Tensor<double>(perturbed)).states.value();
  EXPECT_LE(max_abs_diff(c.row(0), d.row(0)), 1e-12);
}

TEST(Gat, NodeCountMismatchIsShapeError) {
  const DModel m(micro(), 1);
  EXPECT_THROW(m.gat_encode(chain(3), Tensor<double>(M::Zero(2, 8))), ShapeError);
}

// --- decoder ---------------------------------------------------------------------

TEST(Decoder, DistributionsSumToOne) {
  const DModel m(micro(), 13);
  const auto s = sample(14);
  const auto mem = m.encode(s.input);
  const M logp = m.decode(mem, s.target).value();
  for (Index t = 0; t < logp.rows(); ++t) EXPECT_NEAR(logp.row(t).array().exp().sum(), 1.0, 1e-6);
  const auto p = m.decode_step(mem, {kBosId, 5});
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-6);
}

TEST(Decoder, Causality) {
  const DModel m(micro(), 15);
  const auto mem = m.encode(sample(16).input);
  const std::vector<int> a = {kBosId, 5, 6, 7, 8};
  const M base = m.decode(mem, a).value();
  for (std::size_t changed = 1; changed < a.size(); ++changed) {
    std::vector<int> b = a;
    b[changed] = 19;
    const M other = m.decode(mem, b).value();
    for (Index t = 0; t < static_cast<Index>(changed); ++t) {
      EXPECT_LE(max_abs_diff(base.row(t), other.row(t)), 1e-12)
          << "pos " << changed << " row " << t;
    }
    EXPECT_GT(
        max_abs_diff(base.row(static_cast<Index>(changed)), other.row(static_cast<Index>(changed))),
        1e-9);
  }
}

TEST(Decoder, MaskedGraphEqualsResidualPath) {
  DModel m(micro(), 17);
  const auto s = sample(18);
  EncoderMemory<double> masked = m.encode(s.input);
  std::fill(masked[Source::kGraph].mask.begin(), masked[Source::kGraph].mask.end(), false);
  const M got = m.decode(masked, s.target).value();
  // Oracle: keep the graph visible but silence the graph cross-attention's output projection.
  for (const char* name : {"dec.layer0.cross_GRAPH.o.w", "dec.layer0.cross_GRAPH.o.b"}) {
    param(m, name).mutable_value().setZero();
  }
  const M want = m.decode(m.encode(s.input), s.target).value();
  EXPECT_LE(max_abs_diff(got, want), 1e-5);
}

TEST(Decoder, PrefixMustStartWithBos) {
  const DModel m(micro(), 1);
  const auto mem = m.encode(sample(1).input);
  EXPECT_THROW(m.decode(mem, {}), ValidationError);
  EXPECT_THROW(m.decode(mem, {5, 6}), ValidationError);
}

class Orders : public ::testing::TestWithParam<int> {};

TEST_P(Orders, TraceFollowsConfiguredOrder) {
  ModelConfig cfg = micro();
  cfg.cross_attention_order = all_source_orders()[static_cast<std::size_t>(GetParam())];
  const DModel m(cfg, 19);
  ForwardTrace trace;
  ForwardContext ctx;
  ctx.trace = &trace;
  const auto s = sample(20);
  m.decode(m.encode(s.input), s.target, ctx);
  std::vector<std::string> want = {"self"};
  for (Source src : cfg.cross_attention_order) want.push_back("cross:" + source_name(src));
  want.push_back("ffn");
  EXPECT_EQ(trace.events, want);
  EXPECT_EQ(m.decoder_sources(), std::vector<Source>(cfg.cross_attention_order.begin(),
                                                     cfg.cross_attention_order.end()));
}

INSTANTIATE_TEST_SUITE_P(AllSix, Orders, ::testing::Range(0, 6));

TEST(Orders, SixDistinctPermutations) {
  const auto orders = all_source_orders();
  EXPECT_EQ(orders.size(), 6u);
  EXPECT_EQ(std::set<SourceOrder>(orders.begin(), orders.end()).size(), 6u);
}

TEST(Orders, MaskedSourceShowsAsResidual) {
  const DModel m(micro(), 21);
  PreparedSample s = sample(22);
  s.input.pseudo_ids.clear();
  ForwardTrace trace;
  ForwardContext ctx;
  ctx.trace = &trace;
  m.decode(m.encode(s.input), s.target, ctx);
  EXPECT_EQ(trace.events, (std::vector<std::string>{"self", "residual:PSEUDO", "cross:ASM",
                                                    "cross:GRAPH", "ffn"}));
}

// --- fusion modes and flags ------------------------------------------------------------

TEST(Fusion, ConcatModeHasFewerParameters) {
  ModelConfig triple = micro();
  ModelConfig concat = micro();
  concat.fusion_mode = FusionMode::kConcatSingleEncoder;
  const DModel a(triple, 1), b(concat, 1);
  EXPECT_LT(b.parameter_count(), a.parameter_count());
  for (const auto& name : b.parameter_names()) {
    EXPECT_NE(name.rfind("asm_enc.", 0), 0u) << name;
    EXPECT_NE(name.rfind("pseudo_enc.", 0), 0u) << name;
  }
  EXPECT_EQ(b.decoder_sources(), (std::vector<Source>{Source::kAsm, Source::kGraph}));
  concat.concat_use_graph = false;
  EXPECT_EQ(DModel(concat, 1).decoder_sources(), (std::vector<Source>{Source::kAsm}));
}

TEST(Fusion, ConcatStreamHasSeparator) {
  ModelConfig cfg = micro();
  cfg.fusion_mode = FusionMode::kConcatSingleEncoder;
  const DModel m(cfg, 1);
  const auto ids = m.concat_ids({5, 6}, {7});
  ASSERT_EQ(ids.size(), 4u);
  EXPECT_EQ(ids[0], 5);
  EXPECT_EQ(ids[1], 6);
  EXPECT_NE(ids[2], ids[3]);
  EXPECT_GE(ids[3], cfg.asm_vocab_size);  // pseudo ids live past the assembly range
  const auto s = sample(3, cfg);
  const auto mem = m.encode(s.input);
  EXPECT_EQ(mem[Source::kAsm].size(), s.input.asm_ids.size() + 1 + s.input.pseudo_ids.size());
}

TEST(Flags, OptionalTablesChangeParameterCount) {
  const std::size_t base = DModel(micro(), 1).parameter_count();
  ModelConfig c = micro();
  c.relative_values = false;
  EXPECT_LT(DModel(c, 1).parameter_count(), base);
  c = micro();
  c.share_node_embeddings = true;
  EXPECT_EQ(DModel(c, 1).parameter_count(), base - 20 * 8);
  c = micro();
  c.tie_output_embedding = true;
  EXPECT_LT(DModel(c, 1).parameter_count(), base);
}

TEST(Init, SameSeedSameParameters) {
  const DModel a(micro(), 77), b(micro(), 77), c(micro(), 78);
  bool differs = false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    EXPECT_EQ(a.parameters()[i].value(), b.parameters()[i].value());
    differs |= a.parameters()[i].value() != c.parameters()[i].value();
  }
  EXPECT_TRUE(differs);
}

// --- loss -----------------------------------------------------------------------

TEST(Loss, UniformPredictionsGiveLogV) {
  DModel m(micro(), 23);
  param(m, "dec.out.w").mutable_value().setZero();
  param(m, "dec.out.b").mutable_value().setZero();
  const auto s = sample(24);
  EXPECT_NEAR(m.loss(s.input, s.target).item(), std::log(20.0), 1e-12);
}

TEST(Loss, ConfidentCorrectPredictionGivesZero) {
  DModel m(micro(), 25);
  param(m, "dec.out.w").mutable_value().setZero();
  M& b = param(m, "dec.out.b").mutable_value();
  b.setZero();
  b(0, kEosId) = 100.0;
  EXPECT_NEAR(m.loss(sample(26).input, {kBosId, kEosId}).item(), 0.0, 1e-30);
}

TEST(Loss, PadTargetsExcluded) {
  const DModel m(micro(), 27);
  const auto s = sample(28);
  std::vector<int> padded = s.target;
  padded.insert(padded.end(), 3, kPadId);
  EXPECT_NEAR(m.loss(s.input, s.target).item(), m.loss(s.input, padded).item(), 1e-12);
  EXPECT_THROW(m.loss(s.input, {kBosId, kPadId, kPadId}), ValidationError);
}

TEST(Snapshot, RestoreRoundTrip) {
  DModel m(micro(), 29);
  const auto snap = m.snapshot();
  for (auto& p : m.parameters()) p.mutable_value().setConstant(0.5);
  m.restore(snap);
  for (std::size_t i = 0; i < snap.size(); ++i) EXPECT_EQ(m.parameters()[i].value(), snap[i]);
}

// --- gradients ---------------------------------------------------------------------

TEST(ModelGradients, MicroConfigFullCheck) {
  ModelConfig cfg = micro();
  DModel m(cfg, 31);
  const auto corpus = testing::toy_corpus(2, 32, cfg);
  const auto r = testing::check_gradients(m, [&] {
    return add(m.loss(corpus[0].input, corpus[0].target),
               m.loss(corpus[1].input, corpus[1].target));
  });
  EXPECT_LE(r.max_rel_error, 1e-4) << r.worst_parameter;
  EXPECT_EQ(r.checked, m.parameter_count());
}

TEST(ModelGradients, ConcatModeCheck) {
  ModelConfig cfg = micro();
  cfg.fusion_mode = FusionMode::kConcatSingleEncoder;
  cfg.tie_output_embedding = true;
  cfg.share_node_embeddings = true;
  DModel m(cfg, 33);
  const auto corpus = testing::toy_corpus(1, 34, cfg);
  const auto r =
      testing::check_gradients(m, [&] { return m.loss(corpus[0].input, corpus[0].target); });
  EXPECT_LE(r.max_rel_error, 1e-4) << r.worst_parameter;
}

}  // namespace
}  // namespace bcs
