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

#include "bcs/features.hpp"

#include <iomanip>
#include <sstream>

#include "bcs/arch.hpp"
#include "bcs/bicfg.hpp"
#include "bcs/error.hpp"
#include "bcs/pseudo.hpp"

namespace bcs {

void Vocabularies::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir.string() + ": " + ec.message());
  asm_vocab.save(dir / "asm_vocab.json");
  pseudo.save(dir / "pseudo_vocab.json");
  summary.save(dir / "summary_vocab.json");
}

Vocabularies Vocabularies::load(const std::filesystem::path& dir) {
  Vocabularies v;
  v.asm_vocab = Vocab::load(dir / "asm_vocab.json");
  v.pseudo = Vocab::load(dir / "pseudo_vocab.json");
  v.summary = Vocab::load(dir / "summary_vocab.json");
  return v;
}

TokenSeq function_asm_tokens(const DisasmFunction& f, const NormalizeOptions& options) {
  return normalize_function(f, profile_for(f.arch), options);
}

TokenSeq sample_asm_tokens(const DatasetSample& sample, const NormalizeOptions& options) {
  if (!sample.tokens_asm.empty()) return TokenSeq{sample.tokens_asm, Origin::kAsm};
  return function_asm_tokens(sample.function, options);
}

TokenSeq function_pseudo_tokens(const DisasmFunction& f) {
  if (!f.pseudo) return TokenSeq{{}, Origin::kPseudo};
  return tokenize_pseudo(*f.pseudo);
}

Vocabularies build_vocabularies(const std::vector<DatasetSample>& samples,
                                const FeatureOptions& options) {
  if (samples.empty())
    throw EmptyDatasetError("cannot build vocabularies without training samples");
  std::vector<TokenSeq> asm_corpus, pseudo_corpus, summary_corpus;
  for (const auto& s : samples) {
    asm_corpus.push_back(sample_asm_tokens(s, options.normalize));
    pseudo_corpus.push_back(function_pseudo_tokens(s.function));
    summary_corpus.push_back(tokenize_summary(s.summary));
  }
  Vocabularies v;
  v.asm_vocab = Vocab::build(asm_corpus, options.min_freq_asm, Origin::kAsm);
  if (options.shared_pseudo_summary_vocab) {
    for (auto& seq : summary_corpus) {
      seq.origin = Origin::kPseudo;
      pseudo_corpus.push_back(std::move(seq));
    }
    v.pseudo = Vocab::build(pseudo_corpus, options.min_freq_pseudo, Origin::kPseudo);
    v.pseudo.also_accept(Origin::kSummary);
    v.summary = v.pseudo;
    return v;
  }
  v.pseudo = Vocab::build(pseudo_corpus, options.min_freq_pseudo, Origin::kPseudo);
  v.summary = Vocab::build(summary_corpus, options.min_freq_summary, Origin::kSummary);
  return v;
}

ModelConfig with_vocab_sizes(ModelConfig cfg, const Vocabularies& vocabs) {
  cfg.asm_vocab_size = static_cast<int>(vocabs.asm_vocab.size());
  cfg.pseudo_vocab_size = static_cast<int>(vocabs.pseudo.size());
  cfg.summary_vocab_size = static_cast<int>(vocabs.summary.size());
  return cfg;
}

ModelInput prepare_input(const DisasmFunction& f, const TokenSeq& asm_tokens,
                         const Vocabularies& vocabs, const ModelConfig& cfg) {
  ModelInput in;
  in.asm_ids =
      encode(asm_tokens, vocabs.asm_vocab, static_cast<std::size_t>(cfg.max_asm_len), false);
  in.pseudo_ids = encode(function_pseudo_tokens(f), vocabs.pseudo,
                         static_cast<std::size_t>(cfg.max_pseudo_len), false);
  in.graph = make_graph_input(build_bicfg(f), vocabs.asm_vocab,
                              static_cast<std::size_t>(cfg.max_graph_nodes));
  return in;
}

PreparedSample prepare_sample(const DatasetSample& sample, const Vocabularies& vocabs,
                              const ModelConfig& cfg, const NormalizeOptions& options) {
  PreparedSample p;
  p.id = sample.id;
  p.split = sample.split;
  p.input = prepare_input(sample.function, sample_asm_tokens(sample, options), vocabs, cfg);
  const TokenSeq words = tokenize_summary(sample.summary);
  p.target = encode(words, vocabs.summary, static_cast<std::size_t>(cfg.max_summary_len) + 2, true);
  p.reference = words.tokens;
  return p;
}

std::vector<PreparedSample> prepare_samples(const std::vector<DatasetSample>& samples,
                                            const Vocabularies& vocabs, const ModelConfig& cfg,
                                            const NormalizeOptions& options) {
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(prepare_sample(s, vocabs, cfg, options));
  return out;
}

DatasetStats compute_stats(const std::vector<DatasetSample>& samples,
                           const NormalizeOptions& options) {
  if (samples.empty()) throw EmptyDatasetError("no samples to describe");
  DatasetStats st;
  st.functions = samples.size();
  double asm_tokens = 0, pseudo_tokens = 0, nodes = 0, edges = 0, fwd = 0, summary = 0;
  for (const auto& s : samples) {
    switch (s.split) {
      case Split::kTrain:
        ++st.train;
        break;
      case Split::kValid:
        ++st.valid;
        break;
      case Split::kTest:
        ++st.test;
        break;
    }
    asm_tokens += static_cast<double>(sample_asm_tokens(s, options).size());
    if (s.function.pseudo) {
      ++st.with_pseudo;
      pseudo_tokens += static_cast<double>(function_pseudo_tokens(s.function).size());
    }
    const BiCfg g = build_bicfg(s.function);
    nodes += static_cast<double>(g.nodes.size());
    edges += static_cast<double>(g.edges.size());
    fwd += static_cast<double>(g.forward_edge_count());
    summary += static_cast<double>(tokenize_summary(s.summary).size());
  }
  const double n = static_cast<double>(samples.size());
  st.avg_asm_tokens = asm_tokens / n;
  st.avg_pseudo_tokens = st.with_pseudo ? pseudo_tokens / static_cast<double>(st.with_pseudo) : 0.0;
  st.avg_nodes = nodes / n;
  st.avg_edges = edges / n;
  st.avg_forward_edges = fwd / n;
  st.avg_summary_tokens = summary / n;
  return st;
}

nlohmann::json DatasetStats::to_json() const {
  return {{"functions", functions},
          {"split", {{"train", train}, {"valid", valid}, {"test", test}}},
          {"with_pseudo", with_pseudo},
          {"assembly", {{"avg_tokens", avg_asm_tokens}}},
          {"pseudo", {{"avg_tokens", avg_pseudo_tokens}}},
          {"bicfg",
           {{"avg_nodes", avg_nodes},
            {"avg_edges", avg_edges},
            {"avg_forward_edges", avg_forward_edges}}},
          {"summary", {{"avg_tokens", avg_summary_tokens}}}};
}

std::string DatasetStats::to_text() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "functions          " << functions << " (train " << train << ", valid " << valid
     << ", test " << test << ")\n";
  os << "assembly tokens    " << avg_asm_tokens << "\n";
  os << "pseudo tokens      " << avg_pseudo_tokens << " (" << with_pseudo << " with pseudo code)\n";
  os << "bi-cfg nodes       " << avg_nodes << "\n";
  os << "bi-cfg edges       " << avg_edges << " (" << avg_forward_edges << " forward)\n";
  os << "summary tokens     " << avg_summary_tokens << "\n";
  return os.str();
}

Sentence ids_to_words(const std::vector<int>& ids, const Vocab& summary_vocab) {
  return decode(ids, summary_vocab).tokens;
}

}  // namespace bcs
