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

#ifndef BCS_METRICS_HPP_
#define BCS_METRICS_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

namespace bcs {

using Sentence = std::vector<std::string>;

struct BleuOptions {
  // +1 on numerator and denominator of the n >= 2 precisions.
  bool smooth = true;
  int max_n = 4;
};

// Corpus BLEU in [0, 100]: clipped n-gram counts pooled over all pairs,
// brevity penalty from total lengths. Throws ValidationError when the lists
// differ in length.
double corpus_bleu(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references,
                   const BleuOptions& options = {});
double sentence_bleu(const Sentence& candidate, const Sentence& reference,
                     const BleuOptions& options = {});

std::size_t lcs_length(const Sentence& a, const Sentence& b);
// LCS F-measure of one pair in [0, 1].
double rouge_l_pair(const Sentence& candidate, const Sentence& reference, double beta = 1.2);
// Mean pair score x 100.
double rouge_l(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references);

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  // False when the search budget ran out and a greedy alignment was used.
  bool exact = true;
};

// Maximum exact-match unigram alignment with the fewest chunks.
MeteorAlignment meteor_align(const Sentence& candidate, const Sentence& reference);
// Exact-match METEOR of one pair in [0, 1].
double meteor_pair(const Sentence& candidate, const Sentence& reference);
double meteor(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references);

struct MetricReport {
  double bleu = 0.0;
  double rouge_l = 0.0;
  double meteor = 0.0;
  std::size_t n = 0;
};

MetricReport compute_metrics(const std::vector<Sentence>& candidates,
                             const std::vector<Sentence>& references,
                             const BleuOptions& bleu_options = {});
nlohmann::json report_to_json(const MetricReport& report);

// Describes the metric variants; written into every report.
std::string metric_notes();

}  // namespace bcs

#endif  // BCS_METRICS_HPP_
