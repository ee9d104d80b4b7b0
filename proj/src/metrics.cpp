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

#include "bcs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <unordered_map>

#include "bcs/error.hpp"

namespace bcs {

namespace {

void check_lengths(const std::vector<Sentence>& c, const std::vector<Sentence>& r,
                   const char* metric) {
  if (c.size() != r.size()) {
    throw ValidationError(std::string(metric) + ": " + std::to_string(c.size()) +
                          " candidates but " + std::to_string(r.size()) + " references");
  }
}

std::map<Sentence, std::size_t> ngram_counts(const Sentence& s, std::size_t n) {
  std::map<Sentence, std::size_t> counts;
  if (s.size() < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    ++counts[Sentence(s.begin() + static_cast<std::ptrdiff_t>(i),
                      s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

double corpus_bleu(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references,
                   const BleuOptions& options) {
  check_lengths(candidates, references, "bleu");
  const std::size_t max_n = static_cast<std::size_t>(std::max(options.max_n, 1));
  std::vector<double> matched(max_n, 0.0), total(max_n, 0.0);
  double cand_len = 0.0, ref_len = 0.0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    cand_len += static_cast<double>(candidates[k].size());
    ref_len += static_cast<double>(references[k].size());
    for (std::size_t n = 1; n <= max_n; ++n) {
      const auto cand = ngram_counts(candidates[k], n);
      const auto ref = ngram_counts(references[k], n);
      for (const auto& [gram, count] : cand) {
        const auto it = ref.find(gram);
        if (it != ref.end()) matched[n - 1] += static_cast<double>(std::min(count, it->second));
        total[n - 1] += static_cast<double>(count);
      }
    }
  }
  if (cand_len == 0.0 || matched[0] == 0.0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    double m = matched[n - 1], t = total[n - 1];
    if (n >= 2 && options.smooth) {
      m += 1.0;
      t += 1.0;
    }
    if (m == 0.0 || t == 0.0) return 0.0;
    log_sum += std::log(m / t);
  }
  const double bp = cand_len <= ref_len ? std::exp(1.0 - ref_len / cand_len) : 1.0;
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(max_n));
}

double sentence_bleu(const Sentence& candidate, const Sentence& reference,
                     const BleuOptions& options) {
  return corpus_bleu({candidate}, {reference}, options);
}

std::size_t lcs_length(const Sentence& a, const Sentence& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_pair(const Sentence& candidate, const Sentence& reference, double beta) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  const double b2 = beta * beta;
  return (1.0 + b2) * p * r / (r + b2 * p);
}

double rouge_l(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references) {
  check_lengths(candidates, references, "rouge_l");
  if (candidates.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < candidates.size(); ++k)
    total += rouge_l_pair(candidates[k], references[k]);
  return 100.0 * total / static_cast<double>(candidates.size());
}

namespace {

// Exhaustive search over alignments that reach the maximum match count,
// memoised on (candidate position, reference position matched by the
// previous candidate token, used reference positions).
class ChunkSearch {
 public:
  ChunkSearch(const Sentence& c, const Sentence& r, std::size_t budget)
      : c_(c), r_(r), budget_(budget) {
    std::unordered_map<std::string, std::size_t> cc, rc;
    for (const auto& w : c) ++cc[w];
    for (const auto& w : r) ++rc[w];
    for (const auto& [w, n] : cc) {
      const auto it = rc.find(w);
      const std::size_t k = it == rc.end() ? 0 : std::min(n, it->second);
      need_[w] = k;
      skips_allowed_[w] = n - k;
      matches_ += k;
    }
  }

  std::size_t matches() const { return matches_; }

  // Minimum chunk count, or nullopt when the state budget is exhausted.
  std::optional<std::size_t> run() {
    if (r_.size() > 63) return std::nullopt;
    const std::size_t best = search(0, -1, 0);
    if (exhausted_) return std::nullopt;
    return best;
  }

 private:
  static constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max() / 2;

  std::size_t search(std::size_t i, int prev, std::uint64_t used) {
    if (i == c_.size()) return 0;
    if (exhausted_) return kInf;
    const std::uint64_t key_hi =
        (static_cast<std::uint64_t>(i) << 8) | static_cast<std::uint64_t>(prev + 1);
    const auto key = std::make_pair(key_hi, used);
    if (const auto it = memo_.find(key); it != memo_.end()) return it->second;
    if (memo_.size() >= budget_) {
      exhausted_ = true;
      return kInf;
    }
    const std::string& w = c_[i];
    std::size_t best = kInf;
    // Skipping is allowed while enough candidates of w remain unskipped.
    std::size_t skipped_so_far = 0, seen = 0, matched = 0;
    for (std::size_t k = 0; k < i; ++k) seen += c_[k] == w;
    for (std::size_t j = 0; j < r_.size(); ++j) matched += ((used >> j) & 1U) && r_[j] == w;
    skipped_so_far = seen - matched;
    if (skipped_so_far < skips_allowed_[w]) best = std::min(best, search(i + 1, -1, used));
    if (matched < need_[w]) {
      for (std::size_t j = 0; j < r_.size(); ++j) {
        if (r_[j] != w || ((used >> j) & 1U)) continue;
        const bool extends = prev >= 0 && static_cast<std::size_t>(prev) + 1 == j;
        const std::size_t sub = search(i + 1, static_cast<int>(j), used | (std::uint64_t{1} << j));
        if (sub < kInf) best = std::min(best, sub + (extends ? 0 : 1));
      }
    }
    memo_.emplace(key, best);
    return best;
  }

  struct PairHash {
    std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& k) const {
      return std::hash<std::uint64_t>()(k.first * 0x9E3779B97F4A7C15ULL ^ k.second);
    }
  };

  const Sentence& c_;
  const Sentence& r_;
  std::size_t budget_;
  std::size_t matches_ = 0;
  bool exhausted_ = false;
  std::unordered_map<std::string, std::size_t> need_, skips_allowed_;
  std::unordered_map<std::pair<std::uint64_t, std::uint64_t>, std::size_t, PairHash> memo_;
};

// Left-to-right fallback: prefer the reference position that continues the
// current chunk, else the earliest unused one.
std::size_t greedy_chunks(const Sentence& c, const Sentence& r) {
  std::vector<bool> used(r.size(), false);
  std::size_t chunks = 0;
  int prev = -1;
  for (const auto& w : c) {
    int pick = -1;
    if (prev >= 0 && static_cast<std::size_t>(prev + 1) < r.size() && !used[prev + 1] &&
        r[prev + 1] == w) {
      pick = prev + 1;
    } else {
      for (std::size_t j = 0; j < r.size(); ++j) {
        if (!used[j] && r[j] == w) {
          pick = static_cast<int>(j);
          break;
        }
      }
    }
    if (pick < 0) {
      prev = -1;
      continue;
    }
    if (!(prev >= 0 && pick == prev + 1)) ++chunks;
    used[pick] = true;
    prev = pick;
  }
  return chunks;
}

}  // namespace

MeteorAlignment meteor_align(const Sentence& candidate, const Sentence& reference) {
  ChunkSearch search(candidate, reference, 2'000'000);
  MeteorAlignment out;
  out.matches = search.matches();
  if (out.matches == 0) return out;
  if (const auto chunks = search.run()) {
    out.chunks = *chunks;
  } else {
    out.chunks = greedy_chunks(candidate, reference);
    out.exact = false;
  }
  return out;
}

double meteor_pair(const Sentence& candidate, const Sentence& reference) {
  const MeteorAlignment a = meteor_align(candidate, reference);
  if (a.matches == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(candidate.size());
  const double r = m / static_cast<double>(reference.size());
  const double fmean = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(a.chunks) / m;
  const double penalty = 0.5 * frag * frag * frag;
  return fmean * (1.0 - penalty);
}

double meteor(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references) {
  check_lengths(candidates, references, "meteor");
  if (candidates.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < candidates.size(); ++k)
    total += meteor_pair(candidates[k], references[k]);
  return 100.0 * total / static_cast<double>(candidates.size());
}

MetricReport compute_metrics(const std::vector<Sentence>& candidates,
                             const std::vector<Sentence>& references,
                             const BleuOptions& bleu_options) {
  MetricReport report;
  report.bleu = corpus_bleu(candidates, references, bleu_options);
  report.rouge_l = rouge_l(candidates, references);
  report.meteor = meteor(candidates, references);
  report.n = candidates.size();
  return report;
}

nlohmann::json report_to_json(const MetricReport& report) {
  return {{"bleu", report.bleu},
          {"rouge_l", report.rouge_l},
          {"meteor", report.meteor},
          {"n", report.n},
          {"notes", metric_notes()}};
}

std::string metric_notes() {
  return "BLEU-4 corpus-level with +1 smoothing for n>=2; ROUGE-L F-measure (beta=1.2) "
         "averaged over pairs; METEOR exact-match only (no stemming or synonyms), "
         "averaged over pairs";
}

}  // namespace bcs
