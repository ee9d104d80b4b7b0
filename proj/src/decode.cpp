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

#include "bcs/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bcs/error.hpp"

namespace bcs {

std::vector<int> Hypothesis::content(int eos) const {
  std::vector<int> out = tokens;
  if (finished && !out.empty() && out.back() == eos) out.pop_back();
  return out;
}

double length_normalized(double log_prob, std::size_t length, double alpha) {
  if (alpha == 0.0 || length == 0) return log_prob;
  return log_prob / std::pow(static_cast<double>(length), alpha);
}

Hypothesis greedy_decode(const StepFunction& step, const DecodeOptions& options) {
  Hypothesis h;
  std::vector<int> prefix = {options.bos};
  for (std::size_t t = 0; t < options.max_len; ++t) {
    const std::vector<double> lp = step(prefix);
    if (lp.empty()) throw Error("greedy_decode: empty distribution");
    std::size_t best = 0;
    for (std::size_t v = 1; v < lp.size(); ++v) {
      if (lp[v] > lp[best]) best = v;
    }
    h.log_prob += lp[best];
    h.tokens.push_back(static_cast<int>(best));
    if (static_cast<int>(best) == options.eos) {
      h.finished = true;
      break;
    }
    prefix.push_back(static_cast<int>(best));
  }
  return h;
}

namespace {

struct Candidate {
  double score;
  std::size_t beam;
  int token;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.beam != b.beam) return a.beam < b.beam;
  return a.token < b.token;
}

}  // namespace

Hypothesis beam_decode(const StepFunction& step, const DecodeOptions& options) {
  if (options.beam_width == 0) throw ConfigError("beam width must be at least 1");
  const std::size_t width = options.beam_width;
  const double alpha = options.length_alpha;
  std::vector<Hypothesis> live(1);
  std::vector<Hypothesis> finished;

  auto normalized = [alpha](const Hypothesis& h) {
    return length_normalized(h.log_prob, h.tokens.size(), alpha);
  };

  for (std::size_t t = 0; t < options.max_len && !live.empty(); ++t) {
    std::vector<Candidate> candidates;
    for (std::size_t b = 0; b < live.size(); ++b) {
      std::vector<int> prefix = {options.bos};
      prefix.insert(prefix.end(), live[b].tokens.begin(), live[b].tokens.end());
      const std::vector<double> lp = step(prefix);
      for (std::size_t v = 0; v < lp.size(); ++v) {
        candidates.push_back({live[b].log_prob + lp[v], b, static_cast<int>(v)});
      }
    }
    const std::size_t keep = std::min(width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), better);
    std::vector<Hypothesis> next;
    for (std::size_t k = 0; k < keep; ++k) {
      Hypothesis h = live[candidates[k].beam];
      h.tokens.push_back(candidates[k].token);
      h.log_prob = candidates[k].score;
      if (candidates[k].token == options.eos) {
        h.finished = true;
        finished.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
    if (finished.empty() || live.empty()) continue;
    if (alpha == 0.0) {
      double best_finished = -std::numeric_limits<double>::infinity();
      for (const auto& h : finished) best_finished = std::max(best_finished, h.log_prob);
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& h : live) best_live = std::max(best_live, h.log_prob);
      // Log-probabilities only decrease, so no live hypothesis can win.
      if (best_finished >= best_live) break;
    } else if (finished.size() >= width) {
      break;
    }
  }

  // Pruning can drop the greedy path; keep it as a fallback so the result never
  // scores below greedy under the same ranking.
  if (width > 1) {
    Hypothesis g = greedy_decode(step, options);
    (g.finished ? finished : live).push_back(std::move(g));
  }
  const std::vector<Hypothesis>& pool = finished.empty() ? live : finished;
  if (pool.empty()) return Hypothesis{};
  std::size_t best = 0;
  for (std::size_t k = 1; k < pool.size(); ++k) {
    if (normalized(pool[k]) > normalized(pool[best])) best = k;
  }
  return pool[best];
}

}  // namespace bcs
