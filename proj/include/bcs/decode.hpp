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

#ifndef BCS_DECODE_HPP_
#define BCS_DECODE_HPP_

#include <cstddef>
#include <functional>
#include <vector>

#include "bcs/model.hpp"
#include "bcs/vocab.hpp"

namespace bcs {

// Next-token log-probabilities given the prefix generated so far (which
// starts with BOS).
using StepFunction = std::function<std::vector<double>(const std::vector<int>& prefix)>;

struct DecodeOptions {
  std::size_t max_len = 30;  // generated tokens, EOS included
  std::size_t beam_width = 4;
  // Finished hypotheses compete on log_prob / length^alpha; 0 disables.
  double length_alpha = 0.7;
  int bos = kBosId;
  int eos = kEosId;
};

struct Hypothesis {
  std::vector<int> tokens;  // generated tokens; ends with EOS when finished
  double log_prob = 0.0;
  bool finished = false;

  // Tokens without the trailing EOS.
  std::vector<int> content(int eos = kEosId) const;
};

double length_normalized(double log_prob, std::size_t length, double alpha);

// Argmax at every step, ties to the lowest id.
Hypothesis greedy_decode(const StepFunction& step, const DecodeOptions& options);

// Beam search over summed log-probabilities. Candidates are ranked by
// score, then beam index, then token id, so width 1 reproduces greedy.
// With alpha > 0 the search stops once `width` hypotheses have finished;
// with alpha = 0 it stops once no live hypothesis can beat the best
// finished one.
Hypothesis beam_decode(const StepFunction& step, const DecodeOptions& options);

template <typename Scalar>
StepFunction model_step_function(const Model<Scalar>& model, const EncoderMemory<Scalar>& memory) {
  return [&model, &memory](const std::vector<int>& prefix) {
    return model.next_log_probs(memory, prefix);
  };
}

// Encodes `input` once and decodes it greedily (beam_width ignored) or with
// beam search.
template <typename Scalar>
Hypothesis decode_input(const Model<Scalar>& model, const ModelInput& input,
                        const DecodeOptions& options, bool beam) {
  const EncoderMemory<Scalar> memory = model.encode(input);
  const StepFunction step = model_step_function(model, memory);
  return beam ? beam_decode(step, options) : greedy_decode(step, options);
}

}  // namespace bcs

#endif  // BCS_DECODE_HPP_
