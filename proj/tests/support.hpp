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

#ifndef BCS_TESTS_SUPPORT_HPP_
#define BCS_TESTS_SUPPORT_HPP_

// Shared fixtures for the unit tests and the acceptance suite.

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bcs/features.hpp"
#include "bcs/listing.hpp"
#include "bcs/model.hpp"
#include "bcs/rng.hpp"
#include "bcs/train.hpp"

namespace bcs::testing {

// Directory holding the bundled test data.
std::filesystem::path data_dir();

// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

// Random but well-formed function: conditional and unconditional jumps to
// in-function addresses, calls, returns, an occasional indirect jump.
DisasmFunction random_function(Rng& rng, Arch arch, std::size_t n_instructions);

// Synthetic model-ready sample: random assembly and pseudo ids, a graph of
// at most `max_nodes` nodes with mirrored edges, a summary of 1..max_summary
// tokens. Ids are drawn from the non-special range of `cfg`'s vocabularies.
PreparedSample toy_sample(Rng& rng, const ModelConfig& cfg, std::size_t max_len,
                          std::size_t max_nodes, std::size_t max_summary);
std::vector<PreparedSample> toy_corpus(std::size_t n, std::uint64_t seed, const ModelConfig& cfg,
                                       std::size_t max_len = 6, std::size_t max_nodes = 5,
                                       std::size_t max_summary = 8);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

// Central finite differences over every entry of every parameter, compared
// with the tape gradient. Relative error is |a - n| / max(|a|, |n|, floor).
// The floor keeps structurally zero gradients (attention key biases) from
// reporting pure round-off: one ulp of the loss over 2h is ~1e-10.
GradCheckResult check_gradients(std::vector<Tensor<double>>& leaves,
                                const std::vector<std::string>& names,
                                const std::function<Tensor<double>()>& loss, double h = 1e-5,
                                double floor = 1e-5);
GradCheckResult check_gradients(Model<double>& model, const std::function<Tensor<double>()>& loss,
                                double h = 1e-5, double floor = 1e-5);

// Overfit run on toy data used by the acceptance suite and the slow tests.
struct OverfitOutcome {
  double best_loss = 1e9;
  int epoch_reached = -1;  // first epoch with loss < threshold, -1 if never
  double exact_fraction = 0.0;
  int epochs = 0;
  double seconds = 0.0;
};
OverfitOutcome run_overfit(const ModelConfig& cfg, std::uint64_t seed, int max_epochs,
                           double loss_threshold);

// In-process HTTP refiner stub on 127.0.0.1. POST /upper answers with the
// uppercased body, /fail with HTTP 500, /slow after `slow_ms`.
class StubRefinerServer {
 public:
  explicit StubRefinerServer(int slow_ms = 1500);
  ~StubRefinerServer();
  StubRefinerServer(const StubRefinerServer&) = delete;
  StubRefinerServer& operator=(const StubRefinerServer&) = delete;
  std::string url(const std::string& path) const;
  std::size_t requests() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Training settings used by run_overfit.
TrainConfig overfit_train_config(std::uint64_t seed, int max_epochs);

}  // namespace bcs::testing

#endif  // BCS_TESTS_SUPPORT_HPP_
