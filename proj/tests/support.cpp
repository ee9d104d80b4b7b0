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

#include "support.hpp"

#include <chrono>
#include <cmath>
#include <set>
#include <thread>

#include "bcs/decode.hpp"
#include "bcs/error.hpp"
#include "httplib.h"
#include "json.hpp"

#ifndef BCS_TEST_DATA_DIR
#error "BCS_TEST_DATA_DIR must be defined"
#endif

namespace bcs::testing {

namespace fs = std::filesystem;

fs::path data_dir() { return fs::path(BCS_TEST_DATA_DIR); }

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("bcs_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

DisasmFunction random_function(Rng& rng, Arch arch, std::size_t n) {
  const std::uint64_t base = 0x401000 + 0x1000 * uniform_below(rng, 64);
  const std::uint64_t step = 4;
  auto addr = [&](std::size_t i) { return base + step * i; };
  const bool arm = arch == Arch::kArm;
  nlohmann::json ins = nlohmann::json::array();
  for (std::size_t i = 0; i < n; ++i) {
    nlohmann::json j = {{"addr", format_hex(addr(i))}};
    const std::uint64_t r = uniform_below(rng, 100);
    const std::string target = format_hex(addr(uniform_below(rng, n)));
    if (r < 12) {
      j["mnemonic"] = arm ? "beq" : "jz";
      j["operands"] = {target};
    } else if (r < 20) {
      j["mnemonic"] = arm ? "b" : "jmp";
      j["operands"] = {target};
    } else if (r < 25) {
      j["mnemonic"] = arm ? "bl" : "call";
      j["operands"] = {"sub_" + std::to_string(500000 + uniform_below(rng, 1000))};
    } else if (r < 29) {
      if (arm) {
        j["mnemonic"] = "bx";
        j["operands"] = {"lr"};
      } else {
        j["mnemonic"] = "retn";
      }
    } else if (r < 31) {
      j["mnemonic"] = arm ? "bx" : "jmp";
      j["operands"] = {arm ? "r3" : "rax"};
    } else if (r < 65) {
      j["mnemonic"] = "mov";
      j["operands"] = arm ? nlohmann::json{"r0", "#" + std::to_string(uniform_below(rng, 300))}
                          : nlohmann::json{"eax", std::to_string(uniform_below(rng, 300))};
    } else {
      j["mnemonic"] = arm ? "add" : "add";
      j["operands"] = arm ? nlohmann::json{"r1", "r1", "#-8"} : nlohmann::json{"rsp", "-8"};
    }
    ins.push_back(j);
  }
  const nlohmann::json record = {{"name", "sub_" + std::to_string(base)},
                                 {"start_addr", format_hex(base)},
                                 {"end_addr", format_hex(addr(n))},
                                 {"arch", arch_name(arch)},
                                 {"instructions", ins}};
  return function_from_json(record);
}

namespace {

std::vector<int> random_ids(Rng& rng, std::size_t len, int vocab) {
  std::vector<int> ids(len);
  for (auto& id : ids)
    id = kNumSpecials + static_cast<int>(uniform_below(rng, vocab - kNumSpecials));
  return ids;
}

}  // namespace

PreparedSample toy_sample(Rng& rng, const ModelConfig& cfg, std::size_t max_len,
                          std::size_t max_nodes, std::size_t max_summary) {
  PreparedSample s;
  s.input.asm_ids = random_ids(rng, 2 + uniform_below(rng, max_len - 1), cfg.asm_vocab_size);
  s.input.pseudo_ids = random_ids(rng, 1 + uniform_below(rng, max_len), cfg.pseudo_vocab_size);
  const std::size_t q = 1 + uniform_below(rng, max_nodes);
  for (std::size_t i = 0; i < q; ++i) {
    s.input.graph.node_tokens.push_back(
        random_ids(rng, 1 + uniform_below(rng, 3), cfg.asm_vocab_size));
  }
  auto add = [&](int a, int b, EdgeType t) {
    s.input.graph.edges.push_back({a, b, edge_kind_index(t, Direction::kFwd)});
    s.input.graph.edges.push_back({b, a, edge_kind_index(t, Direction::kBwd)});
  };
  for (std::size_t i = 0; i + 1 < q; ++i)
    add(static_cast<int>(i), static_cast<int>(i + 1), EdgeType::kSeq);
  if (q > 2) add(0, static_cast<int>(q - 1), EdgeType::kJump);
  const auto summary = random_ids(rng, 1 + uniform_below(rng, max_summary), cfg.summary_vocab_size);
  s.target.push_back(kBosId);
  s.target.insert(s.target.end(), summary.begin(), summary.end());
  s.target.push_back(kEosId);
  for (int id : summary) s.reference.push_back("#" + std::to_string(id));
  return s;
}

std::vector<PreparedSample> toy_corpus(std::size_t n, std::uint64_t seed, const ModelConfig& cfg,
                                       std::size_t max_len, std::size_t max_nodes,
                                       std::size_t max_summary) {
  Rng rng(seed);
  std::vector<PreparedSample> out;
  std::set<std::vector<int>> seen;
  while (out.size() < n) {
    PreparedSample s = toy_sample(rng, cfg, max_len, max_nodes, max_summary);
    if (!seen.insert(s.input.asm_ids).second) continue;
    s.id = "toy-" + std::to_string(out.size());
    out.push_back(std::move(s));
  }
  return out;
}

GradCheckResult check_gradients(std::vector<Tensor<double>>& params,
                                const std::vector<std::string>& names,
                                const std::function<Tensor<double>()>& loss, double h,
                                double floor) {
  for (auto& p : params) p.zero_grad();
  {
    Tape<double> tape;
    TapeScope<double> scope(tape);
    tape.backward(loss());
  }
  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix<double>& v = params[k].mutable_value();
    const Matrix<double> analytic = params[k].grad();
    for (Index i = 0; i < v.size(); ++i) {
      const double saved = v.data()[i];
      v.data()[i] = saved + h;
      const double up = loss().item();
      v.data()[i] = saved - h;
      const double down = loss().item();
      v.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic.data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++result.checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_parameter = names[k] + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

GradCheckResult check_gradients(Model<double>& model, const std::function<Tensor<double>()>& loss,
                                double h, double floor) {
  return check_gradients(model.parameters(), model.parameter_names(), loss, h, floor);
}

TrainConfig overfit_train_config(std::uint64_t seed, int max_epochs) {
  TrainConfig tc;
  tc.batch_size = 4;
  tc.lr = 1e-2;
  tc.max_epochs = max_epochs;
  tc.patience = max_epochs;
  tc.seed = seed;
  tc.clip_norm = 5.0;
  tc.eval_threads = 1;
  return tc;
}

OverfitOutcome run_overfit(const ModelConfig& cfg, std::uint64_t seed, int max_epochs,
                           double loss_threshold) {
  const auto start = std::chrono::steady_clock::now();
  const auto corpus = toy_corpus(32, seed, cfg);
  Model<float> model(cfg, seed);
  OverfitOutcome out;
  TrainHooks hooks;
  hooks.stop_after = [&](const EpochLog& e) {
    out.best_loss = std::min(out.best_loss, e.train_loss);
    if (out.epoch_reached < 0 && e.train_loss < loss_threshold) out.epoch_reached = e.epoch;
    // Stop once the loss target is met and every summary is reproduced.
    return out.epoch_reached >= 0 && e.valid_bleu >= 100.0 - 1e-9;
  };
  const TrainResult r =
      train_model(model, corpus, corpus, overfit_train_config(seed, max_epochs), hooks);
  out.epochs = static_cast<int>(r.history.size());
  DecodeOptions greedy;
  greedy.max_len = static_cast<std::size_t>(cfg.max_summary_len) + 1;
  greedy.beam_width = 1;
  std::size_t exact = 0;
  for (const auto& s : corpus) {
    const Hypothesis h = decode_input(model, s.input, greedy, false);
    const std::vector<int> want(s.target.begin() + 1, s.target.end() - 1);
    exact += h.finished && h.content() == want;
  }
  out.exact_fraction = static_cast<double>(exact) / static_cast<double>(corpus.size());
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

struct StubRefinerServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<std::size_t> requests{0};
};

StubRefinerServer::StubRefinerServer(int slow_ms) : impl_(std::make_unique<Impl>()) {
  auto& s = impl_->server;
  s.Post("/upper", [this](const httplib::Request& req, httplib::Response& res) {
    ++impl_->requests;
    std::string body = req.body;
    for (char& c : body) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    res.set_content(body, "text/plain");
  });
  s.Post("/fail", [this](const httplib::Request&, httplib::Response& res) {
    ++impl_->requests;
    res.status = 500;
    res.set_content("boom", "text/plain");
  });
  s.Post("/slow", [this, slow_ms](const httplib::Request& req, httplib::Response& res) {
    ++impl_->requests;
    std::this_thread::sleep_for(std::chrono::milliseconds(slow_ms));
    res.set_content(req.body + " (late)", "text/plain");
  });
  impl_->port = s.bind_to_any_port("127.0.0.1");
  if (impl_->port <= 0) throw Error("stub server could not bind");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  s.wait_until_ready();
}

StubRefinerServer::~StubRefinerServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string StubRefinerServer::url(const std::string& path) const {
  return "http://127.0.0.1:" + std::to_string(impl_->port) + path;
}

std::size_t StubRefinerServer::requests() const { return impl_->requests.load(); }

}  // namespace bcs::testing
