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

#ifndef BCS_OPTIM_HPP_
#define BCS_OPTIM_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include "bcs/error.hpp"
#include "bcs/tensor.hpp"

namespace bcs {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
  std::vector<Matrix<Scalar>> m;
  std::vector<Matrix<Scalar>> v;
  std::int64_t step = 0;
  std::int64_t skipped = 0;
};

// Global L2 norm of all parameter gradients.
template <typename Scalar>
double grad_norm(const std::vector<Tensor<Scalar>>& params) {
  double total = 0.0;
  for (const auto& p : params) total += static_cast<double>(p.grad().squaredNorm());
  return std::sqrt(total);
}

// Rescales gradients so their global norm is at most `max_norm`. Returns the
// norm before clipping.
template <typename Scalar>
double clip_grad_norm(std::vector<Tensor<Scalar>>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (std::isfinite(norm) && max_norm > 0.0 && norm > max_norm) {
    const Scalar factor = static_cast<Scalar>(max_norm / norm);
    for (auto& p : params) p.mutable_grad() *= factor;
  }
  return norm;
}

template <typename Scalar>
void zero_grads(std::vector<Tensor<Scalar>>& params) {
  for (auto& p : params) p.zero_grad();
}

// One Adam update with bias correction, reading each parameter's gradient
// buffer. Returns false, leaving parameters and moments untouched, when any
// gradient is non-finite.
template <typename Scalar>
bool adam_step(std::vector<Tensor<Scalar>>& params, AdamState<Scalar>& state,
               const AdamConfig& cfg) {
  for (const auto& p : params) {
    if (!p.grad().allFinite()) {
      ++state.skipped;
      warn("adam: non-finite gradient, step skipped");
      return false;
    }
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Matrix<Scalar>::Zero(p.rows(), p.cols()));
      state.v.push_back(Matrix<Scalar>::Zero(p.rows(), p.cols()));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam: state does not match parameters");
  ++state.step;
  const Scalar b1 = static_cast<Scalar>(cfg.beta1);
  const Scalar b2 = static_cast<Scalar>(cfg.beta2);
  const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(cfg.beta1, static_cast<double>(state.step)));
  const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(cfg.beta2, static_cast<double>(state.step)));
  const Scalar lr = static_cast<Scalar>(cfg.lr);
  const Scalar eps = static_cast<Scalar>(cfg.eps);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Matrix<Scalar>& g = params[k].grad();
    if (g.rows() != state.m[k].rows() || g.cols() != state.m[k].cols()) {
      throw ShapeError("adam: parameter " + std::to_string(k) + " changed shape");
    }
    state.m[k] = b1 * state.m[k] + (Scalar(1) - b1) * g;
    state.v[k] = b2 * state.v[k] + (Scalar(1) - b2) * g.cwiseProduct(g);
    auto m_hat = state.m[k].array() / c1;
    auto v_hat = state.v[k].array() / c2;
    params[k].mutable_value().array() -= lr * m_hat / (v_hat.sqrt() + eps);
  }
  return true;
}

}  // namespace bcs

#endif  // BCS_OPTIM_HPP_
