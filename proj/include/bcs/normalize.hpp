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

#ifndef BCS_NORMALIZE_HPP_
#define BCS_NORMALIZE_HPP_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "bcs/arch.hpp"
#include "bcs/listing.hpp"
#include "bcs/tokens.hpp"

namespace bcs {

inline constexpr std::string_view kPositive = "<Positive>";
inline constexpr std::string_view kNegative = "<Negative>";
inline constexpr std::string_view kZero = "<Zero>";
inline constexpr std::string_view kICall = "<ICall>";
inline constexpr std::string_view kJumpAddress = "<JumpAddress>";
inline constexpr std::string_view kStrMarker = "<STR>";

struct NormalizeOptions {
  // Split each string feature on non-alphanumeric characters.
  bool split_strings = true;
};

struct NormalizeStats {
  // Operand fragments emitted verbatim because no rule recognised them.
  std::size_t unparsed = 0;
};

// True for `<...>` placeholders produced by normalization.
bool is_placeholder(std::string_view token);
// True for the structural punctuation tokens memory operands split into.
bool is_structural(std::string_view token);
// Sign placeholder for an integer literal.
std::string_view sign_placeholder(long double value);

// Operand-level part of the OOV rules for a single instruction: mnemonic
// first, then its operands in order.
std::vector<std::string> normalize_instruction(const Instruction& ins, const DisasmFunction& f,
                                               const ArchProfile& profile,
                                               NormalizeStats* stats = nullptr);

// Full token stream for a function: every instruction, then `<STR>` and the
// string features when the function has any.
TokenSeq normalize_function(const DisasmFunction& f, const ArchProfile& profile,
                            const NormalizeOptions& options = {}, NormalizeStats* stats = nullptr);

// Splits one string feature into tokens per `options`.
std::vector<std::string> string_feature_tokens(std::string_view feature,
                                               const NormalizeOptions& options = {});

// True iff the call resolves to a function inside the binary: either the
// callee is a `sub_<hex>` placeholder, or the numeric target falls inside
// the declared text range (any resolved numeric target counts when no range
// is declared).
bool is_internal_call(const Instruction& ins, const DisasmFunction& f);

}  // namespace bcs

#endif  // BCS_NORMALIZE_HPP_
