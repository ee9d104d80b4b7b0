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

#ifndef BCS_TOKENS_HPP_
#define BCS_TOKENS_HPP_

#include <string>
#include <string_view>
#include <vector>

namespace bcs {

enum class Origin { kAsm, kPseudo, kSummary };

std::string origin_name(Origin origin);
Origin parse_origin(std::string_view name);

struct TokenSeq {
  std::vector<std::string> tokens;
  Origin origin = Origin::kAsm;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  bool operator==(const TokenSeq&) const = default;
};

// Lowercases and splits on whitespace.
TokenSeq tokenize_summary(std::string_view summary);

}  // namespace bcs

#endif  // BCS_TOKENS_HPP_
