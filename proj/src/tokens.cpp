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

#include "bcs/tokens.hpp"

#include <sstream>

#include "bcs/arch.hpp"
#include "bcs/error.hpp"

namespace bcs {

std::string origin_name(Origin origin) {
  switch (origin) {
    case Origin::kAsm:
      return "ASM";
    case Origin::kPseudo:
      return "PSEUDO";
    case Origin::kSummary:
      return "SUMMARY";
  }
  return "?";
}

Origin parse_origin(std::string_view name) {
  const std::string lower = to_lower(name);
  if (lower == "asm") return Origin::kAsm;
  if (lower == "pseudo") return Origin::kPseudo;
  if (lower == "summary") return Origin::kSummary;
  throw ConfigError("unknown token origin '" + std::string(name) + "'");
}

TokenSeq tokenize_summary(std::string_view summary) {
  TokenSeq seq;
  seq.origin = Origin::kSummary;
  std::istringstream in{std::string(to_lower(summary))};
  std::string word;
  while (in >> word) seq.tokens.push_back(word);
  return seq;
}

}  // namespace bcs
