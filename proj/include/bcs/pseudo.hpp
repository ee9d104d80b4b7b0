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

#ifndef BCS_PSEUDO_HPP_
#define BCS_PSEUDO_HPP_

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bcs/tokens.hpp"

namespace bcs {

// Lexical classes of pseudo-code tokens. The lexer never produces anything
// outside these.
enum class PseudoTokenClass { kIdentifier, kKeyword, kNumber, kString, kChar, kPunct, kOther };

// Identifiers, keywords, numbers, string/char literals and C operators
// (maximal munch, so `!=` and `--` are single tokens). Comments are dropped.
// Whitespace inside string literals is replaced by `_` to keep tokens
// whitespace-free. Total: unknown bytes become single-character tokens.
TokenSeq tokenize_pseudo(std::string_view text);

PseudoTokenClass classify_pseudo_token(std::string_view token);

enum class RefinerMode { kPassthrough, kMappingFile, kRemote };

RefinerMode parse_refiner_mode(std::string_view text);

struct RefinerSpec {
  RefinerMode mode = RefinerMode::kPassthrough;
  std::optional<std::filesystem::path> mapping_path;
  std::optional<std::string> endpoint;
  std::chrono::milliseconds timeout{10000};
  std::size_t max_connections = 4;
};

// Throws ConfigError when the mode's required field is missing.
void validate_refiner_spec(const RefinerSpec& spec);

// Reads `placeholder<TAB>name` lines. Blank lines and `#` comments are
// ignored. Throws ConfigError on unreadable files or malformed lines.
std::map<std::string, std::string, std::less<>> load_name_mapping(
    const std::filesystem::path& path);

// Replaces whole identifiers found in `mapping`; string literals and
// comments are left alone.
std::string apply_name_mapping(std::string_view text,
                               const std::map<std::string, std::string, std::less<>>& mapping);

// Restores names in pseudo code. Remote failures never propagate: the input
// is returned unchanged and the warning counter is bumped.
class Refiner {
 public:
  explicit Refiner(RefinerSpec spec);

  std::string refine(std::string_view text) const;
  // Refines many texts, issuing up to spec.max_connections remote requests
  // at a time. Output i always corresponds to input i.
  std::vector<std::string> refine_all(const std::vector<std::string>& texts) const;

  const RefinerSpec& spec() const { return spec_; }
  std::size_t warnings() const { return warnings_.load(); }

 private:
  std::string refine_remote(std::string_view text) const;

  RefinerSpec spec_;
  std::map<std::string, std::string, std::less<>> mapping_;
  mutable std::atomic<std::size_t> warnings_{0};
};

std::string refine(std::string_view text, const RefinerSpec& spec);

}  // namespace bcs

#endif  // BCS_PSEUDO_HPP_
