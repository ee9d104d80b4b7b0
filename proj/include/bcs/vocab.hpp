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

#ifndef BCS_VOCAB_HPP_
#define BCS_VOCAB_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "bcs/tokens.hpp"

namespace bcs {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kBosId = 2;
inline constexpr int kEosId = 3;
inline constexpr int kNumSpecials = 4;

// Token <-> id mapping for one stream. Specials occupy ids 0..3; the rest
// are ordered by descending frequency, ties broken lexicographically.
class Vocab {
 public:
  Vocab() = default;

  // Throws Error on an empty corpus.
  static Vocab build(const std::vector<TokenSeq>& corpus, int min_freq, Origin origin);
  static Vocab build(const std::vector<TokenSeq>& corpus, int min_freq) {
    return build(corpus, min_freq, corpus.empty() ? Origin::kAsm : corpus.front().origin);
  }

  Origin origin() const { return origin_; }
  int min_freq() const { return min_freq_; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  int id_of(const std::string& token) const;  // UNK if absent
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  const std::string& token_of(int id) const;

  // Allows sequences of `other` origin to be encoded with this vocabulary
  // (shared pseudo/summary vocabulary).
  void also_accept(Origin other) { shared_with_ = static_cast<int>(other); }
  bool accepts(Origin o) const { return o == origin_ || shared_with_ == static_cast<int>(o); }

  // Stable 64-bit FNV-1a digest of origin and token list, hex encoded.
  std::string hash() const;

  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

 private:
  void reindex();

  Origin origin_ = Origin::kAsm;
  int min_freq_ = 1;
  int shared_with_ = -1;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Unknown tokens map to UNK. With `add_bos_eos` the ids are wrapped in
// BOS/EOS before truncation to `max_len`. Never pads. Throws Error when the
// vocabulary does not accept the sequence's origin.
std::vector<int> encode(const TokenSeq& seq, const Vocab& vocab, std::size_t max_len,
                        bool add_bos_eos);

// Inverse of encode; specials are dropped.
TokenSeq decode(const std::vector<int>& ids, const Vocab& vocab);

std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace bcs

#endif  // BCS_VOCAB_HPP_
