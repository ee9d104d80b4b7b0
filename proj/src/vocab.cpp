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

#include "bcs/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "bcs/error.hpp"
#include "json.hpp"

namespace bcs {

using nlohmann::json;

namespace {
const char* const kSpecialTokens[kNumSpecials] = {"<pad>", "<unk>", "<s>", "</s>"};
}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

Vocab Vocab::build(const std::vector<TokenSeq>& corpus, int min_freq, Origin origin) {
  if (corpus.empty()) throw Error("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const TokenSeq& seq : corpus) {
    for (const std::string& t : seq.tokens) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> entries;
  for (auto& [token, count] : counts) {
    const bool special = std::find(std::begin(kSpecialTokens), std::end(kSpecialTokens), token) !=
                         std::end(kSpecialTokens);
    if (!special && count >= static_cast<std::size_t>(std::max(min_freq, 1))) {
      entries.emplace_back(token, count);
    }
  }
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab v;
  v.origin_ = origin;
  v.min_freq_ = min_freq;
  v.tokens_.assign(std::begin(kSpecialTokens), std::end(kSpecialTokens));
  for (auto& [token, count] : entries) v.tokens_.push_back(token);
  v.reindex();
  return v;
}

void Vocab::reindex() {
  ids_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], static_cast<int>(i));
}

int Vocab::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token_of(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error("token id " + std::to_string(id) + " outside vocabulary of size " +
                std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::string Vocab::hash() const {
  std::uint64_t h = fnv1a64(origin_name(origin_).data(), origin_name(origin_).size());
  for (const std::string& t : tokens_) {
    h = fnv1a64(t.data(), t.size(), h);
    const char sep = '\n';
    h = fnv1a64(&sep, 1, h);
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

void Vocab::save(const std::filesystem::path& path) const {
  json j = {{"origin", origin_name(origin_)}, {"min_freq", min_freq_}, {"tokens", tokens_}};
  if (shared_with_ >= 0) j["also_accepts"] = origin_name(static_cast<Origin>(shared_with_));
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write vocabulary " + path.string());
  out << j.dump(1) << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read vocabulary " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("bad vocabulary file " + path.string() + ": " + e.what());
  }
  Vocab v;
  v.origin_ = parse_origin(j.at("origin").get<std::string>());
  v.min_freq_ = j.value("min_freq", 1);
  v.tokens_ = j.at("tokens").get<std::vector<std::string>>();
  if (v.tokens_.size() < kNumSpecials) throw ConfigError("vocabulary lacks special tokens");
  for (int i = 0; i < kNumSpecials; ++i) {
    if (v.tokens_[static_cast<std::size_t>(i)] != kSpecialTokens[i]) {
      throw ConfigError("vocabulary special tokens out of place in " + path.string());
    }
  }
  if (j.contains("also_accepts")) {
    v.shared_with_ = static_cast<int>(parse_origin(j.at("also_accepts").get<std::string>()));
  }
  v.reindex();
  return v;
}

std::vector<int> encode(const TokenSeq& seq, const Vocab& vocab, std::size_t max_len,
                        bool add_bos_eos) {
  if (!vocab.accepts(seq.origin)) {
    throw Error("cannot encode " + origin_name(seq.origin) + " tokens with a " +
                origin_name(vocab.origin()) + " vocabulary");
  }
  std::vector<int> ids;
  ids.reserve(seq.tokens.size() + 2);
  if (add_bos_eos) ids.push_back(kBosId);
  for (const std::string& t : seq.tokens) ids.push_back(vocab.id_of(t));
  if (add_bos_eos) ids.push_back(kEosId);
  if (ids.size() > max_len) ids.resize(max_len);
  return ids;
}

TokenSeq decode(const std::vector<int>& ids, const Vocab& vocab) {
  TokenSeq seq;
  seq.origin = vocab.origin();
  for (int id : ids) {
    if (id == kPadId || id == kBosId || id == kEosId) continue;
    seq.tokens.push_back(vocab.token_of(id));
  }
  return seq;
}

}  // namespace bcs
