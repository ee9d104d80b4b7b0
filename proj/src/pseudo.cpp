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

#include "bcs/pseudo.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <thread>

#include "bcs/arch.hpp"
#include "bcs/error.hpp"
#include "httplib.h"

namespace bcs {
namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

const std::set<std::string, std::less<>>& pseudo_keywords() {
  static const std::set<std::string, std::less<>> kw = {
      "auto",       "break",    "case",    "char",       "const",   "continue",  "default",
      "do",         "double",   "else",    "enum",       "extern",  "float",     "for",
      "goto",       "if",       "inline",  "int",        "long",    "register",  "return",
      "short",      "signed",   "sizeof",  "static",     "struct",  "switch",    "typedef",
      "union",      "unsigned", "void",    "volatile",   "while",   "bool",      "__int8",
      "__int16",    "__int32",  "__int64", "__fastcall", "__cdecl", "__stdcall", "__usercall",
      "__noreturn", "_BYTE",    "_WORD",   "_DWORD",     "_QWORD",  "_BOOL1",    "_BOOL4",
      "_UNKNOWN"};
  return kw;
}

constexpr std::string_view kOperators[] = {">>=", "<<=", "...", "->", "++", "--", "<<", ">>",
                                           "<=",  ">=",  "==",  "!=", "&&", "||", "+=", "-=",
                                           "*=",  "/=",  "%=",  "&=", "^=", "|=", "::"};

// Length of the comment starting at `i`, or 0.
std::size_t comment_length(std::string_view s, std::size_t i) {
  if (i + 1 >= s.size() || s[i] != '/') return 0;
  if (s[i + 1] == '/') {
    const std::size_t end = s.find('\n', i);
    return (end == std::string_view::npos ? s.size() : end) - i;
  }
  if (s[i + 1] == '*') {
    const std::size_t end = s.find("*/", i + 2);
    return (end == std::string_view::npos ? s.size() : end + 2) - i;
  }
  return 0;
}

// Length of the string or char literal starting at `i` (quotes included).
std::size_t literal_length(std::string_view s, std::size_t i) {
  const char quote = s[i];
  std::size_t k = i + 1;
  while (k < s.size() && s[k] != quote && s[k] != '\n') {
    if (s[k] == '\\' && k + 1 < s.size()) ++k;
    ++k;
  }
  if (k < s.size() && s[k] == quote) ++k;
  return k - i;
}

std::string trim_copy(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

TokenSeq tokenize_pseudo(std::string_view s) {
  TokenSeq seq;
  seq.origin = Origin::kPseudo;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (std::size_t len = comment_length(s, i)) {
      i += len;
      continue;
    }
    if (c == '"' || c == '\'') {
      const std::size_t len = literal_length(s, i);
      std::string tok(s.substr(i, len));
      for (char& ch : tok) {
        if (std::isspace(static_cast<unsigned char>(ch))) ch = '_';
      }
      seq.tokens.push_back(std::move(tok));
      i += len;
      continue;
    }
    if (is_ident_start(c)) {
      std::size_t end = i;
      while (end < s.size() && is_ident_char(s[end])) ++end;
      seq.tokens.emplace_back(s.substr(i, end - i));
      i = end;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t end = i;
      while (end < s.size()) {
        const char d = s[end];
        if (is_ident_char(d) || d == '.') {
          ++end;
        } else if ((d == '+' || d == '-') && end > i &&
                   (s[end - 1] == 'e' || s[end - 1] == 'E' || s[end - 1] == 'p' ||
                    s[end - 1] == 'P') &&
                   !(s[i] == '0' && i + 1 < s.size() && (s[i + 1] == 'x' || s[i + 1] == 'X') &&
                     (s[end - 1] == 'e' || s[end - 1] == 'E'))) {
          ++end;
        } else {
          break;
        }
      }
      seq.tokens.emplace_back(s.substr(i, end - i));
      i = end;
      continue;
    }
    bool matched = false;
    for (std::string_view op : kOperators) {
      if (s.substr(i, op.size()) == op) {
        seq.tokens.emplace_back(op);
        i += op.size();
        matched = true;
        break;
      }
    }
    if (matched) continue;
    seq.tokens.emplace_back(s.substr(i, 1));
    ++i;
  }
  return seq;
}

PseudoTokenClass classify_pseudo_token(std::string_view t) {
  if (t.empty()) return PseudoTokenClass::kOther;
  if (is_ident_start(t.front()) && std::all_of(t.begin(), t.end(), is_ident_char)) {
    return pseudo_keywords().count(t) ? PseudoTokenClass::kKeyword : PseudoTokenClass::kIdentifier;
  }
  if (std::isdigit(static_cast<unsigned char>(t.front()))) return PseudoTokenClass::kNumber;
  if (t.front() == '"') return PseudoTokenClass::kString;
  if (t.front() == '\'') return PseudoTokenClass::kChar;
  if (std::find(std::begin(kOperators), std::end(kOperators), t) != std::end(kOperators)) {
    return PseudoTokenClass::kPunct;
  }
  if (t.size() == 1 && std::ispunct(static_cast<unsigned char>(t.front()))) {
    return PseudoTokenClass::kPunct;
  }
  if (t.size() == 1) return PseudoTokenClass::kOther;
  return PseudoTokenClass::kOther;
}

RefinerMode parse_refiner_mode(std::string_view text) {
  const std::string lower = to_lower(text);
  if (lower == "passthrough" || lower == "none") return RefinerMode::kPassthrough;
  if (lower == "mapping" || lower == "mapping_file") return RefinerMode::kMappingFile;
  if (lower == "remote") return RefinerMode::kRemote;
  throw ConfigError("unknown refiner mode '" + std::string(text) + "'");
}

void validate_refiner_spec(const RefinerSpec& spec) {
  if (spec.mode == RefinerMode::kMappingFile && !spec.mapping_path) {
    throw ConfigError("mapping refiner needs a mapping file");
  }
  if (spec.mode == RefinerMode::kRemote && (!spec.endpoint || spec.endpoint->empty())) {
    throw ConfigError("remote refiner needs an endpoint");
  }
  if (spec.max_connections == 0) throw ConfigError("max_connections must be at least 1");
}

std::map<std::string, std::string, std::less<>> load_name_mapping(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read mapping file " + path.string());
  std::map<std::string, std::string, std::less<>> mapping;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string trimmed = trim_copy(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": expected placeholder<TAB>name");
    }
    const std::string from = trim_copy(std::string_view(line).substr(0, tab));
    const std::string to = trim_copy(std::string_view(line).substr(tab + 1));
    if (from.empty() || to.empty()) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": empty mapping field");
    }
    mapping[from] = to;
  }
  return mapping;
}

std::string apply_name_mapping(std::string_view s,
                               const std::map<std::string, std::string, std::less<>>& mapping) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::size_t len = comment_length(s, i)) {
      out.append(s.substr(i, len));
      i += len;
      continue;
    }
    if (c == '"' || c == '\'') {
      const std::size_t len = literal_length(s, i);
      out.append(s.substr(i, len));
      i += len;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      // Numeric suffixes (`10u`, `0x1F`) must not start an identifier match.
      std::size_t end = i;
      while (end < s.size() && is_ident_char(s[end])) ++end;
      out.append(s.substr(i, end - i));
      i = end;
      continue;
    }
    if (is_ident_start(c)) {
      std::size_t end = i;
      while (end < s.size() && is_ident_char(s[end])) ++end;
      const std::string_view ident = s.substr(i, end - i);
      auto it = mapping.find(ident);
      out.append(it == mapping.end() ? ident : std::string_view(it->second));
      i = end;
      continue;
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

Refiner::Refiner(RefinerSpec spec) : spec_(std::move(spec)) {
  validate_refiner_spec(spec_);
  if (spec_.mode == RefinerMode::kMappingFile) mapping_ = load_name_mapping(*spec_.mapping_path);
}

std::string Refiner::refine(std::string_view text) const {
  switch (spec_.mode) {
    case RefinerMode::kPassthrough:
      return std::string(text);
    case RefinerMode::kMappingFile:
      return apply_name_mapping(text, mapping_);
    case RefinerMode::kRemote:
      return refine_remote(text);
  }
  return std::string(text);
}

std::string Refiner::refine_remote(std::string_view text) const {
  const std::string& url = *spec_.endpoint;
  // Split "http://host:port/path" into the client base and request path.
  const std::size_t scheme_end = url.find("://");
  const std::size_t path_begin =
      url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const std::string base = path_begin == std::string::npos ? url : url.substr(0, path_begin);
  const std::string path = path_begin == std::string::npos ? "/" : url.substr(path_begin);

  try {
    httplib::Client client(base);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(spec_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(spec_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    auto res = client.Post(path, std::string(text), "text/plain");
    if (!res) {
      ++warnings_;
      warn("refiner endpoint " + url + " failed: " + httplib::to_string(res.error()) +
           "; passing text through");
      return std::string(text);
    }
    if (res->status < 200 || res->status >= 300) {
      ++warnings_;
      warn("refiner endpoint " + url + " returned HTTP " + std::to_string(res->status) +
           "; passing text through");
      return std::string(text);
    }
    return res->body;
  } catch (const std::exception& e) {
    ++warnings_;
    warn("refiner endpoint " + url + " failed: " + e.what() + "; passing text through");
    return std::string(text);
  }
}

std::vector<std::string> Refiner::refine_all(const std::vector<std::string>& texts) const {
  std::vector<std::string> out(texts.size());
  if (spec_.mode != RefinerMode::kRemote || texts.size() <= 1) {
    for (std::size_t i = 0; i < texts.size(); ++i) out[i] = refine(texts[i]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  const std::size_t workers = std::min(spec_.max_connections, texts.size());
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < texts.size(); i = next++) out[i] = refine(texts[i]);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

std::string refine(std::string_view text, const RefinerSpec& spec) {
  return Refiner(spec).refine(text);
}

}  // namespace bcs
