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

#include "bcs/normalize.hpp"

#include <algorithm>
#include <cctype>

#include "bcs/error.hpp"

namespace bcs {
namespace {

enum class Role { kPlain, kJumpTarget, kCallTarget };

bool is_ident_start(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalpha(u) || c == '_' || c == '.' || c == '@' || c == '?' || c == '$';
}

bool is_ident_char(char c) {
  return is_ident_start(c) || std::isdigit(static_cast<unsigned char>(c));
}

bool all_hex(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isxdigit(c) != 0; });
}

bool has_hex_suffix_after(std::string_view name, std::string_view prefix) {
  return name.size() > prefix.size() && name.substr(0, prefix.size()) == prefix &&
         all_hex(name.substr(prefix.size()));
}

// IDA auto-named data and stack symbols stand for address or offset
// constants.
std::optional<std::string_view> auto_label_placeholder(std::string_view name) {
  if (has_hex_suffix_after(name, "sub_")) return kICall;
  if (has_hex_suffix_after(name, "loc_") || has_hex_suffix_after(name, "locret_")) {
    return kJumpAddress;
  }
  if (has_hex_suffix_after(name, "var_")) return kNegative;
  if (has_hex_suffix_after(name, "arg_")) return kPositive;
  static constexpr std::string_view kDataPrefixes[] = {
      "byte_", "word_", "dword_", "qword_", "off_",     "unk_", "stru_",
      "asc_",  "flt_",  "dbl_",   "tbyte_", "xmmword_", "jpt_", "def_"};
  for (std::string_view prefix : kDataPrefixes) {
    if (has_hex_suffix_after(name, prefix)) return kPositive;
  }
  return std::nullopt;
}

// Literal forms: 123, 0x1F, 1Fh. Returns nullopt if `lexeme` is none of them.
std::optional<bool> literal_is_zero(std::string_view lexeme) {
  std::string_view digits;
  if (lexeme.size() > 2 && lexeme[0] == '0' && (lexeme[1] == 'x' || lexeme[1] == 'X')) {
    digits = lexeme.substr(2);
    if (!all_hex(digits)) return std::nullopt;
  } else if (lexeme.size() > 1 && (lexeme.back() == 'h' || lexeme.back() == 'H')) {
    digits = lexeme.substr(0, lexeme.size() - 1);
    if (!all_hex(digits)) return std::nullopt;
  } else {
    digits = lexeme;
    if (!std::all_of(digits.begin(), digits.end(),
                     [](unsigned char c) { return std::isdigit(c) != 0; })) {
      return std::nullopt;
    }
  }
  return std::all_of(digits.begin(), digits.end(), [](char c) { return c == '0'; });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_bare_identifier(std::string_view s) {
  return !s.empty() && is_ident_start(s.front()) && std::all_of(s.begin(), s.end(), is_ident_char);
}

class OperandLexer {
 public:
  OperandLexer(const ArchProfile& profile, std::vector<std::string>& out, NormalizeStats* stats)
      : profile_(profile), out_(out), stats_(stats) {}

  void run(std::string_view s) {
    bool prev_is_term = false;
    std::size_t i = 0;
    while (i < s.size()) {
      const char c = s[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
        continue;
      }
      if (c == '<') {
        const std::size_t close = s.find('>', i);
        if (close != std::string_view::npos && close > i + 1 &&
            std::all_of(s.begin() + i + 1, s.begin() + close, is_ident_char)) {
          out_.emplace_back(s.substr(i, close - i + 1));
          i = close + 1;
          prev_is_term = true;
          continue;
        }
      }
      if (c == '#' || c == '=') {
        ++i;
        continue;
      }
      const bool signed_literal = c == '-' && !prev_is_term && i + 1 < s.size() &&
                                  std::isdigit(static_cast<unsigned char>(s[i + 1]));
      if (signed_literal || std::isdigit(static_cast<unsigned char>(c))) {
        const std::size_t begin = signed_literal ? i + 1 : i;
        std::size_t end = begin;
        while (end < s.size() && std::isalnum(static_cast<unsigned char>(s[end]))) ++end;
        const std::string_view lexeme = s.substr(begin, end - begin);
        if (auto zero = literal_is_zero(lexeme)) {
          out_.emplace_back(*zero ? kZero : (signed_literal ? kNegative : kPositive));
        } else {
          emit_unparsed(s.substr(i, end - i));
        }
        i = end;
        prev_is_term = true;
        continue;
      }
      if (is_ident_start(c)) {
        std::size_t end = i;
        while (end < s.size() && is_ident_char(s[end])) ++end;
        emit_identifier(s.substr(i, end - i));
        i = end;
        prev_is_term = true;
        continue;
      }
      const std::string_view single = s.substr(i, 1);
      if (is_structural(single)) {
        out_.emplace_back(single);
        prev_is_term = c == ']' || c == ')' || c == '}';
      } else {
        emit_unparsed(single);
        prev_is_term = false;
      }
      ++i;
    }
  }

 private:
  void emit_identifier(std::string_view name) {
    const std::string lower = to_lower(name);
    if (profile_.is_register(lower) || profile_.is_keyword(lower)) {
      out_.push_back(lower);
    } else if (auto placeholder = auto_label_placeholder(name)) {
      out_.emplace_back(*placeholder);
    } else {
      out_.emplace_back(name);
    }
  }

  void emit_unparsed(std::string_view text) {
    out_.emplace_back(text);
    if (stats_) ++stats_->unparsed;
  }

  const ArchProfile& profile_;
  std::vector<std::string>& out_;
  NormalizeStats* stats_;
};

// Drops `short`, `near ptr` and `far ptr` in front of a branch destination.
std::string_view strip_branch_prefix(std::string_view op) {
  op = trim(op);
  for (std::string_view prefix : {"short ", "near ptr ", "far ptr "}) {
    if (op.size() > prefix.size() && to_lower(op.substr(0, prefix.size())) == prefix) {
      return trim(op.substr(prefix.size()));
    }
  }
  return op;
}

void normalize_operand(std::string_view op, Role role, const Instruction& ins,
                       const DisasmFunction& f, const ArchProfile& profile,
                       std::vector<std::string>& out, NormalizeStats* stats) {
  if (role == Role::kJumpTarget && parse_code_address(op)) {
    const std::string_view dest = strip_branch_prefix(op);
    out.emplace_back(is_placeholder_function_name(dest) ? kICall : kJumpAddress);
    return;
  }
  if (role == Role::kCallTarget) {
    const std::string_view dest = strip_branch_prefix(op);
    if (parse_code_address(op) && is_internal_call(ins, f)) {
      out.emplace_back(kICall);
      return;
    }
    if (is_bare_identifier(dest) && !profile.is_register(to_lower(dest))) {
      if (is_internal_call(ins, f)) {
        out.emplace_back(kICall);
      } else {
        // External callee names survive stripping and are kept verbatim.
        out.emplace_back(dest);
      }
      return;
    }
  }
  OperandLexer(profile, out, stats).run(op);
}

}  // namespace

bool is_placeholder(std::string_view token) {
  return token == kPositive || token == kNegative || token == kZero || token == kICall ||
         token == kJumpAddress || token == kStrMarker;
}

bool is_structural(std::string_view token) {
  static constexpr std::string_view kStructural[] = {"[", "]", "+", "-", "*", ",",
                                                     "{", "}", "!", ":", "(", ")"};
  return std::find(std::begin(kStructural), std::end(kStructural), token) != std::end(kStructural);
}

std::string_view sign_placeholder(long double value) {
  if (value > 0) return kPositive;
  if (value < 0) return kNegative;
  return kZero;
}

bool is_internal_call(const Instruction& ins, const DisasmFunction& f) {
  if (ins.kind != InstrKind::kCall || !ins.target || ins.operands.empty()) return false;
  const std::string_view dest = strip_branch_prefix(ins.operands.back());
  if (is_placeholder_function_name(dest)) return true;
  if (f.text_start && f.text_end) {
    return *ins.target >= *f.text_start && *ins.target < *f.text_end;
  }
  // Without a declared text range only a literal (nameless) address counts.
  return parse_code_address(dest).has_value();
}

std::vector<std::string> normalize_instruction(const Instruction& ins, const DisasmFunction& f,
                                               const ArchProfile& profile, NormalizeStats* stats) {
  std::vector<std::string> out;
  const std::string mnemonic = to_lower(ins.mnemonic);
  std::size_t pos = 0;
  while (pos < mnemonic.size()) {
    const std::size_t start = mnemonic.find_first_not_of(" \t", pos);
    if (start == std::string::npos) break;
    const std::size_t end = mnemonic.find_first_of(" \t", start);
    out.push_back(mnemonic.substr(start, end == std::string::npos ? end : end - start));
    pos = end;
  }
  if (out.empty()) out.emplace_back("<unk-op>");

  const bool is_jump = ins.kind == InstrKind::kJumpCond || ins.kind == InstrKind::kJumpUncond;
  for (std::size_t k = 0; k < ins.operands.size(); ++k) {
    Role role = Role::kPlain;
    // The destination is the last operand (`cbz r0, loc_10` on ARM).
    if (k + 1 == ins.operands.size()) {
      if (is_jump) role = Role::kJumpTarget;
      if (ins.kind == InstrKind::kCall) role = Role::kCallTarget;
    }
    normalize_operand(ins.operands[k], role, ins, f, profile, out, stats);
  }
  return out;
}

std::vector<std::string> string_feature_tokens(std::string_view feature,
                                               const NormalizeOptions& options) {
  std::vector<std::string> out;
  if (options.split_strings) {
    std::string current;
    for (char c : feature) {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        current.push_back(c);
      } else if (!current.empty()) {
        out.push_back(std::move(current));
        current.clear();
      }
    }
    if (!current.empty()) out.push_back(std::move(current));
  } else {
    std::string joined;
    for (char c : trim(feature)) {
      joined.push_back(std::isspace(static_cast<unsigned char>(c)) ? '_' : c);
    }
    if (!joined.empty()) out.push_back(std::move(joined));
  }
  return out;
}

TokenSeq normalize_function(const DisasmFunction& f, const ArchProfile& profile,
                            const NormalizeOptions& options, NormalizeStats* stats) {
  if (profile.arch != f.arch) {
    throw ConfigError("function " + f.name + " is " + arch_name(f.arch) + " but the profile is " +
                      arch_name(profile.arch));
  }
  TokenSeq seq;
  seq.origin = Origin::kAsm;
  for (const Instruction& ins : f.instructions) {
    auto tokens = normalize_instruction(ins, f, profile, stats);
    seq.tokens.insert(seq.tokens.end(), std::make_move_iterator(tokens.begin()),
                      std::make_move_iterator(tokens.end()));
  }
  std::vector<std::string> features;
  for (const std::string& s : f.strings) {
    auto parts = string_feature_tokens(s, options);
    features.insert(features.end(), parts.begin(), parts.end());
  }
  if (!features.empty()) {
    seq.tokens.emplace_back(kStrMarker);
    seq.tokens.insert(seq.tokens.end(), features.begin(), features.end());
  }
  return seq;
}

}  // namespace bcs
