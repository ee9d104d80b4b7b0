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

#include "bcs/arch.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "bcs/error.hpp"

namespace bcs {
namespace {

using NameSet = std::set<std::string, std::less<>>;

void add_all(NameSet& set, std::initializer_list<const char*> names) {
  for (const char* n : names) set.insert(n);
}

// Condition-code suffixes shared by x86 jcc and ARM b<cc>.
constexpr const char* kX86Jcc[] = {
    "ja",   "jae",   "jb",    "jbe",  "jc",    "je",     "jz",    "jg",    "jge",  "jl",
    "jle",  "jna",   "jnae",  "jnb",  "jnbe",  "jnc",    "jne",   "jng",   "jnge", "jnl",
    "jnle", "jno",   "jnp",   "jns",  "jnz",   "jo",     "jp",    "jpe",   "jpo",  "js",
    "jcxz", "jecxz", "jrcxz", "loop", "loope", "loopne", "loopz", "loopnz"};

constexpr const char* kArmCond[] = {"eq", "ne", "cs", "cc", "mi", "pl", "vs", "vc",
                                    "hi", "ls", "ge", "lt", "gt", "le", "hs", "lo"};

ArchProfile make_x86_family(Arch arch) {
  ArchProfile p;
  p.arch = arch;
  add_all(p.registers,
          {"eax", "ebx", "ecx", "edx", "esi", "edi", "esp", "ebp", "eip", "ax", "bx",
           "cx",  "dx",  "si",  "di",  "sp",  "bp",  "al",  "bl",  "cl",  "dl", "ah",
           "bh",  "ch",  "dh",  "cs",  "ds",  "es",  "fs",  "gs",  "ss",  "st", "eflags"});
  for (int i = 0; i < 8; ++i) {
    p.registers.insert("st" + std::to_string(i));
    p.registers.insert("mm" + std::to_string(i));
    p.registers.insert("xmm" + std::to_string(i));
    p.registers.insert("dr" + std::to_string(i));
    p.registers.insert("cr" + std::to_string(i));
  }
  if (arch == Arch::kX64) {
    add_all(p.registers, {"rax", "rbx", "rcx", "rdx", "rsi", "rdi", "rsp", "rbp", "rip", "sil",
                          "dil", "spl", "bpl", "rflags"});
    for (int i = 8; i < 16; ++i) {
      const std::string r = "r" + std::to_string(i);
      for (const char* suffix : {"", "d", "w", "b"}) p.registers.insert(r + suffix);
    }
    for (int i = 0; i < 16; ++i) {
      p.registers.insert("xmm" + std::to_string(i));
      p.registers.insert("ymm" + std::to_string(i));
    }
  }
  for (const char* j : kX86Jcc) p.jump_mnemonics.insert(j);
  p.jump_mnemonics.insert("jmp");
  p.unconditional_jumps.insert("jmp");
  add_all(p.call_mnemonics, {"call"});
  add_all(p.return_mnemonics, {"ret", "retn", "retf", "iret", "iretd", "iretq"});
  add_all(p.operand_keywords, {"byte", "word", "dword", "qword", "tbyte", "xmmword", "ymmword",
                               "fword", "ptr", "short", "near", "far", "offset", "large"});
  return p;
}

ArchProfile make_arm() {
  ArchProfile p;
  p.arch = Arch::kArm;
  for (int i = 0; i < 16; ++i) p.registers.insert("r" + std::to_string(i));
  for (int i = 0; i < 32; ++i) {
    p.registers.insert("s" + std::to_string(i));
    p.registers.insert("d" + std::to_string(i));
  }
  for (int i = 0; i < 16; ++i) p.registers.insert("q" + std::to_string(i));
  add_all(p.registers, {"sp", "lr", "pc", "fp", "ip", "sb", "sl", "apsr", "cpsr", "spsr", "fpscr"});
  p.jump_mnemonics.insert("b");
  p.unconditional_jumps.insert("b");
  add_all(p.jump_mnemonics, {"cbz", "cbnz"});
  add_all(p.call_mnemonics, {"bl", "blx"});
  for (const char* cc : kArmCond) {
    p.jump_mnemonics.insert(std::string("b") + cc);
    p.call_mnemonics.insert(std::string("bl") + cc);
    p.call_mnemonics.insert(std::string("blx") + cc);
  }
  add_all(p.return_mnemonics, {"bx"});
  add_all(p.operand_keywords, {"lsl", "lsr", "asr", "ror", "rrx"});
  return p;
}

bool is_hex_digits(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isxdigit(c) != 0; });
}

std::optional<std::uint64_t> parse_hex(std::string_view s) {
  if (!is_hex_digits(s) || s.size() > 16) return std::nullopt;
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value, 16);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool consume_word(std::string_view& s, std::string_view word) {
  if (s.size() <= word.size()) return false;
  if (to_lower(s.substr(0, word.size())) != word) return false;
  if (!std::isspace(static_cast<unsigned char>(s[word.size()]))) return false;
  s = trim(s.substr(word.size()));
  return true;
}

// Drops ARM `.w`/`.n` width qualifiers.
std::string_view strip_width_suffix(std::string_view m) {
  if (m.size() > 2 && m[m.size() - 2] == '.') return m.substr(0, m.size() - 2);
  return m;
}

bool mentions_pc(std::span<const std::string> operands) {
  for (const auto& op : operands) {
    std::string lower = to_lower(op);
    std::size_t pos = 0;
    while ((pos = lower.find("pc", pos)) != std::string::npos) {
      const bool left_ok = pos == 0 || !std::isalnum(static_cast<unsigned char>(lower[pos - 1]));
      const bool right_ok =
          pos + 2 >= lower.size() || !std::isalnum(static_cast<unsigned char>(lower[pos + 2]));
      if (left_ok && right_ok) return true;
      pos += 2;
    }
  }
  return false;
}

}  // namespace

std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

Arch parse_arch(std::string_view name) {
  const std::string lower = to_lower(name);
  if (lower == "x86") return Arch::kX86;
  if (lower == "x64" || lower == "x86_64" || lower == "x86-64") return Arch::kX64;
  if (lower == "arm") return Arch::kArm;
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

std::string arch_name(Arch arch) {
  switch (arch) {
    case Arch::kX86:
      return "x86";
    case Arch::kX64:
      return "x64";
    case Arch::kArm:
      return "arm";
  }
  return "?";
}

std::string kind_name(InstrKind kind) {
  switch (kind) {
    case InstrKind::kFallthrough:
      return "FALLTHROUGH";
    case InstrKind::kJumpUncond:
      return "JUMP_UNCOND";
    case InstrKind::kJumpCond:
      return "JUMP_COND";
    case InstrKind::kCall:
      return "CALL";
    case InstrKind::kReturn:
      return "RETURN";
    case InstrKind::kIndirectJump:
      return "INDIRECT_JUMP";
  }
  return "?";
}

std::optional<std::uint64_t> parse_code_address(std::string_view operand) {
  std::string_view s = trim(operand);
  consume_word(s, "short");
  if (consume_word(s, "near") || consume_word(s, "far")) consume_word(s, "ptr");
  if (!s.empty() && s.front() == '#') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;

  for (std::string_view prefix : {"locret_", "loc_", "sub_"}) {
    if (s.size() > prefix.size() && s.substr(0, prefix.size()) == prefix) {
      return parse_hex(s.substr(prefix.size()));
    }
  }
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    return parse_hex(s.substr(2));
  }
  if (s.size() > 1 && (s.back() == 'h' || s.back() == 'H') &&
      std::isdigit(static_cast<unsigned char>(s.front()))) {
    return parse_hex(s.substr(0, s.size() - 1));
  }
  if (std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; })) {
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value, 10);
    if (ec == std::errc() && ptr == s.data() + s.size()) return value;
  }
  return std::nullopt;
}

bool is_placeholder_function_name(std::string_view name) {
  return name.size() > 4 && name.substr(0, 4) == "sub_" && is_hex_digits(name.substr(4));
}

InstrKind ArchProfile::classify(std::string_view mnemonic,
                                std::span<const std::string> operands) const {
  std::string m = to_lower(mnemonic);
  if (arch == Arch::kArm) m = std::string(strip_width_suffix(m));

  const bool has_address = !operands.empty() && parse_code_address(operands.back()).has_value();
  if (jump_mnemonics.count(m)) {
    if (unconditional_jumps.count(m)) {
      if (has_address) return InstrKind::kJumpUncond;
      // `jmp rax`, `jmp qword ptr [rax+8]`; a symbolic name is a tail call
      // to a named function and still leaves the function.
      return InstrKind::kIndirectJump;
    }
    return InstrKind::kJumpCond;
  }
  if (call_mnemonics.count(m)) return InstrKind::kCall;
  if (return_mnemonics.count(m)) {
    if (arch == Arch::kArm) {
      // bx lr returns; bx <other register> is a computed jump.
      if (!operands.empty() && to_lower(trim(operands.front())) != "lr") {
        return InstrKind::kIndirectJump;
      }
    }
    return InstrKind::kReturn;
  }
  if (arch == Arch::kArm) {
    if ((m == "pop" || m.rfind("ldm", 0) == 0) && mentions_pc(operands)) {
      return InstrKind::kReturn;
    }
    if ((m == "mov" || m == "ldr") && !operands.empty() &&
        to_lower(trim(operands.front())) == "pc") {
      if (m == "mov" && operands.size() == 2 && to_lower(trim(operands[1])) == "lr") {
        return InstrKind::kReturn;
      }
      return InstrKind::kIndirectJump;
    }
  }
  return InstrKind::kFallthrough;
}

const ArchProfile& profile_for(Arch arch) {
  static const ArchProfile x86 = make_x86_family(Arch::kX86);
  static const ArchProfile x64 = make_x86_family(Arch::kX64);
  static const ArchProfile arm = make_arm();
  switch (arch) {
    case Arch::kX86:
      return x86;
    case Arch::kX64:
      return x64;
    case Arch::kArm:
      return arm;
  }
  throw ConfigError("no profile for architecture");
}

void validate_profile(const ArchProfile& profile) {
  if (profile.registers.empty()) {
    throw ConfigError("profile for " + arch_name(profile.arch) + " has no registers");
  }
  const NameSet* sets[] = {&profile.jump_mnemonics, &profile.call_mnemonics,
                           &profile.return_mnemonics};
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      for (const auto& m : *sets[i]) {
        if (sets[j]->count(m)) {
          throw ConfigError("mnemonic '" + m + "' appears in two classes");
        }
      }
    }
  }
}

}  // namespace bcs
