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

#ifndef BCS_ARCH_HPP_
#define BCS_ARCH_HPP_

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>

namespace bcs {

enum class Arch { kX86, kX64, kArm };

// Accepts "x86", "x64", "arm" in any case. Throws ConfigError otherwise.
Arch parse_arch(std::string_view name);
std::string arch_name(Arch arch);

enum class InstrKind {
  kFallthrough,
  kJumpUncond,
  kJumpCond,
  kCall,
  kReturn,
  kIndirectJump,
};

std::string kind_name(InstrKind kind);

// Per-architecture mnemonic and register tables. All entries are lowercase.
struct ArchProfile {
  Arch arch = Arch::kX64;
  std::set<std::string, std::less<>> registers;
  std::set<std::string, std::less<>> jump_mnemonics;
  std::set<std::string, std::less<>> call_mnemonics;
  std::set<std::string, std::less<>> return_mnemonics;
  // Subset of jump_mnemonics that never fall through.
  std::set<std::string, std::less<>> unconditional_jumps;
  // Size specifiers, shift operators and similar operand words kept as-is.
  std::set<std::string, std::less<>> operand_keywords;

  bool is_register(std::string_view lowercase_name) const {
    return registers.find(lowercase_name) != registers.end();
  }
  bool is_keyword(std::string_view lowercase_name) const {
    return operand_keywords.find(lowercase_name) != operand_keywords.end();
  }

  // Classifies a mnemonic given its raw operands. Indirect forms (jump
  // through a register or memory) become kIndirectJump; ARM returns through
  // `bx lr`, `pop {..., pc}` and `mov pc, lr` become kReturn.
  InstrKind classify(std::string_view mnemonic, std::span<const std::string> operands) const;
};

const ArchProfile& profile_for(Arch arch);

// Throws ConfigError if the register set is empty or the mnemonic sets
// overlap.
void validate_profile(const ArchProfile& profile);

std::string to_lower(std::string_view text);

// Parses a branch/call destination operand: `0x401000`, `401000h`,
// `loc_40A0`, `locret_40A0`, `sub_401000`, optionally prefixed by `short`,
// `near ptr`, `far ptr` or `#`. Returns nullopt for registers, memory
// operands and symbolic names.
std::optional<std::uint64_t> parse_code_address(std::string_view operand);

// True for names of the form `sub_` followed by hex digits.
bool is_placeholder_function_name(std::string_view name);

}  // namespace bcs

#endif  // BCS_ARCH_HPP_
