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

#ifndef BCS_LISTING_HPP_
#define BCS_LISTING_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bcs/arch.hpp"
#include "json.hpp"

namespace bcs {

struct Instruction {
  std::uint64_t address = 0;
  std::string mnemonic;
  std::vector<std::string> operands;
  InstrKind kind = InstrKind::kFallthrough;
  std::optional<std::uint64_t> target;
};

// One function of a disassembly listing. Addresses are half-open:
// [start_addr, end_addr).
struct DisasmFunction {
  std::string name;
  std::uint64_t start_addr = 0;
  std::uint64_t end_addr = 0;
  Arch arch = Arch::kX64;
  std::vector<Instruction> instructions;
  std::vector<std::string> strings;
  std::optional<std::string> pseudo;
  // Optional text-section bounds of the containing binary, used to decide
  // whether a numeric call target is internal.
  std::optional<std::uint64_t> text_start;
  std::optional<std::uint64_t> text_end;

  bool contains(std::uint64_t addr) const { return addr >= start_addr && addr < end_addr; }
  bool is_stripped() const { return is_placeholder_function_name(name); }
  // Index of the instruction at `addr`, if any.
  std::optional<std::size_t> index_of(std::uint64_t addr) const;
};

std::string format_hex(std::uint64_t value);
// Accepts "0x1A", "1A", "1Ah". Throws ValidationError on garbage.
std::uint64_t parse_hex_field(const std::string& text);

// Builds a function from one listing record. Classifies instruction kinds,
// resolves targets, sorts by address and validates boundaries. When
// `expected_arch` is set the record's `arch` must agree with it.
DisasmFunction function_from_json(const nlohmann::json& record,
                                  std::optional<Arch> expected_arch = std::nullopt);
nlohmann::json function_to_json(const DisasmFunction& f);

// Throws ValidationError naming the function if an invariant is broken.
void validate_function(const DisasmFunction& f);

// Reads a JSONL listing. Blank lines are skipped; malformed records raise
// ParseError with the 1-based line number.
std::vector<DisasmFunction> parse_listing(const std::filesystem::path& path,
                                          std::optional<Arch> arch = std::nullopt);

}  // namespace bcs

#endif  // BCS_LISTING_HPP_
