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

#include <gtest/gtest.h>

#include <fstream>

#include "bcs/arch.hpp"
#include "bcs/error.hpp"
#include "bcs/listing.hpp"
#include "json.hpp"
#include "support.hpp"

namespace bcs {
namespace {

using nlohmann::json;

json three_instructions() {
  return json{{"name", "sub_10"},
              {"start_addr", "0x10"},
              {"end_addr", "0x1C"},
              {"arch", "x64"},
              {"instructions",
               {{{"addr", "0x18"}, {"mnemonic", "retn"}, {"operands", json::array()}},
                {{"addr", "0x10"}, {"mnemonic", "test"}, {"operands", {"eax", "eax"}}},
                {{"addr", "0x14"}, {"mnemonic", "jz"}, {"operands", {"0x18"}}}}}};
}

TEST(Listing, SortsInstructionsAndResolvesTargets) {
  const DisasmFunction f = function_from_json(three_instructions());
  ASSERT_EQ(f.instructions.size(), 3u);
  EXPECT_EQ(f.instructions[0].address, 0x10u);
  EXPECT_EQ(f.instructions[1].address, 0x14u);
  EXPECT_EQ(f.instructions[2].address, 0x18u);
  EXPECT_EQ(f.instructions[1].kind, InstrKind::kJumpCond);
  ASSERT_TRUE(f.instructions[1].target.has_value());
  EXPECT_EQ(*f.instructions[1].target, 0x18u);
  EXPECT_EQ(f.instructions[2].kind, InstrKind::kReturn);
  EXPECT_TRUE(f.is_stripped());
}

TEST(Listing, InstructionOutsideBoundariesIsRejected) {
  json j = three_instructions();
  j["end_addr"] = "0x2C";
  j["instructions"].push_back({{"addr", "0x30"}, {"mnemonic", "nop"}, {"operands", json::array()}});
  try {
    function_from_json(j);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("sub_10"), std::string::npos) << e.what();
  }
}

TEST(Listing, UnknownArchIsConfigError) {
  json j = three_instructions();
  j["arch"] = "mips";
  EXPECT_THROW(function_from_json(j), ConfigError);
  EXPECT_THROW(parse_arch("sparc"), ConfigError);
}

TEST(Listing, MalformedLineNamesLineNumber) {
  const auto dir = testing::temp_dir("listing_malformed");
  const auto path = dir / "bad.jsonl";
  {
    std::ofstream out(path);
    out << three_instructions().dump() << "\n" << "{not json\n";
  }
  try {
    parse_listing(path);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Listing, ArchMismatchIsRejected) {
  EXPECT_THROW(function_from_json(three_instructions(), Arch::kArm), Error);
}

TEST(Listing, JsonRoundTrip) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const Arch arch = static_cast<Arch>(i % 3);
    const DisasmFunction f = testing::random_function(rng, arch, 1 + uniform_below(rng, 30));
    const DisasmFunction g = function_from_json(function_to_json(f));
    ASSERT_EQ(g.instructions.size(), f.instructions.size());
    for (std::size_t k = 0; k < f.instructions.size(); ++k) {
      EXPECT_EQ(g.instructions[k].address, f.instructions[k].address);
      EXPECT_EQ(g.instructions[k].kind, f.instructions[k].kind);
      EXPECT_EQ(g.instructions[k].target, f.instructions[k].target);
    }
  }
}

TEST(Listing, BundledListingsParse) {
  const auto stripped = parse_listing(testing::data_dir() / "stripped.jsonl", Arch::kX64);
  const auto named = parse_listing(testing::data_dir() / "named.jsonl", Arch::kX64);
  EXPECT_EQ(stripped.size(), 12u);
  EXPECT_EQ(named.size(), 11u);
  EXPECT_EQ(named.front().name, "gss_del_sec_context");
}

TEST(ArchProfile, MnemonicSetsAreDisjointAndRegistersPresent) {
  for (Arch a : {Arch::kX86, Arch::kX64, Arch::kArm}) {
    const ArchProfile& p = profile_for(a);
    EXPECT_NO_THROW(validate_profile(p));
    EXPECT_FALSE(p.registers.empty());
    for (const auto& m : p.call_mnemonics) {
      EXPECT_EQ(p.jump_mnemonics.count(m), 0u) << m;
      EXPECT_EQ(p.return_mnemonics.count(m), 0u) << m;
    }
    for (const auto& m : p.jump_mnemonics) EXPECT_EQ(p.return_mnemonics.count(m), 0u) << m;
  }
}

TEST(ArchProfile, Classification) {
  const ArchProfile& x64 = profile_for(Arch::kX64);
  const std::vector<std::string> reg = {"rax"};
  const std::vector<std::string> addr = {"0x401000"};
  EXPECT_EQ(x64.classify("jmp", reg), InstrKind::kIndirectJump);
  EXPECT_EQ(x64.classify("jmp", addr), InstrKind::kJumpUncond);
  EXPECT_EQ(x64.classify("jnz", addr), InstrKind::kJumpCond);
  EXPECT_EQ(x64.classify("call", reg), InstrKind::kCall);
  EXPECT_EQ(x64.classify("ret", {}), InstrKind::kReturn);
  EXPECT_EQ(x64.classify("mov", reg), InstrKind::kFallthrough);
  const ArchProfile& arm = profile_for(Arch::kArm);
  const std::vector<std::string> lr = {"lr"};
  EXPECT_EQ(arm.classify("bx", lr), InstrKind::kReturn);
  EXPECT_EQ(arm.classify("beq", addr), InstrKind::kJumpCond);
  EXPECT_EQ(arm.classify("bl", addr), InstrKind::kCall);
}

TEST(ArchProfile, PlaceholderNames) {
  EXPECT_TRUE(is_placeholder_function_name("sub_E6C4C"));
  EXPECT_TRUE(is_placeholder_function_name("sub_401000"));
  EXPECT_FALSE(is_placeholder_function_name("sub_"));
  EXPECT_FALSE(is_placeholder_function_name("sub_xyz"));
  EXPECT_FALSE(is_placeholder_function_name("printf"));
}

}  // namespace
}  // namespace bcs
