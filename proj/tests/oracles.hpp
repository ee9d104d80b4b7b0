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

#ifndef BCS_TESTS_ORACLES_HPP_
#define BCS_TESTS_ORACLES_HPP_

// Independent reference implementations used to cross-check the library.
// Nothing here calls the code under test except to feed it inputs.

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "bcs/bicfg.hpp"
#include "bcs/listing.hpp"
#include "bcs/metrics.hpp"
#include "bcs/rng.hpp"

namespace bcs::testing {

using Tokens = std::vector<std::string>;

// One function at 0x4000 with 4-byte instructions.
DisasmFunction one_function(Arch arch, const std::vector<std::pair<std::string, Tokens>>& ins,
                            const Tokens& strings = {});

// --- BI-CFG ---------------------------------------------------------------------------

// Re-derives leaders, mirroring, SEQ counts and reachability from first
// principles. Empty string when every invariant holds.
std::string verify_bicfg(const DisasmFunction& f, const BiCfg& g);

// --- normalization ----------------------------------------------------------------------

struct FuzzInstruction {
  Arch arch;
  std::string mnemonic;
  Tokens operands;
  std::set<std::string> names;  // external names the generator injected
  int literal_sign = 2;         // sign of the single literal operand, 2 if none
};

FuzzInstruction random_instruction(Rng& rng);
// Every token a fuzzed instruction of `a` may normalize to, besides injected names.
std::set<std::string> closure_set(Arch a);
// Feeds a normalized stream back through the normalizer as a fresh instruction.
Tokens renormalize(Arch arch, const Tokens& tokens, InstrKind kind);

struct FuzzReport {
  int checked = 0;
  int literal_cases = 0;
  std::string failure;  // first violation, empty if none
};
// Closure, idempotence and sign checks over `count` fuzzed instructions.
FuzzReport fuzz_normalize(std::uint64_t seed, int count);

// Compares tests/golden_normalize_<arch>.jsonl with the normalizer output.
std::string check_golden_normalize(const std::string& arch);

// --- metrics ----------------------------------------------------------------------------

double oracle_bleu(const std::vector<Sentence>& cands, const std::vector<Sentence>& refs);
std::size_t oracle_lcs(const Sentence& a, const Sentence& b);
double oracle_rouge(const Sentence& c, const Sentence& r);
double oracle_meteor(const Sentence& c, const Sentence& r, std::size_t* chunks_out = nullptr);
// Short sentences (<= 8 tokens) over a five-word vocabulary; every tenth
// candidate may be empty.
std::vector<std::pair<Sentence, Sentence>> random_pairs(std::uint64_t seed, std::size_t count);

}  // namespace bcs::testing

#endif  // BCS_TESTS_ORACLES_HPP_
