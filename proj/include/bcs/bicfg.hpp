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

#ifndef BCS_BICFG_HPP_
#define BCS_BICFG_HPP_

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "bcs/listing.hpp"
#include "json.hpp"

namespace bcs {

enum class EdgeType { kSeq, kFallthrough, kJump };
enum class Direction { kFwd, kBwd };

std::string edge_type_name(EdgeType t);
std::string direction_name(Direction d);

// Dense index in [0, 6) for an (edge type, direction) pair.
inline int edge_kind_index(EdgeType t, Direction d) {
  return static_cast<int>(t) * 2 + static_cast<int>(d);
}
inline constexpr int kNumEdgeKinds = 6;

struct BlockRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  bool operator==(const BlockRange&) const = default;
};

struct BlockPartition {
  std::vector<std::size_t> leaders;  // sorted, unique
  std::vector<BlockRange> blocks;

  // Index of the block containing instruction `i`.
  std::size_t block_of(std::size_t i) const;
};

struct CfgNode {
  std::size_t index = 0;
  std::size_t instr_index = 0;
  std::vector<std::string> tokens;
  bool operator==(const CfgNode&) const = default;
};

struct CfgEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  EdgeType etype = EdgeType::kSeq;
  Direction direction = Direction::kFwd;
  bool operator==(const CfgEdge&) const = default;
  auto operator<=>(const CfgEdge&) const = default;
};

// Bidirectional instruction-level CFG: one node per instruction, every
// forward edge mirrored by a backward edge of the same type.
struct BiCfg {
  std::string name;
  std::vector<CfgNode> nodes;
  std::vector<CfgEdge> edges;
  // Nodes not reachable from node 0 along forward edges.
  std::vector<std::size_t> unreachable;
  std::size_t indirect_jumps = 0;

  std::size_t forward_edge_count() const;
  bool operator==(const BiCfg&) const = default;
};

// Leaders: instruction 0, every resolved in-function jump target, and the
// instruction after each jump, return or indirect jump. Calls do not end a
// block.
BlockPartition find_leaders(const DisasmFunction& f);

using InstructionTokenizer =
    std::function<std::vector<std::string>(const Instruction&, const DisasmFunction&)>;

// Tokenizer backed by normalize_instruction with the function's arch profile.
InstructionTokenizer default_tokenizer();

// Throws ValidationError if `partition` does not describe `f`.
BiCfg build_bicfg(const DisasmFunction& f, const BlockPartition& partition,
                  const InstructionTokenizer& tokenizer = default_tokenizer());
BiCfg build_bicfg(const DisasmFunction& f);

// Returns a description of the first violated structural invariant, or an
// empty string. `partition` enables the block-level checks.
std::string check_invariants(const BiCfg& g, const BlockPartition* partition = nullptr);

nlohmann::json graph_to_json(const BiCfg& g);
BiCfg graph_from_json(const nlohmann::json& j);

// Appends one JSONL record. Throws ConfigError naming the path on I/O failure.
void export_graph(const BiCfg& g, const std::filesystem::path& path, bool append = false);
std::vector<BiCfg> import_graphs(const std::filesystem::path& path);

// Graphviz rendering of the forward edges.
std::string to_dot(const BiCfg& g);

}  // namespace bcs

#endif  // BCS_BICFG_HPP_
