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

#include "bcs/bicfg.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "bcs/error.hpp"
#include "bcs/normalize.hpp"

namespace bcs {

using nlohmann::json;

std::string edge_type_name(EdgeType t) {
  switch (t) {
    case EdgeType::kSeq:
      return "SEQ";
    case EdgeType::kFallthrough:
      return "FALLTHROUGH";
    case EdgeType::kJump:
      return "JUMP";
  }
  return "?";
}

std::string direction_name(Direction d) { return d == Direction::kFwd ? "FWD" : "BWD"; }

namespace {

EdgeType parse_edge_type(const std::string& s) {
  if (s == "SEQ") return EdgeType::kSeq;
  if (s == "FALLTHROUGH") return EdgeType::kFallthrough;
  if (s == "JUMP") return EdgeType::kJump;
  throw ValidationError("unknown edge type '" + s + "'");
}

Direction parse_direction(const std::string& s) {
  if (s == "FWD") return Direction::kFwd;
  if (s == "BWD") return Direction::kBwd;
  throw ValidationError("unknown edge direction '" + s + "'");
}

bool is_jump(InstrKind k) { return k == InstrKind::kJumpCond || k == InstrKind::kJumpUncond; }

}  // namespace

std::size_t BlockPartition::block_of(std::size_t i) const {
  auto it = std::upper_bound(blocks.begin(), blocks.end(), i,
                             [](std::size_t v, const BlockRange& b) { return v < b.begin; });
  return static_cast<std::size_t>(it - blocks.begin()) - 1;
}

std::size_t BiCfg::forward_edge_count() const {
  return static_cast<std::size_t>(std::count_if(
      edges.begin(), edges.end(), [](const CfgEdge& e) { return e.direction == Direction::kFwd; }));
}

BlockPartition find_leaders(const DisasmFunction& f) {
  const std::size_t q = f.instructions.size();
  std::set<std::size_t> leaders;
  if (q > 0) leaders.insert(0);
  for (std::size_t i = 0; i < q; ++i) {
    const Instruction& ins = f.instructions[i];
    if (is_jump(ins.kind) && ins.target && f.contains(*ins.target)) {
      if (auto idx = f.index_of(*ins.target)) leaders.insert(*idx);
    }
    const bool ends_block =
        is_jump(ins.kind) || ins.kind == InstrKind::kReturn || ins.kind == InstrKind::kIndirectJump;
    if (ends_block && i + 1 < q) leaders.insert(i + 1);
  }
  BlockPartition p;
  p.leaders.assign(leaders.begin(), leaders.end());
  for (std::size_t k = 0; k < p.leaders.size(); ++k) {
    const std::size_t end = k + 1 < p.leaders.size() ? p.leaders[k + 1] : q;
    p.blocks.push_back({p.leaders[k], end});
  }
  return p;
}

InstructionTokenizer default_tokenizer() {
  return [](const Instruction& ins, const DisasmFunction& f) {
    return normalize_instruction(ins, f, profile_for(f.arch));
  };
}

namespace {

void validate_partition(const DisasmFunction& f, const BlockPartition& p) {
  const std::size_t q = f.instructions.size();
  const auto fail = [&](const std::string& why) {
    throw ValidationError("partition does not match function " + f.name + ": " + why);
  };
  if (q == 0) {
    if (!p.blocks.empty() || !p.leaders.empty()) fail("function has no instructions");
    return;
  }
  if (p.leaders.empty() || p.leaders.front() != 0) fail("index 0 is not a leader");
  if (p.blocks.size() != p.leaders.size()) fail("leader and block counts differ");
  std::size_t expected_begin = 0;
  for (std::size_t k = 0; k < p.blocks.size(); ++k) {
    const BlockRange& b = p.blocks[k];
    if (b.begin != expected_begin || b.end <= b.begin) fail("blocks are not contiguous");
    if (b.begin != p.leaders[k]) fail("block does not start at its leader");
    expected_begin = b.end;
  }
  if (expected_begin != q) fail("blocks do not cover every instruction");
}

}  // namespace

BiCfg build_bicfg(const DisasmFunction& f, const BlockPartition& partition,
                  const InstructionTokenizer& tokenizer) {
  validate_partition(f, partition);
  const std::size_t q = f.instructions.size();
  BiCfg g;
  g.name = f.name;
  g.nodes.reserve(q);
  for (std::size_t i = 0; i < q; ++i) {
    g.nodes.push_back({i, i, tokenizer(f.instructions[i], f)});
  }

  std::vector<CfgEdge> forward;
  auto add = [&](std::size_t src, std::size_t dst, EdgeType t) {
    if (src == dst) return;  // e.g. `jmp $`
    forward.push_back({src, dst, t, Direction::kFwd});
  };
  for (std::size_t k = 0; k < partition.blocks.size(); ++k) {
    const BlockRange& b = partition.blocks[k];
    for (std::size_t i = b.begin; i + 1 < b.end; ++i) add(i, i + 1, EdgeType::kSeq);

    const std::size_t last = b.end - 1;
    const Instruction& ins = f.instructions[last];
    const bool has_next = b.end < q;
    std::optional<std::size_t> target;
    if (is_jump(ins.kind) && ins.target && f.contains(*ins.target))
      target = f.index_of(*ins.target);
    switch (ins.kind) {
      case InstrKind::kJumpUncond:
        if (target) add(last, *target, EdgeType::kJump);
        break;
      case InstrKind::kJumpCond:
        if (target) add(last, *target, EdgeType::kJump);
        if (has_next) add(last, b.end, EdgeType::kFallthrough);
        break;
      case InstrKind::kFallthrough:
      case InstrKind::kCall:
        if (has_next) add(last, b.end, EdgeType::kFallthrough);
        break;
      case InstrKind::kIndirectJump:
        ++g.indirect_jumps;
        break;
      case InstrKind::kReturn:
        break;
    }
  }

  g.edges.reserve(forward.size() * 2);
  for (const CfgEdge& e : forward) g.edges.push_back(e);
  for (const CfgEdge& e : forward) g.edges.push_back({e.dst, e.src, e.etype, Direction::kBwd});

  if (q > 0) {
    std::vector<std::vector<std::size_t>> succ(q);
    for (const CfgEdge& e : forward) succ[e.src].push_back(e.dst);
    std::vector<bool> seen(q, false);
    std::queue<std::size_t> todo;
    todo.push(0);
    seen[0] = true;
    while (!todo.empty()) {
      const std::size_t u = todo.front();
      todo.pop();
      for (std::size_t v : succ[u]) {
        if (!seen[v]) {
          seen[v] = true;
          todo.push(v);
        }
      }
    }
    for (std::size_t i = 0; i < q; ++i) {
      if (!seen[i]) g.unreachable.push_back(i);
    }
  }
  return g;
}

BiCfg build_bicfg(const DisasmFunction& f) { return build_bicfg(f, find_leaders(f)); }

std::string check_invariants(const BiCfg& g, const BlockPartition* partition) {
  const std::size_t q = g.nodes.size();
  for (std::size_t i = 0; i < q; ++i) {
    if (g.nodes[i].index != i) return "node " + std::to_string(i) + " has a wrong index";
  }
  std::multiset<CfgEdge> all;
  for (const CfgEdge& e : g.edges) {
    if (e.src >= q || e.dst >= q) return "edge endpoint out of range";
    if (e.src == e.dst) return "self-loop at node " + std::to_string(e.src);
    all.insert(e);
  }
  for (const CfgEdge& e : all) {
    if (all.count(e) != 1)
      return "duplicate edge " + std::to_string(e.src) + "->" + std::to_string(e.dst);
    const CfgEdge mirror{e.dst, e.src, e.etype,
                         e.direction == Direction::kFwd ? Direction::kBwd : Direction::kFwd};
    if (all.count(mirror) != 1) {
      return "edge " + std::to_string(e.src) + "->" + std::to_string(e.dst) + " " +
             edge_type_name(e.etype) + " has no mirror";
    }
  }
  if (partition) {
    const std::set<std::size_t> leaders(partition->leaders.begin(), partition->leaders.end());
    for (const CfgEdge& e : g.edges) {
      if (e.etype == EdgeType::kJump && e.direction == Direction::kFwd && !leaders.count(e.dst)) {
        return "jump edge into non-leader node " + std::to_string(e.dst);
      }
    }
    for (const BlockRange& b : partition->blocks) {
      std::size_t seq = 0;
      for (const CfgEdge& e : g.edges) {
        if (e.etype == EdgeType::kSeq && e.direction == Direction::kFwd && e.src >= b.begin &&
            e.src < b.end && e.dst >= b.begin && e.dst < b.end) {
          if (e.dst != e.src + 1) return "SEQ edge does not chain consecutive instructions";
          ++seq;
        }
      }
      if (seq != b.end - b.begin - 1) {
        return "block [" + std::to_string(b.begin) + "," + std::to_string(b.end) + ") has " +
               std::to_string(seq) + " SEQ edges";
      }
    }
  }
  return {};
}

json graph_to_json(const BiCfg& g) {
  json nodes = json::array();
  for (const CfgNode& n : g.nodes) {
    nodes.push_back({{"i", n.index}, {"instr", n.instr_index}, {"tokens", n.tokens}});
  }
  json edges = json::array();
  for (const CfgEdge& e : g.edges) {
    edges.push_back({{"src", e.src},
                     {"dst", e.dst},
                     {"etype", edge_type_name(e.etype)},
                     {"dir", direction_name(e.direction)}});
  }
  return {{"name", g.name},
          {"nodes", std::move(nodes)},
          {"edges", std::move(edges)},
          {"unreachable", g.unreachable},
          {"indirect_jumps", g.indirect_jumps}};
}

BiCfg graph_from_json(const json& j) {
  BiCfg g;
  g.name = j.value("name", std::string());
  for (const json& n : j.at("nodes")) {
    CfgNode node;
    node.index = n.at("i").get<std::size_t>();
    node.instr_index = n.value("instr", node.index);
    node.tokens = n.at("tokens").get<std::vector<std::string>>();
    g.nodes.push_back(std::move(node));
  }
  for (const json& e : j.at("edges")) {
    g.edges.push_back({e.at("src").get<std::size_t>(), e.at("dst").get<std::size_t>(),
                       parse_edge_type(e.at("etype").get<std::string>()),
                       parse_direction(e.at("dir").get<std::string>())});
  }
  if (j.contains("unreachable"))
    g.unreachable = j.at("unreachable").get<std::vector<std::size_t>>();
  g.indirect_jumps = j.value("indirect_jumps", std::size_t{0});
  return g;
}

void export_graph(const BiCfg& g, const std::filesystem::path& path, bool append) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw ConfigError("cannot write graph file " + path.string());
  out << graph_to_json(g).dump() << '\n';
  if (!out) throw ConfigError("write failed for graph file " + path.string());
}

std::vector<BiCfg> import_graphs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open graph file " + path.string());
  std::vector<BiCfg> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(graph_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno);
    }
  }
  return out;
}

std::string to_dot(const BiCfg& g) {
  const auto escape = [](const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '"' || c == '\\') out.push_back('\\');
      out.push_back(c);
    }
    return out;
  };
  std::ostringstream os;
  os << "digraph \"" << escape(g.name) << "\" {\n  node [shape=box, fontname=monospace];\n";
  for (const CfgNode& n : g.nodes) {
    std::string label;
    for (const auto& t : n.tokens) {
      if (!label.empty()) label.push_back(' ');
      label += t;
    }
    os << "  n" << n.index << " [label=\"" << n.index << ": " << escape(label) << "\"];\n";
  }
  for (const CfgEdge& e : g.edges) {
    if (e.direction != Direction::kFwd) continue;
    os << "  n" << e.src << " -> n" << e.dst;
    switch (e.etype) {
      case EdgeType::kSeq:
        os << " [color=black]";
        break;
      case EdgeType::kFallthrough:
        os << " [color=blue, style=dashed]";
        break;
      case EdgeType::kJump:
        os << " [color=red]";
        break;
    }
    os << ";\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace bcs
