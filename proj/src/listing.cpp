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

#include "bcs/listing.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "bcs/error.hpp"

namespace bcs {

using nlohmann::json;

std::optional<std::size_t> DisasmFunction::index_of(std::uint64_t addr) const {
  auto it =
      std::lower_bound(instructions.begin(), instructions.end(), addr,
                       [](const Instruction& ins, std::uint64_t a) { return ins.address < a; });
  if (it == instructions.end() || it->address != addr) return std::nullopt;
  return static_cast<std::size_t>(it - instructions.begin());
}

std::string format_hex(std::uint64_t value) {
  std::ostringstream os;
  os << "0x" << std::uppercase << std::hex << value;
  return os.str();
}

std::uint64_t parse_hex_field(const std::string& text) {
  std::string s = text;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) s = s.substr(2);
  if (!s.empty() && (s.back() == 'h' || s.back() == 'H')) s.pop_back();
  if (s.empty() || s.size() > 16 ||
      !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isxdigit(c); })) {
    throw ValidationError("bad hex value '" + text + "'");
  }
  return std::stoull(s, nullptr, 16);
}

namespace {

std::uint64_t address_field(const json& j, const char* key) {
  if (j.is_number_unsigned() || j.is_number_integer()) return j.get<std::uint64_t>();
  if (!j.is_string())
    throw ValidationError(std::string("field '") + key + "' must be a hex string");
  return parse_hex_field(j.get<std::string>());
}

}  // namespace

void validate_function(const DisasmFunction& f) {
  if (f.end_addr < f.start_addr) {
    throw ValidationError("function " + f.name + ": end_addr precedes start_addr");
  }
  for (std::size_t i = 0; i < f.instructions.size(); ++i) {
    const Instruction& ins = f.instructions[i];
    if (!f.contains(ins.address)) {
      throw ValidationError("function " + f.name + ": instruction at " + format_hex(ins.address) +
                            " outside [" + format_hex(f.start_addr) + ", " +
                            format_hex(f.end_addr) + ")");
    }
    if (i > 0 && f.instructions[i - 1].address >= ins.address) {
      throw ValidationError("function " + f.name + ": duplicate or unordered address " +
                            format_hex(ins.address));
    }
    const bool is_jump = ins.kind == InstrKind::kJumpCond || ins.kind == InstrKind::kJumpUncond;
    if (is_jump && ins.target && f.contains(*ins.target) && !f.index_of(*ins.target)) {
      throw ValidationError("function " + f.name + ": jump at " + format_hex(ins.address) +
                            " targets " + format_hex(*ins.target) +
                            ", which is not an instruction boundary");
    }
    if (ins.kind == InstrKind::kReturn && ins.target) {
      throw ValidationError("function " + f.name + ": return at " + format_hex(ins.address) +
                            " carries a target");
    }
  }
}

DisasmFunction function_from_json(const json& record, std::optional<Arch> expected_arch) {
  if (!record.is_object()) throw ValidationError("record is not an object");
  DisasmFunction f;
  f.name = record.at("name").get<std::string>();
  f.start_addr = address_field(record.at("start_addr"), "start_addr");
  f.end_addr = address_field(record.at("end_addr"), "end_addr");
  if (record.contains("arch")) {
    f.arch = parse_arch(record.at("arch").get<std::string>());
    if (expected_arch && *expected_arch != f.arch) {
      throw ValidationError("function " + f.name + ": arch " + arch_name(f.arch) +
                            " does not match expected " + arch_name(*expected_arch));
    }
  } else if (expected_arch) {
    f.arch = *expected_arch;
  } else {
    throw ConfigError("function " + f.name + ": no architecture given");
  }
  const ArchProfile& profile = profile_for(f.arch);

  for (const json& ij : record.at("instructions")) {
    Instruction ins;
    ins.address = address_field(ij.at("addr"), "addr");
    ins.mnemonic = ij.at("mnemonic").get<std::string>();
    if (ij.contains("operands")) ins.operands = ij.at("operands").get<std::vector<std::string>>();
    ins.kind = profile.classify(ins.mnemonic, ins.operands);
    if (ins.kind != InstrKind::kReturn) {
      if (ij.contains("target") && !ij.at("target").is_null()) {
        ins.target = address_field(ij.at("target"), "target");
      } else if ((ins.kind == InstrKind::kJumpCond || ins.kind == InstrKind::kJumpUncond ||
                  ins.kind == InstrKind::kCall) &&
                 !ins.operands.empty()) {
        ins.target = parse_code_address(ins.operands.back());
      }
    }
    f.instructions.push_back(std::move(ins));
  }
  std::stable_sort(
      f.instructions.begin(), f.instructions.end(),
      [](const Instruction& a, const Instruction& b) { return a.address < b.address; });

  if (record.contains("strings")) f.strings = record.at("strings").get<std::vector<std::string>>();
  if (record.contains("pseudo") && !record.at("pseudo").is_null()) {
    f.pseudo = record.at("pseudo").get<std::string>();
  }
  if (record.contains("text_start"))
    f.text_start = address_field(record.at("text_start"), "text_start");
  if (record.contains("text_end")) f.text_end = address_field(record.at("text_end"), "text_end");
  validate_function(f);
  return f;
}

json function_to_json(const DisasmFunction& f) {
  json j;
  j["name"] = f.name;
  j["start_addr"] = format_hex(f.start_addr);
  j["end_addr"] = format_hex(f.end_addr);
  j["arch"] = arch_name(f.arch);
  json instrs = json::array();
  for (const Instruction& ins : f.instructions) {
    json ij;
    ij["addr"] = format_hex(ins.address);
    ij["mnemonic"] = ins.mnemonic;
    ij["operands"] = ins.operands;
    if (ins.target) ij["target"] = format_hex(*ins.target);
    instrs.push_back(std::move(ij));
  }
  j["instructions"] = std::move(instrs);
  j["strings"] = f.strings;
  if (f.pseudo) j["pseudo"] = *f.pseudo;
  if (f.text_start) j["text_start"] = format_hex(*f.text_start);
  if (f.text_end) j["text_end"] = format_hex(*f.text_end);
  return j;
}

std::vector<DisasmFunction> parse_listing(const std::filesystem::path& path,
                                          std::optional<Arch> arch) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open listing " + path.string());
  std::vector<DisasmFunction> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno);
    }
    try {
      out.push_back(function_from_json(record, arch));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno);
    }
  }
  return out;
}

}  // namespace bcs
