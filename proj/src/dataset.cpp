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

#include "bcs/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "bcs/error.hpp"
#include "bcs/rng.hpp"
#include "bcs/tokens.hpp"

namespace bcs {

using nlohmann::json;
namespace fs = std::filesystem;

OptLevel parse_opt_level(std::string_view text) {
  const std::string lower = to_lower(text);
  if (lower == "o1") return OptLevel::kO1;
  if (lower == "o2") return OptLevel::kO2;
  if (lower == "o3") return OptLevel::kO3;
  throw ConfigError("unknown optimization level '" + std::string(text) + "'");
}

std::string opt_level_name(OptLevel level) {
  switch (level) {
    case OptLevel::kO1:
      return "O1";
    case OptLevel::kO2:
      return "O2";
    case OptLevel::kO3:
      return "O3";
  }
  return "?";
}

Split parse_split(std::string_view text) {
  const std::string lower = to_lower(text);
  if (lower == "train") return Split::kTrain;
  if (lower == "valid" || lower == "validation") return Split::kValid;
  if (lower == "test") return Split::kTest;
  throw ConfigError("unknown split '" + std::string(text) + "'");
}

std::string split_name(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValid:
      return "valid";
    case Split::kTest:
      return "test";
  }
  return "?";
}

// --- summary extraction ---------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : trim(s)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
    } else {
      if (space && !out.empty()) out.push_back(' ');
      space = false;
      out.push_back(c);
    }
  }
  return out;
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool is_doc_tag_line(std::string_view line) {
  return line.size() > 1 && (line[0] == '@' || line[0] == '\\') &&
         std::isalpha(static_cast<unsigned char>(line[1]));
}

// `@brief text` and `\brief text` carry the summary itself.
std::optional<std::string_view> brief_text(std::string_view line) {
  for (std::string_view tag : {"@brief", "\\brief"}) {
    if (line.substr(0, tag.size()) == tag &&
        (line.size() == tag.size() || std::isspace(static_cast<unsigned char>(line[tag.size()])))) {
      return trim(line.substr(tag.size()));
    }
  }
  return std::nullopt;
}

const std::set<std::string, std::less<>>& c_keywords() {
  static const std::set<std::string, std::less<>> kw = {
      "auto",       "break",    "case",     "char",
      "const",      "continue", "default",  "do",
      "double",     "else",     "enum",     "extern",
      "float",      "for",      "goto",     "if",
      "inline",     "int",      "long",     "register",
      "restrict",   "return",   "short",    "signed",
      "sizeof",     "static",   "struct",   "switch",
      "typedef",    "union",    "unsigned", "void",
      "volatile",   "while",    "_Bool",    "__attribute__",
      "__declspec", "__asm__",  "_Alignas", "_Static_assert"};
  return kw;
}

// Name of the function a declaration introduces: the first non-keyword
// identifier directly followed by `(`. Declarations with an initializer
// before that point are variables, not functions.
std::optional<std::string> declared_function_name(std::string_view decl) {
  std::size_t i = 0;
  int paren_depth = 0;
  while (i < decl.size()) {
    const char c = decl[i];
    if (c == '=' && paren_depth == 0) return std::nullopt;
    if (c == '(') ++paren_depth;
    if (c == ')') --paren_depth;
    if (is_ident_start(c) && paren_depth == 0) {
      std::size_t end = i;
      while (end < decl.size() && is_ident_char(decl[end])) ++end;
      std::size_t next = end;
      while (next < decl.size() && std::isspace(static_cast<unsigned char>(decl[next]))) ++next;
      const std::string_view ident = decl.substr(i, end - i);
      if (next < decl.size() && decl[next] == '(') {
        if (!c_keywords().count(ident)) return std::string(ident);
        // Skip the attribute/keyword argument list entirely.
        int depth = 0;
        std::size_t k = next;
        for (; k < decl.size(); ++k) {
          if (decl[k] == '(') ++depth;
          if (decl[k] == ')' && --depth == 0) break;
        }
        i = k + 1;
        continue;
      }
      i = end;
      continue;
    }
    ++i;
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> first_sentence(std::string_view comment_body) {
  std::vector<std::string> prose;
  std::istringstream in{std::string(comment_body)};
  std::string raw;
  while (std::getline(in, raw)) {
    std::string_view line = trim(raw);
    while (!line.empty() && line.front() == '*') line.remove_prefix(1);
    line = trim(line);
    if (auto brief = brief_text(line)) {
      line = *brief;
    } else if (is_doc_tag_line(line)) {
      break;
    }
    if (line.empty()) {
      if (!prose.empty()) prose.emplace_back();  // paragraph break
      continue;
    }
    prose.emplace_back(line);
  }
  while (!prose.empty() && prose.back().empty()) prose.pop_back();
  if (prose.empty()) return std::nullopt;

  std::string joined;
  for (const auto& l : prose) {
    if (!joined.empty()) joined.push_back(' ');
    joined += l;
  }
  int depth = 0;
  for (std::size_t i = 0; i < joined.size(); ++i) {
    const char c = joined[i];
    if (c == '(') ++depth;
    if (c == ')' && depth > 0) --depth;
    if ((c == '.' || c == '!' || c == '?') && depth == 0 &&
        (i + 1 == joined.size() || std::isspace(static_cast<unsigned char>(joined[i + 1])))) {
      std::string sentence = collapse_spaces(std::string_view(joined).substr(0, i));
      if (!sentence.empty()) return sentence;
      return std::nullopt;
    }
  }
  std::string line = collapse_spaces(prose.front());
  while (!line.empty() && (line.back() == '.' || line.back() == '!' || line.back() == '?')) {
    line.pop_back();
  }
  if (line.empty()) return std::nullopt;
  return line;
}

std::vector<SummaryRecord> extract_summaries_from_text(std::string_view src,
                                                       const std::string& source_path) {
  std::vector<SummaryRecord> out;
  std::optional<std::string> pending;  // body of the last file-scope doc comment
  bool collecting = false;             // inside the declaration after it
  std::string decl;
  int depth = 0;
  bool line_start = true;

  auto finish_decl = [&] {
    if (collecting && pending) {
      if (auto name = declared_function_name(decl)) {
        if (auto sentence = first_sentence(*pending)) {
          out.push_back({*name, *sentence, source_path});
        }
      }
    }
    pending.reset();
    collecting = false;
    decl.clear();
  };

  std::size_t i = 0;
  const std::size_t n = src.size();
  while (i < n) {
    const char c = src[i];
    if (c == '\n') {
      line_start = true;
      if (collecting) decl.push_back(' ');
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (collecting) decl.push_back(' ');
      ++i;
      continue;
    }
    const bool at_line_start = line_start;
    line_start = false;

    if (c == '/' && i + 1 < n && src[i + 1] == '/') {
      while (i < n && src[i] != '\n') ++i;
      if (depth == 0 && !collecting) pending.reset();
      continue;
    }
    if (c == '/' && i + 1 < n && src[i + 1] == '*') {
      const std::size_t close = src.find("*/", i + 2);
      const std::size_t end = close == std::string_view::npos ? n : close + 2;
      const bool is_doc = i + 2 < n && src[i + 2] == '*' && !(i + 3 < n && src[i + 3] == '/');
      if (depth == 0 && !collecting) {
        if (is_doc && close != std::string_view::npos) {
          pending = std::string(src.substr(i + 3, close - (i + 3)));
        } else {
          pending.reset();
        }
      }
      i = end;
      continue;
    }
    if (c == '#' && at_line_start && depth == 0) {
      // Preprocessor line, with backslash continuations.
      while (i < n && src[i] != '\n') {
        if (src[i] == '\\' && i + 1 < n && src[i + 1] == '\n') ++i;
        ++i;
      }
      if (!collecting) pending.reset();
      continue;
    }
    if (c == '"' || c == '\'') {
      std::size_t k = i + 1;
      while (k < n && src[k] != c && src[k] != '\n') {
        if (src[k] == '\\') ++k;
        ++k;
      }
      if (collecting) decl += "\"\"";
      i = std::min(n, k + 1);
      continue;
    }
    if (c == '{') {
      if (depth == 0) finish_decl();
      ++depth;
      ++i;
      continue;
    }
    if (c == '}') {
      if (depth > 0) --depth;
      ++i;
      continue;
    }
    if (c == ';' && depth == 0) {
      finish_decl();
      ++i;
      continue;
    }
    if (depth == 0) {
      if (pending && !collecting) {
        collecting = true;
        decl.clear();
      }
      if (collecting) decl.push_back(c);
    }
    ++i;
  }
  return out;
}

std::vector<SummaryRecord> extract_summaries(const fs::path& source_root) {
  std::error_code ec;
  if (!fs::is_directory(source_root, ec)) {
    throw ConfigError("source root " + source_root.string() + " is not a directory");
  }
  std::vector<fs::path> files;
  for (auto it = fs::recursive_directory_iterator(
           source_root, fs::directory_options::skip_permission_denied, ec);
       it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) break;
    if (!it->is_regular_file(ec)) continue;
    const std::string ext = to_lower(it->path().extension().string());
    if (ext == ".c" || ext == ".h") files.push_back(it->path());
  }
  std::sort(files.begin(), files.end());

  std::vector<SummaryRecord> out;
  for (const fs::path& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
      warn("cannot read " + file.string() + ", skipping");
      continue;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string rel = fs::relative(file, source_root, ec).generic_string();
    auto records = extract_summaries_from_text(buf.str(), ec ? file.generic_string() : rel);
    out.insert(out.end(), records.begin(), records.end());
  }
  return out;
}

// --- pairing --------------------------------------------------------------

namespace {

using BoundaryKey = std::pair<std::uint64_t, std::uint64_t>;

std::map<BoundaryKey, const DisasmFunction*> index_by_boundary(
    const std::vector<DisasmFunction>& functions, const char* which) {
  std::map<BoundaryKey, const DisasmFunction*> index;
  for (const DisasmFunction& f : functions) {
    auto [it, inserted] = index.emplace(BoundaryKey{f.start_addr, f.end_addr}, &f);
    if (!inserted) {
      throw ValidationError(std::string("ambiguous boundary key in ") + which + " listing: [" +
                            format_hex(f.start_addr) + ", " + format_hex(f.end_addr) +
                            ") shared by " + it->second->name + " and " + f.name);
    }
  }
  return index;
}

std::string project_of(const std::string& source_path) {
  const fs::path p(source_path);
  auto it = p.begin();
  if (it == p.end()) return {};
  const fs::path first = *it;
  if (std::next(it) == p.end()) return {};
  return first.generic_string();
}

}  // namespace

std::vector<DatasetSample> make_pairs(const std::vector<DisasmFunction>& stripped,
                                      const std::vector<DisasmFunction>& named,
                                      const std::vector<SummaryRecord>& summaries,
                                      const PairOptions& options, PairStats* stats) {
  PairStats local;
  const auto stripped_index = index_by_boundary(stripped, "stripped");
  const auto named_index = index_by_boundary(named, "named");

  std::map<std::string, const SummaryRecord*, std::less<>> by_name;
  for (const SummaryRecord& r : summaries) {
    if (!by_name.emplace(r.function_name, &r).second) ++local.duplicate_summaries;
  }

  std::vector<DatasetSample> out;
  for (const auto& [key, sf] : stripped_index) {
    auto nit = named_index.find(key);
    if (nit == named_index.end()) {
      ++local.stripped_without_named;
      continue;
    }
    auto sit = by_name.find(nit->second->name);
    if (sit == by_name.end()) {
      ++local.no_summary;
      continue;
    }
    DatasetSample sample;
    sample.arch = sf->arch;
    sample.opt_level = options.opt_level;
    sample.id = arch_name(sf->arch) + "-" + opt_level_name(options.opt_level) + "-" +
                format_hex(sf->start_addr);
    sample.function = *sf;
    sample.name = nit->second->name;
    sample.summary = sit->second->summary;
    sample.project = project_of(sit->second->source_path);
    out.push_back(std::move(sample));
  }
  for (const auto& [key, nf] : named_index) {
    if (!stripped_index.count(key)) ++local.named_without_stripped;
  }
  local.paired = out.size();
  if (stats) *stats = local;
  if (out.empty()) {
    throw EmptyDatasetError("no function joined: " + std::to_string(local.stripped_without_named) +
                            " stripped without a named match, " + std::to_string(local.no_summary) +
                            " without a summary");
  }
  return out;
}

// --- splitting ------------------------------------------------------------

SplitRatios parse_ratios(std::string_view text) {
  std::vector<double> values;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad ratio '" + item + "'");
    }
  }
  if (values.size() != 3)
    throw ConfigError("expected three ratios, got '" + std::string(text) + "'");
  return {values[0], values[1], values[2]};
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
  const auto round = [](double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); };
  std::size_t train = std::min(n, round(ratios.train * static_cast<double>(n)));
  std::size_t valid = std::min(n - train, round(ratios.valid * static_cast<double>(n)));
  return {train, valid, n - train - valid};
}

void split_dataset(std::vector<DatasetSample>& samples, const SplitRatios& ratios,
                   std::uint64_t seed, bool by_project) {
  const double sum = ratios.train + ratios.valid + ratios.test;
  if (ratios.train < 0 || ratios.valid < 0 || ratios.test < 0 || std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  Rng rng(seed);
  const auto sizes = split_sizes(samples.size(), ratios);

  if (!by_project) {
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      Split s = Split::kTest;
      if (rank < sizes[0]) {
        s = Split::kTrain;
      } else if (rank < sizes[0] + sizes[1]) {
        s = Split::kValid;
      }
      samples[order[rank]].split = s;
    }
    return;
  }

  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i) groups[samples[i].project].push_back(i);
  std::vector<const std::vector<std::size_t>*> order;
  for (const auto& [name, members] : groups) order.push_back(&members);
  shuffle(order, rng);
  std::size_t assigned = 0;
  for (const auto* members : order) {
    Split s = Split::kTest;
    if (assigned < sizes[0]) {
      s = Split::kTrain;
    } else if (assigned < sizes[0] + sizes[1]) {
      s = Split::kValid;
    }
    for (std::size_t idx : *members) samples[idx].split = s;
    assigned += members->size();
  }
}

// --- dataset files --------------------------------------------------------

json sample_to_json(const DatasetSample& sample) {
  json j;
  j["id"] = sample.id;
  j["name"] = sample.name;
  j["arch"] = arch_name(sample.arch);
  j["opt"] = opt_level_name(sample.opt_level);
  j["tokens_asm"] = sample.tokens_asm;
  if (sample.function.pseudo) {
    j["pseudo"] = *sample.function.pseudo;
  } else {
    j["pseudo"] = nullptr;
  }
  j["summary"] = tokenize_summary(sample.summary).tokens;
  j["split"] = split_name(sample.split);
  j["project"] = sample.project;
  json fn = function_to_json(sample.function);
  fn.erase("pseudo");
  j["function"] = std::move(fn);
  return j;
}

DatasetSample sample_from_json(const json& record) {
  DatasetSample s;
  s.id = record.at("id").get<std::string>();
  s.name = record.value("name", std::string());
  s.arch = parse_arch(record.at("arch").get<std::string>());
  s.opt_level = parse_opt_level(record.value("opt", std::string("O1")));
  s.function = function_from_json(record.at("function"), s.arch);
  if (record.contains("pseudo") && record.at("pseudo").is_string()) {
    s.function.pseudo = record.at("pseudo").get<std::string>();
  }
  const json& summary = record.at("summary");
  if (summary.is_array()) {
    std::string text;
    for (const auto& w : summary) {
      if (!text.empty()) text.push_back(' ');
      text += w.get<std::string>();
    }
    s.summary = text;
  } else {
    s.summary = summary.get<std::string>();
  }
  s.split = parse_split(record.value("split", std::string("train")));
  s.project = record.value("project", std::string());
  if (record.contains("tokens_asm")) {
    s.tokens_asm = record.at("tokens_asm").get<std::vector<std::string>>();
  }
  return s;
}

void write_dataset(const fs::path& path, const std::vector<DatasetSample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& s : samples) out << sample_to_json(s).dump() << '\n';
  if (!out) throw ConfigError("write failed for " + path.string());
}

std::vector<DatasetSample> read_dataset(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset " + path.string());
  std::vector<DatasetSample> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(sample_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno);
    }
    if (!ids.insert(out.back().id).second) {
      throw ValidationError("duplicate sample id " + out.back().id);
    }
  }
  return out;
}

fs::path dataset_file(const fs::path& dir) { return dir / "dataset.jsonl"; }

}  // namespace bcs
