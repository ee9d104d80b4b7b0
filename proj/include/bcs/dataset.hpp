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

#ifndef BCS_DATASET_HPP_
#define BCS_DATASET_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bcs/listing.hpp"
#include "json.hpp"

namespace bcs {

struct SummaryRecord {
  std::string function_name;
  std::string summary;
  std::string source_path;
};

enum class OptLevel { kO1, kO2, kO3 };
enum class Split { kTrain, kValid, kTest };

OptLevel parse_opt_level(std::string_view text);
std::string opt_level_name(OptLevel level);
Split parse_split(std::string_view text);
std::string split_name(Split split);

struct DatasetSample {
  std::string id;
  Arch arch = Arch::kX64;
  OptLevel opt_level = OptLevel::kO1;
  DisasmFunction function;  // stripped
  // Name from the unstripped listing; a label only, never a model input.
  std::string name;
  std::string summary;
  Split split = Split::kTrain;
  // Project the summary came from (first path component under the source
  // root); used by project-level splitting.
  std::string project;
  // Filled by normalization; empty until then.
  std::vector<std::string> tokens_asm;
};

// --- summary extraction ---------------------------------------------------

// First sentence of a `/** ... */` body: comment markers and leading `*`
// stripped, doc-tag lines (`@param`, `\return`, ...) dropped, cut at the
// first `.`, `!` or `?` outside parentheses that ends a word. Falls back to
// the first prose line. Returns nullopt when nothing is left.
std::optional<std::string> first_sentence(std::string_view comment_body);

// Scans one C source text. Only `/** */` blocks at file scope that are
// followed (blank lines aside) by a function declaration qualify.
std::vector<SummaryRecord> extract_summaries_from_text(std::string_view source,
                                                       const std::string& source_path);

// Walks `source_root` recursively for .c/.h files in sorted path order.
// Unreadable files are skipped with a warning.
std::vector<SummaryRecord> extract_summaries(const std::filesystem::path& source_root);

// --- pairing and splitting ------------------------------------------------

struct PairStats {
  std::size_t paired = 0;
  std::size_t stripped_without_named = 0;
  std::size_t named_without_stripped = 0;
  std::size_t no_summary = 0;
  std::size_t duplicate_summaries = 0;
};

struct PairOptions {
  OptLevel opt_level = OptLevel::kO1;
};

// Joins named to stripped functions on (start_addr, end_addr), then to
// summaries on the function name. Output is sorted by start address.
// Throws ValidationError on duplicate boundary keys and EmptyDatasetError
// when nothing joins.
std::vector<DatasetSample> make_pairs(const std::vector<DisasmFunction>& stripped,
                                      const std::vector<DisasmFunction>& named,
                                      const std::vector<SummaryRecord>& summaries,
                                      const PairOptions& options = {}, PairStats* stats = nullptr);

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

// Parses "0.8,0.1,0.1". Throws ConfigError.
SplitRatios parse_ratios(std::string_view text);

// Seeded Fisher-Yates shuffle followed by contiguous assignment. With
// `by_project`, whole projects are shuffled and assigned instead. Throws
// ConfigError unless the ratios are non-negative and sum to 1 +- 1e-9.
void split_dataset(std::vector<DatasetSample>& samples, const SplitRatios& ratios,
                   std::uint64_t seed, bool by_project = false);

// Split sizes for `n` items: train and valid rounded, test takes the rest.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

// --- dataset files --------------------------------------------------------

nlohmann::json sample_to_json(const DatasetSample& sample);
DatasetSample sample_from_json(const nlohmann::json& record);

void write_dataset(const std::filesystem::path& path, const std::vector<DatasetSample>& samples);
std::vector<DatasetSample> read_dataset(const std::filesystem::path& path);

// Path of the dataset file inside a dataset directory.
std::filesystem::path dataset_file(const std::filesystem::path& dir);

}  // namespace bcs

#endif  // BCS_DATASET_HPP_
