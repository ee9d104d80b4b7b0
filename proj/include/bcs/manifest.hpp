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

#ifndef BCS_MANIFEST_HPP_
#define BCS_MANIFEST_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace bcs {

inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a digest (hex) of a file, or of a directory's regular files visited
// in sorted relative-path order (path and bytes both hashed).
std::string path_digest(const std::filesystem::path& path);

// Provenance record written beside the outputs of every command.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  std::string started_at;
  std::string finished_at;

  void add_input(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  // Stamps finished_at and writes the JSON document.
  void write(const std::filesystem::path& path);
};

// UTC time in ISO-8601.
std::string utc_timestamp();

}  // namespace bcs

#endif  // BCS_MANIFEST_HPP_
