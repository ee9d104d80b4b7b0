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

#include "bcs/manifest.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "bcs/error.hpp"
#include "bcs/vocab.hpp"

namespace bcs {

namespace fs = std::filesystem;

namespace {

std::uint64_t hash_file(const fs::path& path, std::uint64_t h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  char buf[1 << 15];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace

std::string path_digest(const fs::path& path) {
  std::uint64_t h = fnv1a64(nullptr, 0);
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(path)) {
      if (e.is_regular_file()) files.push_back(fs::relative(e.path(), path));
    }
    std::sort(files.begin(), files.end());
    for (const auto& rel : files) {
      const std::string name = rel.generic_string();
      h = fnv1a64(name.data(), name.size(), h);
      h = hash_file(path / rel, h);
    }
  } else {
    h = hash_file(path, h);
  }
  return hex(h);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void RunManifest::add_input(const fs::path& path) {
  inputs.emplace_back(path.string(), path_digest(path));
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json in = nlohmann::json::array();
  for (const auto& [p, d] : inputs) in.push_back({{"path", p}, {"fnv1a", d}});
  return {{"command", command},
          {"argv", argv},
          {"config", config},
          {"inputs", in},
          {"outputs", outputs},
          {"tool_version", kToolVersion},
          {"seed", seed},
          {"started_at", started_at},
          {"finished_at", finished_at}};
}

void RunManifest::write(const fs::path& path) {
  finished_at = utc_timestamp();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << to_json().dump(2) << '\n';
  if (!out) throw ConfigError("cannot write manifest " + path.string());
}

}  // namespace bcs
