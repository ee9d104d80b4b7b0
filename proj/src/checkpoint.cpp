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

#include "bcs/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bcs/error.hpp"
#include "bcs/vocab.hpp"

namespace bcs {

namespace {

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFU) << 24) | ((v & 0xFF00U) << 8) | ((v >> 8) & 0xFF00U) | (v >> 24);
  }
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

nlohmann::json vocab_hashes(const Vocabularies& v) {
  return {{"asm", v.asm_vocab.hash()}, {"pseudo", v.pseudo.hash()}, {"summary", v.summary.hash()}};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const Model<float>& model,
                     const Vocabularies& vocabs, const nlohmann::json& extra) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw ConfigError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());

  std::string blob;
  nlohmann::json tensors = nlohmann::json::array();
  const auto& params = model.parameters();
  const auto& names = model.parameter_names();
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Matrix<float>& m = params[k].value();
    tensors.push_back({{"name", names[k]},
                       {"shape", {m.rows(), m.cols()}},
                       {"offset", blob.size()},
                       {"bytes", static_cast<std::size_t>(m.size()) * 4}});
    for (Index i = 0; i < m.size(); ++i) {
      std::uint32_t bits;
      const float f = m.data()[i];
      std::memcpy(&bits, &f, 4);
      bits = to_little_endian(bits);
      blob.append(reinterpret_cast<const char*>(&bits), 4);
    }
  }
  nlohmann::json manifest = {
      {"format", kCheckpointFormat},
      {"config", model.config().to_json()},
      {"vocab_hashes", vocab_hashes(vocabs)},
      {"tensors", tensors},
      {"blob", "params.bin"},
      {"blob_bytes", blob.size()},
      {"blob_fnv1a", hex64(fnv1a64(blob.data(), blob.size()))},
      {"extra", extra},
  };
  {
    std::ofstream out(dir / "params.bin", std::ios::binary);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw ConfigError("cannot write " + (dir / "params.bin").string());
  }
  vocabs.save(dir);
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw ConfigError("cannot write " + (dir / "manifest.json").string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir,
                                 const Vocabularies* expected_vocabs,
                                 const ModelConfig* expected_config) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ConfigError("cannot read checkpoint manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed checkpoint manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != kCheckpointFormat) {
    throw ValidationError("unsupported checkpoint format in " + dir.string());
  }
  const ModelConfig cfg = ModelConfig::from_json(manifest.at("config"));
  if (expected_config && !(*expected_config == cfg)) {
    throw ValidationError("checkpoint config does not match the requested config");
  }

  Vocabularies vocabs = Vocabularies::load(dir);
  if (vocab_hashes(vocabs) != manifest.at("vocab_hashes")) {
    throw ValidationError("vocabulary hash mismatch: stored vocabularies differ from the manifest");
  }
  if (expected_vocabs && vocab_hashes(*expected_vocabs) != manifest.at("vocab_hashes")) {
    throw ValidationError(
        "vocabulary hash mismatch: checkpoint was trained with other vocabularies");
  }

  std::ifstream bin(dir / manifest.value("blob", "params.bin"), std::ios::binary);
  if (!bin) throw ConfigError("cannot read checkpoint parameters in " + dir.string());
  const std::string blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  if (blob.size() != manifest.at("blob_bytes").get<std::size_t>()) {
    throw ValidationError("checkpoint blob size does not match the manifest");
  }
  if (hex64(fnv1a64(blob.data(), blob.size())) != manifest.value("blob_fnv1a", "")) {
    throw ValidationError("checkpoint blob digest does not match the manifest");
  }

  Model<float> model(cfg, 0);
  auto& params = model.parameters();
  const auto& names = model.parameter_names();
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != params.size()) {
    throw ValidationError("checkpoint has " + std::to_string(tensors.size()) +
                          " tensors, model expects " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& t = tensors[k];
    const auto shape = t.at("shape").get<std::vector<Index>>();
    if (t.at("name").get<std::string>() != names[k] || shape.size() != 2 ||
        shape[0] != params[k].rows() || shape[1] != params[k].cols()) {
      throw ValidationError("checkpoint tensor " + std::to_string(k) + " (" +
                            t.at("name").get<std::string>() + ") does not match " + names[k]);
    }
    const std::size_t offset = t.at("offset").get<std::size_t>();
    const std::size_t bytes = static_cast<std::size_t>(params[k].size()) * 4;
    if (offset + bytes > blob.size()) throw ValidationError("checkpoint tensor exceeds blob");
    Matrix<float>& m = params[k].mutable_value();
    for (Index i = 0; i < m.size(); ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, blob.data() + offset + static_cast<std::size_t>(i) * 4, 4);
      bits = to_little_endian(bits);
      std::memcpy(m.data() + i, &bits, 4);
    }
  }
  return LoadedCheckpoint{std::move(model), std::move(vocabs), std::move(manifest)};
}

}  // namespace bcs
