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

#ifndef BCS_CHECKPOINT_HPP_
#define BCS_CHECKPOINT_HPP_

#include <filesystem>

#include "bcs/features.hpp"
#include "bcs/model.hpp"
#include "json.hpp"

namespace bcs {

// Checkpoint directory layout:
//   manifest.json   tensor names, shapes, byte offsets, model config and
//                   vocabulary hashes
//   params.bin      all parameters as little-endian float32, in manifest order
//   *_vocab.json    the vocabularies the model was trained with
inline constexpr const char* kCheckpointFormat = "bcs-checkpoint-1";

// `extra` is stored verbatim under "extra" (training metadata).
void save_checkpoint(const std::filesystem::path& dir, const Model<float>& model,
                     const Vocabularies& vocabs,
                     const nlohmann::json& extra = nlohmann::json::object());

struct LoadedCheckpoint {
  Model<float> model;
  Vocabularies vocabs;
  nlohmann::json manifest;
};

// Refuses (ValidationError) when the stored vocabularies do not match the
// manifest hashes, when `expected_vocabs` differ from the stored ones, or
// when `expected_config` differs from the stored config.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir,
                                 const Vocabularies* expected_vocabs = nullptr,
                                 const ModelConfig* expected_config = nullptr);

}  // namespace bcs

#endif  // BCS_CHECKPOINT_HPP_
