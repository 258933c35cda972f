// Copyright 2026 The CoughKit Authors
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

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coughkit/vit.hpp"

namespace coughkit::io {

/// One named tensor inside a checkpoint container.
struct TensorEntry {
  std::string name;
  ad::Shape shape;
  std::vector<float> data;
};

/// Container layout: one line of JSON (config plus a tensor directory of
/// name/shape/byte offset), then raw little-endian float32 tensor data.
/// Write/read round trips are bitwise exact.
void write_tensor_file(const std::string& path, const nlohmann::json& meta,
                       const std::vector<TensorEntry>& tensors);

struct TensorFile {
  nlohmann::json meta;
  std::vector<TensorEntry> tensors;

  const TensorEntry& get(const std::string& name) const;
  bool has(const std::string& name) const;
};

TensorFile read_tensor_file(const std::string& path);

nlohmann::json vit_config_to_json(const model::VitConfig& cfg);
model::VitConfig vit_config_from_json(const nlohmann::json& j);

/// Collects a model's parameters as checkpoint entries, names prefixed.
std::vector<TensorEntry> model_entries(const model::VitModel& m, const std::string& prefix = "");

/// Loads parameters back into a freshly shaped model; every prefixed tensor
/// must exist with a matching shape.
void load_model_entries(model::VitModel& m, const TensorFile& file, const std::string& prefix = "");

void save_model(const std::string& path, const model::VitModel& m, nlohmann::json extra = {});
model::VitModel load_model(const std::string& path);

}  // namespace coughkit::io
