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

#include "coughkit/checkpoint.hpp"

#include <fstream>

namespace coughkit::io {

void write_tensor_file(const std::string& path, const nlohmann::json& meta,
                       const std::vector<TensorEntry>& tensors) {
  nlohmann::json header;
  header["format"] = "coughkit-tensors-v1";
  header["meta"] = meta;
  nlohmann::json dir = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& t : tensors) {
    if (ad::numel(t.shape) != t.data.size()) {
      throw InvalidInput("checkpoint: tensor '" + t.name + "' shape/data mismatch");
    }
    nlohmann::json e;
    e["name"] = t.name;
    e["shape"] = t.shape;
    e["offset"] = offset;
    dir.push_back(std::move(e));
    offset += t.data.size() * 4;
  }
  header["tensors"] = std::move(dir);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open checkpoint for writing: " + path);
  out << header.dump() << "\n";
  for (const auto& t : tensors) {
    out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * 4));
  }
  if (!out) throw InvalidInput("short write to checkpoint: " + path);
}

const TensorEntry& TensorFile::get(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw InvalidInput("checkpoint: tensor '" + name + "' not found");
}

bool TensorFile::has(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

TensorFile read_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("checkpoint missing header: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("checkpoint header is not valid JSON (" + path + "): " + e.what());
  }
  if (header.value("format", "") != "coughkit-tensors-v1") {
    throw InvalidInput("checkpoint has unknown format tag: " + path);
  }

  TensorFile file;
  file.meta = header.value("meta", nlohmann::json::object());
  const std::streampos data_start = in.tellg();
  for (const auto& e : header.at("tensors")) {
    TensorEntry t;
    t.name = e.at("name").get<std::string>();
    t.shape = e.at("shape").get<ad::Shape>();
    const uint64_t offset = e.at("offset").get<uint64_t>();
    t.data.resize(ad::numel(t.shape));
    in.seekg(data_start + static_cast<std::streamoff>(offset));
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * 4));
    if (in.gcount() != static_cast<std::streamsize>(t.data.size() * 4)) {
      throw InvalidInput("checkpoint truncated at tensor '" + t.name + "': " + path);
    }
    file.tensors.push_back(std::move(t));
  }
  return file;
}

nlohmann::json vit_config_to_json(const model::VitConfig& cfg) {
  return nlohmann::json{{"patch_size", cfg.patch_size}, {"embed_dim", cfg.embed_dim},
                        {"depth", cfg.depth},           {"n_heads", cfg.n_heads},
                        {"mlp_ratio", cfg.mlp_ratio},   {"in_channels", cfg.in_channels},
                        {"in_height", cfg.in_height},   {"in_width", cfg.in_width},
                        {"n_classes", cfg.n_classes}};
}

model::VitConfig vit_config_from_json(const nlohmann::json& j) {
  model::VitConfig cfg;
  cfg.patch_size = j.at("patch_size").get<int>();
  cfg.embed_dim = j.at("embed_dim").get<int>();
  cfg.depth = j.at("depth").get<int>();
  cfg.n_heads = j.at("n_heads").get<int>();
  cfg.mlp_ratio = j.at("mlp_ratio").get<int>();
  cfg.in_channels = j.at("in_channels").get<int>();
  cfg.in_height = j.at("in_height").get<int>();
  cfg.in_width = j.at("in_width").get<int>();
  cfg.n_classes = j.at("n_classes").get<int>();
  cfg.validate();
  return cfg;
}

std::vector<TensorEntry> model_entries(const model::VitModel& m, const std::string& prefix) {
  std::vector<TensorEntry> out;
  for (const auto& [name, t] : m.named_parameters()) {
    out.push_back(TensorEntry{prefix + name, t.shape(), t.data()});
  }
  return out;
}

void load_model_entries(model::VitModel& m, const TensorFile& file, const std::string& prefix) {
  for (auto& [name, t] : m.named_parameters()) {
    const TensorEntry& e = file.get(prefix + name);
    if (e.shape != t.shape()) {
      throw InvalidInput("checkpoint: tensor '" + prefix + name + "' has shape " + ad::shape_str(e.shape) +
                         ", model expects " + ad::shape_str(t.shape()));
    }
    ad::Tensor<float> handle = t;
    handle.data() = e.data;
  }
}

void save_model(const std::string& path, const model::VitModel& m, nlohmann::json extra) {
  nlohmann::json meta;
  meta["model_config"] = vit_config_to_json(m.cfg);
  if (!extra.is_null() && !extra.empty()) meta["extra"] = std::move(extra);
  write_tensor_file(path, meta, model_entries(m));
}

model::VitModel load_model(const std::string& path) {
  TensorFile file = read_tensor_file(path);
  model::VitConfig cfg = vit_config_from_json(file.meta.at("model_config"));
  Rng rng(0);
  model::VitModel m = model::init_vit<float>(cfg, rng);
  load_model_entries(m, file);
  return m;
}

}  // namespace coughkit::io
