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

#include "coughkit/augment.hpp"
#include "coughkit/dsp.hpp"
#include "coughkit/segmenter.hpp"
#include "coughkit/ssl.hpp"
#include "coughkit/train.hpp"
#include "coughkit/vit.hpp"

namespace coughkit::config {

/// All stage settings plus the experiment seed. JSON sections are named per
/// module; unknown keys are rejected so typos fail loudly.
struct ExperimentConfig {
  uint64_t seed = 0;
  std::string out_dir = "out";

  int target_sample_rate_hz = audio::kDefaultSampleRateHz;

  dsp::StftParams stft;
  int n_mels = 128;
  double f_min = 0.0;
  double f_max = 8000.0;

  segmenter::OnsetConfig onset;

  augment::WaveAugConfig wave_aug;
  bool wave_aug_enabled = true;
  augment::SpecAugConfig spec_aug;
  augment::MixupConfig mixup;

  ssl::SslConfig ssl_cfg;
  std::string ssl_init_checkpoint;

  model::VitConfig model_cfg;
  dsp::ModelInputSpec input_spec;

  train::TrainConfig train_cfg;
  std::vector<uint64_t> train_seeds;  // defaults to {seed}
  std::string train_init_checkpoint;

  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Fully resolved config (every field explicit); feeds the reproducibility
/// record and the config hash.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// FNV-1a hash of the canonical config JSON, hex encoded.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace coughkit::config
