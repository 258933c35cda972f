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

#include "coughkit/config.hpp"
#include "coughkit/manifest.hpp"
#include "coughkit/train.hpp"

namespace coughkit::pipeline {

struct RunResult {
  nlohmann::json summary;
  std::vector<std::string> artifacts;
};

/// Detect onsets per recording and write fixed-duration segment WAVs plus
/// the index CSV `source_id,onset_frame,onset_time_s,segment_path` and a
/// downstream manifest inheriting label/subject/split.
RunResult run_segment(const config::ExperimentConfig& cfg, const data::DatasetManifest& manifest);

/// Log-mel features (one .spec per row) plus a downstream manifest.
RunResult run_featurize(const config::ExperimentConfig& cfg, const data::DatasetManifest& manifest);

/// Teacher-student self-supervised pretraining on the training split.
RunResult run_pretrain(const config::ExperimentConfig& cfg, const data::DatasetManifest& manifest);

/// Supervised fine-tuning, one run per configured seed; per-seed checkpoints
/// and metrics plus an aggregated report.
RunResult run_finetune(const config::ExperimentConfig& cfg, const data::DatasetManifest& manifest);

/// Scores the test split with a model checkpoint (or joins precomputed
/// scores) and reports AUROC under the configured aggregation.
RunResult run_evaluate(const config::ExperimentConfig& cfg, const data::DatasetManifest& manifest,
                       const std::string& model_path, const std::string& scores_csv = "");

/// Scores every manifest row and writes `path,subject_id,score`.
RunResult run_predict(const config::ExperimentConfig& cfg, const data::DatasetManifest& manifest,
                      const std::string& model_path);

/// Loads one manifest row into a training sample (decodes WAVs or reads
/// .spec feature files; resamples to the pipeline rate).
train::Sample load_sample(const config::ExperimentConfig& cfg, const data::DatasetManifest& manifest,
                          const data::ManifestRow& row, bool keep_audio);

/// Reproducibility record: full resolved config, seed, artifact hashes.
void write_run_record(const config::ExperimentConfig& cfg, const std::string& command,
                      const RunResult& result, const std::string& manifest_path);

std::string file_hash_hex(const std::string& path);

}  // namespace coughkit::pipeline
