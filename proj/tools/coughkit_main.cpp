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

#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "coughkit/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string manifest_path;
  std::string out_dir;
  int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool manifest_required = true) {
  cmd->add_option("--config", args.config_path, "experiment config JSON");
  cmd->add_option("--manifest", args.manifest_path, "dataset manifest CSV")->required(manifest_required);
  cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", args.seed, "experiment seed (overrides config)");
}

coughkit::config::ExperimentConfig resolve_config(const CommonArgs& args) {
  coughkit::config::ExperimentConfig cfg;
  if (!args.config_path.empty()) {
    cfg = coughkit::config::load_config(args.config_path);
  } else {
    cfg = coughkit::config::config_from_json(nlohmann::json::object());
  }
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (args.seed >= 0) {
    cfg.seed = static_cast<uint64_t>(args.seed);
    cfg.train_cfg.seed = cfg.seed;
    if (cfg.train_seeds.size() == 1) cfg.train_seeds = {cfg.seed};
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cough sound segmentation, feature extraction, training and evaluation"};
  app.require_subcommand(1);

  CommonArgs seg_args, feat_args, pre_args, ft_args, eval_args, pred_args;
  std::string eval_model, eval_scores, pred_model;

  CLI::App* seg = app.add_subcommand("segment", "detect cough onsets and cut fixed-duration segments");
  add_common(seg, seg_args);
  CLI::App* feat = app.add_subcommand("featurize", "log-mel spectrograms for every manifest row");
  add_common(feat, feat_args);
  CLI::App* pre = app.add_subcommand("pretrain", "teacher-student self-supervised pretraining");
  add_common(pre, pre_args);
  CLI::App* ft = app.add_subcommand("finetune", "supervised fine-tuning with per-seed reports");
  add_common(ft, ft_args);
  CLI::App* ev = app.add_subcommand("evaluate", "AUROC report on the test split");
  add_common(ev, eval_args);
  ev->add_option("--model", eval_model, "model checkpoint to score with");
  ev->add_option("--scores", eval_scores, "precomputed scores CSV (path,subject_id,score)");
  CLI::App* pred = app.add_subcommand("predict", "write per-file scores CSV");
  add_common(pred, pred_args);
  pred->add_option("--model", pred_model, "model checkpoint to score with")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    using namespace coughkit;
    std::string command;
    CommonArgs* args = nullptr;
    if (seg->parsed()) {
      command = "segment";
      args = &seg_args;
    } else if (feat->parsed()) {
      command = "featurize";
      args = &feat_args;
    } else if (pre->parsed()) {
      command = "pretrain";
      args = &pre_args;
    } else if (ft->parsed()) {
      command = "finetune";
      args = &ft_args;
    } else if (ev->parsed()) {
      command = "evaluate";
      args = &eval_args;
    } else {
      command = "predict";
      args = &pred_args;
    }

    config::ExperimentConfig cfg = resolve_config(*args);
    data::DatasetManifest manifest = data::parse_manifest(args->manifest_path);

    pipeline::RunResult result;
    if (command == "segment") {
      result = pipeline::run_segment(cfg, manifest);
    } else if (command == "featurize") {
      result = pipeline::run_featurize(cfg, manifest);
    } else if (command == "pretrain") {
      result = pipeline::run_pretrain(cfg, manifest);
    } else if (command == "finetune") {
      result = pipeline::run_finetune(cfg, manifest);
    } else if (command == "evaluate") {
      result = pipeline::run_evaluate(cfg, manifest, eval_model, eval_scores);
    } else {
      result = pipeline::run_predict(cfg, manifest, pred_model);
    }
    pipeline::write_run_record(cfg, command, result, args->manifest_path);
    std::cout << result.summary.dump(2) << std::endl;
    return 0;
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = e.what();
    std::cerr << err.dump() << std::endl;
    return 1;
  }
}
