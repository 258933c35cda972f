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

#include "coughkit/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "coughkit/checkpoint.hpp"
#include "coughkit/eval.hpp"
#include "coughkit/segmenter.hpp"
#include "coughkit/ssl.hpp"

namespace coughkit::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InvalidInput("cannot create directory " + dir + ": " + ec.message());
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

dsp::MelFilterbank filterbank_for(const config::ExperimentConfig& cfg) {
  const int nfft = cfg.stft.effective_fft_size(cfg.target_sample_rate_hz);
  return dsp::mel_filterbank(cfg.n_mels, nfft, cfg.target_sample_rate_hz, cfg.f_min, cfg.f_max);
}

// A fresh name per source stem; collisions get the manifest line appended.
class NameAllocator {
 public:
  std::string unique(const std::string& stem, int line_no) {
    if (used_.insert(stem).second) return stem;
    std::string alt = stem + "_l" + std::to_string(line_no);
    used_.insert(alt);
    return alt;
  }

 private:
  std::set<std::string> used_;
};

model::VitModel load_backbone(const std::string& path, const config::ExperimentConfig& cfg, Rng& head_rng) {
  io::TensorFile file = io::read_tensor_file(path);
  const bool is_ssl = file.has("student.patch_w");
  const std::string prefix = is_ssl ? "student." : "";
  model::VitConfig stored = io::vit_config_from_json(file.meta.at("model_config"));
  Rng zero(0);
  model::VitModel m = model::init_vit<float>(stored, zero);
  io::load_model_entries(m, file, prefix);
  if (stored.in_channels != cfg.model_cfg.in_channels || stored.in_height != cfg.model_cfg.in_height ||
      stored.in_width != cfg.model_cfg.in_width || stored.embed_dim != cfg.model_cfg.embed_dim ||
      stored.depth != cfg.model_cfg.depth || stored.n_heads != cfg.model_cfg.n_heads ||
      stored.patch_size != cfg.model_cfg.patch_size) {
    throw InvalidInput("checkpoint " + path + " has a different backbone shape than the config");
  }
  if (stored.n_classes != cfg.model_cfg.n_classes) {
    m = model::replace_head(m, cfg.model_cfg.n_classes, head_rng);
  }
  return m;
}

std::vector<train::Sample> load_samples(const config::ExperimentConfig& cfg,
                                        const data::DatasetManifest& manifest, bool keep_audio) {
  std::vector<train::Sample> samples;
  samples.reserve(manifest.rows.size());
  for (const auto& row : manifest.rows) {
    samples.push_back(load_sample(cfg, manifest, row, keep_audio));
  }
  return samples;
}

struct ScoreRow {
  std::string path, subject_id;
  double score;
};

std::vector<ScoreRow> read_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open scores CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("scores CSV is empty: " + path);
  if (line != "path,subject_id,score" && line != "path,subject_id,score\r") {
    throw InvalidInput(path + ":1: scores header must be 'path,subject_id,score'");
  }
  std::vector<ScoreRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    ScoreRow r;
    std::string score_str;
    if (!std::getline(ls, r.path, ',') || !std::getline(ls, r.subject_id, ',') || !std::getline(ls, score_str)) {
      throw InvalidInput(path + ":" + std::to_string(line_no) + ": expected 3 fields");
    }
    r.score = std::stod(score_str);
    rows.push_back(std::move(r));
  }
  return rows;
}

json report_to_json(const eval::EvalReport& report, const config::ExperimentConfig& cfg) {
  json j;
  j["aggregation"] = report.aggregation;
  j["seeds"] = report.seeds;
  json per_seed = json::array();
  for (size_t i = 0; i < report.per_seed_auroc.size(); ++i) {
    if (report.seed_failed[i]) {
      per_seed.push_back(nullptr);
    } else {
      per_seed.push_back(report.per_seed_auroc[i]);
    }
  }
  j["per_seed_auroc"] = std::move(per_seed);
  j["n_succeeded"] = report.n_succeeded;
  j["mean_auroc"] = report.mean_auroc;
  j["n_pos"] = report.n_pos;
  j["n_neg"] = report.n_neg;
  j["config_hash"] = config::config_hash(cfg);
  return j;
}

}  // namespace

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot hash missing file: " + path);
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    h = fnv1a64(buf, static_cast<size_t>(in.gcount()), h);
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

train::Sample load_sample(const config::ExperimentConfig& cfg, const data::DatasetManifest& manifest,
                          const data::ManifestRow& row, bool keep_audio) {
  train::Sample s;
  s.label = row.label;
  s.subject_id = row.subject_id;
  s.path = row.path;
  s.is_test = row.is_test;

  const std::string resolved = manifest.resolve(row);
  if (ends_with(resolved, ".spec")) {
    s.logmel = dsp::read_spectrogram_file(resolved);
    if (s.logmel.kind != dsp::SpecKind::kLogMel) {
      throw InvalidInput("feature file is not a log-mel spectrogram: " + resolved);
    }
  } else {
    audio::AudioClip clip = audio::read_wav_file(resolved);
    clip = audio::resample(clip, cfg.target_sample_rate_hz);
    static thread_local struct {
      int nfft = -1, n_mels = -1, rate = -1;
      double f_min = 0, f_max = 0;
      dsp::MelFilterbank fb;
    } cache;
    const int nfft = cfg.stft.effective_fft_size(cfg.target_sample_rate_hz);
    if (cache.nfft != nfft || cache.n_mels != cfg.n_mels || cache.rate != cfg.target_sample_rate_hz ||
        cache.f_min != cfg.f_min || cache.f_max != cfg.f_max) {
      cache.fb = dsp::mel_filterbank(cfg.n_mels, nfft, cfg.target_sample_rate_hz, cfg.f_min, cfg.f_max);
      cache.nfft = nfft;
      cache.n_mels = cfg.n_mels;
      cache.rate = cfg.target_sample_rate_hz;
      cache.f_min = cfg.f_min;
      cache.f_max = cfg.f_max;
    }
    s.logmel = dsp::log_mel(dsp::stft_magnitude(clip, cfg.stft), cache.fb);
    if (keep_audio) s.audio = std::move(clip);
  }
  return s;
}

RunResult run_segment(const config::ExperimentConfig& cfg, const data::DatasetManifest& manifest) {
  const std::string seg_dir = cfg.out_dir + "/segments";
  ensure_dir(seg_dir);

  RunResult result;
  std::ofstream index(seg_dir + "/index.csv");
  if (!index) throw InvalidInput("cannot open segment index for writing");
  index << "source_id,onset_frame,onset_time_s,segment_path\n";

  data::DatasetManifest seg_manifest;
  seg_manifest.base_dir = "";
  NameAllocator names;
  int n_segments = 0, n_skipped = 0;

  for (const auto& row : manifest.rows) {
    audio::AudioClip clip = audio::read_wav_file(manifest.resolve(row));
    clip = audio::resample(clip, cfg.target_sample_rate_hz);
    clip.source_id = row.path;

    std::vector<int> onsets = segmenter::detect_onsets(clip, cfg.onset);
    auto extracted = segmenter::extract_segments(clip, onsets, cfg.onset.segment_duration_s, cfg.onset.stft);
    n_skipped += extracted.skipped;

    const std::string stem = names.unique(stem_of(row.path), row.line_no);
    for (const auto& seg : extracted.segments) {
      const std::string seg_path = seg_dir + "/" + stem + "_onset" + std::to_string(seg.onset_frame) + ".wav";
      audio::write_wav_file(seg_path, seg.clip);
      index << row.path << "," << seg.onset_frame << "," << fmt_double(seg.onset_time_s) << "," << seg_path
            << "\n";
      result.artifacts.push_back(seg_path);
      data::ManifestRow seg_row;
      seg_row.path = seg_path;
      seg_row.label = row.label;
      seg_row.subject_id = row.subject_id;
      seg_row.is_test = row.is_test;
      seg_manifest.rows.push_back(std::move(seg_row));
      ++n_segments;
    }
  }
  index.close();
  result.artifacts.push_back(seg_dir + "/index.csv");

  const std::string seg_manifest_path = cfg.out_dir + "/segments_manifest.csv";
  data::write_manifest(seg_manifest_path, seg_manifest);
  result.artifacts.push_back(seg_manifest_path);

  result.summary = {{"command", "segment"},
                    {"n_sources", manifest.rows.size()},
                    {"n_segments", n_segments},
                    {"n_skipped_onsets", n_skipped},
                    {"segments_manifest", seg_manifest_path}};
  return result;
}

RunResult run_featurize(const config::ExperimentConfig& cfg, const data::DatasetManifest& manifest) {
  const std::string feat_dir = cfg.out_dir + "/features";
  ensure_dir(feat_dir);

  RunResult result;
  data::DatasetManifest feat_manifest;
  feat_manifest.base_dir = "";
  NameAllocator names;

  const dsp::MelFilterbank fb = filterbank_for(cfg);
  for (const auto& row : manifest.rows) {
    audio::AudioClip clip = audio::read_wav_file(manifest.resolve(row));
    clip = audio::resample(clip, cfg.target_sample_rate_hz);
    dsp::Spectrogram logmel = dsp::log_mel(dsp::stft_magnitude(clip, cfg.stft), fb);

    const std::string stem = names.unique(stem_of(row.path), row.line_no);
    const std::string feat_path = feat_dir + "/" + stem + ".spec";
    dsp::write_spectrogram_file(feat_path, logmel);
    result.artifacts.push_back(feat_path);

    data::ManifestRow feat_row;
    feat_row.path = feat_path;
    feat_row.label = row.label;
    feat_row.subject_id = row.subject_id;
    feat_row.is_test = row.is_test;
    feat_manifest.rows.push_back(std::move(feat_row));
  }

  const std::string feat_manifest_path = cfg.out_dir + "/features_manifest.csv";
  data::write_manifest(feat_manifest_path, feat_manifest);
  result.artifacts.push_back(feat_manifest_path);

  result.summary = {{"command", "featurize"},
                    {"n_features", manifest.rows.size()},
                    {"n_mels", cfg.n_mels},
                    {"features_manifest", feat_manifest_path}};
  return result;
}

RunResult run_pretrain(const config::ExperimentConfig& cfg, const data::DatasetManifest& manifest) {
  ensure_dir(cfg.out_dir);
  RunResult result;

  std::vector<ad::Tensor<float>> patch_sets;
  for (const auto& row : manifest.rows) {
    if (row.is_test) continue;  // pretraining uses the (unlabeled) training split
    train::Sample s = load_sample(cfg, manifest, row, false);
    dsp::ModelInput input = dsp::to_model_input(s.logmel, cfg.input_spec);
    patch_sets.push_back(model::patchify<float>(input, cfg.model_cfg.patch_size));
  }
  if (patch_sets.empty()) throw InvalidInput("pretrain: no training-split rows in the manifest");

  Rng init_rng = Rng::substream(cfg.seed, "ssl_init");
  ssl::PretrainState state = ssl::init_pretrain(cfg.model_cfg, cfg.ssl_cfg, init_rng);
  if (!cfg.ssl_init_checkpoint.empty()) {
    Rng head_rng = Rng::substream(cfg.seed, "ssl_head_init");
    state.student = load_backbone(cfg.ssl_init_checkpoint, cfg, head_rng);
    state.teacher = model::clone_model(state.student);
    state.student.set_requires_grad(true);
    state.teacher.set_requires_grad(false);
  }

  const std::string loss_csv_path = cfg.out_dir + "/pretrain_losses.csv";
  std::ofstream loss_csv(loss_csv_path);
  loss_csv << "step,total,global,local\n";

  Rng mask_rng = Rng::substream(cfg.seed, "ssl_mask");
  Rng order_rng = Rng::substream(cfg.seed, "ssl_order");
  std::vector<int> order(patch_sets.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  ssl::StepLosses last{};
  size_t cursor = 0;
  for (int step = 0; step < cfg.ssl_cfg.steps; ++step) {
    std::vector<ad::Tensor<float>> batch;
    for (int b = 0; b < cfg.ssl_cfg.batch_size; ++b) {
      if (cursor == 0) order_rng.shuffle(order);
      batch.push_back(patch_sets[order[cursor]]);
      cursor = (cursor + 1) % order.size();
    }
    last = ssl::pretrain_step(state, batch, cfg.ssl_cfg, mask_rng);
    loss_csv << step << "," << fmt_double(last.total) << "," << fmt_double(last.global_loss) << ","
             << fmt_double(last.local_loss) << "\n";
  }
  loss_csv.close();
  result.artifacts.push_back(loss_csv_path);

  const std::string ckpt_path = cfg.out_dir + "/ssl_checkpoint.ckpt";
  {
    std::vector<io::TensorEntry> entries = io::model_entries(state.student, "student.");
    auto teacher_entries = io::model_entries(state.teacher, "teacher.");
    entries.insert(entries.end(), teacher_entries.begin(), teacher_entries.end());
    for (const auto& [name, t] : state.decoder.named_parameters()) {
      entries.push_back(io::TensorEntry{"decoder." + name, t.shape(), t.data()});
    }
    for (const auto& [name, slot] : state.opt.slots) {
      entries.push_back(io::TensorEntry{"opt.m." + name, {static_cast<int>(slot.m.size())}, slot.m});
      entries.push_back(io::TensorEntry{"opt.v." + name, {static_cast<int>(slot.v.size())}, slot.v});
    }
    json meta;
    meta["model_config"] = io::vit_config_to_json(state.student.cfg);
    meta["opt_step"] = state.opt.step;
    meta["ssl_steps_done"] = cfg.ssl_cfg.steps;
    io::write_tensor_file(ckpt_path, meta, entries);
  }
  result.artifacts.push_back(ckpt_path);

  result.summary = {{"command", "pretrain"},
                    {"steps", cfg.ssl_cfg.steps},
                    {"n_train_samples", patch_sets.size()},
                    {"final_total_loss", last.total},
                    {"final_global_loss", last.global_loss},
                    {"final_local_loss", last.local_loss},
                    {"checkpoint", ckpt_path}};
  return result;
}

RunResult run_finetune(const config::ExperimentConfig& cfg, const data::DatasetManifest& manifest) {
  ensure_dir(cfg.out_dir);
  RunResult result;

  const bool want_audio = cfg.wave_aug_enabled;
  std::vector<train::Sample> samples = load_samples(cfg, manifest, want_audio);

  train::WaveStage wave_stage;
  const train::WaveStage* wave_ptr = nullptr;
  if (cfg.wave_aug_enabled) {
    wave_stage.cfg = cfg.wave_aug;
    wave_stage.stft = cfg.stft;
    wave_stage.fb = filterbank_for(cfg);
    wave_ptr = &wave_stage;
  }

  int n_pos = 0, n_neg = 0;
  for (const auto& s : samples) {
    if (s.is_test) (s.label == 1 ? n_pos : n_neg) += 1;
  }

  auto run_one = [&](uint64_t seed) -> double {
    model::VitModel init_model = [&]() {
      if (!cfg.train_init_checkpoint.empty()) {
        Rng head_rng = Rng::substream(seed, "head_init");
        return load_backbone(cfg.train_init_checkpoint, cfg, head_rng);
      }
      Rng model_rng = Rng::substream(seed, "model_init");
      return model::init_vit<float>(cfg.model_cfg, model_rng);
    }();

    train::TrainConfig tcfg = cfg.train_cfg;
    tcfg.seed = seed;
    train::FinetuneResult ft =
        train::finetune(init_model, samples, tcfg, cfg.spec_aug, cfg.mixup, cfg.input_spec, wave_ptr);

    const std::string ckpt = cfg.out_dir + "/model_seed" + std::to_string(seed) + ".ckpt";
    io::save_model(ckpt, ft.best_model,
                   json{{"seed", seed}, {"best_epoch", ft.best_epoch}, {"best_auroc", ft.best_auroc}});
    result.artifacts.push_back(ckpt);

    const std::string metrics = cfg.out_dir + "/metrics_seed" + std::to_string(seed) + ".csv";
    std::ofstream mcsv(metrics);
    mcsv << "epoch,train_loss,eval_auroc,lr,seconds\n";
    for (const auto& e : ft.log) {
      mcsv << e.epoch << "," << fmt_double(e.train_loss) << "," << fmt_double(e.eval_auroc) << ","
           << fmt_double(e.lr) << "," << fmt_double(e.seconds) << "\n";
    }
    result.artifacts.push_back(metrics);
    return ft.best_auroc;
  };

  eval::EvalReport report = eval::multi_seed_report(run_one, cfg.train_seeds);
  report.aggregation = cfg.train_cfg.eval_aggregation;
  report.n_pos = n_pos;
  report.n_neg = n_neg;

  json report_json = report_to_json(report, cfg);
  report_json["command"] = "finetune";
  const std::string report_path = cfg.out_dir + "/finetune_report.json";
  {
    std::ofstream out(report_path);
    out << report_json.dump(2) << "\n";
  }
  result.artifacts.push_back(report_path);
  result.summary = report_json;
  return result;
}

RunResult run_evaluate(const config::ExperimentConfig& cfg, const data::DatasetManifest& manifest,
                       const std::string& model_path, const std::string& scores_csv) {
  ensure_dir(cfg.out_dir);
  RunResult result;

  std::vector<eval::ScoredSample> scored;
  if (!scores_csv.empty()) {
    auto rows = read_scores_csv(scores_csv);
    std::map<std::string, const data::ManifestRow*> by_path;
    for (const auto& r : manifest.rows) by_path[r.path] = &r;
    for (const auto& s : rows) {
      auto it = by_path.find(s.path);
      if (it == by_path.end()) throw InvalidInput("scores CSV names unknown path '" + s.path + "'");
      if (!it->second->is_test) continue;
      scored.push_back(eval::ScoredSample{s.subject_id, s.score, it->second->label});
    }
  } else {
    if (model_path.empty()) throw InvalidInput("evaluate: need a model checkpoint or a scores CSV");
    model::VitModel m = io::load_model(model_path);
    for (const auto& row : manifest.rows) {
      if (!row.is_test) continue;
      train::Sample s = load_sample(cfg, manifest, row, false);
      std::vector<double> score = train::score_samples(m, {s}, cfg.input_spec);
      scored.push_back(eval::ScoredSample{row.subject_id, score[0], row.label});
    }
  }
  if (scored.empty()) throw InvalidInput("evaluate: no test-split samples to score");

  std::vector<eval::ScoredSample> units =
      cfg.train_cfg.eval_aggregation == "subject_mean" ? eval::aggregate_by_subject(scored) : scored;
  std::vector<double> s(units.size());
  std::vector<int> l(units.size());
  int n_pos = 0, n_neg = 0;
  for (size_t i = 0; i < units.size(); ++i) {
    s[i] = units[i].score;
    l[i] = units[i].label;
    (l[i] == 1 ? n_pos : n_neg) += 1;
  }
  const double auc = eval::auroc(s, l);

  eval::EvalReport report;
  report.seeds = {cfg.seed};
  report.per_seed_auroc = {auc};
  report.seed_failed = {false};
  report.mean_auroc = auc;
  report.n_succeeded = 1;
  report.n_pos = n_pos;
  report.n_neg = n_neg;
  report.aggregation = cfg.train_cfg.eval_aggregation;

  json report_json = report_to_json(report, cfg);
  report_json["command"] = "evaluate";
  const std::string report_path = cfg.out_dir + "/eval_report.json";
  {
    std::ofstream out(report_path);
    out << report_json.dump(2) << "\n";
  }
  result.artifacts.push_back(report_path);
  result.summary = report_json;
  return result;
}

RunResult run_predict(const config::ExperimentConfig& cfg, const data::DatasetManifest& manifest,
                      const std::string& model_path) {
  ensure_dir(cfg.out_dir);
  if (model_path.empty()) throw InvalidInput("predict: need a model checkpoint");
  model::VitModel m = io::load_model(model_path);

  RunResult result;
  const std::string pred_path = cfg.out_dir + "/predictions.csv";
  std::ofstream out(pred_path);
  out << "path,subject_id,score\n";
  for (const auto& row : manifest.rows) {
    train::Sample s = load_sample(cfg, manifest, row, false);
    std::vector<double> score = train::score_samples(m, {s}, cfg.input_spec);
    out << row.path << "," << row.subject_id << "," << fmt_double(score[0]) << "\n";
  }
  out.close();
  result.artifacts.push_back(pred_path);
  result.summary = {{"command", "predict"}, {"n_scored", manifest.rows.size()}, {"predictions", pred_path}};
  return result;
}

void write_run_record(const config::ExperimentConfig& cfg, const std::string& command,
                      const RunResult& result, const std::string& manifest_path) {
  ensure_dir(cfg.out_dir);
  json record;
  record["command"] = command;
  record["seed"] = cfg.seed;
  record["config"] = config::config_to_json(cfg);
  record["config_hash"] = config::config_hash(cfg);
  if (!manifest_path.empty()) {
    record["manifest"] = {{"path", manifest_path}, {"hash", file_hash_hex(manifest_path)}};
  }
  json arts = json::array();
  for (const auto& a : result.artifacts) {
    arts.push_back({{"path", a}, {"hash", file_hash_hex(a)}});
  }
  record["artifacts"] = std::move(arts);

  std::ofstream out(cfg.out_dir + "/run_record_" + command + ".json");
  out << record.dump(2) << "\n";
}

}  // namespace coughkit::pipeline
