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

#include "coughkit/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace coughkit::config {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& section) {
  if (!j.is_object()) throw InvalidInput("config: section '" + section + "' must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) {
      throw InvalidInput("config: unknown key '" + (section.empty() ? key : section + "." + key) + "'");
    }
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

void parse_range(const json& j, const char* key, double& lo, double& hi, const std::string& section) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2) {
    throw InvalidInput("config: " + section + "." + key + " must be a [min, max] pair");
  }
  lo = v[0].get<double>();
  hi = v[1].get<double>();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (target_sample_rate_hz <= 0) throw InvalidInput("config: audio.target_sample_rate_hz must be positive");
  if (n_mels < 1) throw InvalidInput("config: dsp.n_mels must be >= 1");
  onset.validate();
  wave_aug.validate();
  spec_aug.validate();
  mixup.validate();
  ssl_cfg.validate();
  model_cfg.validate();
  train_cfg.validate();
  if (train_seeds.empty()) throw InvalidInput("config: train.seeds must not be empty");
  if (!ssl_init_checkpoint.empty() && !std::filesystem::exists(ssl_init_checkpoint)) {
    throw InvalidInput("config: ssl.init_checkpoint does not exist: " + ssl_init_checkpoint);
  }
  if (!train_init_checkpoint.empty() && !std::filesystem::exists(train_init_checkpoint)) {
    throw InvalidInput("config: train.init_checkpoint does not exist: " + train_init_checkpoint);
  }
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  reject_unknown(j, {"seed", "out_dir", "audio", "dsp", "segmenter", "augment", "ssl", "model", "input", "train"},
                 "");

  cfg.seed = get_or<uint64_t>(j, "seed", 0);
  cfg.out_dir = get_or<std::string>(j, "out_dir", "out");

  if (j.contains("audio")) {
    const auto& a = j.at("audio");
    reject_unknown(a, {"target_sample_rate_hz"}, "audio");
    cfg.target_sample_rate_hz = get_or<int>(a, "target_sample_rate_hz", cfg.target_sample_rate_hz);
  }

  if (j.contains("dsp")) {
    const auto& d = j.at("dsp");
    reject_unknown(d, {"hop_s", "win_s", "fft_size", "n_mels", "f_min", "f_max"}, "dsp");
    cfg.stft.hop_s = get_or<double>(d, "hop_s", cfg.stft.hop_s);
    cfg.stft.win_s = get_or<double>(d, "win_s", cfg.stft.win_s);
    cfg.stft.fft_size = get_or<int>(d, "fft_size", cfg.stft.fft_size);
    cfg.n_mels = get_or<int>(d, "n_mels", cfg.n_mels);
    cfg.f_min = get_or<double>(d, "f_min", cfg.f_min);
    cfg.f_max = get_or<double>(d, "f_max", cfg.f_max);
  }
  cfg.onset.stft = cfg.stft;

  if (j.contains("segmenter")) {
    const auto& s = j.at("segmenter");
    reject_unknown(s,
                   {"band_lo_hz", "band_hi_hz", "log_base10", "smooth_order", "smooth_cutoff_hz",
                    "peak_threshold", "energy_window_frames", "onset_backoff_frames", "segment_duration_s"},
                   "segmenter");
    cfg.onset.band_lo_hz = get_or<double>(s, "band_lo_hz", cfg.onset.band_lo_hz);
    cfg.onset.band_hi_hz = get_or<double>(s, "band_hi_hz", cfg.onset.band_hi_hz);
    cfg.onset.ratio_log_base10 = get_or<bool>(s, "log_base10", cfg.onset.ratio_log_base10);
    cfg.onset.smooth_order = get_or<int>(s, "smooth_order", cfg.onset.smooth_order);
    cfg.onset.smooth_cutoff_hz = get_or<double>(s, "smooth_cutoff_hz", cfg.onset.smooth_cutoff_hz);
    cfg.onset.peak_threshold = get_or<double>(s, "peak_threshold", cfg.onset.peak_threshold);
    cfg.onset.energy_window_frames = get_or<int>(s, "energy_window_frames", cfg.onset.energy_window_frames);
    cfg.onset.onset_backoff_frames = get_or<int>(s, "onset_backoff_frames", cfg.onset.onset_backoff_frames);
    cfg.onset.segment_duration_s = get_or<double>(s, "segment_duration_s", cfg.onset.segment_duration_s);
  }

  if (j.contains("augment")) {
    const auto& a = j.at("augment");
    reject_unknown(a, {"wave", "spec", "mixup", "wave_enabled"}, "augment");
    cfg.wave_aug_enabled = get_or<bool>(a, "wave_enabled", cfg.wave_aug_enabled);
    if (a.contains("wave")) {
      const auto& w = a.at("wave");
      reject_unknown(w, {"noise_sigma", "noise_prob", "gain_db", "gain_prob", "pitch_semitones", "pitch_prob"},
                     "augment.wave");
      parse_range(w, "noise_sigma", cfg.wave_aug.noise_sigma_min, cfg.wave_aug.noise_sigma_max, "augment.wave");
      parse_range(w, "gain_db", cfg.wave_aug.gain_db_min, cfg.wave_aug.gain_db_max, "augment.wave");
      parse_range(w, "pitch_semitones", cfg.wave_aug.pitch_semitone_min, cfg.wave_aug.pitch_semitone_max,
                  "augment.wave");
      cfg.wave_aug.noise_prob = get_or<double>(w, "noise_prob", cfg.wave_aug.noise_prob);
      cfg.wave_aug.gain_prob = get_or<double>(w, "gain_prob", cfg.wave_aug.gain_prob);
      cfg.wave_aug.pitch_prob = get_or<double>(w, "pitch_prob", cfg.wave_aug.pitch_prob);
    }
    if (a.contains("spec")) {
      const auto& s = a.at("spec");
      reject_unknown(s,
                     {"time_warp_max_frames", "n_freq_masks", "freq_mask_max_bins", "n_time_masks",
                      "time_mask_max_frames", "mask_fill"},
                     "augment.spec");
      cfg.spec_aug.time_warp_max_frames = get_or<int>(s, "time_warp_max_frames", cfg.spec_aug.time_warp_max_frames);
      cfg.spec_aug.n_freq_masks = get_or<int>(s, "n_freq_masks", cfg.spec_aug.n_freq_masks);
      cfg.spec_aug.freq_mask_max_bins = get_or<int>(s, "freq_mask_max_bins", cfg.spec_aug.freq_mask_max_bins);
      cfg.spec_aug.n_time_masks = get_or<int>(s, "n_time_masks", cfg.spec_aug.n_time_masks);
      cfg.spec_aug.time_mask_max_frames = get_or<int>(s, "time_mask_max_frames", cfg.spec_aug.time_mask_max_frames);
      const std::string fill = get_or<std::string>(s, "mask_fill", "mean");
      if (fill == "mean") {
        cfg.spec_aug.mask_fill_zero = false;
      } else if (fill == "zero") {
        cfg.spec_aug.mask_fill_zero = true;
      } else {
        throw InvalidInput("config: augment.spec.mask_fill must be 'mean' or 'zero'");
      }
    }
    if (a.contains("mixup")) {
      const auto& m = a.at("mixup");
      reject_unknown(m, {"alpha"}, "augment.mixup");
      cfg.mixup.alpha = get_or<double>(m, "alpha", cfg.mixup.alpha);
    }
  }

  if (j.contains("ssl")) {
    const auto& s = j.at("ssl");
    reject_unknown(s,
                   {"mask_ratio", "ema_tau", "w_global", "w_local", "decoder_depth", "steps", "batch_size",
                    "learning_rate", "init_checkpoint"},
                   "ssl");
    cfg.ssl_cfg.mask_ratio = get_or<double>(s, "mask_ratio", cfg.ssl_cfg.mask_ratio);
    cfg.ssl_cfg.ema_tau = get_or<double>(s, "ema_tau", cfg.ssl_cfg.ema_tau);
    cfg.ssl_cfg.w_global = get_or<double>(s, "w_global", cfg.ssl_cfg.w_global);
    cfg.ssl_cfg.w_local = get_or<double>(s, "w_local", cfg.ssl_cfg.w_local);
    cfg.ssl_cfg.decoder_depth = get_or<int>(s, "decoder_depth", cfg.ssl_cfg.decoder_depth);
    cfg.ssl_cfg.steps = get_or<int>(s, "steps", cfg.ssl_cfg.steps);
    cfg.ssl_cfg.batch_size = get_or<int>(s, "batch_size", cfg.ssl_cfg.batch_size);
    cfg.ssl_cfg.learning_rate = get_or<double>(s, "learning_rate", cfg.ssl_cfg.learning_rate);
    cfg.ssl_init_checkpoint = get_or<std::string>(s, "init_checkpoint", "");
  }

  if (j.contains("input")) {
    const auto& i = j.at("input");
    reject_unknown(i, {"channels", "height", "width", "normalization", "mean", "std"}, "input");
    cfg.input_spec.channels = get_or<int>(i, "channels", cfg.input_spec.channels);
    cfg.input_spec.height = get_or<int>(i, "height", cfg.input_spec.height);
    cfg.input_spec.width = get_or<int>(i, "width", cfg.input_spec.width);
    const std::string norm = get_or<std::string>(i, "normalization", "per_clip_standardize");
    if (norm == "per_clip_standardize") {
      cfg.input_spec.normalization = dsp::Normalization::kPerClipStandardize;
    } else if (norm == "fixed_mean_std") {
      cfg.input_spec.normalization = dsp::Normalization::kFixedMeanStd;
    } else {
      throw InvalidInput("config: input.normalization must be per_clip_standardize or fixed_mean_std");
    }
    cfg.input_spec.mean = get_or<double>(i, "mean", cfg.input_spec.mean);
    cfg.input_spec.std_dev = get_or<double>(i, "std", cfg.input_spec.std_dev);
  }

  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown(m, {"patch_size", "embed_dim", "depth", "n_heads", "mlp_ratio", "n_classes"}, "model");
    cfg.model_cfg.patch_size = get_or<int>(m, "patch_size", cfg.model_cfg.patch_size);
    cfg.model_cfg.embed_dim = get_or<int>(m, "embed_dim", cfg.model_cfg.embed_dim);
    cfg.model_cfg.depth = get_or<int>(m, "depth", cfg.model_cfg.depth);
    cfg.model_cfg.n_heads = get_or<int>(m, "n_heads", cfg.model_cfg.n_heads);
    cfg.model_cfg.mlp_ratio = get_or<int>(m, "mlp_ratio", cfg.model_cfg.mlp_ratio);
    cfg.model_cfg.n_classes = get_or<int>(m, "n_classes", cfg.model_cfg.n_classes);
  }
  cfg.model_cfg.in_channels = cfg.input_spec.channels;
  cfg.model_cfg.in_height = cfg.input_spec.height;
  cfg.model_cfg.in_width = cfg.input_spec.width;

  if (j.contains("train")) {
    const auto& t = j.at("train");
    reject_unknown(t,
                   {"learning_rate", "batch_size", "epochs", "optimizer", "sam_rho", "pos_weight", "seeds",
                    "eval_aggregation", "init_checkpoint"},
                   "train");
    cfg.train_cfg.learning_rate = get_or<double>(t, "learning_rate", cfg.train_cfg.learning_rate);
    cfg.train_cfg.batch_size = get_or<int>(t, "batch_size", cfg.train_cfg.batch_size);
    cfg.train_cfg.epochs = get_or<int>(t, "epochs", cfg.train_cfg.epochs);
    const std::string opt = get_or<std::string>(t, "optimizer", "adam");
    if (opt == "adam") {
      cfg.train_cfg.use_sam = false;
    } else if (opt == "adam+sam") {
      cfg.train_cfg.use_sam = true;
    } else {
      throw InvalidInput("config: train.optimizer must be 'adam' or 'adam+sam'");
    }
    cfg.train_cfg.sam_rho = get_or<double>(t, "sam_rho", cfg.train_cfg.sam_rho);
    if (t.contains("pos_weight")) {
      const auto& pw = t.at("pos_weight");
      if (pw.is_string()) {
        if (pw.get<std::string>() != "auto") {
          throw InvalidInput("config: train.pos_weight must be a number or 'auto'");
        }
        cfg.train_cfg.pos_weight = -1.0;
      } else {
        cfg.train_cfg.pos_weight = pw.get<double>();
        if (cfg.train_cfg.pos_weight <= 0.0) throw InvalidInput("config: train.pos_weight must be positive");
      }
    }
    if (t.contains("seeds")) cfg.train_seeds = t.at("seeds").get<std::vector<uint64_t>>();
    cfg.train_cfg.eval_aggregation = get_or<std::string>(t, "eval_aggregation", cfg.train_cfg.eval_aggregation);
    cfg.train_init_checkpoint = get_or<std::string>(t, "init_checkpoint", "");
  }
  if (cfg.train_seeds.empty()) cfg.train_seeds = {cfg.seed};
  cfg.train_cfg.seed = cfg.seed;

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidInput("config is not valid JSON (" + path + "): " + e.what());
  }
  return config_from_json(j);
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["audio"] = {{"target_sample_rate_hz", cfg.target_sample_rate_hz}};
  j["dsp"] = {{"hop_s", cfg.stft.hop_s}, {"win_s", cfg.stft.win_s}, {"fft_size", cfg.stft.fft_size},
              {"n_mels", cfg.n_mels},    {"f_min", cfg.f_min},      {"f_max", cfg.f_max}};
  j["segmenter"] = {{"band_lo_hz", cfg.onset.band_lo_hz},
                    {"band_hi_hz", cfg.onset.band_hi_hz},
                    {"log_base10", cfg.onset.ratio_log_base10},
                    {"smooth_order", cfg.onset.smooth_order},
                    {"smooth_cutoff_hz", cfg.onset.smooth_cutoff_hz},
                    {"peak_threshold", cfg.onset.peak_threshold},
                    {"energy_window_frames", cfg.onset.energy_window_frames},
                    {"onset_backoff_frames", cfg.onset.onset_backoff_frames},
                    {"segment_duration_s", cfg.onset.segment_duration_s}};
  j["augment"] = {
      {"wave_enabled", cfg.wave_aug_enabled},
      {"wave",
       {{"noise_sigma", {cfg.wave_aug.noise_sigma_min, cfg.wave_aug.noise_sigma_max}},
        {"noise_prob", cfg.wave_aug.noise_prob},
        {"gain_db", {cfg.wave_aug.gain_db_min, cfg.wave_aug.gain_db_max}},
        {"gain_prob", cfg.wave_aug.gain_prob},
        {"pitch_semitones", {cfg.wave_aug.pitch_semitone_min, cfg.wave_aug.pitch_semitone_max}},
        {"pitch_prob", cfg.wave_aug.pitch_prob}}},
      {"spec",
       {{"time_warp_max_frames", cfg.spec_aug.time_warp_max_frames},
        {"n_freq_masks", cfg.spec_aug.n_freq_masks},
        {"freq_mask_max_bins", cfg.spec_aug.freq_mask_max_bins},
        {"n_time_masks", cfg.spec_aug.n_time_masks},
        {"time_mask_max_frames", cfg.spec_aug.time_mask_max_frames},
        {"mask_fill", cfg.spec_aug.mask_fill_zero ? "zero" : "mean"}}},
      {"mixup", {{"alpha", cfg.mixup.alpha}}}};
  j["ssl"] = {{"mask_ratio", cfg.ssl_cfg.mask_ratio},
              {"ema_tau", cfg.ssl_cfg.ema_tau},
              {"w_global", cfg.ssl_cfg.w_global},
              {"w_local", cfg.ssl_cfg.w_local},
              {"decoder_depth", cfg.ssl_cfg.decoder_depth},
              {"steps", cfg.ssl_cfg.steps},
              {"batch_size", cfg.ssl_cfg.batch_size},
              {"learning_rate", cfg.ssl_cfg.learning_rate},
              {"init_checkpoint", cfg.ssl_init_checkpoint}};
  j["model"] = {{"patch_size", cfg.model_cfg.patch_size}, {"embed_dim", cfg.model_cfg.embed_dim},
                {"depth", cfg.model_cfg.depth},           {"n_heads", cfg.model_cfg.n_heads},
                {"mlp_ratio", cfg.model_cfg.mlp_ratio},   {"n_classes", cfg.model_cfg.n_classes}};
  j["input"] = {{"channels", cfg.input_spec.channels},
                {"height", cfg.input_spec.height},
                {"width", cfg.input_spec.width},
                {"normalization", cfg.input_spec.normalization == dsp::Normalization::kPerClipStandardize
                                      ? "per_clip_standardize"
                                      : "fixed_mean_std"},
                {"mean", cfg.input_spec.mean},
                {"std", cfg.input_spec.std_dev}};
  j["train"] = {{"learning_rate", cfg.train_cfg.learning_rate},
                {"batch_size", cfg.train_cfg.batch_size},
                {"epochs", cfg.train_cfg.epochs},
                {"optimizer", cfg.train_cfg.use_sam ? "adam+sam" : "adam"},
                {"sam_rho", cfg.train_cfg.sam_rho},
                {"pos_weight", cfg.train_cfg.pos_weight},
                {"seeds", cfg.train_seeds},
                {"eval_aggregation", cfg.train_cfg.eval_aggregation},
                {"init_checkpoint", cfg.train_init_checkpoint}};
  return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string dump = config_to_json(cfg).dump();
  std::ostringstream os;
  os << std::hex << fnv1a64(dump);
  return os.str();
}

}  // namespace coughkit::config
