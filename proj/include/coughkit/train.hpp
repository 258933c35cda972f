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

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "coughkit/augment.hpp"
#include "coughkit/autodiff.hpp"
#include "coughkit/manifest.hpp"
#include "coughkit/vit.hpp"

namespace coughkit::train {

struct TrainConfig {
  double learning_rate = 2e-6;
  int batch_size = 24;
  int epochs = 10;
  bool use_sam = false;
  double sam_rho = 0.05;
  double pos_weight = -1.0;  // < 0: auto = (#negative / #positive) on the training split
  uint64_t seed = 0;
  std::string eval_aggregation = "subject_mean";  // or "segment_level"

  void validate() const {
    if (!(learning_rate > 0.0)) throw InvalidInput("TrainConfig: learning_rate must be positive");
    if (batch_size < 1) throw InvalidInput("TrainConfig: batch_size must be >= 1");
    if (epochs < 1) throw InvalidInput("TrainConfig: epochs must be >= 1");
    if (use_sam && !(sam_rho > 0.0)) throw InvalidInput("TrainConfig: sam_rho must be positive with SAM on");
    if (eval_aggregation != "subject_mean" && eval_aggregation != "segment_level") {
      throw InvalidInput("TrainConfig: eval_aggregation must be subject_mean or segment_level");
    }
  }
};

template <typename T>
using NamedParams = std::vector<std::pair<std::string, ad::Tensor<T>>>;

/// Bias-corrected Adam moments, keyed by parameter name.
template <typename T>
struct AdamStateT {
  struct Slot {
    std::vector<T> m, v;
  };
  std::map<std::string, Slot> slots;
  long long step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

using AdamState = AdamStateT<float>;

/// Ratio of negative to positive samples on the training split.
double class_weight(const data::DatasetManifest& manifest);

/// Weighted soft-label cross entropy: per-sample CE with weight
/// pos_weight*y_pos + 1*y_neg (class 1 is positive), averaged over the
/// batch. Linear in the labels so mixup composes.
template <typename T>
ad::Tensor<T> weighted_cross_entropy(const ad::Tensor<T>& logits, const std::vector<std::vector<T>>& targets,
                                     T pos_weight) {
  if (logits.ndim() != 2) throw InvalidInput("weighted_cross_entropy: logits must be [batch x classes]");
  const int batch = logits.dim(0);
  const int classes = logits.dim(1);
  if (static_cast<size_t>(batch) != targets.size()) {
    throw InvalidInput("weighted_cross_entropy: batch size mismatch between logits and targets");
  }
  if (classes != 2) throw InvalidInput("weighted_cross_entropy: binary-only, expected 2 classes");

  std::vector<T> coeff(static_cast<size_t>(batch) * classes);
  for (int i = 0; i < batch; ++i) {
    const auto& y = targets[i];
    if (y.size() != static_cast<size_t>(classes)) {
      throw InvalidInput("weighted_cross_entropy: target row " + std::to_string(i) + " has wrong length");
    }
    T sum = T(0);
    for (T v : y) {
      if (v < T(0)) throw InvalidInput("weighted_cross_entropy: negative target probability");
      sum += v;
    }
    if (std::abs(static_cast<double>(sum) - 1.0) > 1e-4) {
      throw InvalidInput("weighted_cross_entropy: target row " + std::to_string(i) + " does not sum to 1");
    }
    const T w = pos_weight * y[1] + y[0];
    for (int c = 0; c < classes; ++c) coeff[static_cast<size_t>(i) * classes + c] = y[c] * w;
  }
  auto coeff_t = ad::Tensor<T>::from_vector({batch, classes}, std::move(coeff));
  auto weighted = ad::mul(ad::log_softmax(logits), coeff_t);
  return ad::scale(ad::sum(weighted), T(-1) / static_cast<T>(batch));
}

/// In-place bias-corrected Adam update from the accumulated gradients.
template <typename T>
void adam_step(NamedParams<T>& params, AdamStateT<T>& state, double lr) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto& [name, tensor] : params) {
    auto& slot = state.slots[name];
    const auto& g = tensor.grad();
    auto& w = tensor.data();
    if (slot.m.size() != w.size()) {
      slot.m.assign(w.size(), T(0));
      slot.v.assign(w.size(), T(0));
    }
    for (size_t i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double m = state.beta1 * static_cast<double>(slot.m[i]) + (1.0 - state.beta1) * gi;
      const double v = state.beta2 * static_cast<double>(slot.v[i]) + (1.0 - state.beta2) * gi * gi;
      slot.m[i] = static_cast<T>(m);
      slot.v[i] = static_cast<T>(v);
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

template <typename T>
void zero_grads(NamedParams<T>& params) {
  for (auto& [name, t] : params) t.zero_grad();
}

/// Two-step sharpness-aware update. compute_grads must zero the gradients,
/// rebuild the loss at the current parameter values, run backward, and
/// return the loss. Steps: gradient g at theta; climb to theta + rho*g/|g|;
/// recompute the gradient there; restore theta bitwise; hand the perturbed
/// gradient to inner_step. A zero gradient skips the perturbation.
/// Returns the loss at the unperturbed parameters.
template <typename T>
double sam_step(NamedParams<T>& params, const std::function<double()>& compute_grads, double rho,
                const std::function<void()>& inner_step) {
  if (!(rho > 0.0)) throw InvalidInput("sam_step: rho must be positive");
  const double loss = compute_grads();
  if (!std::isfinite(loss)) throw NumericError("sam_step: non-finite loss");

  double sq = 0.0;
  for (auto& [name, t] : params) {
    for (T g : t.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double gnorm = std::sqrt(sq);
  if (gnorm == 0.0) {
    inner_step();
    return loss;
  }

  std::vector<std::vector<T>> saved;
  saved.reserve(params.size());
  const double scale = rho / gnorm;
  for (auto& [name, t] : params) {
    saved.push_back(t.data());
    auto& w = t.data();
    const auto& g = t.grad();
    for (size_t i = 0; i < w.size(); ++i) {
      w[i] = static_cast<T>(static_cast<double>(w[i]) + scale * static_cast<double>(g[i]));
    }
  }

  const double perturbed_loss = compute_grads();
  if (!std::isfinite(perturbed_loss)) throw NumericError("sam_step: non-finite loss at perturbed point");

  for (size_t k = 0; k < params.size(); ++k) params[k].second.data() = std::move(saved[k]);

  inner_step();
  return loss;
}

/// One in-memory training/evaluation example. When audio is present the
/// waveform augmentation stage can rebuild the log-mel per epoch; otherwise
/// the precomputed logmel is used as is.
struct Sample {
  dsp::Spectrogram logmel;
  audio::AudioClip audio;  // optional; empty samples = feature-only
  int label = 0;
  std::string subject_id;
  std::string path;
  bool is_test = false;
};

/// Raw-audio augmentation stage bundled with the feature extraction it
/// needs to re-derive spectrograms.
struct WaveStage {
  augment::WaveAugConfig cfg;
  dsp::StftParams stft;
  dsp::MelFilterbank fb;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double eval_auroc = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct FinetuneResult {
  model::VitModel best_model;
  std::vector<EpochLog> log;
  double best_auroc = 0.0;
  int best_epoch = -1;
  double pos_weight = 1.0;
};

/// Supervised fine-tuning: seeded shuffling, two-stage augmentation (wave
/// stage when audio is available) + mixup on the training split, weighted
/// CE, Adam or Adam wrapped in SAM, per-epoch evaluation AUROC, best-AUROC
/// checkpoint retained.
FinetuneResult finetune(const model::VitModel& init, const std::vector<Sample>& samples,
                        const TrainConfig& cfg, const augment::SpecAugConfig& spec_aug,
                        const augment::MixupConfig& mixup_cfg, const dsp::ModelInputSpec& input_spec,
                        const WaveStage* wave_stage = nullptr);

/// Positive-class probabilities for a set of samples under a model.
std::vector<double> score_samples(const model::VitModel& m, const std::vector<Sample>& samples,
                                  const dsp::ModelInputSpec& input_spec);

/// Evaluation AUROC with the configured aggregation.
double eval_auroc_for(const model::VitModel& m, const std::vector<Sample>& samples,
                      const dsp::ModelInputSpec& input_spec, const std::string& aggregation);

}  // namespace coughkit::train
