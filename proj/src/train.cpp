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

#include "coughkit/train.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "coughkit/eval.hpp"

namespace coughkit::train {

double class_weight(const data::DatasetManifest& manifest) {
  const int n_neg = manifest.count(false, 0);
  const int n_pos = manifest.count(false, 1);
  if (n_pos == 0 || n_neg == 0) {
    throw InvalidInput("class_weight: training split must contain both classes (neg=" + std::to_string(n_neg) +
                       ", pos=" + std::to_string(n_pos) + ")");
  }
  return static_cast<double>(n_neg) / n_pos;
}

namespace {

ad::Tensor<float> patches_for(const std::vector<float>& flat_input, const dsp::ModelInputSpec& spec,
                              const model::VitConfig& cfg) {
  dsp::ModelInput input;
  input.channels = spec.channels;
  input.height = spec.height;
  input.width = spec.width;
  input.values = flat_input;
  return model::patchify<float>(input, cfg.patch_size);
}

struct PreparedBatch {
  std::vector<ad::Tensor<float>> patches;        // per sample, constant [P x pd]
  std::vector<std::vector<float>> targets;       // per sample, probability pairs
};

}  // namespace

std::vector<double> score_samples(const model::VitModel& m, const std::vector<Sample>& samples,
                                  const dsp::ModelInputSpec& input_spec) {
  std::vector<double> scores(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    const dsp::ModelInput input = dsp::to_model_input(samples[i].logmel, input_spec);
    auto patches = model::patchify<float>(input, m.cfg.patch_size);
    auto trace = model::vit_forward(m, patches);
    auto probs = ad::softmax(trace.logits);
    scores[i] = static_cast<double>(probs.data()[1]);
  }
  return scores;
}

double eval_auroc_for(const model::VitModel& m, const std::vector<Sample>& samples,
                      const dsp::ModelInputSpec& input_spec, const std::string& aggregation) {
  if (samples.empty()) throw InvalidInput("eval: empty evaluation split");
  std::vector<double> scores = score_samples(m, samples, input_spec);
  if (aggregation == "segment_level") {
    std::vector<int> labels(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) labels[i] = samples[i].label;
    return eval::auroc(scores, labels);
  }
  std::vector<eval::ScoredSample> scored(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    scored[i] = eval::ScoredSample{samples[i].subject_id, scores[i], samples[i].label};
  }
  auto per_subject = eval::aggregate_by_subject(scored);
  std::vector<double> s(per_subject.size());
  std::vector<int> l(per_subject.size());
  for (size_t i = 0; i < per_subject.size(); ++i) {
    s[i] = per_subject[i].score;
    l[i] = per_subject[i].label;
  }
  return eval::auroc(s, l);
}

FinetuneResult finetune(const model::VitModel& init, const std::vector<Sample>& samples,
                        const TrainConfig& cfg, const augment::SpecAugConfig& spec_aug,
                        const augment::MixupConfig& mixup_cfg, const dsp::ModelInputSpec& input_spec,
                        const WaveStage* wave_stage) {
  cfg.validate();
  spec_aug.validate();
  mixup_cfg.validate();
  if (init.cfg.n_classes != 2) throw InvalidInput("finetune: model head must have 2 outputs");
  if (init.cfg.in_channels != input_spec.channels || init.cfg.in_height != input_spec.height ||
      init.cfg.in_width != input_spec.width) {
    throw InvalidInput("finetune: model input shape does not match the model-input spec");
  }

  std::vector<int> train_idx, eval_idx;
  for (size_t i = 0; i < samples.size(); ++i) {
    (samples[i].is_test ? eval_idx : train_idx).push_back(static_cast<int>(i));
  }
  if (train_idx.empty()) throw InvalidInput("finetune: empty training split");
  if (eval_idx.empty()) throw InvalidInput("finetune: empty evaluation split");

  double pos_weight = cfg.pos_weight;
  if (pos_weight < 0.0) {
    int n_pos = 0, n_neg = 0;
    for (int i : train_idx) (samples[i].label == 1 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0) {
      throw InvalidInput("finetune: cannot derive pos_weight, training split lacks a class");
    }
    pos_weight = static_cast<double>(n_neg) / n_pos;
  }

  std::vector<Sample> eval_samples;
  for (int i : eval_idx) eval_samples.push_back(samples[i]);

  model::VitModel m = model::clone_model(init);
  m.set_requires_grad(true);
  auto params = m.named_parameters();
  AdamState opt;

  FinetuneResult result;
  result.pos_weight = pos_weight;
  result.best_model = model::clone_model(m);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng shuffle_rng = Rng::for_sample(cfg.seed, static_cast<uint64_t>(epoch), 0x5u);
    std::vector<int> order = train_idx;
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    int n_batches = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      const int bsize = static_cast<int>(end - start);

      // stage 2 augmentation + mixup on the model inputs
      augment::LabeledBatch batch;
      batch.inputs.resize(bsize);
      batch.labels.resize(bsize);
      for (int b = 0; b < bsize; ++b) {
        const Sample& s = samples[order[start + b]];
        Rng rng = Rng::for_sample(cfg.seed, static_cast<uint64_t>(epoch), static_cast<uint64_t>(order[start + b]));
        dsp::Spectrogram logmel;
        if (wave_stage != nullptr && !s.audio.samples.empty()) {
          audio::AudioClip clip = augment::augment_waveform(s.audio, wave_stage->cfg, rng);
          logmel = dsp::log_mel(dsp::stft_magnitude(clip, wave_stage->stft), wave_stage->fb);
        } else {
          logmel = s.logmel;
        }
        dsp::Spectrogram aug = spec_augment(logmel, spec_aug, rng);
        dsp::ModelInput input = dsp::to_model_input(aug, input_spec);
        batch.inputs[b] = std::move(input.values);
        batch.labels[b] = s.label == 1 ? std::vector<float>{0.0f, 1.0f} : std::vector<float>{1.0f, 0.0f};
      }

      Rng batch_rng = Rng::for_sample(cfg.seed, static_cast<uint64_t>(epoch),
                                      0x80000000ull + start / static_cast<size_t>(cfg.batch_size));
      const double lambda = batch_rng.beta(mixup_cfg.alpha, mixup_cfg.alpha);
      std::vector<int> perm(bsize);
      std::iota(perm.begin(), perm.end(), 0);
      batch_rng.shuffle(perm);
      augment::LabeledBatch partner;
      partner.inputs.resize(bsize);
      partner.labels.resize(bsize);
      for (int b = 0; b < bsize; ++b) {
        partner.inputs[b] = batch.inputs[perm[b]];
        partner.labels[b] = batch.labels[perm[b]];
      }
      augment::LabeledBatch mixed = augment::mixup(batch, partner, lambda);

      PreparedBatch prepared;
      prepared.patches.reserve(bsize);
      prepared.targets = std::move(mixed.labels);
      for (int b = 0; b < bsize; ++b) {
        prepared.patches.push_back(patches_for(mixed.inputs[b], input_spec, m.cfg));
      }

      auto compute_grads = [&]() -> double {
        zero_grads(params);
        std::vector<ad::Tensor<float>> logit_rows;
        logit_rows.reserve(prepared.patches.size());
        for (const auto& p : prepared.patches) {
          logit_rows.push_back(model::vit_forward(m, p).logits);
        }
        auto logits = logit_rows.size() == 1 ? logit_rows[0] : ad::concat_rows(logit_rows);
        auto loss = weighted_cross_entropy<float>(logits, prepared.targets, static_cast<float>(pos_weight));
        ad::backward(loss);
        return static_cast<double>(loss.item());
      };

      double batch_loss;
      if (cfg.use_sam) {
        batch_loss = sam_step<float>(params, compute_grads, cfg.sam_rho,
                                     [&]() { adam_step(params, opt, cfg.learning_rate); });
      } else {
        batch_loss = compute_grads();
        adam_step(params, opt, cfg.learning_rate);
      }
      loss_sum += batch_loss;
      ++n_batches;
    }

    const double auc = eval_auroc_for(m, eval_samples, input_spec, cfg.eval_aggregation);
    const auto t1 = std::chrono::steady_clock::now();

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = n_batches > 0 ? loss_sum / n_batches : 0.0;
    log.eval_auroc = auc;
    log.lr = cfg.learning_rate;
    log.seconds = std::chrono::duration<double>(t1 - t0).count();
    result.log.push_back(log);

    if (result.best_epoch < 0 || auc > result.best_auroc) {
      result.best_auroc = auc;
      result.best_epoch = epoch;
      result.best_model = model::clone_model(m);
    }
  }
  return result;
}

}  // namespace coughkit::train
