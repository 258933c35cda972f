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

#include <vector>

#include "coughkit/audio_io.hpp"
#include "coughkit/dsp.hpp"
#include "coughkit/rng.hpp"

namespace coughkit::augment {

/// Waveform-stage augmentation: Gaussian noise, random gain, pitch shift
/// (tempo preserved). Each transform fires independently with its own
/// probability. Training only; never applied at evaluation.
struct WaveAugConfig {
  double noise_sigma_min = 0.001, noise_sigma_max = 0.01;
  double noise_prob = 0.5;
  double gain_db_min = -6.0, gain_db_max = 6.0;
  double gain_prob = 0.5;
  double pitch_semitone_min = -2.0, pitch_semitone_max = 2.0;
  double pitch_prob = 0.5;

  void validate() const;
};

/// Spectrogram-stage augmentation: piecewise-linear time warp, frequency
/// masks, time masks. time_mask_max_frames < 0 resolves to 10% of frames.
struct SpecAugConfig {
  int time_warp_max_frames = 5;
  int n_freq_masks = 2;
  int freq_mask_max_bins = 8;
  int n_time_masks = 2;
  int time_mask_max_frames = -1;
  bool mask_fill_zero = false;  // default: fill with the pre-mask global mean

  void validate() const;
};

struct MixupConfig {
  double alpha = 0.8;

  void validate() const {
    if (!(alpha > 0.0)) throw InvalidInput("MixupConfig: alpha must be positive");
  }
};

audio::AudioClip augment_waveform(const audio::AudioClip& clip, const WaveAugConfig& cfg, Rng& rng);

dsp::Spectrogram spec_augment(const dsp::Spectrogram& spec, const SpecAugConfig& cfg, Rng& rng);

/// Flat per-sample inputs plus label probability vectors.
struct LabeledBatch {
  std::vector<std::vector<float>> inputs;
  std::vector<std::vector<float>> labels;
};

/// x = lambda*x_a + (1-lambda)*x_b, y likewise. The caller draws lambda
/// (Beta(alpha, alpha) during training).
LabeledBatch mixup(const LabeledBatch& a, const LabeledBatch& b, double lambda);

/// Duration-preserving pitch shift: sinc resampling followed by an
/// overlap-add time stretch back to the original length.
audio::AudioClip pitch_shift(const audio::AudioClip& clip, double semitones);

}  // namespace coughkit::augment
