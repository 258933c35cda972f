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

#include "coughkit/augment.hpp"

#include <algorithm>
#include <cmath>

namespace coughkit::augment {

namespace {

void check_prob(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput(std::string("WaveAugConfig: ") + name + " must lie in [0, 1]");
}

// Hann-windowed overlap-add time stretch to an exact output length; pitch is
// left alone, so resample + stretch composes into a tempo-preserving shift.
std::vector<float> time_stretch_ola(const std::vector<float>& x, size_t out_len) {
  if (out_len == 0) return {};
  if (x.empty()) return std::vector<float>(out_len, 0.0f);

  const size_t grain = std::min<size_t>(1024, std::max<size_t>(4, x.size()));
  const size_t hop = std::max<size_t>(1, grain / 4);
  if (x.size() <= grain || out_len <= grain) {
    // too short for grains: nearest-position resample
    std::vector<float> y(out_len);
    for (size_t n = 0; n < out_len; ++n) {
      size_t m = out_len > 1 ? n * (x.size() - 1) / (out_len - 1) : 0;
      y[n] = x[m];
    }
    return y;
  }

  std::vector<double> window(grain);
  for (size_t i = 0; i < grain; ++i) window[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / grain));

  std::vector<double> acc(out_len, 0.0), wsum(out_len, 0.0);
  const size_t k_max = (out_len - grain) / hop;
  for (size_t k = 0; k <= k_max; ++k) {
    const size_t out_pos = k * hop;
    const double frac = k_max > 0 ? static_cast<double>(k) / k_max : 0.0;
    const size_t in_pos = static_cast<size_t>(std::llround(frac * (x.size() - grain)));
    for (size_t i = 0; i < grain; ++i) {
      acc[out_pos + i] += window[i] * x[in_pos + i];
      wsum[out_pos + i] += window[i];
    }
  }

  std::vector<float> y(out_len);
  for (size_t n = 0; n < out_len; ++n) {
    y[n] = static_cast<float>(acc[n] / std::max(wsum[n], 1e-6));
  }
  return y;
}

}  // namespace

void WaveAugConfig::validate() const {
  if (noise_sigma_min > noise_sigma_max || noise_sigma_min < 0.0) {
    throw InvalidInput("WaveAugConfig: noise sigma range must be ordered and non-negative");
  }
  if (gain_db_min > gain_db_max) throw InvalidInput("WaveAugConfig: gain range must be ordered");
  if (pitch_semitone_min > pitch_semitone_max) throw InvalidInput("WaveAugConfig: pitch range must be ordered");
  check_prob(noise_prob, "noise_prob");
  check_prob(gain_prob, "gain_prob");
  check_prob(pitch_prob, "pitch_prob");
}

void SpecAugConfig::validate() const {
  if (time_warp_max_frames < 0 || n_freq_masks < 0 || freq_mask_max_bins < 0 || n_time_masks < 0) {
    throw InvalidInput("SpecAugConfig: all fields must be non-negative");
  }
}

audio::AudioClip pitch_shift(const audio::AudioClip& clip, double semitones) {
  if (semitones == 0.0) return clip;
  const double factor = std::pow(2.0, semitones / 12.0);
  const int shifted_rate = static_cast<int>(std::lround(clip.sample_rate_hz / factor));
  if (shifted_rate < 1) throw InvalidInput("pitch_shift: shift too extreme for this sample rate");

  // resample compresses/stretches the waveform; reinterpreting at the
  // original rate moves the pitch by `factor` and the duration by 1/factor
  audio::AudioClip warped = audio::resample(clip, shifted_rate);
  warped.sample_rate_hz = clip.sample_rate_hz;

  audio::AudioClip out = clip;
  out.samples = time_stretch_ola(warped.samples, clip.samples.size());
  return out;
}

audio::AudioClip augment_waveform(const audio::AudioClip& clip, const WaveAugConfig& cfg, Rng& rng) {
  cfg.validate();
  audio::AudioClip out = clip;

  if (rng.uniform() < cfg.noise_prob) {
    const double sigma = rng.uniform(cfg.noise_sigma_min, cfg.noise_sigma_max);
    for (float& s : out.samples) s = static_cast<float>(s + rng.normal(0.0, sigma));
  }
  if (rng.uniform() < cfg.gain_prob) {
    const double db = rng.uniform(cfg.gain_db_min, cfg.gain_db_max);
    const double g = std::pow(10.0, db / 20.0);
    for (float& s : out.samples) s = static_cast<float>(s * g);
  }
  if (rng.uniform() < cfg.pitch_prob) {
    const double semis = rng.uniform(cfg.pitch_semitone_min, cfg.pitch_semitone_max);
    out = pitch_shift(out, semis);
  }
  for (float& s : out.samples) s = std::clamp(s, -1.0f, 1.0f);
  return out;
}

dsp::Spectrogram spec_augment(const dsp::Spectrogram& spec, const SpecAugConfig& cfg, Rng& rng) {
  cfg.validate();
  const int nf = spec.n_frames, nb = spec.n_bins;
  const int time_mask_max =
      cfg.time_mask_max_frames >= 0 ? cfg.time_mask_max_frames : std::max(1, static_cast<int>(std::lround(0.1 * nf)));
  if (cfg.n_freq_masks > 0 && cfg.freq_mask_max_bins >= nb) {
    throw InvalidInput("spec_augment: freq mask wider than the spectrogram");
  }
  if (cfg.n_time_masks > 0 && time_mask_max >= nf) {
    throw InvalidInput("spec_augment: time mask longer than the spectrogram");
  }
  if (cfg.time_warp_max_frames > 0 && nf <= 2 * cfg.time_warp_max_frames + 2) {
    throw InvalidInput("spec_augment: too few frames for the configured time warp");
  }

  dsp::Spectrogram out = spec;

  // piecewise-linear time warp around one interior anchor
  const int w = cfg.time_warp_max_frames;
  if (w > 0) {
    const int anchor = w + 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(nf - 2 * (w + 1))));
    const int shift = -w + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(2 * w + 1)));
    if (shift != 0) {
      const int target = anchor + shift;
      for (int t = 0; t < nf; ++t) {
        double src;
        if (t <= target) {
          src = static_cast<double>(t) * anchor / target;
        } else {
          src = anchor + static_cast<double>(t - target) * (nf - 1 - anchor) / (nf - 1 - target);
        }
        src = std::clamp(src, 0.0, static_cast<double>(nf - 1));
        const int t0 = static_cast<int>(src);
        const int t1 = std::min(t0 + 1, nf - 1);
        const double frac = src - t0;
        for (int b = 0; b < nb; ++b) {
          out.at(t, b) = (1.0 - frac) * spec.at(t0, b) + frac * spec.at(t1, b);
        }
      }
    }
  }

  double fill = 0.0;
  if (!cfg.mask_fill_zero) {
    double s = 0.0;
    for (double v : out.values) s += v;
    fill = s / out.values.size();
  }

  // at least one bin and one frame stay unmasked no matter how masks stack;
  // a mask that would complete the cover is trimmed from its right edge
  auto draw_span = [&rng](int max_width, int total, std::vector<bool>& covered) -> std::pair<int, int> {
    int width = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(max_width) + 1));
    if (width == 0) return {0, 0};
    const int start = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(total - width) + 1));
    int already = 0;
    for (bool c : covered) already += c ? 1 : 0;
    while (width > 0) {
      int added = 0;
      for (int k = start; k < start + width; ++k) added += covered[k] ? 0 : 1;
      if (already + added < total) break;
      --width;
    }
    for (int k = start; k < start + width; ++k) covered[k] = true;
    return {start, width};
  };

  std::vector<bool> bin_masked(nb, false), frame_masked(nf, false);
  for (int i = 0; i < cfg.n_freq_masks; ++i) {
    auto [start, width] = draw_span(cfg.freq_mask_max_bins, nb, bin_masked);
    for (int b = start; b < start + width; ++b) {
      for (int t = 0; t < nf; ++t) out.at(t, b) = fill;
    }
  }
  for (int i = 0; i < cfg.n_time_masks; ++i) {
    auto [start, width] = draw_span(time_mask_max, nf, frame_masked);
    for (int t = start; t < start + width; ++t) {
      for (int b = 0; b < nb; ++b) out.at(t, b) = fill;
    }
  }

  return out;
}

LabeledBatch mixup(const LabeledBatch& a, const LabeledBatch& b, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("mixup: lambda must lie in [0, 1]");
  if (a.inputs.size() != b.inputs.size() || a.labels.size() != b.labels.size() ||
      a.inputs.size() != a.labels.size()) {
    throw InvalidInput("mixup: batch sizes differ");
  }
  LabeledBatch out;
  out.inputs.resize(a.inputs.size());
  out.labels.resize(a.labels.size());
  const float lam = static_cast<float>(lambda);
  for (size_t i = 0; i < a.inputs.size(); ++i) {
    if (a.inputs[i].size() != b.inputs[i].size()) throw InvalidInput("mixup: input shapes differ");
    if (a.labels[i].size() != b.labels[i].size()) throw InvalidInput("mixup: label shapes differ");
    out.inputs[i].resize(a.inputs[i].size());
    for (size_t k = 0; k < a.inputs[i].size(); ++k) {
      out.inputs[i][k] = lam * a.inputs[i][k] + (1.0f - lam) * b.inputs[i][k];
    }
    out.labels[i].resize(a.labels[i].size());
    for (size_t k = 0; k < a.labels[i].size(); ++k) {
      out.labels[i][k] = lam * a.labels[i][k] + (1.0f - lam) * b.labels[i][k];
    }
  }
  return out;
}

}  // namespace coughkit::augment
