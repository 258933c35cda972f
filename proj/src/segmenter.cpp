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

#include "coughkit/segmenter.hpp"

#include <algorithm>
#include <cmath>

namespace coughkit::segmenter {

namespace {
constexpr double kEnergyFloor = 1e-12;

std::vector<double> band_energy_sequence(const audio::AudioClip& clip, const OnsetConfig& cfg) {
  dsp::Spectrogram mag = dsp::stft_magnitude(clip, cfg.stft);
  return dsp::band_energy(mag, cfg.band_lo_hz, cfg.band_hi_hz);
}
}  // namespace

void OnsetConfig::validate() const {
  if (!(band_lo_hz < band_hi_hz)) throw InvalidInput("OnsetConfig: need band_lo_hz < band_hi_hz");
  if (energy_window_frames < 1 || energy_window_frames % 2 == 0) {
    throw InvalidInput("OnsetConfig: energy_window_frames must be odd and positive");
  }
  if (onset_backoff_frames < 0) throw InvalidInput("OnsetConfig: onset_backoff_frames must be >= 0");
  if (!std::isfinite(peak_threshold)) throw InvalidInput("OnsetConfig: peak_threshold must be finite");
  if (smooth_order < 1) throw InvalidInput("OnsetConfig: smooth_order must be >= 1");
  if (segment_duration_s <= 0.0) throw InvalidInput("OnsetConfig: segment_duration_s must be positive");
}

std::vector<double> energy_change_rate(const audio::AudioClip& clip, const OnsetConfig& cfg) {
  cfg.validate();
  std::vector<double> energy = band_energy_sequence(clip, cfg);
  if (energy.size() < 2) throw InvalidInput("energy_change_rate: clip yields fewer than two frames");

  std::vector<double> rate(energy.size() - 1);
  for (size_t t = 1; t < energy.size(); ++t) {
    const double cur = std::max(energy[t], kEnergyFloor);
    const double prev = std::max(energy[t - 1], kEnergyFloor);
    const double r = std::log(cur / prev);
    rate[t - 1] = cfg.ratio_log_base10 ? r / std::log(10.0) : r;
  }

  const double frame_rate = static_cast<double>(clip.sample_rate_hz) / cfg.stft.hop_samples(clip.sample_rate_hz);
  const double cutoff_norm = cfg.smooth_cutoff_hz / (frame_rate / 2.0);
  if (cutoff_norm > 0.0 && cutoff_norm < 1.0) {
    rate = dsp::butterworth_lowpass(rate, cfg.smooth_order, cutoff_norm);
  }
  return rate;
}

std::vector<int> detect_onsets(const audio::AudioClip& clip, const OnsetConfig& cfg) {
  cfg.validate();
  std::vector<double> energy = band_energy_sequence(clip, cfg);
  if (energy.size() < 3) return {};

  std::vector<double> rate = energy_change_rate(clip, cfg);
  const int n_rate = static_cast<int>(rate.size());
  const int n_frames = static_cast<int>(energy.size());
  const int half_win = cfg.energy_window_frames / 2;

  std::vector<int> onsets;
  for (int i = 1; i + 1 < n_rate; ++i) {
    if (rate[i] <= cfg.peak_threshold) continue;
    if (!(rate[i] > rate[i - 1])) continue;
    // scan over a possible plateau; the leftmost frame represents it
    int j = i;
    while (j + 1 < n_rate && rate[j + 1] == rate[i]) ++j;
    if (j + 1 >= n_rate || !(rate[i] > rate[j + 1])) continue;

    // rate[i] compares energy frame i+1 against frame i
    const int peak_frame = i + 1;
    int e_lo = std::max(0, peak_frame - half_win);
    int e_hi = std::min(n_frames - 1, peak_frame + half_win);
    int e_peak = e_lo;
    for (int k = e_lo + 1; k <= e_hi; ++k) {
      if (energy[k] > energy[e_peak]) e_peak = k;
    }
    onsets.push_back(std::max(0, e_peak - cfg.onset_backoff_frames));
  }

  std::sort(onsets.begin(), onsets.end());
  std::vector<int> kept;
  for (int f : onsets) {
    if (!kept.empty() && f - kept.back() < cfg.energy_window_frames) continue;
    kept.push_back(f);
  }
  return kept;
}

ExtractResult extract_segments(const audio::AudioClip& clip, const std::vector<int>& onset_frames,
                               double duration_s, const dsp::StftParams& stft) {
  if (clip.sample_rate_hz <= 0) throw InvalidInput("extract_segments: clip has no sample rate");
  if (duration_s <= 0.0) throw InvalidInput("extract_segments: duration must be positive");

  const int hop = stft.hop_samples(clip.sample_rate_hz);
  const long seg_len = std::lround(duration_s * clip.sample_rate_hz);
  const long n = static_cast<long>(clip.samples.size());

  ExtractResult res;
  for (int frame : onset_frames) {
    if (frame < 0) throw InvalidInput("extract_segments: negative onset frame");
    const long start = static_cast<long>(frame) * hop;
    if (start >= n) {
      ++res.skipped;
      continue;
    }
    CoughSegment seg;
    seg.onset_frame = frame;
    seg.onset_time_s = static_cast<double>(start) / clip.sample_rate_hz;
    seg.source_id = clip.source_id;
    seg.clip.sample_rate_hz = clip.sample_rate_hz;
    seg.clip.source_id = clip.source_id + "_onset" + std::to_string(frame);
    seg.clip.samples.assign(static_cast<size_t>(seg_len), 0.0f);
    const long avail = std::min(seg_len, n - start);
    std::copy(clip.samples.begin() + start, clip.samples.begin() + start + avail, seg.clip.samples.begin());
    res.segments.push_back(std::move(seg));
  }
  return res;
}

}  // namespace coughkit::segmenter
