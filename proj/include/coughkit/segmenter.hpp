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

namespace coughkit::segmenter {

/// Onset detector settings. The detector thresholds the smoothed log ratio
/// of successive band energies; the threshold unit is whatever the log base
/// and smoothing produce, so configs should always set it explicitly.
struct OnsetConfig {
  dsp::StftParams stft;
  double band_lo_hz = 120.0;
  double band_hi_hz = 8000.0;
  bool ratio_log_base10 = false;  // natural log by default
  int smooth_order = 2;
  double smooth_cutoff_hz = 10.0;  // at the frame rate of the energy sequence
  double peak_threshold = 100.0;
  int energy_window_frames = 5;  // must be odd
  int onset_backoff_frames = 2;
  double segment_duration_s = 1.0;

  void validate() const;
};

/// One extracted cough, a fixed-duration clip anchored at its onset frame.
struct CoughSegment {
  audio::AudioClip clip;
  int onset_frame = 0;
  double onset_time_s = 0.0;
  std::string source_id;
};

/// Smoothed log ratio of successive band energies, length n_frames - 1.
/// Energies are floored at 1e-12 so digital silence yields finite zeros.
std::vector<double> energy_change_rate(const audio::AudioClip& clip, const OnsetConfig& cfg);

/// Finds local maxima of the smoothed change rate above the threshold,
/// locates the band-energy peak in the window centred on each, and backs
/// off onset_backoff_frames. Sorted, deduplicated, with a minimum gap of
/// energy_window_frames between reported onsets.
std::vector<int> detect_onsets(const audio::AudioClip& clip, const OnsetConfig& cfg);

struct ExtractResult {
  std::vector<CoughSegment> segments;
  int skipped = 0;  // onsets at or beyond the clip end
};

/// Cuts one fixed-duration segment per onset, zero-padding the tail when
/// the clip ends early. Overlapping segments are allowed.
ExtractResult extract_segments(const audio::AudioClip& clip, const std::vector<int>& onset_frames,
                               double duration_s, const dsp::StftParams& stft = {});

}  // namespace coughkit::segmenter
