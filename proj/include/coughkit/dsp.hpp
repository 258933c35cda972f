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

#include "coughkit/audio_io.hpp"
#include "coughkit/common.hpp"

namespace coughkit::dsp {

/// STFT framing parameters. Defaults follow the segmentation front end:
/// 0.016 s hop, 0.021 s Hann window (256/336 samples at 16 kHz), FFT size
/// the next power of two above the window (512 at 16 kHz). No centering
/// padding is applied, so frame t covers samples [t*hop, t*hop + win).
struct StftParams {
  double hop_s = 0.016;
  double win_s = 0.021;
  int fft_size = 0;  // 0: smallest power of two >= window length

  int hop_samples(int sample_rate_hz) const;
  int win_samples(int sample_rate_hz) const;
  int effective_fft_size(int sample_rate_hz) const;
};

enum class SpecKind { kMagnitude, kLogMel };

/// 2D time-frequency array, row-major [n_frames x n_bins].
struct Spectrogram {
  std::vector<double> values;
  int n_frames = 0;
  int n_bins = 0;
  double frame_rate_hz = 0.0;
  double bin_hz = 0.0;  // linear bin spacing for magnitude kind; 0 for mel
  SpecKind kind = SpecKind::kMagnitude;

  double& at(int frame, int bin) { return values[static_cast<size_t>(frame) * n_bins + bin]; }
  double at(int frame, int bin) const { return values[static_cast<size_t>(frame) * n_bins + bin]; }
};

/// Triangular mel filters, HTK scale mel(f) = 2595*log10(1 + f/700).
/// Weights are the average of each triangle over the band of FFT bin k
/// rather than a point sample at the bin center, so every filter keeps a
/// positive row even when filters are narrower than one bin.
struct MelFilterbank {
  std::vector<double> weights;  // [n_mels x n_fft_bins]
  int n_mels = 0;
  int n_fft_bins = 0;
  double f_min = 0.0, f_max = 0.0;

  double at(int mel, int bin) const { return weights[static_cast<size_t>(mel) * n_fft_bins + bin]; }
};

enum class Normalization { kPerClipStandardize, kFixedMeanStd };

struct ModelInputSpec {
  int channels = 1;
  int height = 128;  // mel bins
  int width = 64;    // time frames
  Normalization normalization = Normalization::kPerClipStandardize;
  double mean = 0.0, std_dev = 1.0;  // for kFixedMeanStd
};

/// Model-ready tensor, row-major [channels x height x width]. Rows are
/// frequency bins, columns time frames (the spectrogram is transposed into
/// image orientation before resizing).
struct ModelInput {
  std::vector<float> values;
  int channels = 0, height = 0, width = 0;

  size_t size() const { return values.size(); }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Hann-windowed magnitude STFT; n_bins = fft_size/2 + 1, frames as per
/// StftParams (no centering). Throws if the clip is shorter than one window.
Spectrogram stft_magnitude(const audio::AudioClip& clip, const StftParams& params = {});

/// Per-frame sum of magnitude over bins whose center frequency lies in
/// [lo_hz, hi_hz]. Throws if no bin falls inside the band.
std::vector<double> band_energy(const Spectrogram& spec, double lo_hz, double hi_hz);

/// Digital Butterworth low-pass coefficients (bilinear transform of the
/// analog prototype). cutoff_norm is the cutoff divided by Nyquist, in (0,1).
struct IirCoeffs {
  std::vector<double> b, a;  // a[0] == 1
};
IirCoeffs butterworth_coeffs(int order, double cutoff_norm);

/// Zero-phase (forward-backward) Butterworth smoothing; output length equals
/// input length. Ends are handled with odd reflection padding.
std::vector<double> butterworth_lowpass(const std::vector<double>& x, int order, double cutoff_norm);

MelFilterbank mel_filterbank(int n_mels, int fft_size, int sample_rate_hz, double f_min, double f_max);

/// log-mel projection: ln(fb * magnitude^2 + 1e-6).
Spectrogram log_mel(const Spectrogram& spec, const MelFilterbank& fb);

/// Transposes to image orientation (rows = bins), bilinear-resizes to the
/// target, duplicates channels, then normalizes. A constant input under
/// per-clip standardization maps to zeros (sigma is floored at 1e-8).
ModelInput to_model_input(const Spectrogram& spec, const ModelInputSpec& target);

/// Portable float matrix format: text header line "rows cols frame_rate_hz kind"
/// followed by row-major little-endian 32-bit floats.
void write_spectrogram_file(const std::string& path, const Spectrogram& spec);
Spectrogram read_spectrogram_file(const std::string& path);

}  // namespace coughkit::dsp
