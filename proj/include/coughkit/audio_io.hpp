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

#include <cstdint>
#include <string>
#include <vector>

#include "coughkit/common.hpp"

namespace coughkit::audio {

/// Canonical pipeline sample rate. The 120-8000 Hz analysis band spans
/// exactly to Nyquist at this rate.
constexpr int kDefaultSampleRateHz = 16000;

/// Mono waveform, amplitudes in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate_hz = 0;
  std::string source_id;

  double duration_s() const {
    return sample_rate_hz > 0 ? static_cast<double>(samples.size()) / sample_rate_hz : 0.0;
  }
};

/// Decodes a RIFF/WAVE container. Accepts PCM 16-bit and IEEE float 32-bit,
/// 1 or 2 channels; stereo is averaged to mono, integer samples are scaled
/// by 1/32768. Throws InvalidInput on malformed headers and on unsupported
/// encodings (naming the encoding).
AudioClip decode_wav(const std::vector<uint8_t>& bytes, const std::string& source_id = "");

AudioClip read_wav_file(const std::string& path);

/// Encodes mono 16-bit PCM little-endian WAV. Values are clamped to [-1, 1]
/// and quantized with round(x * 32768), so a decode/encode/decode round trip
/// is within 1 LSB.
std::vector<uint8_t> encode_wav_pcm16(const AudioClip& clip);

void write_wav_file(const std::string& path, const AudioClip& clip);

/// Band-limited resampling with a Kaiser-windowed sinc kernel (beta = 8,
/// 64 zero crossings). Output length = round(len * target / source). When
/// target_hz equals the clip's rate the clip is returned bit-identically.
AudioClip resample(const AudioClip& clip, int target_hz);

}  // namespace coughkit::audio
