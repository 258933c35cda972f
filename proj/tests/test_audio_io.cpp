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

#include "coughkit/audio_io.hpp"

#include <cmath>
#include <cstring>

#include <doctest.h>

#include "coughkit/dsp.hpp"
#include "coughkit/rng.hpp"

using namespace coughkit;
using audio::AudioClip;

namespace {

void push_u32(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(x & 0xff);
  v.push_back((x >> 8) & 0xff);
  v.push_back((x >> 16) & 0xff);
  v.push_back((x >> 24) & 0xff);
}

void push_u16(std::vector<uint8_t>& v, uint16_t x) {
  v.push_back(x & 0xff);
  v.push_back((x >> 8) & 0xff);
}

std::vector<uint8_t> build_wav(uint16_t format, uint16_t channels, uint32_t rate, uint16_t bits,
                               const std::vector<uint8_t>& data) {
  std::vector<uint8_t> v;
  v.insert(v.end(), {'R', 'I', 'F', 'F'});
  push_u32(v, 36 + static_cast<uint32_t>(data.size()));
  v.insert(v.end(), {'W', 'A', 'V', 'E'});
  v.insert(v.end(), {'f', 'm', 't', ' '});
  push_u32(v, 16);
  push_u16(v, format);
  push_u16(v, channels);
  push_u32(v, rate);
  push_u32(v, rate * channels * bits / 8);
  push_u16(v, channels * bits / 8);
  push_u16(v, bits);
  v.insert(v.end(), {'d', 'a', 't', 'a'});
  push_u32(v, static_cast<uint32_t>(data.size()));
  v.insert(v.end(), data.begin(), data.end());
  return v;
}

std::vector<uint8_t> pcm16_payload(const std::vector<int16_t>& samples) {
  std::vector<uint8_t> data;
  for (int16_t s : samples) push_u16(data, static_cast<uint16_t>(s));
  return data;
}

AudioClip sine_clip(double freq_hz, int rate, double duration_s, double amplitude = 0.5) {
  AudioClip clip;
  clip.sample_rate_hz = rate;
  clip.source_id = "sine";
  const size_t n = static_cast<size_t>(std::lround(duration_s * rate));
  clip.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    clip.samples[i] = static_cast<float>(amplitude * std::sin(2.0 * M_PI * freq_hz * i / rate));
  }
  return clip;
}

// argmax frequency of the mean magnitude spectrum
double dominant_hz(const AudioClip& clip) {
  dsp::Spectrogram spec = dsp::stft_magnitude(clip);
  std::vector<double> mean(spec.n_bins, 0.0);
  for (int t = 0; t < spec.n_frames; ++t) {
    for (int k = 0; k < spec.n_bins; ++k) mean[k] += spec.at(t, k);
  }
  int best = 0;
  for (int k = 1; k < spec.n_bins; ++k) {
    if (mean[k] > mean[best]) best = k;
  }
  return best * spec.bin_hz;
}

}  // namespace

TEST_CASE("decode reads 16-bit PCM mono headers") {
  std::vector<int16_t> samples(16000, 0);
  samples[0] = 16384;
  auto wav = build_wav(1, 1, 16000, 16, pcm16_payload(samples));
  AudioClip clip = audio::decode_wav(wav, "t");
  CHECK(clip.sample_rate_hz == 16000);
  CHECK(clip.samples.size() == 16000);
  CHECK(clip.samples[0] == doctest::Approx(0.5));  // 16384 / 32768
  CHECK(clip.source_id == "t");
}

TEST_CASE("stereo channels are averaged") {
  std::vector<int16_t> frames{32767, 0, 32767, 0};  // two frames of [~1.0, 0.0]
  auto wav = build_wav(1, 2, 8000, 16, pcm16_payload(frames));
  AudioClip clip = audio::decode_wav(wav);
  CHECK(clip.samples.size() == 2);
  CHECK(clip.samples[0] == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("float32 wav decodes") {
  std::vector<uint8_t> data;
  for (float f : {0.25f, -0.5f, 1.0f}) {
    uint32_t u;
    std::memcpy(&u, &f, 4);
    push_u32(data, u);
  }
  auto wav = build_wav(3, 1, 44100, 32, data);
  AudioClip clip = audio::decode_wav(wav);
  CHECK(clip.sample_rate_hz == 44100);
  CHECK(clip.samples[0] == doctest::Approx(0.25));
  CHECK(clip.samples[1] == doctest::Approx(-0.5));
}

TEST_CASE("malformed and unsupported inputs are rejected with names") {
  std::vector<uint8_t> junk(100, 0x41);
  CHECK_THROWS_AS(audio::decode_wav(junk), InvalidInput);

  auto mulaw = build_wav(7, 1, 8000, 8, std::vector<uint8_t>(16, 0));
  try {
    audio::decode_wav(mulaw);
    FAIL("mu-law should be rejected");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("mu-law") != std::string::npos);
  }
}

TEST_CASE("decode-encode-decode round trip stays within 1 LSB") {
  Rng rng(3);
  std::vector<int16_t> samples(500);
  for (auto& s : samples) s = static_cast<int16_t>(rng.uniform_int(65536)) ;
  auto wav = build_wav(1, 1, 16000, 16, pcm16_payload(samples));
  AudioClip first = audio::decode_wav(wav);
  AudioClip second = audio::decode_wav(audio::encode_wav_pcm16(first));
  REQUIRE(second.samples.size() == first.samples.size());
  for (size_t i = 0; i < first.samples.size(); ++i) {
    CHECK(std::abs(first.samples[i] - second.samples[i]) <= 1.0f / 32768.0f);
  }
}

TEST_CASE("resample at the same rate is bit-identical") {
  AudioClip clip = sine_clip(440.0, 16000, 0.5);
  AudioClip out = audio::resample(clip, 16000);
  CHECK(out.samples == clip.samples);
}

TEST_CASE("resample 8k -> 16k doubles the sample count") {
  AudioClip clip = sine_clip(200.0, 8000, 1.0);
  AudioClip out = audio::resample(clip, 16000);
  CHECK(out.samples.size() == 16000);
  CHECK(out.sample_rate_hz == 16000);
}

TEST_CASE("a 440 Hz tone keeps its dominant bin through 48k -> 16k resampling") {
  AudioClip hi = sine_clip(440.0, 48000, 1.0);
  const double before = dominant_hz(hi);
  AudioClip lo = audio::resample(hi, 16000);
  const double after = dominant_hz(lo);
  // within half a bin on each side's frequency grid
  CHECK(std::abs(before - 440.0) <= 48000.0 / 1024 / 2);
  CHECK(std::abs(after - 440.0) <= 16000.0 / 512 / 2);
}
