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

#include <cmath>

#include <doctest.h>

#include "coughkit/rng.hpp"

using namespace coughkit;
using audio::AudioClip;
using segmenter::OnsetConfig;

namespace {

OnsetConfig test_config() {
  OnsetConfig cfg;
  cfg.peak_threshold = 0.5;  // natural-log units on synthetic signals
  return cfg;
}

AudioClip synthetic_clip(Rng& rng, double duration_s, const std::vector<double>& burst_starts_s,
                         double burst_dur_s = 0.3, double burst_amp = 0.5, double floor_amp = 1e-3) {
  AudioClip clip;
  clip.sample_rate_hz = 16000;
  clip.source_id = "synthetic";
  const size_t n = static_cast<size_t>(std::lround(duration_s * 16000));
  clip.samples.resize(n);
  for (size_t i = 0; i < n; ++i) clip.samples[i] = static_cast<float>(rng.normal(0.0, floor_amp));
  for (double t0 : burst_starts_s) {
    const size_t s0 = static_cast<size_t>(std::lround(t0 * 16000));
    const size_t s1 = std::min(n, s0 + static_cast<size_t>(std::lround(burst_dur_s * 16000)));
    for (size_t i = s0; i < s1; ++i) clip.samples[i] = static_cast<float>(rng.normal(0.0, burst_amp));
  }
  return clip;
}

}  // namespace

TEST_CASE("constant-energy signal has zero change rate") {
  // identical repeated frames so the band energy is exactly constant
  AudioClip clip;
  clip.sample_rate_hz = 16000;
  Rng rng(1);
  std::vector<float> frame(256);
  for (auto& v : frame) v = static_cast<float>(rng.normal(0.0, 0.1));
  for (int r = 0; r < 20; ++r) clip.samples.insert(clip.samples.end(), frame.begin(), frame.end());

  OnsetConfig cfg = test_config();
  cfg.smooth_cutoff_hz = 0.0;  // disable smoothing to see the raw ratios
  auto rate = segmenter::energy_change_rate(clip, cfg);
  // interior frames see identical content; edge frames straddle the ends
  for (size_t t = 1; t + 1 < rate.size(); ++t) CHECK(std::abs(rate[t]) < 1e-9);
}

TEST_CASE("energy doubling each frame gives ln 2 per frame") {
  // every hop-length repetition is scaled by 2, so each STFT frame is
  // exactly twice the previous one and the band energy doubles per frame
  AudioClip clip;
  clip.sample_rate_hz = 16000;
  Rng rng(2);
  std::vector<float> base(256);
  for (auto& v : base) v = static_cast<float>(rng.normal(0.0, 4e-7));
  for (int t = 0; t < 20; ++t) {
    const double g = std::pow(2.0, t);
    for (float v : base) clip.samples.push_back(static_cast<float>(v * g));
  }

  OnsetConfig cfg = test_config();
  cfg.smooth_cutoff_hz = 0.0;
  auto rate = segmenter::energy_change_rate(clip, cfg);
  for (size_t t = 1; t + 1 < rate.size(); ++t) {
    CHECK(rate[t] == doctest::Approx(std::log(2.0)).epsilon(0.02));
  }

  cfg.ratio_log_base10 = true;
  auto rate10 = segmenter::energy_change_rate(clip, cfg);
  for (size_t t = 1; t + 1 < rate10.size(); ++t) {
    CHECK(rate10[t] == doctest::Approx(std::log10(2.0)).epsilon(0.02));
  }
}

TEST_CASE("silence then burst puts the single raw peak at the burst boundary") {
  Rng rng(3);
  AudioClip clip = synthetic_clip(rng, 2.0, {1.0});
  OnsetConfig cfg = test_config();
  cfg.smooth_cutoff_hz = 0.0;
  auto rate = segmenter::energy_change_rate(clip, cfg);

  int above = 0;
  size_t argmax = 0;
  for (size_t t = 0; t < rate.size(); ++t) {
    if (rate[t] > 3.0) ++above;
    if (rate[t] > rate[argmax]) argmax = t;
  }
  CHECK(above >= 1);
  CHECK(above <= 2);  // the jump spreads over at most the two straddling frames
  // rate index t compares energy frame t+1 to frame t; burst start is 1.0 s ~ frame 62.5
  CHECK(argmax >= 60);
  CHECK(argmax <= 63);
}

TEST_CASE("digital silence yields no onsets and finite change rates") {
  AudioClip clip;
  clip.sample_rate_hz = 16000;
  clip.samples.assign(16000, 0.0f);
  OnsetConfig cfg = test_config();
  auto rate = segmenter::energy_change_rate(clip, cfg);
  for (double r : rate) {
    CHECK(std::isfinite(r));
    CHECK(r == 0.0);
  }
  CHECK(segmenter::detect_onsets(clip, cfg).empty());
}

TEST_CASE("one injected burst is detected within 3 frames of ground truth") {
  Rng rng(4);
  const double start_s = 1.0;  // frame 62.5
  AudioClip clip = synthetic_clip(rng, 3.0, {start_s});
  OnsetConfig cfg = test_config();
  auto onsets = segmenter::detect_onsets(clip, cfg);
  REQUIRE(onsets.size() == 1);
  const double truth_frame = start_s * 16000 / 256;
  CHECK(std::abs(onsets[0] - truth_frame) <= 3.0);
}

TEST_CASE("two bursts give two ordered onsets") {
  Rng rng(5);
  AudioClip clip = synthetic_clip(rng, 4.0, {1.0, 3.0});
  OnsetConfig cfg = test_config();
  auto onsets = segmenter::detect_onsets(clip, cfg);
  REQUIRE(onsets.size() == 2);
  CHECK(onsets[0] < onsets[1]);
  CHECK(std::abs(onsets[0] - 62.5) <= 3.0);
  CHECK(std::abs(onsets[1] - 187.5) <= 3.0);
}

TEST_CASE("detection is gain invariant") {
  Rng rng(6);
  AudioClip clip = synthetic_clip(rng, 3.0, {1.5});
  AudioClip quieter = clip;
  for (auto& v : quieter.samples) v *= 0.125f;
  AudioClip louder = clip;
  for (auto& v : louder.samples) v = std::min(1.0f, v * 1.9f);

  OnsetConfig cfg = test_config();
  auto base = segmenter::detect_onsets(clip, cfg);
  CHECK(segmenter::detect_onsets(quieter, cfg) == base);
  CHECK(segmenter::detect_onsets(louder, cfg) == base);
}

TEST_CASE("delaying by whole hops shifts onsets by exactly that many frames") {
  Rng rng(7);
  const int hop = 256, shift_frames = 8;
  AudioClip clip = synthetic_clip(rng, 3.0, {1.0});

  AudioClip delayed;
  delayed.sample_rate_hz = clip.sample_rate_hz;
  Rng pad_rng(99);
  for (int i = 0; i < shift_frames * hop; ++i) {
    delayed.samples.push_back(static_cast<float>(pad_rng.normal(0.0, 1e-3)));
  }
  delayed.samples.insert(delayed.samples.end(), clip.samples.begin(), clip.samples.end());

  OnsetConfig cfg = test_config();
  auto base = segmenter::detect_onsets(clip, cfg);
  auto shifted = segmenter::detect_onsets(delayed, cfg);
  REQUIRE(base.size() == 1);
  REQUIRE(shifted.size() == 1);
  CHECK(shifted[0] == base[0] + shift_frames);
}

TEST_CASE("detection is deterministic") {
  Rng rng(8);
  AudioClip clip = synthetic_clip(rng, 3.0, {0.8, 2.2});
  OnsetConfig cfg = test_config();
  CHECK(segmenter::detect_onsets(clip, cfg) == segmenter::detect_onsets(clip, cfg));
}

TEST_CASE("extract_segments is exact at 16 kHz") {
  AudioClip clip;
  clip.sample_rate_hz = 16000;
  clip.samples.assign(32000, 0.25f);
  clip.source_id = "src";

  auto res = segmenter::extract_segments(clip, {0}, 1.0);
  REQUIRE(res.segments.size() == 1);
  CHECK(res.segments[0].clip.samples.size() == 16000);
  CHECK(res.segments[0].onset_time_s == 0.0);
  CHECK(res.skipped == 0);
}

TEST_CASE("segments ending past the clip are zero padded") {
  AudioClip clip;
  clip.sample_rate_hz = 16000;
  clip.samples.assign(16000, 0.5f);  // 1 second

  auto res = segmenter::extract_segments(clip, {31}, 1.0);
  REQUIRE(res.segments.size() == 1);
  const auto& seg = res.segments[0].clip.samples;
  CHECK(seg.size() == 16000);
  const size_t available = 16000 - 31 * 256;
  for (size_t i = 0; i < available; ++i) CHECK(seg[i] == 0.5f);
  for (size_t i = available; i < seg.size(); ++i) CHECK(seg[i] == 0.0f);
}

TEST_CASE("empty onset list and out-of-range onsets") {
  AudioClip clip;
  clip.sample_rate_hz = 16000;
  clip.samples.assign(8000, 0.1f);

  auto res = segmenter::extract_segments(clip, {}, 1.0);
  CHECK(res.segments.empty());
  CHECK(res.skipped == 0);

  auto res2 = segmenter::extract_segments(clip, {100}, 1.0);  // frame 100 = sample 25600 > 8000
  CHECK(res2.segments.empty());
  CHECK(res2.skipped == 1);
}

TEST_CASE("onset config validation") {
  OnsetConfig cfg = test_config();
  cfg.energy_window_frames = 4;  // must be odd
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = test_config();
  cfg.onset_backoff_frames = -1;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = test_config();
  cfg.band_lo_hz = 9000;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}
