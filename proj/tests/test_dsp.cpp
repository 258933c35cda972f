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

#include "coughkit/dsp.hpp"

#include <cmath>
#include <filesystem>

#include <doctest.h>

#include "coughkit/rng.hpp"

using namespace coughkit;
using audio::AudioClip;
using dsp::Spectrogram;

namespace {

AudioClip clip_of(std::vector<float> samples, int rate = 16000) {
  AudioClip c;
  c.samples = std::move(samples);
  c.sample_rate_hz = rate;
  c.source_id = "test";
  return c;
}

AudioClip noise_clip(Rng& rng, size_t n, double sigma = 0.2, int rate = 16000) {
  std::vector<float> s(n);
  for (auto& v : s) v = static_cast<float>(rng.normal(0.0, sigma));
  return clip_of(std::move(s), rate);
}

Spectrogram make_spec(int frames, int bins, double bin_hz, double fill = 0.0) {
  Spectrogram s;
  s.n_frames = frames;
  s.n_bins = bins;
  s.frame_rate_hz = 62.5;
  s.bin_hz = bin_hz;
  s.kind = dsp::SpecKind::kMagnitude;
  s.values.assign(static_cast<size_t>(frames) * bins, fill);
  return s;
}

// least-squares amplitude of a sinusoid at a known frequency
double fitted_amplitude(const std::vector<double>& x, double freq_hz, double rate_hz, size_t lo, size_t hi) {
  double ss = 0, sc = 0, cc = 0, xs = 0, xc = 0;
  for (size_t n = lo; n < hi; ++n) {
    const double ph = 2.0 * M_PI * freq_hz * static_cast<double>(n) / rate_hz;
    const double s = std::sin(ph), c = std::cos(ph);
    ss += s * s;
    sc += s * c;
    cc += c * c;
    xs += x[n] * s;
    xc += x[n] * c;
  }
  const double det = ss * cc - sc * sc;
  const double a = (xs * cc - xc * sc) / det;
  const double b = (xc * ss - xs * sc) / det;
  return std::sqrt(a * a + b * b);
}

}  // namespace

TEST_CASE("stft params resolve the expected framing at 16 kHz") {
  dsp::StftParams p;
  CHECK(p.hop_samples(16000) == 256);
  CHECK(p.win_samples(16000) == 336);
  CHECK(p.effective_fft_size(16000) == 512);
}

TEST_CASE("stft of silence is zero, short clips are rejected") {
  AudioClip zero = clip_of(std::vector<float>(4000, 0.0f));
  Spectrogram spec = dsp::stft_magnitude(zero);
  CHECK(spec.n_bins == 257);
  CHECK(spec.n_frames == (4000 - 336) / 256 + 1);
  for (double v : spec.values) CHECK(v == 0.0);

  AudioClip tiny = clip_of(std::vector<float>(100, 0.1f));
  CHECK_THROWS_AS(dsp::stft_magnitude(tiny), InvalidInput);
}

TEST_CASE("a 1 kHz tone lands on bin 32 with fft 512 at 16 kHz") {
  std::vector<float> s(8000);
  for (size_t i = 0; i < s.size(); ++i) s[i] = static_cast<float>(0.5 * std::sin(2.0 * M_PI * 1000.0 * i / 16000.0));
  Spectrogram spec = dsp::stft_magnitude(clip_of(std::move(s)));
  for (int t = 0; t < spec.n_frames; ++t) {
    int best = 0;
    for (int k = 1; k < spec.n_bins; ++k) {
      if (spec.at(t, k) > spec.at(t, best)) best = k;
    }
    CHECK(best == 32);
  }
}

TEST_CASE("windowed Parseval holds per frame within 1e-6") {
  Rng rng(5);
  AudioClip clip = noise_clip(rng, 6000);
  dsp::StftParams p;
  Spectrogram spec = dsp::stft_magnitude(clip, p);
  const int hop = p.hop_samples(16000), win = p.win_samples(16000), nfft = p.effective_fft_size(16000);

  std::vector<double> window(win);
  for (int i = 0; i < win; ++i) window[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / win));

  for (int t = 0; t < spec.n_frames; ++t) {
    double freq_sum = spec.at(t, 0) * spec.at(t, 0) + spec.at(t, spec.n_bins - 1) * spec.at(t, spec.n_bins - 1);
    for (int k = 1; k < spec.n_bins - 1; ++k) freq_sum += 2.0 * spec.at(t, k) * spec.at(t, k);
    double time_sum = 0.0;
    for (int i = 0; i < win; ++i) {
      const double wx = window[i] * clip.samples[static_cast<size_t>(t) * hop + i];
      time_sum += wx * wx;
    }
    CHECK(freq_sum == doctest::Approx(nfft * time_sum).epsilon(1e-6));
  }
}

TEST_CASE("stft scales linearly with positive gain") {
  Rng rng(6);
  AudioClip clip = noise_clip(rng, 3000, 0.1);
  AudioClip scaled = clip;
  for (auto& v : scaled.samples) v *= 0.25f;
  Spectrogram a = dsp::stft_magnitude(clip);
  Spectrogram b = dsp::stft_magnitude(scaled);
  for (size_t i = 0; i < a.values.size(); ++i) {
    if (a.values[i] > 1e-12) CHECK(b.values[i] / a.values[i] == doctest::Approx(0.25).epsilon(1e-9));
  }
}

TEST_CASE("band_energy selects bins 4..256 for 120-8000 Hz at 16 kHz / fft 512") {
  // oracle: enumerate centers k*31.25 inside [120, 8000]
  int expected = 0;
  for (int k = 0; k <= 256; ++k) {
    const double f = k * 31.25;
    if (f >= 120.0 && f <= 8000.0) ++expected;
  }
  CHECK(expected == 253);

  Spectrogram spec = make_spec(1, 257, 31.25, 1.0);
  auto energy = dsp::band_energy(spec, 120.0, 8000.0);
  CHECK(energy.size() == 1);
  CHECK(energy[0] == doctest::Approx(253.0));
}

TEST_CASE("band_energy basics and errors") {
  Spectrogram zero = make_spec(3, 257, 31.25);
  auto e = dsp::band_energy(zero, 120.0, 8000.0);
  for (double v : e) CHECK(v == 0.0);

  Spectrogram one = make_spec(2, 257, 31.25);
  one.at(0, 14) = 2.5;  // ~437.5 Hz, inside the band
  auto e2 = dsp::band_energy(one, 120.0, 8000.0);
  CHECK(e2[0] == doctest::Approx(2.5));
  CHECK(e2[1] == 0.0);

  CHECK_THROWS_AS(dsp::band_energy(one, 30.0, 30.5), InvalidInput);    // no bin center inside
  CHECK_THROWS_AS(dsp::band_energy(one, 500.0, 120.0), InvalidInput);  // inverted
  CHECK_THROWS_AS(dsp::band_energy(one, 120.0, 9000.0), InvalidInput);  // above Nyquist
}

TEST_CASE("band_energy is monotone in band inclusion") {
  Rng rng(7);
  Spectrogram spec = make_spec(5, 257, 31.25);
  for (auto& v : spec.values) v = rng.uniform();
  auto narrow = dsp::band_energy(spec, 1000.0, 2000.0);
  auto wide = dsp::band_energy(spec, 500.0, 4000.0);
  for (size_t i = 0; i < narrow.size(); ++i) CHECK(wide[i] >= narrow[i]);
}

TEST_CASE("butterworth coefficients match the reference design") {
  // frozen from an independent filter-design implementation
  auto c = dsp::butterworth_coeffs(2, 0.32);
  CHECK(c.b[0] == doctest::Approx(0.1453238838770424).epsilon(1e-12));
  CHECK(c.b[1] == doctest::Approx(0.2906477677540848).epsilon(1e-12));
  CHECK(c.b[2] == doctest::Approx(0.1453238838770424).epsilon(1e-12));
  CHECK(c.a[0] == doctest::Approx(1.0));
  CHECK(c.a[1] == doctest::Approx(-0.6710290907740961).epsilon(1e-12));
  CHECK(c.a[2] == doctest::Approx(0.2523246262822658).epsilon(1e-12));

  auto c3 = dsp::butterworth_coeffs(3, 0.5);
  CHECK(c3.b[0] == doctest::Approx(0.16666666666666663).epsilon(1e-12));
  CHECK(c3.b[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(c3.a[2] == doctest::Approx(0.3333333333333333).epsilon(1e-12));
  CHECK(std::abs(c3.a[1]) < 1e-14);
  CHECK(std::abs(c3.a[3]) < 1e-14);

  CHECK_THROWS_AS(dsp::butterworth_coeffs(0, 0.3), InvalidInput);
  CHECK_THROWS_AS(dsp::butterworth_coeffs(2, 1.5), InvalidInput);
}

TEST_CASE("zero-phase filtering keeps a constant exactly constant") {
  std::vector<double> x(200, 3.7);
  auto y = dsp::butterworth_lowpass(x, 2, 0.32);
  REQUIRE(y.size() == x.size());
  for (double v : y) CHECK(std::abs(v - 3.7) < 1e-9);
}

TEST_CASE("impulse response sums to the DC gain of 1") {
  std::vector<double> x(201, 0.0);
  x[100] = 1.0;
  auto y = dsp::butterworth_lowpass(x, 2, 0.32);
  double sum = 0.0;
  for (double v : y) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("10 Hz cutoff at 62.5 Hz: 25 Hz attenuated >= 20 dB, 1 Hz <= 1 dB") {
  const double rate = 62.5;
  const size_t n = 625;  // 10 seconds
  std::vector<double> x(n);
  for (size_t i = 0; i < n; ++i) {
    x[i] = std::sin(2.0 * M_PI * 1.0 * i / rate) + std::sin(2.0 * M_PI * 25.0 * i / rate);
  }
  auto y = dsp::butterworth_lowpass(x, 2, 10.0 / (rate / 2.0));

  const size_t lo = 60, hi = n - 60;  // skip edge transients
  const double low_in = fitted_amplitude(x, 1.0, rate, lo, hi);
  const double low_out = fitted_amplitude(y, 1.0, rate, lo, hi);
  const double high_in = fitted_amplitude(x, 25.0, rate, lo, hi);
  const double high_out = fitted_amplitude(y, 25.0, rate, lo, hi);

  const double low_db = 20.0 * std::log10(low_out / low_in);
  const double high_db = 20.0 * std::log10(high_out / high_in);
  CHECK(low_db >= -1.0);
  CHECK(high_db <= -20.0);
}

TEST_CASE("zero-phase smoothing does not shift a symmetric pulse") {
  std::vector<double> x(101, 0.0);
  for (int i = 40; i <= 60; ++i) x[i] = 1.0 - std::abs(i - 50) / 11.0;
  auto y = dsp::butterworth_lowpass(x, 2, 0.32);
  int argmax = 0;
  for (size_t i = 1; i < y.size(); ++i) {
    if (y[i] > y[argmax]) argmax = static_cast<int>(i);
  }
  CHECK(argmax == 50);
}

TEST_CASE("mel scale anchors") {
  CHECK(dsp::hz_to_mel(0.0) == 0.0);
  CHECK(dsp::hz_to_mel(700.0) == doctest::Approx(781.1728387480312).epsilon(1e-12));
  CHECK(dsp::mel_to_hz(dsp::hz_to_mel(1234.5)) == doctest::Approx(1234.5).epsilon(1e-9));
}

TEST_CASE("mel filterbank rows are positive, unimodal, and cover the band") {
  auto fb = dsp::mel_filterbank(128, 512, 16000, 0.0, 8000.0);
  CHECK(fb.n_mels == 128);
  CHECK(fb.n_fft_bins == 257);

  for (int m = 0; m < fb.n_mels; ++m) {
    double peak = 0.0;
    bool falling = false;
    bool any_positive = false;
    for (int k = 0; k < fb.n_fft_bins; ++k) {
      const double w = fb.at(m, k);
      CHECK(w >= 0.0);
      any_positive = any_positive || w > 0.0;
      if (w > peak) {
        CHECK(!falling);  // unimodal: never rises after falling
        peak = w;
      } else if (w < peak && peak > 0.0) {
        falling = true;
      }
    }
    CHECK(any_positive);
  }

  // every bin inside [f_min, f_max] has positive weight across filters
  for (int k = 0; k < fb.n_fft_bins; ++k) {
    const double f = k * 16000.0 / 512;
    if (f < 0.0 || f > 8000.0) continue;
    double col = 0.0;
    for (int m = 0; m < fb.n_mels; ++m) col += fb.at(m, k);
    CHECK(col > 0.0);
  }

  // adjacent filters overlap
  for (int m = 0; m + 1 < fb.n_mels; ++m) {
    bool overlap = false;
    for (int k = 0; k < fb.n_fft_bins; ++k) {
      if (fb.at(m, k) > 0.0 && fb.at(m + 1, k) > 0.0) {
        overlap = true;
        break;
      }
    }
    CHECK(overlap);
  }
}

TEST_CASE("mel filterbank rejects bad parameters") {
  CHECK_THROWS_AS(dsp::mel_filterbank(0, 512, 16000, 0, 8000), InvalidInput);
  CHECK_THROWS_AS(dsp::mel_filterbank(64, 512, 16000, 4000, 1000), InvalidInput);
  CHECK_THROWS_AS(dsp::mel_filterbank(64, 512, 16000, 0, 9000), InvalidInput);
  CHECK_THROWS_AS(dsp::mel_filterbank(64, 500, 16000, 0, 8000), InvalidInput);
}

TEST_CASE("log_mel of zero magnitude is ln(1e-6) everywhere") {
  auto fb = dsp::mel_filterbank(32, 512, 16000, 0.0, 8000.0);
  Spectrogram zero = make_spec(4, 257, 31.25);
  Spectrogram lm = dsp::log_mel(zero, fb);
  CHECK(lm.n_bins == 32);
  CHECK(lm.kind == dsp::SpecKind::kLogMel);
  for (double v : lm.values) CHECK(v == doctest::Approx(std::log(1e-6)).epsilon(1e-12));
}

TEST_CASE("doubling magnitudes shifts log-mel cells by ln 4 where power dominates eps") {
  Rng rng(8);
  auto fb = dsp::mel_filterbank(32, 512, 16000, 0.0, 8000.0);
  Spectrogram spec = make_spec(3, 257, 31.25);
  for (auto& v : spec.values) v = 1.0 + rng.uniform();
  Spectrogram doubled = spec;
  for (auto& v : doubled.values) v *= 2.0;

  Spectrogram a = dsp::log_mel(spec, fb);
  Spectrogram b = dsp::log_mel(doubled, fb);
  for (size_t i = 0; i < a.values.size(); ++i) {
    CHECK(b.values[i] - a.values[i] == doctest::Approx(std::log(4.0)).epsilon(1e-5));
  }
}

TEST_CASE("log_mel equals the naive per-cell oracle within 1e-10") {
  Rng rng(9);
  auto fb = dsp::mel_filterbank(24, 512, 16000, 50.0, 7500.0);
  Spectrogram spec = make_spec(6, 257, 31.25);
  for (auto& v : spec.values) v = rng.uniform();

  Spectrogram lm = dsp::log_mel(spec, fb);
  for (int t = 0; t < spec.n_frames; ++t) {
    for (int m = 0; m < fb.n_mels; ++m) {
      double acc = 0.0;
      for (int k = 0; k < spec.n_bins; ++k) acc += fb.at(m, k) * spec.at(t, k) * spec.at(t, k);
      CHECK(lm.at(t, m) == doctest::Approx(std::log(acc + 1e-6)).epsilon(1e-10));
    }
  }

  Spectrogram wrong = make_spec(2, 129, 62.5);
  CHECK_THROWS_AS(dsp::log_mel(wrong, fb), InvalidInput);
}

TEST_CASE("log_mel is monotone in magnitude per cell") {
  auto fb = dsp::mel_filterbank(16, 512, 16000, 0.0, 8000.0);
  Spectrogram a = make_spec(1, 257, 31.25, 0.5);
  Spectrogram b = make_spec(1, 257, 31.25, 0.5);
  b.at(0, 100) = 0.9;
  Spectrogram la = dsp::log_mel(a, fb);
  Spectrogram lb = dsp::log_mel(b, fb);
  for (size_t i = 0; i < la.values.size(); ++i) CHECK(lb.values[i] >= la.values[i]);
}

TEST_CASE("per-clip standardization yields mean 0 and std 1") {
  Rng rng(10);
  Spectrogram spec = make_spec(128, 128, 0.0);
  spec.kind = dsp::SpecKind::kLogMel;
  for (auto& v : spec.values) v = rng.normal(3.0, 2.0);

  dsp::ModelInputSpec target;
  target.channels = 1;
  target.height = 128;
  target.width = 128;
  dsp::ModelInput mi = dsp::to_model_input(spec, target);
  CHECK(mi.values.size() == 128u * 128u);
  double mean = 0.0;
  for (float v : mi.values) mean += v;
  mean /= static_cast<double>(mi.values.size());
  double var = 0.0;
  for (float v : mi.values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(mi.values.size());
  CHECK(std::abs(mean) < 1e-5);
  CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("3-channel duplication produces bitwise identical planes") {
  Rng rng(11);
  Spectrogram spec = make_spec(32, 16, 0.0);
  spec.kind = dsp::SpecKind::kLogMel;
  for (auto& v : spec.values) v = rng.uniform();

  dsp::ModelInputSpec target;
  target.channels = 3;
  target.height = 16;
  target.width = 32;
  dsp::ModelInput mi = dsp::to_model_input(spec, target);
  const size_t plane = static_cast<size_t>(16) * 32;
  for (size_t i = 0; i < plane; ++i) {
    CHECK(mi.values[i] == mi.values[plane + i]);
    CHECK(mi.values[i] == mi.values[2 * plane + i]);
  }
}

TEST_CASE("constant input standardizes to all zeros") {
  Spectrogram spec = make_spec(20, 10, 0.0, 5.0);
  spec.kind = dsp::SpecKind::kLogMel;
  dsp::ModelInputSpec target;
  target.height = 10;
  target.width = 20;
  dsp::ModelInput mi = dsp::to_model_input(spec, target);
  for (float v : mi.values) CHECK(v == 0.0f);
}

TEST_CASE("same-size resize is the identity up to normalization") {
  Rng rng(12);
  Spectrogram spec = make_spec(24, 12, 0.0);
  spec.kind = dsp::SpecKind::kLogMel;
  for (auto& v : spec.values) v = rng.uniform();

  dsp::ModelInputSpec target;
  target.height = 12;
  target.width = 24;
  target.normalization = dsp::Normalization::kFixedMeanStd;
  target.mean = 0.0;
  target.std_dev = 1.0;
  dsp::ModelInput mi = dsp::to_model_input(spec, target);
  for (int b = 0; b < 12; ++b) {
    for (int t = 0; t < 24; ++t) {
      CHECK(mi.values[static_cast<size_t>(b) * 24 + t] == doctest::Approx(spec.at(t, b)).epsilon(1e-7));
    }
  }

  dsp::ModelInputSpec bad;
  bad.height = 0;
  CHECK_THROWS_AS(dsp::to_model_input(spec, bad), InvalidInput);
}

TEST_CASE("spectrogram files round trip") {
  Rng rng(13);
  Spectrogram spec = make_spec(17, 9, 0.0);
  spec.kind = dsp::SpecKind::kLogMel;
  spec.frame_rate_hz = 62.5;
  for (auto& v : spec.values) v = rng.normal();

  const std::string path = (std::filesystem::temp_directory_path() / "ck_spec_test.spec").string();
  dsp::write_spectrogram_file(path, spec);
  Spectrogram back = dsp::read_spectrogram_file(path);
  CHECK(back.n_frames == 17);
  CHECK(back.n_bins == 9);
  CHECK(back.frame_rate_hz == 62.5);
  CHECK(back.kind == dsp::SpecKind::kLogMel);
  for (size_t i = 0; i < spec.values.size(); ++i) {
    CHECK(back.values[i] == static_cast<double>(static_cast<float>(spec.values[i])));
  }
  std::filesystem::remove(path);
}
