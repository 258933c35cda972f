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

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <sstream>

#include "coughkit/kernels.hpp"

namespace coughkit::dsp {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT. Power-of-two sizes only; fixed butterfly
// order keeps results bit-stable across runs.
void fft_radix2(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  if (n <= 1) return;
  // bit reversal
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        auto u = a[i + j];
        auto v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// Direct-form II transposed IIR filter with explicit initial state.
std::vector<double> lfilter(const std::vector<double>& b, const std::vector<double>& a,
                            const std::vector<double>& x, std::vector<double> z) {
  const size_t nt = std::max(a.size(), b.size());
  std::vector<double> bb(b), aa(a);
  bb.resize(nt, 0.0);
  aa.resize(nt, 0.0);
  z.resize(nt - 1, 0.0);
  std::vector<double> y(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    double xi = x[i];
    double yi = bb[0] * xi + z[0];
    for (size_t k = 0; k + 1 < nt - 1; ++k) {
      z[k] = bb[k + 1] * xi + z[k + 1] - aa[k + 1] * yi;
    }
    z[nt - 2] = bb[nt - 1] * xi - aa[nt - 1] * yi;
    y[i] = yi;
  }
  return y;
}

// Steady-state filter state for a unit step input, so that filtering a
// constant signal produces that constant from the first sample.
std::vector<double> lfilter_zi(const std::vector<double>& b, const std::vector<double>& a) {
  const size_t nt = std::max(a.size(), b.size());
  std::vector<double> bb(b), aa(a);
  bb.resize(nt, 0.0);
  aa.resize(nt, 0.0);
  const size_t n = nt - 1;
  // Solve (I - A^T) zi = B with A the companion matrix of aa and
  // B = bb[1:] - aa[1:]*bb[0].
  std::vector<double> m(n * n, 0.0), rhs(n);
  for (size_t i = 0; i < n; ++i) {
    m[i * n + 0] = (i == 0 ? 1.0 : 0.0) + aa[i + 1];
    for (size_t j = 1; j < n; ++j) {
      double A_ji = (j - 1 == i) ? 1.0 : 0.0;  // companion subdiagonal, transposed
      m[i * n + j] = (i == j ? 1.0 : 0.0) - A_ji;
    }
    rhs[i] = bb[i + 1] - aa[i + 1] * bb[0];
  }
  // Gaussian elimination with partial pivoting; systems here are tiny.
  for (size_t col = 0; col < n; ++col) {
    size_t piv = col;
    for (size_t r = col + 1; r < n; ++r) {
      if (std::abs(m[r * n + col]) > std::abs(m[piv * n + col])) piv = r;
    }
    if (std::abs(m[piv * n + col]) < 1e-300) throw NumericError("butterworth: singular zi system");
    if (piv != col) {
      for (size_t j = 0; j < n; ++j) std::swap(m[piv * n + j], m[col * n + j]);
      std::swap(rhs[piv], rhs[col]);
    }
    for (size_t r = col + 1; r < n; ++r) {
      double f = m[r * n + col] / m[col * n + col];
      for (size_t j = col; j < n; ++j) m[r * n + j] -= f * m[col * n + j];
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<double> zi(n);
  for (size_t i = n; i-- > 0;) {
    double s = rhs[i];
    for (size_t j = i + 1; j < n; ++j) s -= m[i * n + j] * zi[j];
    zi[i] = s / m[i * n + i];
  }
  return zi;
}

}  // namespace

int StftParams::hop_samples(int sample_rate_hz) const {
  int h = static_cast<int>(std::lround(hop_s * sample_rate_hz));
  if (h < 1) throw InvalidInput("StftParams: hop shorter than one sample");
  return h;
}

int StftParams::win_samples(int sample_rate_hz) const {
  int w = static_cast<int>(std::lround(win_s * sample_rate_hz));
  if (w < 2) throw InvalidInput("StftParams: window shorter than two samples");
  if (w < hop_samples(sample_rate_hz)) throw InvalidInput("StftParams: window shorter than hop");
  return w;
}

int StftParams::effective_fft_size(int sample_rate_hz) const {
  int w = win_samples(sample_rate_hz);
  int n = fft_size;
  if (n == 0) {
    n = 1;
    while (n < w) n <<= 1;
  }
  if (!is_pow2(n)) throw InvalidInput("StftParams: fft_size must be a power of two, got " + std::to_string(n));
  if (n < w) throw InvalidInput("StftParams: fft_size smaller than the window length");
  return n;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Spectrogram stft_magnitude(const audio::AudioClip& clip, const StftParams& params) {
  if (clip.sample_rate_hz <= 0) throw InvalidInput("stft: clip has no sample rate");
  const int hop = params.hop_samples(clip.sample_rate_hz);
  const int win = params.win_samples(clip.sample_rate_hz);
  const int nfft = params.effective_fft_size(clip.sample_rate_hz);
  const long n = static_cast<long>(clip.samples.size());
  if (n < win) {
    throw InvalidInput("stft: clip of " + std::to_string(n) + " samples is shorter than one window (" +
                       std::to_string(win) + ")");
  }

  const int n_frames = static_cast<int>((n - win) / hop) + 1;
  const int n_bins = nfft / 2 + 1;

  std::vector<double> window(win);
  for (int i = 0; i < win; ++i) {
    window[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / win));
  }

  Spectrogram out;
  out.n_frames = n_frames;
  out.n_bins = n_bins;
  out.frame_rate_hz = static_cast<double>(clip.sample_rate_hz) / hop;
  out.bin_hz = static_cast<double>(clip.sample_rate_hz) / nfft;
  out.kind = SpecKind::kMagnitude;
  out.values.resize(static_cast<size_t>(n_frames) * n_bins);

  kernels::parallel_for(n_frames, [&](int t) {
    std::vector<std::complex<double>> buf(nfft, {0.0, 0.0});
    const float* x = clip.samples.data() + static_cast<size_t>(t) * hop;
    for (int i = 0; i < win; ++i) buf[i] = std::complex<double>(window[i] * x[i], 0.0);
    fft_radix2(buf);
    double* row = out.values.data() + static_cast<size_t>(t) * n_bins;
    for (int k = 0; k < n_bins; ++k) row[k] = std::abs(buf[k]);
  });
  return out;
}

std::vector<double> band_energy(const Spectrogram& spec, double lo_hz, double hi_hz) {
  if (spec.kind != SpecKind::kMagnitude) throw InvalidInput("band_energy: needs a magnitude spectrogram");
  if (spec.bin_hz <= 0.0) throw InvalidInput("band_energy: spectrogram lacks a linear bin axis");
  const double nyquist = spec.bin_hz * (spec.n_bins - 1);
  if (!(lo_hz < hi_hz)) throw InvalidInput("band_energy: need lo_hz < hi_hz");
  if (hi_hz > nyquist + 1e-9) {
    throw InvalidInput("band_energy: hi_hz " + std::to_string(hi_hz) + " above Nyquist " +
                       std::to_string(nyquist));
  }

  int k_lo = spec.n_bins, k_hi = -1;
  for (int k = 0; k < spec.n_bins; ++k) {
    double f = k * spec.bin_hz;
    if (f >= lo_hz && f <= hi_hz) {
      k_lo = std::min(k_lo, k);
      k_hi = std::max(k_hi, k);
    }
  }
  if (k_hi < k_lo) throw InvalidInput("band_energy: no FFT bin center falls inside the band");

  std::vector<double> energy(spec.n_frames);
  for (int t = 0; t < spec.n_frames; ++t) {
    double acc = 0.0;
    const double* row = spec.values.data() + static_cast<size_t>(t) * spec.n_bins;
    for (int k = k_lo; k <= k_hi; ++k) acc += row[k];
    energy[t] = acc;
  }
  return energy;
}

IirCoeffs butterworth_coeffs(int order, double cutoff_norm) {
  if (order < 1) throw InvalidInput("butterworth: order must be >= 1");
  if (!(cutoff_norm > 0.0 && cutoff_norm < 1.0)) {
    throw InvalidInput("butterworth: cutoff_norm must lie in (0, 1)");
  }

  const double fs = 2.0;
  const double warped = 2.0 * fs * std::tan(M_PI * cutoff_norm / fs);

  // Analog prototype poles on the unit circle (left half plane), scaled to
  // the warped cutoff, then mapped by the bilinear transform.
  std::vector<std::complex<double>> pz(order);
  std::complex<double> denom_prod(1.0, 0.0);
  for (int k = 0; k < order; ++k) {
    const double theta = M_PI * (2.0 * k + 1.0) / (2.0 * order) + M_PI / 2.0;
    const std::complex<double> p = warped * std::exp(std::complex<double>(0.0, theta));
    pz[k] = (2.0 * fs + p) / (2.0 * fs - p);
    denom_prod *= (2.0 * fs - p);
  }
  const double gain = std::pow(warped, order) * (1.0 / denom_prod).real();

  auto poly_from_roots = [](const std::vector<std::complex<double>>& roots) {
    std::vector<std::complex<double>> c{1.0};
    for (const auto& r : roots) {
      std::vector<std::complex<double>> nc(c.size() + 1, {0.0, 0.0});
      for (size_t i = 0; i < c.size(); ++i) {
        nc[i] += c[i];
        nc[i + 1] -= c[i] * r;
      }
      c = std::move(nc);
    }
    return c;
  };

  const std::vector<std::complex<double>> zeros(order, std::complex<double>(-1.0, 0.0));
  auto bz = poly_from_roots(zeros);
  auto az = poly_from_roots(pz);

  IirCoeffs out;
  out.b.resize(order + 1);
  out.a.resize(order + 1);
  for (int i = 0; i <= order; ++i) {
    out.b[i] = gain * bz[i].real();
    out.a[i] = az[i].real();
  }
  return out;
}

std::vector<double> butterworth_lowpass(const std::vector<double>& x, int order, double cutoff_norm) {
  if (x.empty()) throw InvalidInput("butterworth_lowpass: empty input");
  const IirCoeffs c = butterworth_coeffs(order, cutoff_norm);

  const size_t n = x.size();
  size_t padlen = 3 * std::max(c.a.size(), c.b.size());
  if (padlen >= n) padlen = n - 1;

  // odd reflection extension at both ends
  std::vector<double> ext;
  ext.reserve(n + 2 * padlen);
  for (size_t i = padlen; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (size_t i = 1; i <= padlen; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  const std::vector<double> zi = lfilter_zi(c.b, c.a);
  auto scaled = [&](double v) {
    std::vector<double> z(zi);
    for (double& e : z) e *= v;
    return z;
  };

  std::vector<double> y = lfilter(c.b, c.a, ext, scaled(ext.front()));
  std::reverse(y.begin(), y.end());
  y = lfilter(c.b, c.a, y, scaled(y.front()));
  std::reverse(y.begin(), y.end());

  return std::vector<double>(y.begin() + static_cast<long>(padlen),
                             y.begin() + static_cast<long>(padlen + n));
}

MelFilterbank mel_filterbank(int n_mels, int fft_size, int sample_rate_hz, double f_min, double f_max) {
  if (n_mels < 1) throw InvalidInput("mel_filterbank: n_mels must be >= 1");
  if (sample_rate_hz <= 0) throw InvalidInput("mel_filterbank: sample rate must be positive");
  if (!is_pow2(fft_size)) throw InvalidInput("mel_filterbank: fft_size must be a power of two");
  const double nyquist = sample_rate_hz / 2.0;
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= nyquist + 1e-9)) {
    throw InvalidInput("mel_filterbank: need 0 <= f_min < f_max <= sample_rate/2");
  }

  const int n_bins = fft_size / 2 + 1;
  const double bin_hz = static_cast<double>(sample_rate_hz) / fft_size;

  std::vector<double> hz_pts(n_mels + 2);
  const double mel_lo = hz_to_mel(f_min), mel_hi = hz_to_mel(f_max);
  for (int i = 0; i < n_mels + 2; ++i) {
    hz_pts[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
  }

  // Integral of one triangle side over [a, b] clipped to [x0, x1].
  auto side_integral = [](double a, double b, double x0, double x1, bool rising) {
    const double lo = std::max(a, x0), hi = std::min(b, x1);
    if (hi <= lo || x1 <= x0) return 0.0;
    const double mid = 0.5 * (lo + hi);
    const double v = rising ? (mid - x0) / (x1 - x0) : (x1 - mid) / (x1 - x0);
    return v * (hi - lo);
  };

  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.n_fft_bins = n_bins;
  fb.f_min = f_min;
  fb.f_max = f_max;
  fb.weights.assign(static_cast<size_t>(n_mels) * n_bins, 0.0);

  for (int m = 0; m < n_mels; ++m) {
    const double l = hz_pts[m], ctr = hz_pts[m + 1], r = hz_pts[m + 2];
    bool any = false;
    for (int k = 0; k < n_bins; ++k) {
      const double band_lo = (k - 0.5) * bin_hz;
      const double band_hi = (k + 0.5) * bin_hz;
      const double w =
          (side_integral(band_lo, band_hi, l, ctr, true) + side_integral(band_lo, band_hi, ctr, r, false)) /
          bin_hz;
      fb.weights[static_cast<size_t>(m) * n_bins + k] = w;
      any = any || w > 0.0;
    }
    if (!any) throw NumericError("mel_filterbank: filter " + std::to_string(m) + " has no positive weight");
  }
  return fb;
}

Spectrogram log_mel(const Spectrogram& spec, const MelFilterbank& fb) {
  if (spec.kind != SpecKind::kMagnitude) throw InvalidInput("log_mel: input must be a magnitude spectrogram");
  if (spec.n_bins != fb.n_fft_bins) {
    throw InvalidInput("log_mel: spectrogram has " + std::to_string(spec.n_bins) + " bins but filterbank expects " +
                       std::to_string(fb.n_fft_bins));
  }
  constexpr double kEps = 1e-6;

  Spectrogram out;
  out.n_frames = spec.n_frames;
  out.n_bins = fb.n_mels;
  out.frame_rate_hz = spec.frame_rate_hz;
  out.bin_hz = 0.0;
  out.kind = SpecKind::kLogMel;
  out.values.resize(static_cast<size_t>(spec.n_frames) * fb.n_mels);

  kernels::parallel_for(spec.n_frames, [&](int t) {
    const double* row = spec.values.data() + static_cast<size_t>(t) * spec.n_bins;
    double* orow = out.values.data() + static_cast<size_t>(t) * fb.n_mels;
    for (int m = 0; m < fb.n_mels; ++m) {
      const double* w = fb.weights.data() + static_cast<size_t>(m) * fb.n_fft_bins;
      double acc = 0.0;
      for (int k = 0; k < spec.n_bins; ++k) acc += w[k] * row[k] * row[k];
      orow[m] = std::log(acc + kEps);
    }
  });
  return out;
}

ModelInput to_model_input(const Spectrogram& spec, const ModelInputSpec& target) {
  if (spec.n_frames < 1 || spec.n_bins < 1) throw InvalidInput("to_model_input: empty spectrogram");
  if (target.height < 1 || target.width < 1) throw InvalidInput("to_model_input: target dims must be >= 1");
  if (target.channels != 1 && target.channels != 3) {
    throw InvalidInput("to_model_input: channels must be 1 or 3");
  }

  // image orientation: rows = frequency bins, cols = time frames
  const int in_h = spec.n_bins, in_w = spec.n_frames;
  std::vector<double> img(static_cast<size_t>(in_h) * in_w);
  for (int t = 0; t < in_w; ++t) {
    for (int b = 0; b < in_h; ++b) {
      img[static_cast<size_t>(b) * in_w + t] = spec.at(t, b);
    }
  }

  const int oh = target.height, ow = target.width;
  std::vector<double> resized(static_cast<size_t>(oh) * ow);
  const double sy = static_cast<double>(in_h) / oh;
  const double sx = static_cast<double>(in_w) / ow;
  for (int i = 0; i < oh; ++i) {
    double fy = std::clamp((i + 0.5) * sy - 0.5, 0.0, static_cast<double>(in_h - 1));
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, in_h - 1);
    double wy = fy - y0;
    for (int j = 0; j < ow; ++j) {
      double fx = std::clamp((j + 0.5) * sx - 0.5, 0.0, static_cast<double>(in_w - 1));
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, in_w - 1);
      double wx = fx - x0;
      double v00 = img[static_cast<size_t>(y0) * in_w + x0];
      double v01 = img[static_cast<size_t>(y0) * in_w + x1];
      double v10 = img[static_cast<size_t>(y1) * in_w + x0];
      double v11 = img[static_cast<size_t>(y1) * in_w + x1];
      resized[static_cast<size_t>(i) * ow + j] =
          (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
    }
  }

  double mean = target.mean, sd = target.std_dev;
  if (target.normalization == Normalization::kPerClipStandardize) {
    double s = 0.0;
    for (double v : resized) s += v;
    mean = s / resized.size();
    double sq = 0.0;
    for (double v : resized) sq += (v - mean) * (v - mean);
    sd = std::max(std::sqrt(sq / resized.size()), 1e-8);
  } else if (sd <= 0.0) {
    throw InvalidInput("to_model_input: fixed std must be positive");
  }

  ModelInput out;
  out.channels = target.channels;
  out.height = oh;
  out.width = ow;
  out.values.resize(static_cast<size_t>(target.channels) * oh * ow);
  for (size_t i = 0; i < resized.size(); ++i) {
    const float v = static_cast<float>((resized[i] - mean) / sd);
    for (int c = 0; c < target.channels; ++c) {
      out.values[static_cast<size_t>(c) * resized.size() + i] = v;
    }
  }
  return out;
}

void write_spectrogram_file(const std::string& path, const Spectrogram& spec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open spectrogram file for writing: " + path);
  char header[128];
  std::snprintf(header, sizeof(header), "%d %d %.17g %s\n", spec.n_frames, spec.n_bins, spec.frame_rate_hz,
                spec.kind == SpecKind::kMagnitude ? "magnitude" : "log_mel");
  out << header;
  std::vector<float> f32(spec.values.size());
  for (size_t i = 0; i < f32.size(); ++i) f32[i] = static_cast<float>(spec.values[i]);
  out.write(reinterpret_cast<const char*>(f32.data()), static_cast<std::streamsize>(f32.size() * 4));
  if (!out) throw InvalidInput("short write to spectrogram file: " + path);
}

Spectrogram read_spectrogram_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open spectrogram file: " + path);
  std::string header;
  if (!std::getline(in, header)) throw InvalidInput("spectrogram file missing header: " + path);
  std::istringstream hs(header);
  Spectrogram spec;
  std::string kind;
  if (!(hs >> spec.n_frames >> spec.n_bins >> spec.frame_rate_hz >> kind)) {
    throw InvalidInput("malformed spectrogram header in " + path + ": '" + header + "'");
  }
  if (spec.n_frames < 1 || spec.n_bins < 1) throw InvalidInput("bad spectrogram dims in " + path);
  if (kind == "magnitude") {
    spec.kind = SpecKind::kMagnitude;
  } else if (kind == "log_mel") {
    spec.kind = SpecKind::kLogMel;
  } else {
    throw InvalidInput("unknown spectrogram kind '" + kind + "' in " + path);
  }
  std::vector<float> f32(static_cast<size_t>(spec.n_frames) * spec.n_bins);
  in.read(reinterpret_cast<char*>(f32.data()), static_cast<std::streamsize>(f32.size() * 4));
  if (in.gcount() != static_cast<std::streamsize>(f32.size() * 4)) {
    throw InvalidInput("spectrogram file truncated: " + path);
  }
  spec.values.assign(f32.begin(), f32.end());
  return spec;
}

}  // namespace coughkit::dsp
