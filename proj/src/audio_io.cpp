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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace coughkit::audio {

namespace {

uint32_t read_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void write_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

void write_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
}

const char* format_tag_name(uint16_t tag) {
  switch (tag) {
    case 0x0002: return "ADPCM";
    case 0x0006: return "A-law";
    case 0x0007: return "mu-law";
    case 0x0011: return "IMA ADPCM";
    case 0x0055: return "MP3";
    case 0xfffe: return "WAVE_FORMAT_EXTENSIBLE";
    default: return "unknown";
  }
}

// Modified Bessel function of the first kind, order 0 (power series).
double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  double half_x2 = 0.25 * x * x;
  for (int k = 1; k < 64; ++k) {
    term *= half_x2 / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-16 * sum) break;
  }
  return sum;
}

constexpr double kKaiserBeta = 8.0;
constexpr int kZeroCrossings = 64;

}  // namespace

AudioClip decode_wav(const std::vector<uint8_t>& bytes, const std::string& source_id) {
  if (bytes.size() < 44) throw InvalidInput("WAV decode: file too short for a RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw InvalidInput("WAV decode: not a RIFF/WAVE container");
  }

  uint16_t format_tag = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  bool have_fmt = false;
  const uint8_t* data_ptr = nullptr;
  uint32_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* chunk = bytes.data() + pos;
    uint32_t chunk_len = read_u32(chunk + 4);
    if (pos + 8 + chunk_len > bytes.size()) {
      throw InvalidInput("WAV decode: chunk extends past end of file");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw InvalidInput("WAV decode: fmt chunk too short");
      format_tag = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      sample_rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data_ptr = chunk + 8;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt) throw InvalidInput("WAV decode: missing fmt chunk");
  if (data_ptr == nullptr) throw InvalidInput("WAV decode: missing data chunk");
  if (sample_rate == 0) throw InvalidInput("WAV decode: sample rate is zero");
  if (channels < 1 || channels > 2) {
    throw InvalidInput("WAV decode: unsupported channel count " + std::to_string(channels));
  }

  bool pcm16 = (format_tag == 1 && bits == 16);
  bool float32 = (format_tag == 3 && bits == 32);
  if (!pcm16 && !float32) {
    throw InvalidInput("WAV decode: unsupported encoding: format tag " + std::to_string(format_tag) +
                       " (" + format_tag_name(format_tag) + "), " + std::to_string(bits) + " bits");
  }

  const int bytes_per_sample = pcm16 ? 2 : 4;
  const size_t frame_bytes = static_cast<size_t>(bytes_per_sample) * channels;
  const size_t n_frames = data_len / frame_bytes;
  if (n_frames == 0) throw InvalidInput("WAV decode: data chunk holds no samples");

  AudioClip clip;
  clip.sample_rate_hz = static_cast<int>(sample_rate);
  clip.source_id = source_id;
  clip.samples.resize(n_frames);

  for (size_t i = 0; i < n_frames; ++i) {
    const uint8_t* f = data_ptr + i * frame_bytes;
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      const uint8_t* s = f + static_cast<size_t>(c) * bytes_per_sample;
      if (pcm16) {
        int16_t v = static_cast<int16_t>(s[0] | (s[1] << 8));
        acc += static_cast<double>(v) / 32768.0;
      } else {
        uint32_t u = read_u32(s);
        float v;
        std::memcpy(&v, &u, 4);
        if (!std::isfinite(v)) throw InvalidInput("WAV decode: non-finite float sample");
        acc += v;
      }
    }
    double mono = acc / channels;
    clip.samples[i] = static_cast<float>(std::clamp(mono, -1.0, 1.0));
  }
  return clip;
}

AudioClip read_wav_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open WAV file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes, path);
}

std::vector<uint8_t> encode_wav_pcm16(const AudioClip& clip) {
  if (clip.sample_rate_hz <= 0) throw InvalidInput("WAV encode: sample rate must be positive");
  const uint32_t n = static_cast<uint32_t>(clip.samples.size());
  const uint32_t data_len = n * 2;

  std::vector<uint8_t> out;
  out.reserve(44 + data_len);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  write_u32(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<uint32_t>(clip.sample_rate_hz));
  write_u32(out, static_cast<uint32_t>(clip.sample_rate_hz) * 2);
  write_u16(out, 2);
  write_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  write_u32(out, data_len);
  for (float s : clip.samples) {
    double v = std::clamp(static_cast<double>(s), -1.0, 1.0);
    long q = std::lround(v * 32768.0);
    q = std::clamp(q, -32768l, 32767l);
    write_u16(out, static_cast<uint16_t>(static_cast<int16_t>(q)));
  }
  return out;
}

void write_wav_file(const std::string& path, const AudioClip& clip) {
  auto bytes = encode_wav_pcm16(clip);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open WAV file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InvalidInput("short write to WAV file: " + path);
}

AudioClip resample(const AudioClip& clip, int target_hz) {
  if (target_hz <= 0) throw InvalidInput("resample: target rate must be positive");
  if (clip.sample_rate_hz <= 0) throw InvalidInput("resample: clip has no sample rate");
  if (target_hz == clip.sample_rate_hz) return clip;
  if (clip.samples.empty()) throw InvalidInput("resample: clip is empty");

  const double ratio = static_cast<double>(target_hz) / clip.sample_rate_hz;
  const size_t out_len = static_cast<size_t>(std::llround(clip.samples.size() * ratio));

  // When downsampling, the kernel is stretched so the cutoff sits at the
  // output Nyquist.
  const double cutoff = std::min(1.0, ratio);
  const double half_width = kZeroCrossings / cutoff;  // in source samples
  const double i0_beta = bessel_i0(kKaiserBeta);

  AudioClip out;
  out.sample_rate_hz = target_hz;
  out.source_id = clip.source_id;
  out.samples.resize(out_len);

  const std::vector<float>& x = clip.samples;
  const long n_src = static_cast<long>(x.size());

  for (size_t n = 0; n < out_len; ++n) {
    const double t = static_cast<double>(n) / ratio;  // position in source samples
    const long m_lo = static_cast<long>(std::ceil(t - half_width));
    const long m_hi = static_cast<long>(std::floor(t + half_width));
    double acc = 0.0;
    for (long m = std::max(0l, m_lo); m <= std::min(n_src - 1, m_hi); ++m) {
      const double u = (static_cast<double>(m) - t) * cutoff;  // sinc argument
      double sinc = (u == 0.0) ? 1.0 : std::sin(M_PI * u) / (M_PI * u);
      const double w = (static_cast<double>(m) - t) / half_width;
      const double window = bessel_i0(kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - w * w))) / i0_beta;
      acc += x[m] * cutoff * sinc * window;
    }
    out.samples[n] = static_cast<float>(std::clamp(acc, -1.0, 1.0));
  }
  return out;
}

}  // namespace coughkit::audio
