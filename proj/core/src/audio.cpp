// Copyright 2026 The fuse-ser Authors. All Rights Reserved.
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

#include "fuse_ser/audio.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include "fuse_ser/error.hpp"

namespace fuse_ser {

namespace {

std::uint16_t read_u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

void Waveform::validate() const {
  if (!(sample_rate > 0.0)) throw InvalidArgument("waveform sample rate must be positive");
  if (samples.empty()) throw InvalidArgument("waveform is empty");
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto name = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw ParseError(name, 0, "not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      if (std::memcmp(chunk, "data", 4) == 0) {
        // Truncated streams sometimes carry a bogus data size; take what is there.
        data = bytes.data() + body;
        data_size = bytes.size() - body;
      }
      break;
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0 && size >= 16) {
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format == 0xFFFE && size >= 26) format = read_u16(bytes.data() + body + 24);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1u);
  }
  if (channels == 0 || rate == 0) throw ParseError(name, 0, "missing or invalid fmt chunk");
  if (data == nullptr) throw ParseError(name, 0, "missing data chunk");
  const bool pcm16 = format == 1 && bits == 16;
  const bool f32 = format == 3 && bits == 32;
  if (!pcm16 && !f32) {
    throw ParseError(name, 0, "unsupported encoding (format " + std::to_string(format) + ", " +
                                  std::to_string(bits) + " bits); expected PCM16 or float32");
  }
  const std::size_t width = bits / 8;
  const std::size_t frames = data_size / (width * channels);
  Waveform wave;
  wave.sample_rate = rate;
  wave.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (i * channels + c) * width;
      if (pcm16) {
        acc += static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else {
        acc += std::bit_cast<float>(read_u32(p));
      }
    }
    wave.samples[i] = static_cast<float>(acc / channels);
  }
  return wave;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave, WavEncoding encoding) {
  const bool pcm16 = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm16 ? 16 : 32;
  const std::uint32_t data_size = static_cast<std::uint32_t>(wave.samples.size() * (bits / 8));
  const auto rate = static_cast<std::uint32_t>(std::lround(wave.sample_rate));
  std::string out;
  out += "RIFF";
  put_u32(out, 36 + data_size);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, pcm16 ? 1 : 3);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * (bits / 8));
  put_u16(out, bits / 8);
  put_u16(out, bits);
  out += "data";
  put_u32(out, data_size);
  for (float s : wave.samples) {
    if (pcm16) {
      const double clipped = std::clamp(static_cast<double>(s), -1.0, 32767.0 / 32768.0);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(clipped * 32768.0))));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(s));
    }
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open " + path.string() + " for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
}

std::size_t FrontendConfig::window_size() const {
  return static_cast<std::size_t>(std::lround(sample_rate * window_ms / 1000.0));
}

std::size_t FrontendConfig::hop_size() const {
  return static_cast<std::size_t>(std::lround(sample_rate * hop_ms / 1000.0));
}

void FrontendConfig::validate() const {
  if (!(sample_rate > 0.0)) throw ConfigError("frontend.sample_rate", "must be positive");
  if (window_size() < 2) throw ConfigError("frontend.window_ms", "window must span at least 2 samples");
  if (hop_size() < 1) throw ConfigError("frontend.hop_ms", "hop must span at least 1 sample");
  if (n_mels < 1) throw ConfigError("frontend.n_mels", "must be >= 1");
  if (!(f_min >= 0.0) || !(f_min < effective_f_max())) {
    throw ConfigError("frontend.f_min", "f_min must satisfy 0 <= f_min < f_max");
  }
  if (effective_f_max() > sample_rate / 2.0) throw ConfigError("frontend.f_max", "must not exceed Nyquist");
  if (!(floor > 0.0)) throw ConfigError("frontend.floor", "must be positive");
  if (max_duration_s < 0.0) throw ConfigError("frontend.max_duration_s", "must be >= 0");
}

void to_json(nlohmann::json& j, const FrontendConfig& c) {
  j = nlohmann::json{{"sample_rate", c.sample_rate}, {"window_ms", c.window_ms}, {"hop_ms", c.hop_ms},
                     {"n_mels", c.n_mels},           {"f_min", c.f_min},         {"f_max", c.f_max},
                     {"center", c.center},           {"floor", c.floor},         {"max_duration_s", c.max_duration_s},
                     {"normalize", c.normalize}};
}

void from_json(const nlohmann::json& j, FrontendConfig& c) {
  FrontendConfig d;
  c.sample_rate = j.value("sample_rate", d.sample_rate);
  c.window_ms = j.value("window_ms", d.window_ms);
  c.hop_ms = j.value("hop_ms", d.hop_ms);
  c.n_mels = j.value("n_mels", d.n_mels);
  c.f_min = j.value("f_min", d.f_min);
  c.f_max = j.value("f_max", d.f_max);
  c.center = j.value("center", d.center);
  c.floor = j.value("floor", d.floor);
  c.max_duration_s = j.value("max_duration_s", d.max_duration_s);
  c.normalize = j.value("normalize", d.normalize);
}

std::size_t expected_frame_count(std::size_t num_samples, std::size_t window_size, std::size_t hop, bool center) {
  const std::size_t padded = center ? num_samples + 2 * (window_size / 2) : num_samples;
  if (padded < window_size || hop == 0) return 0;
  return (padded - window_size) / hop + 1;
}

std::vector<double> window_coefficients(std::size_t size, WindowKind kind) {
  std::vector<double> w(size, 1.0);
  if (kind == WindowKind::kHann) {
    // Periodic Hann.
    for (std::size_t n = 0; n < size; ++n) {
      w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(size));
    }
  }
  return w;
}

MagnitudeFrames stft(const Waveform& wave, std::size_t window_size, std::size_t hop, WindowKind window, bool center) {
  wave.validate();
  if (window_size < 2) throw InvalidArgument("stft: window must span at least 2 samples");
  if (hop == 0) throw InvalidArgument("stft: hop must be positive");
  const auto& x = wave.samples;
  const std::size_t pad = center ? window_size / 2 : 0;
  std::vector<double> padded(x.size() + 2 * pad, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) padded[pad + i] = x[i];
  if (pad > 0 && x.size() > pad) {
    for (std::size_t i = 0; i < pad; ++i) {
      padded[pad - 1 - i] = x[i + 1];
      padded[pad + x.size() + i] = x[x.size() - 2 - i];
    }
  }
  if (padded.size() < window_size) {
    throw InvalidArgument("stft: window of " + std::to_string(window_size) + " samples exceeds padded signal of " +
                          std::to_string(padded.size()));
  }
  MagnitudeFrames out;
  out.frames = (padded.size() - window_size) / hop + 1;
  out.bins = window_size / 2 + 1;
  out.data.resize(out.frames * out.bins);
  const auto w = window_coefficients(window_size, window);
  Eigen::FFT<double> fft;
  std::vector<double> frame(window_size);
  std::vector<std::complex<double>> spectrum;
  for (std::size_t m = 0; m < out.frames; ++m) {
    const double* src = padded.data() + m * hop;
    for (std::size_t n = 0; n < window_size; ++n) frame[n] = src[n] * w[n];
    fft.fwd(spectrum, frame);
    for (std::size_t k = 0; k < out.bins; ++k) out.data[m * out.bins + k] = std::abs(spectrum[k]);
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_edges(std::size_t n_mels, double f_min, double f_max) {
  const double lo = hz_to_mel(f_min);
  const double hi = hz_to_mel(f_max);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  return edges;
}

}  // namespace

std::vector<double> mel_center_frequencies(std::size_t n_mels, double f_min, double f_max) {
  auto edges = mel_edges(n_mels, f_min, f_max);
  return {edges.begin() + 1, edges.end() - 1};
}

Tensor mel_filterbank(std::size_t n_fft_bins, double sample_rate, std::size_t n_mels, double f_min, double f_max) {
  if (f_max <= 0.0) f_max = sample_rate / 2.0;
  if (n_mels < 1) throw InvalidArgument("mel_filterbank: n_mels must be >= 1");
  if (n_fft_bins < 2) throw InvalidArgument("mel_filterbank: need at least 2 FFT bins");
  if (!(f_min >= 0.0) || !(f_min < f_max)) {
    throw InvalidArgument("mel_filterbank: degenerate frequency range [" + std::to_string(f_min) + ", " +
                          std::to_string(f_max) + "] Hz");
  }
  const auto edges = mel_edges(n_mels, f_min, f_max);
  const double n_fft = 2.0 * static_cast<double>(n_fft_bins - 1);
  std::vector<float> weights(n_mels * n_fft_bins, 0.0f);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    bool support = false;
    for (std::size_t k = 0; k < n_fft_bins; ++k) {
      const double hz = static_cast<double>(k) * sample_rate / n_fft;
      double v = 0.0;
      if (hz > left && hz <= center) {
        v = (hz - left) / (center - left);
      } else if (hz > center && hz < right) {
        v = (right - hz) / (right - center);
      }
      if (v > 0.0) {
        weights[m * n_fft_bins + k] = static_cast<float>(v);
        support = true;
      }
    }
    if (!support) {
      throw InvalidArgument("mel_filterbank: filter " + std::to_string(m) + " centred at " + std::to_string(center) +
                            " Hz covers no FFT bin; use fewer mel bands or a longer window");
    }
  }
  return Tensor(Shape{n_mels, n_fft_bins}, std::move(weights));
}

LogMelSpectrogram log_mel(const Waveform& wave, const FrontendConfig& config) {
  config.validate();
  wave.validate();
  if (std::abs(wave.sample_rate - config.sample_rate) > 1e-9) {
    throw InvalidArgument("log_mel: waveform rate " + std::to_string(wave.sample_rate) +
                          " Hz does not match frontend rate " + std::to_string(config.sample_rate) +
                          " Hz (resampling is not supported)");
  }
  const Waveform* source = &wave;
  Waveform fitted;
  if (config.max_duration_s > 0.0) {
    const auto target = static_cast<std::size_t>(std::lround(config.max_duration_s * config.sample_rate));
    fitted.sample_rate = wave.sample_rate;
    fitted.samples.assign(target, 0.0f);
    if (wave.samples.size() >= target) {
      const std::size_t offset = (wave.samples.size() - target) / 2;
      std::copy_n(wave.samples.begin() + static_cast<std::ptrdiff_t>(offset), target, fitted.samples.begin());
    } else {
      std::copy(wave.samples.begin(), wave.samples.end(), fitted.samples.begin());
    }
    source = &fitted;
  }
  const std::size_t win = config.window_size();
  const auto mags = stft(*source, win, config.hop_size(), WindowKind::kHann, config.center);
  const Tensor fb = mel_filterbank(mags.bins, config.sample_rate, config.n_mels, config.f_min, config.effective_f_max());
  auto w = fb.data();
  std::vector<float> out(mags.frames * config.n_mels);
  std::vector<double> power(mags.bins);
  const double log_floor = std::log(config.floor);
  for (std::size_t t = 0; t < mags.frames; ++t) {
    for (std::size_t k = 0; k < mags.bins; ++k) {
      const double a = mags.at(t, k);
      power[k] = a * a;
    }
    for (std::size_t m = 0; m < config.n_mels; ++m) {
      double e = 0.0;
      const float* row = w.data() + m * mags.bins;
      for (std::size_t k = 0; k < mags.bins; ++k) e += static_cast<double>(row[k]) * power[k];
      out[t * config.n_mels + m] = static_cast<float>(e > config.floor ? std::log(e) : log_floor);
    }
  }
  if (config.normalize && !out.empty()) {
    double mean = 0.0;
    for (float v : out) mean += v;
    mean /= static_cast<double>(out.size());
    double var = 0.0;
    for (float v : out) var += (v - mean) * (v - mean);
    var /= static_cast<double>(out.size());
    const double inv = 1.0 / std::sqrt(var + 1e-12);
    for (auto& v : out) v = static_cast<float>((v - mean) * inv);
  }
  LogMelSpectrogram spec;
  spec.frames = Tensor(Shape{mags.frames, config.n_mels}, std::move(out));
  spec.frame_rate = config.sample_rate / static_cast<double>(config.hop_size());
  spec.config = config;
  return spec;
}

}  // namespace fuse_ser
