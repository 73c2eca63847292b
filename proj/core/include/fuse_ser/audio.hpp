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

#pragma once

#include <cstddef>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <vector>

#include "fuse_ser/tensor.hpp"

namespace fuse_ser {

/// Mono signal; samples nominally in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  double sample_rate = 16000.0;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
  void validate() const;
};

enum class WavEncoding { kPcm16, kFloat32 };

/// Reads uncompressed PCM16 or float32 WAV. Multi-channel input is averaged to mono.
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& wave, WavEncoding encoding = WavEncoding::kPcm16);

enum class WindowKind { kHann, kRectangular };

struct FrontendConfig {
  double sample_rate = 16000.0;
  double window_ms = 32.0;
  double hop_ms = 10.0;
  std::size_t n_mels = 64;
  double f_min = 50.0;
  double f_max = 0.0;  // 0 means sample_rate / 2
  bool center = true;
  double floor = 1e-10;
  double max_duration_s = 0.0;  // 0 disables crop/pad
  bool normalize = false;       // per-utterance mean/variance normalization

  std::size_t window_size() const;
  std::size_t hop_size() const;
  double effective_f_max() const { return f_max > 0.0 ? f_max : sample_rate / 2.0; }
  void validate() const;
};

void to_json(nlohmann::json& j, const FrontendConfig& c);
void from_json(const nlohmann::json& j, FrontendConfig& c);

/// Magnitude spectrogram, row-major [frames, bins].
struct MagnitudeFrames {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> data;

  double at(std::size_t frame, std::size_t bin) const { return data[frame * bins + bin]; }
};

/// Number of frames produced by stft for `num_samples` input samples.
std::size_t expected_frame_count(std::size_t num_samples, std::size_t window_size, std::size_t hop, bool center);

/// Short-time magnitude spectrum. With `center`, the signal is reflect-padded by
/// window/2 on both sides (zero-padded when too short to reflect).
MagnitudeFrames stft(const Waveform& wave, std::size_t window_size, std::size_t hop,
                     WindowKind window = WindowKind::kHann, bool center = true);

std::vector<double> window_coefficients(std::size_t size, WindowKind kind);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Centers (Hz) of `n_mels` triangular filters equally spaced on the mel scale.
std::vector<double> mel_center_frequencies(std::size_t n_mels, double f_min, double f_max);

/// Triangular filters [n_mels, n_fft_bins] over FFT bins of an
/// (n_fft_bins - 1) * 2 point transform at `sample_rate`.
Tensor mel_filterbank(std::size_t n_fft_bins, double sample_rate, std::size_t n_mels = 64, double f_min = 50.0,
                      double f_max = 0.0);

struct LogMelSpectrogram {
  Tensor frames;  // [T, n_mels]
  double frame_rate = 0.0;
  FrontendConfig config;

  std::size_t num_frames() const { return frames.dim(0); }
};

/// log(max(mel_power, floor)) per frame and mel band.
LogMelSpectrogram log_mel(const Waveform& wave, const FrontendConfig& config = {});

}  // namespace fuse_ser
