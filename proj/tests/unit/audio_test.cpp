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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <vector>

#include "fuse_ser/audio.hpp"
#include "fuse_ser/error.hpp"
#include "fuse_ser/random.hpp"
#include "support/oracles.hpp"
#include "support/test_support.hpp"

namespace fuse_ser {
namespace {

Waveform sine(double freq, std::size_t n, double rate = 16000.0, double amp = 0.5) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate));
  }
  return w;
}

Waveform noise(std::size_t n, std::uint64_t seed, double rate = 16000.0) {
  Rng rng(seed);
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(n);
  for (auto& s : w.samples) s = static_cast<float>(rng.uniform(-0.5, 0.5));
  return w;
}

std::vector<double> windowed_frame(const Waveform& w, std::size_t start, std::size_t size, WindowKind kind) {
  const auto win = window_coefficients(size, kind);
  std::vector<double> f(size);
  for (std::size_t n = 0; n < size; ++n) f[n] = static_cast<double>(w.samples[start + n]) * win[n];
  return f;
}

TEST(StftTest, BinCentredSineRectangularWindow) {
  const std::size_t n = 512, bin = 40;
  const auto w = sine(16000.0 * bin / n, n);
  const auto m = stft(w, n, 160, WindowKind::kRectangular, false);
  ASSERT_EQ(m.frames, 1u);
  ASSERT_EQ(m.bins, n / 2 + 1);
  const auto frame = windowed_frame(w, 0, n, WindowKind::kRectangular);
  const double peak = m.at(0, bin);
  for (std::size_t k = 0; k < m.bins; ++k) {
    EXPECT_NEAR(m.at(0, k), oracle::dft_magnitude(frame, k), 1e-9 * n);
    if (k != bin) EXPECT_GE(peak, 20.0 * m.at(0, k)) << "bin " << k;
  }
}

TEST(StftTest, BinCentredSineHannWindow) {
  // A periodic Hann window spreads a bin-centred sine over exactly three bins:
  // the two neighbours carry half the peak, every other bin is leakage-free.
  const std::size_t n = 512, bin = 40;
  const auto w = sine(16000.0 * bin / n, n);
  const auto m = stft(w, n, 160, WindowKind::kHann, false);
  const auto frame = windowed_frame(w, 0, n, WindowKind::kHann);
  const double peak = m.at(0, bin);
  for (std::size_t k = 0; k < m.bins; ++k) {
    EXPECT_NEAR(m.at(0, k), oracle::dft_magnitude(frame, k), 1e-9 * n);
    if (k + 1 == bin || k == bin + 1) {
      EXPECT_NEAR(m.at(0, k), 0.5 * peak, 1e-9 * n);
    } else if (k != bin) {
      EXPECT_GE(peak, 20.0 * m.at(0, k)) << "bin " << k;
    }
  }
}

TEST(StftTest, ZeroWaveformGivesZeroMagnitudes) {
  Waveform w;
  w.samples.assign(4000, 0.0f);
  const auto m = stft(w, 512, 160);
  for (double v : m.data) EXPECT_EQ(v, 0.0);
}

TEST(StftTest, ParsevalPerFrame) {
  const auto w = noise(4096, 3);
  const std::size_t size = 512, hop = 256;
  const auto m = stft(w, size, hop, WindowKind::kHann, false);
  for (std::size_t t = 0; t < m.frames; ++t) {
    const auto frame = windowed_frame(w, t * hop, size, WindowKind::kHann);
    double time_energy = 0.0;
    for (double v : frame) time_energy += v * v;
    double freq_energy = 0.0;
    for (std::size_t k = 0; k < m.bins; ++k) {
      const double a2 = m.at(t, k) * m.at(t, k);
      freq_energy += (k == 0 || k == size / 2) ? a2 : 2.0 * a2;
    }
    freq_energy /= static_cast<double>(size);
    EXPECT_NEAR(freq_energy / time_energy, 1.0, 1e-4);
  }
}

TEST(StftTest, EmptyWaveformRejected) {
  Waveform w;
  EXPECT_THROW(stft(w, 512, 160), InvalidArgument);
}

TEST(StftTest, FrameCountFormula) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t len = 600 + rng.below(30000);
    Waveform w = noise(len, trial);
    for (bool center : {false, true}) {
      const auto m = stft(w, 512, 160, WindowKind::kHann, center);
      const std::size_t padded = center ? len + 512 : len;
      EXPECT_EQ(m.frames, (padded - 512) / 160 + 1);
      EXPECT_EQ(m.frames, expected_frame_count(len, 512, 160, center));
    }
  }
}

TEST(MelTest, HzToMelFormula) {
  EXPECT_NEAR(hz_to_mel(1000.0), 2595.0 * std::log10(1.0 + 1000.0 / 700.0), 1e-12);
  EXPECT_NEAR(hz_to_mel(1000.0), 999.99, 0.01);
  EXPECT_NEAR(mel_to_hz(hz_to_mel(3210.0)), 3210.0, 1e-9);
}

TEST(MelTest, CentresIncrease) {
  const auto c = mel_center_frequencies(64, 50.0, 8000.0);
  ASSERT_EQ(c.size(), 64u);
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_GT(c[i], c[i - 1]);
  EXPECT_GT(c.front(), 50.0);
  EXPECT_LT(c.back(), 8000.0);
}

TEST(MelTest, FilterbankCoverage) {
  const std::size_t bins = 257;
  const auto fb = mel_filterbank(bins, 16000.0, 64, 50.0, 8000.0);
  ASSERT_EQ(fb.shape(), (Shape{64, bins}));
  const auto c = mel_center_frequencies(64, 50.0, 8000.0);
  for (std::size_t m = 0; m < 64; ++m) {
    double row = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const float v = fb.data()[m * bins + k];
      EXPECT_GE(v, 0.0f);
      row += v;
    }
    EXPECT_GT(row, 0.0) << "filter " << m;
  }
  for (std::size_t k = 0; k < bins; ++k) {
    const double hz = 8000.0 * static_cast<double>(k) / static_cast<double>(bins - 1);
    if (hz < c.front() || hz > c.back()) continue;
    double col = 0.0;
    for (std::size_t m = 0; m < 64; ++m) col += fb.data()[m * bins + k];
    EXPECT_GT(col, 0.0) << "bin " << k;
  }
}

TEST(MelTest, DegenerateRange) {
  EXPECT_THROW(mel_filterbank(257, 16000.0, 64, 4000.0, 4000.0), InvalidArgument);
  EXPECT_THROW(mel_filterbank(257, 16000.0, 0), InvalidArgument);
}

TEST(LogMelTest, ZeroWaveformIsFloor) {
  Waveform w;
  w.samples.assign(16000, 0.0f);
  const auto s = log_mel(w);
  for (float v : s.frames.data()) EXPECT_FLOAT_EQ(v, static_cast<float>(std::log(1e-10)));
}

TEST(LogMelTest, OneSecondGives101Frames) {
  const auto s = log_mel(noise(16000, 1));
  EXPECT_EQ(s.num_frames(), 101u);
  EXPECT_EQ(s.frames.dim(1), 64u);
  EXPECT_DOUBLE_EQ(s.frame_rate, 100.0);
}

TEST(LogMelTest, ScalingShiftsByTwoLnTen) {
  const auto w = noise(8000, 2);
  Waveform loud = w;
  for (auto& s : loud.samples) s *= 10.0f;
  const auto a = log_mel(w);
  const auto b = log_mel(loud);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < a.frames.numel(); ++i) {
    if (a.frames.data()[i] < -5.0f) continue;
    EXPECT_NEAR(b.frames.data()[i] - a.frames.data()[i], 2.0 * std::log(10.0), 1e-3);
    ++checked;
  }
  EXPECT_GT(checked, a.frames.numel() / 2);
}

TEST(LogMelTest, DeterministicAndShiftCovariant) {
  const auto w = noise(8000, 5);
  const auto a = log_mel(w);
  const auto b = log_mel(w);
  EXPECT_EQ(testing::to_vector(a.frames), testing::to_vector(b.frames));
  Waveform shifted = w;
  shifted.samples.insert(shifted.samples.begin(), 160, 0.0f);
  const auto c = log_mel(shifted);
  const std::size_t n_mels = 64;
  for (std::size_t t = 3; t + 3 < a.num_frames(); ++t) {
    for (std::size_t m = 0; m < n_mels; ++m) {
      EXPECT_NEAR(c.frames.data()[(t + 1) * n_mels + m], a.frames.data()[t * n_mels + m], 1e-5);
    }
  }
}

TEST(LogMelTest, CropAndPad) {
  FrontendConfig cfg;
  cfg.max_duration_s = 0.5;
  EXPECT_EQ(log_mel(noise(16000, 1), cfg).num_frames(), expected_frame_count(8000, 512, 160, true));
  EXPECT_EQ(log_mel(noise(3000, 1), cfg).num_frames(), expected_frame_count(8000, 512, 160, true));
}

TEST(LogMelTest, NormalizeFlag) {
  FrontendConfig cfg;
  cfg.normalize = true;
  const auto s = log_mel(noise(8000, 9), cfg);
  double mean = 0.0, var = 0.0;
  for (float v : s.frames.data()) mean += v;
  mean /= s.frames.numel();
  for (float v : s.frames.data()) var += (v - mean) * (v - mean);
  var /= s.frames.numel();
  EXPECT_NEAR(mean, 0.0, 1e-4);
  EXPECT_NEAR(var, 1.0, 1e-3);
}

TEST(LogMelTest, RateMismatchRejected) {
  EXPECT_THROW(log_mel(noise(8000, 1, 8000.0)), InvalidArgument);
}

TEST(FrontendConfigTest, Defaults) {
  FrontendConfig c;
  EXPECT_EQ(c.window_size(), 512u);
  EXPECT_EQ(c.hop_size(), 160u);
  EXPECT_DOUBLE_EQ(c.effective_f_max(), 8000.0);
  c.f_min = 9000.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(WavTest, RoundTripFloat32AndPcm16) {
  testing::TempDir dir("wav");
  const auto w = noise(1000, 4);
  write_wav(dir / "f.wav", w, WavEncoding::kFloat32);
  const auto f = read_wav(dir / "f.wav");
  EXPECT_EQ(f.samples, w.samples);
  EXPECT_DOUBLE_EQ(f.sample_rate, 16000.0);
  write_wav(dir / "p.wav", w, WavEncoding::kPcm16);
  const auto p = read_wav(dir / "p.wav");
  ASSERT_EQ(p.samples.size(), w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) EXPECT_NEAR(p.samples[i], w.samples[i], 1.0 / 32767.0);
}

TEST(WavTest, StereoIsAveraged) {
  testing::TempDir dir("wav");
  const std::vector<std::int16_t> frames{1000, 3000, -2000, 0};
  auto put32 = [](std::ofstream& o, std::uint32_t v) { o.write(reinterpret_cast<const char*>(&v), 4); };
  auto put16 = [](std::ofstream& o, std::uint16_t v) { o.write(reinterpret_cast<const char*>(&v), 2); };
  {
    std::ofstream o(dir / "s.wav", std::ios::binary);
    o.write("RIFF", 4);
    put32(o, 36 + 8);
    o.write("WAVEfmt ", 8);
    put32(o, 16);
    put16(o, 1);
    put16(o, 2);
    put32(o, 16000);
    put32(o, 16000 * 4);
    put16(o, 4);
    put16(o, 16);
    o.write("data", 4);
    put32(o, 8);
    o.write(reinterpret_cast<const char*>(frames.data()), 8);
  }
  const auto w = read_wav(dir / "s.wav");
  ASSERT_EQ(w.samples.size(), 2u);
  EXPECT_NEAR(w.samples[0], 2000.0 / 32768.0, 1e-4);
  EXPECT_NEAR(w.samples[1], -1000.0 / 32768.0, 1e-4);
}

TEST(WavTest, GarbageRejected) {
  testing::TempDir dir("wav");
  std::ofstream(dir / "bad.wav") << "not audio";
  EXPECT_THROW(read_wav(dir / "bad.wav"), ParseError);
  EXPECT_THROW(read_wav(dir / "missing.wav"), IoError);
}

}  // namespace
}  // namespace fuse_ser
