// Copyright 2026  Verid Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef VERID_DSP_HPP_
#define VERID_DSP_HPP_

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "verid/audio.hpp"
#include "verid/common.hpp"
#include "verid/tensor.hpp"

namespace verid {

inline constexpr int kNumFrames = 100;
inline constexpr int kFrameLen = 400;   // 25 ms at 16 kHz
inline constexpr int kFrameStep = 160;  // 10 ms
inline constexpr int kFftSize = 512;
inline constexpr int kNumBins = 257;  // one-sided, Nyquist included
inline constexpr int kNumMel = 40;
inline constexpr double kLogFloor = 1e-10;

// The last frame starts at 99*160 and needs 400 samples, so the 16000-sample
// clip is zero-padded to 16240 to fill exactly 100 frames.
inline constexpr int kPaddedLen = (kNumFrames - 1) * kFrameStep + kFrameLen;

using FeatureMap = Tensor<float>;  // (3, 40, 100)

struct MfccFrames {
  Tensor<double> data;  // (T, 40)
  bool cmvn_applied = false;
};

// In-place iterative radix-2 FFT; n must be a power of two.
inline void FftInPlace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

inline double HammingPeriodic(int n, int len) {
  return 0.54 - 0.46 * std::cos(2.0 * M_PI * n / len);
}

// 16000 samples -> (100, 400) windowed frames.
inline Tensor<double> FrameSignal(const std::vector<double>& samples) {
  if (static_cast<int>(samples.size()) != kClipSamples)
    throw WrongLength("expected " + std::to_string(kClipSamples) +
                      " samples, got " + std::to_string(samples.size()));
  static const std::vector<double> window = [] {
    std::vector<double> w(kFrameLen);
    for (int n = 0; n < kFrameLen; ++n) w[n] = HammingPeriodic(n, kFrameLen);
    return w;
  }();
  Tensor<double> frames({kNumFrames, kFrameLen});
  for (int t = 0; t < kNumFrames; ++t) {
    const int start = t * kFrameStep;
    for (int n = 0; n < kFrameLen; ++n) {
      const int idx = start + n;
      const double s = idx < kClipSamples ? samples[idx] : 0.0;
      frames.data[static_cast<std::size_t>(t) * kFrameLen + n] = s * window[n];
    }
  }
  return frames;
}

// (T, 400) frames -> (T, 257) one-sided power spectrum of the 512-point FFT.
inline Tensor<double> PowerSpectrum(const Tensor<double>& frames) {
  if (frames.ndim() != 2 || frames.dim(1) != kFrameLen)
    throw ShapeMismatch("frames must be (T, 400), got " + frames.ShapeStr());
  const int T = frames.dim(0);
  Tensor<double> spec({T, kNumBins});
  std::vector<std::complex<double>> buf(kFftSize);
  for (int t = 0; t < T; ++t) {
    for (int n = 0; n < kFrameLen; ++n)
      buf[n] = frames.data[static_cast<std::size_t>(t) * kFrameLen + n];
    for (int n = kFrameLen; n < kFftSize; ++n) buf[n] = 0.0;
    FftInPlace(buf);
    for (int k = 0; k < kNumBins; ++k)
      spec.data[static_cast<std::size_t>(t) * kNumBins + k] =
          std::norm(buf[k]);
  }
  return spec;
}

inline double HzToMel(double hz) {
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}
inline double MelToHz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// 42 band edges, linearly spaced in mel between 0 and 8000 Hz.
inline std::vector<double> MelEdgesHz(int n_filters = kNumMel) {
  std::vector<double> edges(n_filters + 2);
  const double mel_hi = HzToMel(kSampleRate / 2.0);
  for (int i = 0; i < n_filters + 2; ++i)
    edges[i] = MelToHz(mel_hi * i / (n_filters + 1));
  return edges;
}

// (n_filters, 257) triangular filterbank, peak amplitude 1 at the center
// edge, evaluated at the FFT bin frequencies.
inline Tensor<double> MelFilterbank(int n_filters = kNumMel) {
  const std::vector<double> edges = MelEdgesHz(n_filters);
  Tensor<double> fbank({n_filters, kNumBins});
  const double bin_hz = static_cast<double>(kSampleRate) / kFftSize;
  for (int i = 0; i < n_filters; ++i) {
    const double lo = edges[i], mid = edges[i + 1], hi = edges[i + 2];
    for (int k = 0; k < kNumBins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f >= lo && f <= mid && mid > lo)
        w = (f - lo) / (mid - lo);
      else if (f > mid && f <= hi && hi > mid)
        w = (hi - f) / (hi - mid);
      fbank.data[static_cast<std::size_t>(i) * kNumBins + k] = w;
    }
  }
  return fbank;
}

// Shared instance; the bank is fixed once computed.
inline const Tensor<double>& DefaultMelFilterbank() {
  static const Tensor<double> fbank = MelFilterbank(kNumMel);
  return fbank;
}

// (T, 257) spectrum x (F, 257) bank -> (F, T) floored log energies.
inline Tensor<double> LogMel(const Tensor<double>& spectrum,
                             const Tensor<double>& fbank) {
  if (spectrum.ndim() != 2 || spectrum.dim(1) != kNumBins ||
      fbank.ndim() != 2 || fbank.dim(1) != kNumBins)
    throw ShapeMismatch("log_mel expects (T,257) spectrum and (F,257) bank");
  const int T = spectrum.dim(0);
  const int F = fbank.dim(0);
  Tensor<double> energies({F, T});
  for (int i = 0; i < F; ++i) {
    const double* filt = fbank.data.data() + static_cast<std::size_t>(i) * kNumBins;
    for (int t = 0; t < T; ++t) {
      const double* spec = spectrum.data.data() + static_cast<std::size_t>(t) * kNumBins;
      double acc = 0.0;
      for (int k = 0; k < kNumBins; ++k) acc += filt[k] * spec[k];
      energies.data[static_cast<std::size_t>(i) * T + t] =
          std::log(std::max(acc, kLogFloor));
    }
  }
  return energies;
}

// Regression deltas with n in {1,2} and edge replication:
// d[t] = (1*(x[t+1]-x[t-1]) + 2*(x[t+2]-x[t-2])) / 10.
inline Tensor<double> Deltas(const Tensor<double>& x) {
  if (x.ndim() != 2) throw ShapeMismatch("deltas expects a 2-d tensor");
  const int F = x.dim(0), T = x.dim(1);
  Tensor<double> d({F, T});
  auto clamp_t = [T](int t) { return t < 0 ? 0 : (t >= T ? T - 1 : t); };
  for (int i = 0; i < F; ++i) {
    const double* row = x.data.data() + static_cast<std::size_t>(i) * T;
    double* out = d.data.data() + static_cast<std::size_t>(i) * T;
    for (int t = 0; t < T; ++t) {
      double acc = 0.0;
      for (int n = 1; n <= 2; ++n)
        acc += n * (row[clamp_t(t + n)] - row[clamp_t(t - n)]);
      out[t] = acc / 10.0;  // 2 * (1^2 + 2^2)
    }
  }
  return d;
}

// 1-second clip -> the (3, 40, 100) log-mel + delta + delta-delta stack.
// No mean or variance normalization at this stage.
inline FeatureMap ComputeFeatureMap(const AudioClip& clip) {
  if (clip.size() != kClipSamples)
    throw WrongLength("feature_map expects a 1 s crop of " +
                      std::to_string(kClipSamples) + " samples");
  std::vector<double> samples(clip.samples.begin(), clip.samples.end());
  Tensor<double> frames = FrameSignal(samples);
  Tensor<double> spec = PowerSpectrum(frames);
  Tensor<double> ch0 = LogMel(spec, DefaultMelFilterbank());
  Tensor<double> ch1 = Deltas(ch0);
  Tensor<double> ch2 = Deltas(ch1);

  FeatureMap map({3, kNumMel, kNumFrames});
  const std::size_t plane = static_cast<std::size_t>(kNumMel) * kNumFrames;
  for (std::size_t i = 0; i < plane; ++i) {
    map.data[i] = static_cast<float>(ch0.data[i]);
    map.data[plane + i] = static_cast<float>(ch1.data[i]);
    map.data[2 * plane + i] = static_cast<float>(ch2.data[i]);
  }
  return map;
}

// Orthonormal DCT-II along each row; keeps all 40 coefficients.
inline Tensor<double> DctOrthonormal(const Tensor<double>& x) {
  const int T = x.dim(0), N = x.dim(1);
  static thread_local std::vector<double> basis;
  static thread_local int basis_n = -1;
  if (basis_n != N) {
    basis.assign(static_cast<std::size_t>(N) * N, 0.0);
    for (int k = 0; k < N; ++k) {
      const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / N);
      for (int n = 0; n < N; ++n)
        basis[static_cast<std::size_t>(k) * N + n] =
            scale * std::cos(M_PI / N * (n + 0.5) * k);
    }
    basis_n = N;
  }
  Tensor<double> out({T, N});
  MatMulNT(x.data.data(), basis.data(), out.data.data(), T, N, N);
  return out;
}

// MFCCs over the full clip on the same 25 ms / 10 ms grid; only complete
// frames are used, so clips shorter than one frame are rejected.
inline MfccFrames ComputeMfcc(const AudioClip& clip) {
  const std::int64_t L = clip.size();
  if (L < kFrameLen)
    throw TooShort("clip of " + std::to_string(L) +
                   " samples is shorter than one 400-sample frame");
  const int T = 1 + static_cast<int>((L - kFrameLen) / kFrameStep);
  Tensor<double> frames({T, kFrameLen});
  for (int t = 0; t < T; ++t) {
    const std::int64_t start = static_cast<std::int64_t>(t) * kFrameStep;
    for (int n = 0; n < kFrameLen; ++n)
      frames.data[static_cast<std::size_t>(t) * kFrameLen + n] =
          clip.samples[start + n] * HammingPeriodic(n, kFrameLen);
  }
  Tensor<double> spec = PowerSpectrum(frames);
  Tensor<double> logmel = LogMel(spec, DefaultMelFilterbank());  // (40, T)
  Tensor<double> frames_by_coef({T, kNumMel});
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < kNumMel; ++i)
      frames_by_coef.data[static_cast<std::size_t>(t) * kNumMel + i] =
          logmel.data[static_cast<std::size_t>(i) * T + t];
  MfccFrames out;
  out.data = DctOrthonormal(frames_by_coef);
  return out;
}

// Per-coefficient mean/variance normalization over the utterance.
inline MfccFrames Cmvn(const MfccFrames& frames) {
  const int T = frames.data.dim(0), N = frames.data.dim(1);
  MfccFrames out;
  out.data = Tensor<double>({T, N});
  out.cmvn_applied = true;
  for (int j = 0; j < N; ++j) {
    double mean = 0.0;
    for (int t = 0; t < T; ++t)
      mean += frames.data.data[static_cast<std::size_t>(t) * N + j];
    mean /= T;
    double var = 0.0;
    for (int t = 0; t < T; ++t) {
      const double d = frames.data.data[static_cast<std::size_t>(t) * N + j] - mean;
      var += d * d;
    }
    var /= T;
    const double stddev = std::max(std::sqrt(var), 1e-8);
    for (int t = 0; t < T; ++t)
      out.data.data[static_cast<std::size_t>(t) * N + j] =
          (frames.data.data[static_cast<std::size_t>(t) * N + j] - mean) / stddev;
  }
  return out;
}

// --- feature dump (test fixtures, cross-implementation diffing) ---

inline void WriteFloatLe(std::ostream& out, float v) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  const unsigned char b[4] = {static_cast<unsigned char>(bits & 0xff),
                              static_cast<unsigned char>((bits >> 8) & 0xff),
                              static_cast<unsigned char>((bits >> 16) & 0xff),
                              static_cast<unsigned char>((bits >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline float ReadFloatLe(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  const std::uint32_t bits = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
                             (std::uint32_t(b[2]) << 16) |
                             (std::uint32_t(b[3]) << 24);
  return std::bit_cast<float>(bits);
}

inline void WriteFeatureDump(const std::string& path, const FeatureMap& map) {
  if (map.shape != std::vector<int>({3, kNumMel, kNumFrames}))
    throw ShapeMismatch("feature dump expects (3,40,100), got " +
                        map.ShapeStr());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "VERID-FEAT 1 3 40 100\n";
  for (float v : map.data) WriteFloatLe(out, v);
  if (!out) throw IoError("short write to " + path);
}

inline FeatureMap ReadFeatureDump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string header;
  std::getline(in, header);
  if (header != "VERID-FEAT 1 3 40 100")
    throw ParseError("bad feature dump header in " + path + ": " + header);
  FeatureMap map({3, kNumMel, kNumFrames});
  for (auto& v : map.data) v = ReadFloatLe(in);
  if (!in) throw ParseError("truncated feature dump " + path);
  return map;
}

}  // namespace verid

#endif  // VERID_DSP_HPP_
