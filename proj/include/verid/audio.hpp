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

#ifndef VERID_AUDIO_HPP_
#define VERID_AUDIO_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "verid/common.hpp"

namespace verid {

inline constexpr int kSampleRate = 16000;
inline constexpr int kClipSamples = 16000;  // one second

struct AudioClip {
  std::vector<float> samples;  // in [-1, 1]
  int sample_rate_hz = kSampleRate;
  std::string source_path;
  std::optional<std::string> speaker_label;

  std::int64_t size() const {
    return static_cast<std::int64_t>(samples.size());
  }
};

namespace wav_detail {

inline std::uint32_t ReadU32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}
inline std::uint16_t ReadU16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (std::uint16_t(p[1]) << 8));
}

}  // namespace wav_detail

// Channel-averaged source samples (any count of channels collapses to one),
// still at the file's native rate and scaled by 1/32768.
struct RawWav {
  std::vector<double> mono;
  int sample_rate_hz = 0;
};

inline RawWav ReadWavMono(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedWav("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw MalformedWav("not a RIFF/WAVE file: " + path);

  using wav_detail::ReadU16;
  using wav_detail::ReadU32;

  bool have_fmt = false;
  std::uint16_t format_tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data_ptr = nullptr;
  std::uint32_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    std::uint32_t chunk_len = ReadU32(hdr + 4);
    pos += 8;
    if (pos + chunk_len > bytes.size())
      throw MalformedWav("truncated chunk in " + path);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw MalformedWav("fmt chunk too small in " + path);
      const unsigned char* f = bytes.data() + pos;
      format_tag = ReadU16(f);
      channels = ReadU16(f + 2);
      rate = ReadU32(f + 4);
      bits = ReadU16(f + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data_ptr = bytes.data() + pos;
      data_len = chunk_len;
    }
    pos += chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  if (!have_fmt) throw MalformedWav("missing fmt chunk in " + path);
  if (data_ptr == nullptr) throw MalformedWav("missing data chunk in " + path);
  if (format_tag != 1)
    throw UnsupportedFormat("non-PCM format tag " +
                            std::to_string(format_tag) + " in " + path);
  if (bits != 16)
    throw UnsupportedFormat("bit depth " + std::to_string(bits) + " in " +
                            path);
  if (channels != 1 && channels != 2)
    throw UnsupportedFormat(std::to_string(channels) + " channels in " + path);
  static const int kRates[] = {8000, 16000, 22050, 44100, 48000};
  if (std::find(std::begin(kRates), std::end(kRates), static_cast<int>(rate)) ==
      std::end(kRates))
    throw UnsupportedFormat("sample rate " + std::to_string(rate) + " in " +
                            path);

  std::uint32_t bytes_per_frame = 2u * channels;
  std::uint32_t n_frames = data_len / bytes_per_frame;
  if (n_frames == 0) throw EmptyAudio(path);

  RawWav raw;
  raw.sample_rate_hz = static_cast<int>(rate);
  raw.mono.resize(n_frames);
  for (std::uint32_t t = 0; t < n_frames; ++t) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      const unsigned char* s = data_ptr + (t * channels + c) * 2;
      std::int16_t v =
          static_cast<std::int16_t>(s[0] | (std::uint16_t(s[1]) << 8));
      acc += static_cast<double>(v) / 32768.0;
    }
    raw.mono[t] = acc / channels;
  }
  return raw;
}

// Linear-interpolation resampler. Positions are mapped through the exact
// rate ratio; the tail clamps to the last source sample.
inline std::vector<double> ResampleLinear(const std::vector<double>& x,
                                          int src_rate, int dst_rate) {
  if (src_rate == dst_rate) return x;
  const std::int64_t n = static_cast<std::int64_t>(x.size());
  const std::int64_t out_n = static_cast<std::int64_t>(
      std::llround(static_cast<double>(n) * dst_rate / src_rate));
  std::vector<double> y(static_cast<std::size_t>(std::max<std::int64_t>(out_n, 1)));
  const double step = static_cast<double>(src_rate) / dst_rate;
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(y.size()); ++i) {
    double u = i * step;
    std::int64_t i0 = static_cast<std::int64_t>(u);
    if (i0 >= n - 1) {
      y[i] = x[n - 1];
      continue;
    }
    double frac = u - i0;
    y[i] = (1.0 - frac) * x[i0] + frac * x[i0 + 1];
  }
  return y;
}

// Read a WAV file and normalize it to a mono 16 kHz clip.
inline AudioClip Ingest(const std::string& path) {
  RawWav raw = ReadWavMono(path);
  std::vector<double> mono = ResampleLinear(raw.mono, raw.sample_rate_hz,
                                            kSampleRate);
  AudioClip clip;
  clip.sample_rate_hz = kSampleRate;
  clip.source_path = path;
  clip.samples.resize(mono.size());
  for (std::size_t i = 0; i < mono.size(); ++i)
    clip.samples[i] = static_cast<float>(mono[i]);
  return clip;
}

// Write mono 16-bit PCM. Values are clamped, then rounded to the nearest
// 16-bit code, which makes Ingest(WriteWav(clip)) exact at 16-bit
// quantization.
inline void WriteWav(const std::string& path, const std::vector<float>& samples,
                     int sample_rate_hz = kSampleRate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * 2);
  auto put_u32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<char*>(b), 4);
  };
  auto put_u16 = [&](std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff)};
    out.write(reinterpret_cast<char*>(b), 2);
  };
  out.write("RIFF", 4);
  put_u32(36 + data_len);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(16);
  put_u16(1);  // PCM
  put_u16(1);  // mono
  put_u32(static_cast<std::uint32_t>(sample_rate_hz));
  put_u32(static_cast<std::uint32_t>(sample_rate_hz * 2));
  put_u16(2);
  put_u16(16);
  out.write("data", 4);
  put_u32(data_len);
  for (float s : samples) {
    double v = std::clamp(static_cast<double>(s), -1.0, 1.0) * 32768.0;
    std::int32_t q = static_cast<std::int32_t>(std::lrint(v));
    q = std::clamp(q, -32768, 32767);
    put_u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  if (!out) throw IoError("short write to " + path);
}

// Exactly one second of samples starting at `offset_samples`; short tails
// are zero-padded. Offsets at or past the end have no data to anchor the
// window and are rejected.
inline AudioClip Crop1s(const AudioClip& clip, std::int64_t offset_samples) {
  if (offset_samples < 0)
    throw OffsetBeyondClip("negative offset");
  if (offset_samples >= clip.size())
    throw OffsetBeyondClip("offset " + std::to_string(offset_samples) +
                           " >= clip length " + std::to_string(clip.size()));
  AudioClip out;
  out.sample_rate_hz = clip.sample_rate_hz;
  out.source_path = clip.source_path;
  out.speaker_label = clip.speaker_label;
  out.samples.assign(kClipSamples, 0.0f);
  std::int64_t n = std::min<std::int64_t>(kClipSamples,
                                          clip.size() - offset_samples);
  std::copy_n(clip.samples.begin() + offset_samples, n, out.samples.begin());
  return out;
}

struct ManifestEntry {
  std::string path;        // as written in the manifest
  std::string speaker_id;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::map<std::string, int> speaker_index;  // speaker_id -> class in [0, S)
  std::string base_dir;  // directory of the manifest file, for relative paths

  int NumSpeakers() const { return static_cast<int>(speaker_index.size()); }

  int ClassOf(const std::string& speaker_id) const {
    auto it = speaker_index.find(speaker_id);
    if (it == speaker_index.end())
      throw ParseError("unknown speaker " + speaker_id);
    return it->second;
  }

  // Relative utterance paths are taken relative to the manifest location.
  std::string Resolve(const std::string& path) const {
    std::filesystem::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (std::filesystem::path(base_dir) / p).string();
  }

  std::vector<int> SpeakerOfEntry() const {
    std::vector<int> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(ClassOf(e.speaker_id));
    return out;
  }
};

// One `<utterance_path>\t<speaker_id>` entry per line; `#` starts a comment
// line. Class indices follow first appearance order.
inline DatasetManifest LoadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  DatasetManifest m;
  m.base_dir = std::filesystem::path(path).parent_path().string();
  std::unordered_set<std::string> seen_paths;
  std::string line;
  int line_no = 0;
  int next_class = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size())
      throw ParseError("manifest " + path + " line " +
                       std::to_string(line_no) +
                       ": expected <path>\\t<speaker_id>");
    ManifestEntry e{line.substr(0, tab), line.substr(tab + 1)};
    if (!seen_paths.insert(e.path).second)
      throw DuplicatePath("manifest " + path + " line " +
                          std::to_string(line_no) + ": " + e.path);
    if (m.speaker_index.find(e.speaker_id) == m.speaker_index.end())
      m.speaker_index.emplace(e.speaker_id, next_class++);
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline void SaveManifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path);
  for (const auto& e : m.entries) out << e.path << '\t' << e.speaker_id << '\n';
  if (!out) throw IoError("short write to " + path);
}

}  // namespace verid

#endif  // VERID_AUDIO_HPP_
