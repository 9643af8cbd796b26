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

#ifndef VERID_SYNTH_HPP_
#define VERID_SYNTH_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "verid/audio.hpp"
#include "verid/common.hpp"
#include "verid/dsp.hpp"
#include "verid/rng.hpp"

namespace verid {

// Deterministic synthetic-speaker dataset: each pseudo-speaker is a distinct
// combination of tones from a shared mel-spaced grid plus one noise band.
// Speakers share individual tones, so they are confusable but separable;
// per-utterance amplitude, detuning and noise create within-speaker
// variation.
struct SynthFixtureOptions {
  int n_speakers = 20;
  int n_utterances = 20;   // per speaker
  int heldout = 5;         // per speaker, taken from the tail
  double duration_s = 2.0;
  std::uint64_t seed = 1;
};

struct SynthFixture {
  std::string dir;
  std::string all_manifest, train_manifest, heldout_manifest;
};

namespace synth_detail {

inline constexpr int kGridTones = 12;
inline constexpr int kTonesPerSpeaker = 3;
inline constexpr int kNoiseBands = 6;

inline std::vector<double> ToneGridHz() {
  // Mel-spaced grid between 500 and 6000 Hz.
  std::vector<double> grid(kGridTones);
  const double lo = HzToMel(500.0), hi = HzToMel(6000.0);
  for (int i = 0; i < kGridTones; ++i)
    grid[i] = MelToHz(lo + (hi - lo) * i / (kGridTones - 1));
  return grid;
}

struct SpeakerSignature {
  std::vector<int> tones;  // indices into the grid
  int noise_band = 0;
};

inline std::vector<SpeakerSignature> DrawSignatures(int n_speakers, Rng* rng) {
  std::set<std::vector<int>> used;
  std::vector<SpeakerSignature> sigs;
  while (static_cast<int>(sigs.size()) < n_speakers) {
    std::vector<int> pool(kGridTones);
    for (int i = 0; i < kGridTones; ++i) pool[i] = i;
    rng->Shuffle(&pool);
    std::vector<int> tones(pool.begin(), pool.begin() + kTonesPerSpeaker);
    std::sort(tones.begin(), tones.end());
    if (!used.insert(tones).second) continue;  // keep combinations distinct
    SpeakerSignature sig;
    sig.tones = tones;
    sig.noise_band = static_cast<int>(rng->UniformInt(kNoiseBands));
    sigs.push_back(sig);
  }
  return sigs;
}

}  // namespace synth_detail

inline std::vector<float> SynthUtterance(
    const synth_detail::SpeakerSignature& sig, int n_samples, Rng* rng) {
  static const std::vector<double> grid = synth_detail::ToneGridHz();
  std::vector<double> acc(n_samples, 0.0);

  for (int tone : sig.tones) {
    const double detune = rng->Uniform(0.985, 1.015);
    const double freq = grid[tone] * detune;
    const double amp = rng->Uniform(0.35, 1.0);
    const double phase = rng->Uniform(0.0, 2.0 * M_PI);
    const double w = 2.0 * M_PI * freq / kSampleRate;
    for (int n = 0; n < n_samples; ++n)
      acc[n] += amp * std::sin(w * n + phase);
  }

  // Band-limited noise as a sum of random-phase sinusoids in the speaker's
  // band.
  const double band_lo = 300.0 + 900.0 * sig.noise_band;
  const double band_hi = band_lo + 900.0;
  const double noise_amp = rng->Uniform(0.05, 0.25);
  for (int i = 0; i < 24; ++i) {
    const double freq = rng->Uniform(band_lo, band_hi);
    const double phase = rng->Uniform(0.0, 2.0 * M_PI);
    const double w = 2.0 * M_PI * freq / kSampleRate;
    const double amp = noise_amp * rng->Uniform(0.3, 1.0);
    for (int n = 0; n < n_samples; ++n) acc[n] += amp * std::sin(w * n + phase);
  }

  // White noise floor.
  const double floor_amp = rng->Uniform(0.02, 0.10);
  for (int n = 0; n < n_samples; ++n) acc[n] += floor_amp * rng->Normal();

  double peak = 1e-9;
  for (double v : acc) peak = std::max(peak, std::abs(v));
  const double gain = 0.9 / peak;
  std::vector<float> out(n_samples);
  for (int n = 0; n < n_samples; ++n)
    out[n] = static_cast<float>(acc[n] * gain);
  return out;
}

inline SynthFixture GenerateSynthFixture(const std::string& out_dir,
                                         const SynthFixtureOptions& opt) {
  if (opt.n_speakers < 2 || opt.n_utterances < 1)
    throw BadConfig("fixture needs >= 2 speakers and >= 1 utterance each");
  if (opt.heldout < 0 || opt.heldout >= opt.n_utterances)
    throw BadConfig("heldout must be in [0, n_utterances)");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "wav");

  Rng master(opt.seed);
  Rng sig_rng = master.Fork(1);
  Rng utt_rng = master.Fork(2);
  const auto sigs = synth_detail::DrawSignatures(opt.n_speakers, &sig_rng);
  const int n_samples =
      static_cast<int>(opt.duration_s * kSampleRate + 0.5);

  DatasetManifest all, train, heldout;
  char name[64];
  for (int s = 0; s < opt.n_speakers; ++s) {
    std::snprintf(name, sizeof(name), "spk%02d", s);
    const std::string speaker = name;
    for (int u = 0; u < opt.n_utterances; ++u) {
      std::snprintf(name, sizeof(name), "wav/%s_utt%02d.wav", speaker.c_str(),
                    u);
      const std::string rel = name;
      const std::vector<float> samples =
          SynthUtterance(sigs[s], n_samples, &utt_rng);
      WriteWav((fs::path(out_dir) / rel).string(), samples);
      ManifestEntry entry{rel, speaker};
      all.entries.push_back(entry);
      if (u < opt.n_utterances - opt.heldout)
        train.entries.push_back(entry);
      else
        heldout.entries.push_back(entry);
    }
  }

  SynthFixture fx;
  fx.dir = out_dir;
  fx.all_manifest = (fs::path(out_dir) / "all.tsv").string();
  fx.train_manifest = (fs::path(out_dir) / "train.tsv").string();
  fx.heldout_manifest = (fs::path(out_dir) / "heldout.tsv").string();
  SaveManifest(fx.all_manifest, all);
  SaveManifest(fx.train_manifest, train);
  if (!heldout.entries.empty()) SaveManifest(fx.heldout_manifest, heldout);
  return fx;
}

}  // namespace verid

#endif  // VERID_SYNTH_HPP_
