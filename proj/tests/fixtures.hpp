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
//
// Shared synthetic fixtures for the unit suites.

#ifndef VERID_TESTS_FIXTURES_HPP_
#define VERID_TESTS_FIXTURES_HPP_

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "verid/audio.hpp"
#include "verid/model.hpp"
#include "verid/rng.hpp"

namespace verid::testing {

// Single-conv model small enough that training tests run in milliseconds.
inline ModelSpec MicroSpec(int n_classes, int embedding_dim = 8) {
  ModelSpec s;
  s.name = "custom";
  s.convs = {{2, 7, 7, 4, 4}};
  s.fc1_width = 16;
  s.embedding_dim = embedding_dim;
  s.n_classes = n_classes;
  return s;
}

// Two speakers with disjoint tone signatures, amplitude/phase/noise varied
// per utterance. Returns the manifest path.
inline std::string TwoSpeakerToneFixture(const std::string& dir, int n_utts,
                                         double duration_s,
                                         std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "wav");
  Rng rng(seed);
  const int n = static_cast<int>(duration_s * kSampleRate);
  const std::vector<std::vector<double>> tones = {{500.0, 1500.0},
                                                  {3000.0, 5000.0}};
  DatasetManifest manifest;
  char buf[64];
  for (int spk = 0; spk < 2; ++spk) {
    for (int u = 0; u < n_utts; ++u) {
      std::vector<float> x(n, 0.0f);
      for (double f : tones[spk]) {
        const double amp = rng.Uniform(0.2, 0.4);
        const double phase = rng.Uniform(0.0, 2.0 * M_PI);
        const double w = 2.0 * M_PI * f / kSampleRate;
        for (int i = 0; i < n; ++i)
          x[i] += static_cast<float>(amp * std::sin(w * i + phase));
      }
      const double noise = rng.Uniform(0.01, 0.05);
      for (int i = 0; i < n; ++i)
        x[i] += static_cast<float>(noise * rng.Normal());
      std::snprintf(buf, sizeof(buf), "wav/s%d_u%02d.wav", spk, u);
      WriteWav((fs::path(dir) / buf).string(), x);
      manifest.entries.push_back({buf, spk == 0 ? "alpha" : "bravo"});
    }
  }
  const std::string path = (fs::path(dir) / "manifest.tsv").string();
  SaveManifest(path, manifest);
  return path;
}

}  // namespace verid::testing

#endif  // VERID_TESTS_FIXTURES_HPP_
