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

#ifndef VERID_VERIFICATION_HPP_
#define VERID_VERIFICATION_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "verid/audio.hpp"
#include "verid/common.hpp"
#include "verid/dsp.hpp"
#include "verid/model.hpp"
#include "verid/rng.hpp"

namespace verid {

inline constexpr int kWindowHop = kClipSamples / 2;  // 0.5 s

struct SpeakerModel {
  std::string speaker_id;
  std::vector<float> embedding;  // unit l2 norm
  int n_utterances = 0;
};

// d-vector of an utterance: embedding-head forward over 1 s windows with a
// 0.5 s hop (one zero-padded window when shorter), averaged, then
// l2-normalized.
inline std::vector<float> EmbedUtterance(Model<float>* model,
                                         const AudioClip& clip) {
  if (clip.size() < 1) throw EmptyAudio("cannot embed an empty clip");
  std::vector<std::int64_t> starts;
  if (clip.size() < kClipSamples) {
    starts.push_back(0);
  } else {
    for (std::int64_t s = 0; s + kClipSamples <= clip.size(); s += kWindowHop)
      starts.push_back(s);
  }
  const int B = static_cast<int>(starts.size());
  Tensor<float> x({B, 3, kNumMel, kNumFrames});
  const std::size_t item = static_cast<std::size_t>(3) * kNumMel * kNumFrames;
  for (int i = 0; i < B; ++i) {
    const FeatureMap map = ComputeFeatureMap(Crop1s(clip, starts[i]));
    std::copy(map.data.begin(), map.data.end(), x.data.begin() + i * item);
  }
  Tensor<float> emb = model->Forward(x, Mode::kEval, Head::kEmbedding);
  const int d = emb.dim(1);
  std::vector<float> mean(d, 0.0f);
  for (int i = 0; i < B; ++i)
    for (int k = 0; k < d; ++k)
      mean[k] += emb.data[static_cast<std::size_t>(i) * d + k];
  double norm = 0.0;
  for (int k = 0; k < d; ++k) {
    mean[k] /= static_cast<float>(B);
    norm += static_cast<double>(mean[k]) * mean[k];
  }
  norm = std::sqrt(norm);
  if (norm < 1e-12) throw ZeroVector("degenerate utterance embedding");
  for (int k = 0; k < d; ++k) mean[k] = static_cast<float>(mean[k] / norm);
  return mean;
}

// Mean of the raw utterance embeddings, normalized once at the end, so
// enrollment does not depend on utterance order.
inline SpeakerModel EnrollSpeaker(
    const std::string& speaker_id,
    const std::vector<std::vector<float>>& embeddings) {
  if (embeddings.empty())
    throw NoEmbeddings("enroll needs at least one embedding for " +
                       speaker_id);
  const std::size_t d = embeddings.front().size();
  std::vector<double> mean(d, 0.0);
  for (const auto& e : embeddings) {
    if (e.size() != d) throw DimMismatch("embedding dims differ in enroll");
    for (std::size_t k = 0; k < d; ++k) mean[k] += e[k];
  }
  double norm = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    mean[k] /= static_cast<double>(embeddings.size());
    norm += mean[k] * mean[k];
  }
  norm = std::sqrt(norm);
  if (norm < 1e-12)
    throw ZeroVector("enrollment mean for " + speaker_id +
                     " has vanishing norm");
  SpeakerModel sm;
  sm.speaker_id = speaker_id;
  sm.n_utterances = static_cast<int>(embeddings.size());
  sm.embedding.resize(d);
  for (std::size_t k = 0; k < d; ++k)
    sm.embedding[k] = static_cast<float>(mean[k] / norm);
  return sm;
}

inline double CosineScore(const SpeakerModel& model,
                          const std::vector<float>& test_embedding) {
  if (model.embedding.size() != test_embedding.size())
    throw DimMismatch("model dim " + std::to_string(model.embedding.size()) +
                      " vs test dim " +
                      std::to_string(test_embedding.size()));
  double dot = 0.0, norm = 0.0;
  for (std::size_t k = 0; k < test_embedding.size(); ++k) {
    dot += static_cast<double>(model.embedding[k]) * test_embedding[k];
    norm += static_cast<double>(test_embedding[k]) * test_embedding[k];
  }
  norm = std::sqrt(norm);
  if (norm < 1e-12) throw ZeroVector("test embedding has vanishing norm");
  return dot / norm;
}

// ---------- EER ----------

struct EerCurvePoint {
  double threshold = 0.0, far = 0.0, frr = 0.0;
};

struct EerReport {
  double eer = 0.0;
  double threshold = 0.0;
  std::vector<EerCurvePoint> curve;
  std::int64_t n_genuine = 0, n_impostor = 0;
};

// Sweep of every candidate threshold (all scores plus +-inf sentinels) with
// the accept-at-threshold convention: FRR(t) = #(genuine < t) / G,
// FAR(t) = #(impostor >= t) / I. The operating point is the lowest
// candidate minimizing |FAR - FRR| and the EER is the midpoint there.
inline EerReport ComputeEer(std::vector<double> genuine,
                            std::vector<double> impostor) {
  if (genuine.empty() || impostor.empty())
    throw EmptySide("EER needs both genuine and impostor scores");
  EerReport rep;
  rep.n_genuine = static_cast<std::int64_t>(genuine.size());
  rep.n_impostor = static_cast<std::int64_t>(impostor.size());

  std::sort(genuine.begin(), genuine.end());
  std::sort(impostor.begin(), impostor.end());
  std::vector<double> candidates;
  candidates.reserve(genuine.size() + impostor.size() + 2);
  candidates.push_back(-std::numeric_limits<double>::infinity());
  candidates.insert(candidates.end(), genuine.begin(), genuine.end());
  candidates.insert(candidates.end(), impostor.begin(), impostor.end());
  candidates.push_back(std::numeric_limits<double>::infinity());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  const double G = static_cast<double>(genuine.size());
  const double I = static_cast<double>(impostor.size());
  double best_gap = std::numeric_limits<double>::infinity();
  for (double t : candidates) {
    const double frr =
        static_cast<double>(std::lower_bound(genuine.begin(), genuine.end(), t) -
                            genuine.begin()) /
        G;
    const double far =
        static_cast<double>(impostor.end() -
                            std::lower_bound(impostor.begin(), impostor.end(),
                                             t)) /
        I;
    rep.curve.push_back({t, far, frr});
    const double gap = std::abs(far - frr);
    if (gap < best_gap) {
      best_gap = gap;
      rep.threshold = t;
      rep.eer = (far + frr) / 2.0;
    }
  }
  return rep;
}

// ---------- trials ----------

struct Trial {
  int label = 0;      // 1 genuine, 0 impostor
  std::string a;      // utterance path
  std::string b;      // utterance path or enrolled speaker id
};

struct TrialList {
  std::vector<Trial> trials;
};

// Seeded sampling of distinct unordered utterance pairs: genuine from
// same-speaker pairs, impostor across speakers.
inline TrialList GenerateTrials(const DatasetManifest& manifest,
                                std::int64_t n_genuine,
                                std::int64_t n_impostor, std::uint64_t seed) {
  if (manifest.NumSpeakers() < 2)
    throw Infeasible("trial generation needs >= 2 speakers");
  const std::vector<int> spk = manifest.SpeakerOfEntry();
  const int n = static_cast<int>(manifest.entries.size());
  std::vector<std::pair<int, int>> genuine_pool, impostor_pool;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      (spk[i] == spk[j] ? genuine_pool : impostor_pool).emplace_back(i, j);
  if (n_genuine > static_cast<std::int64_t>(genuine_pool.size()) ||
      n_impostor > static_cast<std::int64_t>(impostor_pool.size()))
    throw Infeasible(
        "requested " + std::to_string(n_genuine) + "+" +
        std::to_string(n_impostor) + " trials, pools have " +
        std::to_string(genuine_pool.size()) + "+" +
        std::to_string(impostor_pool.size()));

  Rng rng(seed);
  auto sample = [&rng](std::vector<std::pair<int, int>>* pool,
                       std::int64_t k) {
    // Partial Fisher-Yates keeps the first k slots a uniform sample.
    for (std::int64_t i = 0; i < k; ++i) {
      const std::size_t j =
          i + static_cast<std::size_t>(rng.UniformInt(pool->size() - i));
      std::swap((*pool)[i], (*pool)[j]);
    }
    pool->resize(k);
  };
  sample(&genuine_pool, n_genuine);
  sample(&impostor_pool, n_impostor);

  TrialList out;
  for (const auto& [i, j] : genuine_pool)
    out.trials.push_back({1, manifest.entries[i].path,
                          manifest.entries[j].path});
  for (const auto& [i, j] : impostor_pool)
    out.trials.push_back({0, manifest.entries[i].path,
                          manifest.entries[j].path});
  return out;
}

// ---------- file formats ----------

inline void SaveTrials(const std::string& path, const TrialList& list) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trials " + path);
  for (const auto& t : list.trials)
    out << t.label << '\t' << t.a << '\t' << t.b << '\n';
  if (!out) throw IoError("short write to " + path);
}

inline TrialList LoadTrials(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trials " + path);
  TrialList out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos
                               ? std::string::npos
                               : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw ParseError("trials " + path + " line " + std::to_string(line_no));
    Trial t;
    const std::string label = line.substr(0, t1);
    if (label != "0" && label != "1")
      throw ParseError("trials " + path + " line " + std::to_string(line_no) +
                       ": label must be 0 or 1");
    t.label = label == "1" ? 1 : 0;
    t.a = line.substr(t1 + 1, t2 - t1 - 1);
    t.b = line.substr(t2 + 1);
    if (t.a.empty() || t.b.empty())
      throw ParseError("trials " + path + " line " + std::to_string(line_no));
    out.trials.push_back(std::move(t));
  }
  return out;
}

struct ScoredTrial {
  int label = 0;
  double score = 0.0;
};

inline void SaveScores(const std::string& path,
                       const std::vector<ScoredTrial>& scores) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scores " + path);
  char buf[64];
  for (const auto& s : scores) {
    std::snprintf(buf, sizeof(buf), "%d\t%.12g", s.label, s.score);
    out << buf << '\n';
  }
  if (!out) throw IoError("short write to " + path);
}

inline std::vector<ScoredTrial> LoadScores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scores " + path);
  std::vector<ScoredTrial> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError("scores " + path + " line " + std::to_string(line_no));
    ScoredTrial s;
    try {
      s.label = std::stoi(line.substr(0, tab));
      s.score = std::stod(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError("scores " + path + " line " + std::to_string(line_no));
    }
    if (s.label != 0 && s.label != 1)
      throw ParseError("scores " + path + " line " + std::to_string(line_no) +
                       ": label must be 0 or 1");
    out.push_back(s);
  }
  return out;
}

inline void SaveEerCurve(const std::string& path, const EerReport& rep) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write curve " + path);
  char buf[96];
  for (const auto& p : rep.curve) {
    std::snprintf(buf, sizeof(buf), "%.12g\t%.12g\t%.12g", p.threshold, p.far,
                  p.frr);
    out << buf << '\n';
  }
  if (!out) throw IoError("short write to " + path);
}

inline void SaveEerReport(const std::string& path, const EerReport& rep) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "eer %.6f\nthreshold %.12g\n", rep.eer,
                rep.threshold);
  out << buf;
  out << "n_genuine " << rep.n_genuine << "\n";
  out << "n_impostor " << rep.n_impostor << "\n";
  if (!out) throw IoError("short write to " + path);
}

// Enrolled speaker models: text header then float32 blobs, one per speaker.
inline void SaveSpeakerModels(const std::string& path,
                              const std::vector<SpeakerModel>& models) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write speaker models " + path);
  out << "SVSPK1\n";
  for (const auto& m : models)
    out << "speaker " << m.speaker_id << " " << m.n_utterances << " "
        << m.embedding.size() << "\n";
  out << "end\n";
  for (const auto& m : models)
    for (float v : m.embedding) WriteFloatLe(out, v);
  if (!out) throw IoError("short write to " + path);
}

inline std::vector<SpeakerModel> LoadSpeakerModels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open speaker models " + path);
  std::string line;
  if (!std::getline(in, line) || line != "SVSPK1")
    throw ParseError("bad speaker model magic in " + path);
  std::vector<SpeakerModel> models;
  std::vector<std::size_t> dims;
  while (std::getline(in, line) && line != "end") {
    std::istringstream is(line);
    std::string key;
    SpeakerModel m;
    std::size_t dim = 0;
    is >> key >> m.speaker_id >> m.n_utterances >> dim;
    if (is.fail() || key != "speaker")
      throw ParseError("bad speaker model line '" + line + "' in " + path);
    models.push_back(std::move(m));
    dims.push_back(dim);
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    models[i].embedding.resize(dims[i]);
    for (auto& v : models[i].embedding) v = ReadFloatLe(in);
    if (!in) throw ParseError("truncated speaker models " + path);
  }
  return models;
}

}  // namespace verid

#endif  // VERID_VERIFICATION_HPP_
