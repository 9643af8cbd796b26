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

#ifndef VERID_TRAINING_HPP_
#define VERID_TRAINING_HPP_

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "verid/audio.hpp"
#include "verid/checkpoint.hpp"
#include "verid/common.hpp"
#include "verid/dsp.hpp"
#include "verid/losses.hpp"
#include "verid/model.hpp"
#include "verid/parallel.hpp"
#include "verid/rng.hpp"

namespace verid {

struct TrainConfig {
  std::string phase = "softmax";  // softmax | siamese
  double lr = -1.0;               // <= 0 picks the per-phase default
  int epochs = -1;                // <= 0 picks the per-phase default
  int batch_size = 32;            // softmax phase
  double margin = 1.0;
  double lambda = 1e-4;
  std::uint64_t seed = 0;
  std::string pair_strategy = "hard-negative";  // all | hard-negative
  double momentum = 0.9;
  int speakers_per_batch = 8;  // siamese batch = P speakers x K crops
  int crops_per_speaker = 4;
  int workers = 0;  // 0 = machine parallelism

  double EffectiveLr() const {
    if (lr >= 0.0) return lr;
    return phase == "siamese" ? 1e-5 : 1e-3;
  }
  int EffectiveEpochs() const {
    if (epochs >= 1) return epochs;
    return phase == "siamese" ? 20 : 5;
  }
  void Validate() const {
    if (phase != "softmax" && phase != "siamese")
      throw BadConfig("phase must be softmax or siamese");
    if (lr > 0.5) throw BadConfig("learning rate " + std::to_string(lr));
    if (pair_strategy != "all" && pair_strategy != "hard-negative")
      throw BadConfig("pair_strategy must be all or hard-negative");
    if (batch_size < 2) throw BadConfig("batch_size must be >= 2");
    if (speakers_per_batch < 2 || crops_per_speaker < 2)
      throw BadConfig("siamese batches need >= 2 speakers and >= 2 crops");
    if (margin <= 0) throw BadConfig("margin must be positive");
    if (lambda < 0) throw BadConfig("lambda must be non-negative");
  }
};

// Flat key=value text, '#' comments. Unknown keys are rejected so typos
// surface immediately.
inline TrainConfig ParseTrainConfig(const std::string& path,
                                    TrainConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw BadConfig("config " + path + " line " + std::to_string(line_no) +
                      ": expected key=value");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    try {
      if (key == "phase") base.phase = val;
      else if (key == "lr") base.lr = std::stod(val);
      else if (key == "epochs") base.epochs = std::stoi(val);
      else if (key == "batch_size") base.batch_size = std::stoi(val);
      else if (key == "margin") base.margin = std::stod(val);
      else if (key == "lambda") base.lambda = std::stod(val);
      else if (key == "seed") base.seed = std::stoull(val);
      else if (key == "pair_strategy") base.pair_strategy = val;
      else if (key == "momentum") base.momentum = std::stod(val);
      else if (key == "speakers_per_batch") base.speakers_per_batch = std::stoi(val);
      else if (key == "crops_per_speaker") base.crops_per_speaker = std::stoi(val);
      else if (key == "workers") base.workers = std::stoi(val);
      else
        throw BadConfig("config " + path + " line " + std::to_string(line_no) +
                        ": unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw BadConfig("config " + path + " line " + std::to_string(line_no) +
                      ": bad value for '" + key + "'");
    }
  }
  return base;
}

// All clips of a manifest held in memory, ingested once up front.
class ClipStore {
 public:
  ClipStore(const DatasetManifest& manifest, int workers = 0)
      : manifest_(manifest), clips_(manifest.entries.size()) {
    labels_ = manifest.SpeakerOfEntry();
    ParallelFor(clips_.size(), workers, [&](std::size_t i) {
      clips_[i] = Ingest(manifest_.Resolve(manifest_.entries[i].path));
      clips_[i].speaker_label = manifest_.entries[i].speaker_id;
    });
    by_speaker_.resize(manifest.NumSpeakers());
    for (std::size_t i = 0; i < labels_.size(); ++i)
      by_speaker_[labels_[i]].push_back(static_cast<int>(i));
  }

  const DatasetManifest& manifest() const { return manifest_; }
  int size() const { return static_cast<int>(clips_.size()); }
  const AudioClip& clip(int i) const { return clips_[i]; }
  int label(int i) const { return labels_[i]; }
  const std::vector<std::vector<int>>& by_speaker() const {
    return by_speaker_;
  }

 private:
  DatasetManifest manifest_;
  std::vector<AudioClip> clips_;
  std::vector<int> labels_;
  std::vector<std::vector<int>> by_speaker_;
};

// (clip index, crop offset) jobs -> stacked (B, 3, 40, 100) features.
struct CropJob {
  int clip_index = 0;
  std::int64_t offset = 0;
};

inline Tensor<float> ExtractCropFeatures(const ClipStore& store,
                                         const std::vector<CropJob>& jobs,
                                         int workers) {
  const int B = static_cast<int>(jobs.size());
  Tensor<float> batch({B, 3, kNumMel, kNumFrames});
  const std::size_t item = static_cast<std::size_t>(3) * kNumMel * kNumFrames;
  ParallelFor(jobs.size(), workers, [&](std::size_t i) {
    const AudioClip crop = Crop1s(store.clip(jobs[i].clip_index),
                                  jobs[i].offset);
    const FeatureMap map = ComputeFeatureMap(crop);
    std::copy(map.data.begin(), map.data.end(),
              batch.data.begin() + i * item);
  });
  return batch;
}

inline std::int64_t RandomCropOffset(const AudioClip& clip, Rng* rng) {
  const std::int64_t len = clip.size();
  if (len <= kClipSamples) return 0;
  return static_cast<std::int64_t>(
      rng->UniformInt(static_cast<std::uint64_t>(len - kClipSamples + 1)));
}

template <class T>
class SgdOptimizer {
 public:
  SgdOptimizer(Model<T>* model, T lr, T momentum)
      : model_(model), lr_(lr), momentum_(momentum) {
    for (const auto& ref : model_->Parameters())
      velocity_.emplace_back(ref.tensor->shape);
  }

  void Step() {
    auto refs = model_->Parameters();
    for (std::size_t i = 0; i < refs.size(); ++i)
      SgdStep(*refs[i].tensor, *refs[i].grad, velocity_[i], lr_, momentum_);
  }

  void set_lr(T lr) { lr_ = lr; }

 private:
  Model<T>* model_;
  T lr_, momentum_;
  std::vector<Tensor<T>> velocity_;
};

// ---------- pair selection ----------

struct PairBatch {
  std::vector<std::pair<int, int>> pairs;  // indices into the batch, i < j
  std::vector<int> labels;                 // 1 genuine, 0 impostor
};

// `all` enumerates every unordered pair. `hard-negative` keeps every genuine
// pair and matches it with the same count of impostor pairs of smallest
// current embedding distance (ties to the lexicographically lower pair).
inline PairBatch SelectPairs(const Tensor<float>& embeddings,
                             const std::vector<int>& labels,
                             const std::string& strategy) {
  if (embeddings.ndim() != 2) throw ShapeMismatch("embeddings must be (B, d)");
  const int B = embeddings.dim(0), d = embeddings.dim(1);
  if (static_cast<int>(labels.size()) != B)
    throw ShapeMismatch("labels length vs batch");
  if (B < 4) throw BatchTooSmall("pair selection needs a batch of >= 4");

  PairBatch out;
  if (strategy == "all") {
    for (int i = 0; i < B; ++i)
      for (int j = i + 1; j < B; ++j) {
        out.pairs.emplace_back(i, j);
        out.labels.push_back(labels[i] == labels[j] ? 1 : 0);
      }
    return out;
  }
  if (strategy != "hard-negative")
    throw BadConfig("unknown pair strategy '" + strategy + "'");

  struct Impostor {
    float dist;
    int i, j;
  };
  std::vector<Impostor> impostors;
  for (int i = 0; i < B; ++i) {
    const float* ei = embeddings.data.data() + static_cast<std::size_t>(i) * d;
    for (int j = i + 1; j < B; ++j) {
      if (labels[i] == labels[j]) {
        out.pairs.emplace_back(i, j);
        out.labels.push_back(1);
      } else {
        const float* ej =
            embeddings.data.data() + static_cast<std::size_t>(j) * d;
        float acc = 0.0f;
        for (int k = 0; k < d; ++k) {
          const float diff = ei[k] - ej[k];
          acc += diff * diff;
        }
        impostors.push_back({std::sqrt(acc), i, j});
      }
    }
  }
  std::sort(impostors.begin(), impostors.end(),
            [](const Impostor& a, const Impostor& b) {
              if (a.dist != b.dist) return a.dist < b.dist;
              if (a.i != b.i) return a.i < b.i;
              return a.j < b.j;
            });
  const std::size_t n_genuine = out.pairs.size();
  const std::size_t take = std::min(n_genuine, impostors.size());
  for (std::size_t k = 0; k < take; ++k) {
    out.pairs.emplace_back(impostors[k].i, impostors[k].j);
    out.labels.push_back(0);
  }
  return out;
}

// ---------- training loops ----------

struct TrainResult {
  CheckpointMeta meta;
};

inline void LogEpoch(std::ostream* log, int epoch, double loss, double acc) {
  if (log == nullptr) return;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "epoch %d loss %.6f acc %.4f", epoch, loss,
                acc);
  (*log) << buf << "\n";
  log->flush();
}

// Phase one: classifier over the manifest's speakers, random seeded 1 s
// crops, batch-stats batch norm, cross-entropy + SGD.
inline TrainResult PretrainSoftmax(Model<float>* model, const ClipStore& store,
                                   const TrainConfig& cfg,
                                   std::ostream* log = nullptr) {
  cfg.Validate();
  if (store.manifest().NumSpeakers() < 2)
    throw TooFewSpeakers("softmax pretraining needs >= 2 speakers");
  if (model->spec().n_classes != store.manifest().NumSpeakers())
    throw SpecMismatch("model has " +
                       std::to_string(model->spec().n_classes) +
                       " classes, manifest has " +
                       std::to_string(store.manifest().NumSpeakers()));
  const double lr = cfg.EffectiveLr();
  const int epochs = cfg.EffectiveEpochs();

  Rng master(cfg.seed);
  Rng shuffle_rng = master.Fork(1);
  Rng crop_rng = master.Fork(2);
  SgdOptimizer<float> opt(model, static_cast<float>(lr),
                          static_cast<float>(cfg.momentum));

  TrainResult res;
  res.meta.phase = "softmax";
  res.meta.seed = cfg.seed;

  std::vector<int> order(store.size());
  for (int i = 0; i < store.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    shuffle_rng.Shuffle(&order);
    double loss_sum = 0.0;
    std::int64_t n_seen = 0, n_correct = 0;
    for (int start = 0; start < store.size(); start += cfg.batch_size) {
      const int b = std::min(cfg.batch_size, store.size() - start);
      if (b < 2) break;  // batch-stats normalization needs >= 2 items
      std::vector<CropJob> jobs(b);
      std::vector<int> labels(b);
      for (int i = 0; i < b; ++i) {
        const int idx = order[start + i];
        jobs[i] = {idx, RandomCropOffset(store.clip(idx), &crop_rng)};
        labels[i] = store.label(idx);
      }
      Tensor<float> x = ExtractCropFeatures(store, jobs, cfg.workers);
      Tensor<float> logits = model->Forward(x, Mode::kTrain, Head::kClassifier);
      const auto sm = SoftmaxXent(logits, labels);
      model->ZeroGrads();
      model->Backward(sm.grad);
      opt.Step();

      loss_sum += static_cast<double>(sm.loss) * b;
      n_seen += b;
      const int S = logits.dim(1);
      for (int i = 0; i < b; ++i) {
        const float* row = logits.data.data() + static_cast<std::size_t>(i) * S;
        int argmax = 0;
        for (int s = 1; s < S; ++s)
          if (row[s] > row[argmax]) argmax = s;
        if (argmax == labels[i]) ++n_correct;
      }
    }
    const double mean_loss = n_seen > 0 ? loss_sum / n_seen : 0.0;
    const double acc = n_seen > 0 ? static_cast<double>(n_correct) / n_seen
                                  : 0.0;
    res.meta.history.push_back({epoch, mean_loss, acc});
    res.meta.epoch = epoch;
    LogEpoch(log, epoch, mean_loss, acc);
  }
  return res;
}

// Phase two: Siamese fine-tuning. One parameter set serves both branches;
// each batch is P speakers x K crops, embeddings come from the shared
// model, pairs are chosen online, and the contrastive gradients from both
// pair sides flow into the same tensors. fc-3 receives no gradient. Batch
// norm runs on frozen running statistics so the pretrained normalization is
// kept (gamma/beta keep training).
inline TrainResult FinetuneSiamese(Model<float>* model, const ClipStore& store,
                                   const TrainConfig& cfg,
                                   std::ostream* log = nullptr) {
  cfg.Validate();
  if (store.manifest().NumSpeakers() < 2)
    throw TooFewSpeakers("siamese fine-tuning needs >= 2 speakers");
  const double lr = cfg.EffectiveLr();
  const int epochs = cfg.EffectiveEpochs();
  const int P = std::min(cfg.speakers_per_batch,
                         store.manifest().NumSpeakers());
  const int K = cfg.crops_per_speaker;
  const int batch = P * K;
  if (batch < 4) throw BatchTooSmall("siamese batch P*K must be >= 4");

  Rng master(cfg.seed);
  Rng batch_rng = master.Fork(1);
  Rng crop_rng = master.Fork(2);
  SgdOptimizer<float> opt(model, static_cast<float>(lr),
                          static_cast<float>(cfg.momentum));
  ContrastiveConfig closs{cfg.margin, cfg.lambda};

  TrainResult res;
  res.meta.phase = "siamese";
  res.meta.seed = cfg.seed;

  const int steps_per_epoch = std::max(1, store.size() / batch);
  std::vector<int> speaker_ids(store.manifest().NumSpeakers());
  for (std::size_t i = 0; i < speaker_ids.size(); ++i)
    speaker_ids[i] = static_cast<int>(i);

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    double loss_sum = 0.0;
    std::int64_t n_pairs = 0, n_pairs_correct = 0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      batch_rng.Shuffle(&speaker_ids);
      std::vector<CropJob> jobs;
      std::vector<int> labels;
      jobs.reserve(batch);
      for (int p = 0; p < P; ++p) {
        const int spk = speaker_ids[p];
        const auto& utts = store.by_speaker()[spk];
        for (int k = 0; k < K; ++k) {
          const int idx = utts[crop_rng.UniformInt(utts.size())];
          jobs.push_back({idx, RandomCropOffset(store.clip(idx), &crop_rng)});
          labels.push_back(spk);
        }
      }
      Tensor<float> x = ExtractCropFeatures(store, jobs, cfg.workers);
      Tensor<float> emb =
          model->Forward(x, Mode::kTrainFrozenBn, Head::kEmbedding);
      const PairBatch pb = SelectPairs(emb, labels, cfg.pair_strategy);
      if (pb.pairs.empty()) continue;

      const int N = static_cast<int>(pb.pairs.size());
      const int d = emb.dim(1);
      Tensor<float> e1({N, d}), e2({N, d});
      for (int i = 0; i < N; ++i) {
        const auto [a, b] = pb.pairs[i];
        std::copy_n(emb.data.data() + static_cast<std::size_t>(a) * d, d,
                    e1.data.data() + static_cast<std::size_t>(i) * d);
        std::copy_n(emb.data.data() + static_cast<std::size_t>(b) * d, d,
                    e2.data.data() + static_cast<std::size_t>(i) * d);
      }
      const auto closs_res =
          ContrastiveLoss(e1, e2, pb.labels, closs,
                          model->WeightSquaredNorm(/*include_fc3=*/false));

      Tensor<float> grad_emb(emb.shape);
      for (int i = 0; i < N; ++i) {
        const auto [a, b] = pb.pairs[i];
        for (int k = 0; k < d; ++k) {
          grad_emb.data[static_cast<std::size_t>(a) * d + k] +=
              closs_res.grad_e1.data[static_cast<std::size_t>(i) * d + k];
          grad_emb.data[static_cast<std::size_t>(b) * d + k] +=
              closs_res.grad_e2.data[static_cast<std::size_t>(i) * d + k];
        }
      }
      model->ZeroGrads();
      model->Backward(grad_emb);
      model->AddWeightDecayGrad(static_cast<float>(cfg.lambda),
                                /*include_fc3=*/false);
      opt.Step();

      loss_sum += static_cast<double>(closs_res.loss);
      for (int i = 0; i < N; ++i) {
        const bool predicted_genuine =
            closs_res.distances[i] < static_cast<float>(cfg.margin) / 2;
        if (predicted_genuine == (pb.labels[i] == 1)) ++n_pairs_correct;
      }
      n_pairs += N;
    }
    const double mean_loss = loss_sum / steps_per_epoch;
    const double acc =
        n_pairs > 0 ? static_cast<double>(n_pairs_correct) / n_pairs : 0.0;
    res.meta.history.push_back({epoch, mean_loss, acc});
    res.meta.epoch = epoch;
    LogEpoch(log, epoch, mean_loss, acc);
  }
  return res;
}

}  // namespace verid

#endif  // VERID_TRAINING_HPP_
