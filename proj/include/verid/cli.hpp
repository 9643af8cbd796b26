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

#ifndef VERID_CLI_HPP_
#define VERID_CLI_HPP_

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>

#include "verid/audio.hpp"
#include "verid/checkpoint.hpp"
#include "verid/common.hpp"
#include "verid/dsp.hpp"
#include "verid/gmm.hpp"
#include "verid/model.hpp"
#include "verid/parallel.hpp"
#include "verid/synth.hpp"
#include "verid/training.hpp"
#include "verid/verification.hpp"

namespace verid::cli {

namespace fs = std::filesystem;

// ---------- helpers ----------

inline std::uint64_t DigestFiles(const std::vector<std::string>& paths) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& p : paths) {
    h = Fnv1a(p.data(), p.size(), h);
    std::ifstream in(p, std::ios::binary);
    if (!in) continue;  // outputs-to-be are skipped
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
      h = Fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
      if (!in) break;
    }
  }
  return h;
}

inline void PrintRunSummary(const std::string& cmd, std::uint64_t seed,
                            const std::vector<std::string>& inputs) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "# verid %s cmd=%s seed=%llu inputs=%016llx",
                kVersion, cmd.c_str(),
                static_cast<unsigned long long>(seed),
                static_cast<unsigned long long>(DigestFiles(inputs)));
  std::cout << buf << "\n";
}

// Streams every epoch line to stdout and to the log file.
class TeeStream : public std::ostream {
  class Buf : public std::streambuf {
   public:
    Buf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

   protected:
    int overflow(int c) override {
      if (c == EOF) return !EOF;
      const int ra = a_ != nullptr ? a_->sputc(static_cast<char>(c)) : c;
      const int rb = b_ != nullptr ? b_->sputc(static_cast<char>(c)) : c;
      return ra == EOF || rb == EOF ? EOF : c;
    }
    int sync() override {
      const int ra = a_ != nullptr ? a_->pubsync() : 0;
      const int rb = b_ != nullptr ? b_->pubsync() : 0;
      return ra == 0 && rb == 0 ? 0 : -1;
    }

   private:
    std::streambuf* a_;
    std::streambuf* b_;
  };

 public:
  TeeStream(std::ostream& a, std::ostream& b)
      : std::ostream(&buf_), buf_(a.rdbuf(), b.rdbuf()) {}

 private:
  Buf buf_;
};

inline std::string Stem(const std::string& path) {
  return fs::path(path).stem().string();
}

inline std::string ResolveAgainst(const std::string& anchor_file,
                                  const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(anchor_file).parent_path() / p).string();
}

// Embeddings for a set of utterance paths, computed in parallel eval mode.
inline std::unordered_map<std::string, std::vector<float>> EmbedPaths(
    Model<float>* model, const std::vector<std::string>& resolved_paths,
    int workers) {
  std::vector<std::string> unique = resolved_paths;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  std::vector<std::vector<float>> embs(unique.size());
  ParallelFor(unique.size(), workers, [&](std::size_t i) {
    embs[i] = EmbedUtterance(model, Ingest(unique[i]));
  });
  std::unordered_map<std::string, std::vector<float>> out;
  for (std::size_t i = 0; i < unique.size(); ++i)
    out.emplace(unique[i], std::move(embs[i]));
  return out;
}

struct TrainFlags {
  std::string config;
  double lr = -1.0;
  int epochs = -1;
  int batch_size = -1;
  double margin = -1.0;
  double lambda = -1.0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string pair_strategy;
  double momentum = -1.0;
  int speakers_per_batch = -1;
  int crops_per_speaker = -1;
  int workers = -1;
};

// Resolution order: built-in defaults, then config file, then explicit
// flags.
inline TrainConfig ResolveTrainConfig(const TrainFlags& f,
                                      const std::string& phase) {
  TrainConfig cfg;
  cfg.phase = phase;
  if (!f.config.empty()) {
    cfg = ParseTrainConfig(f.config, cfg);
    cfg.phase = phase;  // the subcommand, not the file, picks the phase
  }
  if (f.lr >= 0) cfg.lr = f.lr;
  if (f.epochs >= 1) cfg.epochs = f.epochs;
  if (f.batch_size >= 2) cfg.batch_size = f.batch_size;
  if (f.margin > 0) cfg.margin = f.margin;
  if (f.lambda >= 0) cfg.lambda = f.lambda;
  if (f.seed_set) cfg.seed = f.seed;
  if (!f.pair_strategy.empty()) cfg.pair_strategy = f.pair_strategy;
  if (f.momentum >= 0) cfg.momentum = f.momentum;
  if (f.speakers_per_batch >= 2) cfg.speakers_per_batch = f.speakers_per_batch;
  if (f.crops_per_speaker >= 2) cfg.crops_per_speaker = f.crops_per_speaker;
  if (f.workers >= 0) cfg.workers = f.workers;
  cfg.Validate();
  return cfg;
}

inline void AddTrainFlags(CLI::App* cmd, TrainFlags* f, bool siamese) {
  cmd->add_option("--config", f->config, "key=value config file");
  cmd->add_option("--lr", f->lr, "learning rate");
  cmd->add_option("--epochs", f->epochs, "epoch count");
  cmd->add_option("--momentum", f->momentum, "SGD momentum");
  cmd->add_option("--workers", f->workers, "parallel feature workers");
  auto* seed = cmd->add_option("--seed", f->seed, "RNG seed");
  seed->each([f](const std::string&) { f->seed_set = true; });
  if (siamese) {
    cmd->add_option("--margin", f->margin, "contrastive margin M");
    cmd->add_option("--lambda", f->lambda, "weight decay strength");
    cmd->add_option("--pair-strategy", f->pair_strategy,
                    "all | hard-negative");
    cmd->add_option("--speakers-per-batch", f->speakers_per_batch,
                    "speakers per siamese batch");
    cmd->add_option("--crops-per-speaker", f->crops_per_speaker,
                    "crops per speaker per batch");
  } else {
    cmd->add_option("--batch-size", f->batch_size, "batch size");
  }
}

// ---------- subcommands ----------

inline int RunSynthFixture(const std::string& out, int speakers,
                           int utterances, int heldout, double duration,
                           std::uint64_t seed) {
  SynthFixtureOptions opt;
  opt.n_speakers = speakers;
  opt.n_utterances = utterances;
  opt.heldout = heldout;
  opt.duration_s = duration;
  opt.seed = seed;
  const SynthFixture fx = GenerateSynthFixture(out, opt);
  std::cout << "wrote " << speakers * utterances << " utterances under "
            << fx.dir << "\n";
  PrintRunSummary("synth-fixture", seed,
                  {fx.all_manifest, fx.train_manifest});
  return 0;
}

inline int RunExtract(const std::string& manifest_path, const std::string& out,
                      std::int64_t offset, int workers) {
  const DatasetManifest manifest = LoadManifest(manifest_path);
  fs::create_directories(out);
  ParallelFor(manifest.entries.size(), workers, [&](std::size_t i) {
    const AudioClip clip =
        Ingest(manifest.Resolve(manifest.entries[i].path));
    const FeatureMap map = ComputeFeatureMap(Crop1s(clip, offset));
    char name[64];
    std::snprintf(name, sizeof(name), "%05zu_%s.feat", i,
                  Stem(manifest.entries[i].path).c_str());
    WriteFeatureDump((fs::path(out) / name).string(), map);
  });
  std::cout << "extracted " << manifest.entries.size() << " feature maps to "
            << out << "\n";
  PrintRunSummary("extract", 0, {manifest_path});
  return 0;
}

inline int RunTrainSoftmax(const std::string& manifest_path,
                           const std::string& out, const TrainFlags& flags,
                           const std::string& model_name, int embedding_dim,
                           const std::string& log_path) {
  const TrainConfig cfg = ResolveTrainConfig(flags, "softmax");
  const DatasetManifest manifest = LoadManifest(manifest_path);
  ClipStore store(manifest, cfg.workers);
  ModelSpec spec =
      ModelSpec::Named(model_name, manifest.NumSpeakers(), embedding_dim);
  Model<float> model(spec);
  model.Init(cfg.seed, InitKind::kHeNormal);

  std::ofstream log_file(log_path.empty() ? out + ".log" : log_path);
  TeeStream log(std::cout, log_file);
  TrainResult res = PretrainSoftmax(&model, store, cfg, &log);
  SaveCheckpoint(out, model, res.meta);
  PrintRunSummary("train-softmax", cfg.seed, {manifest_path});
  return 0;
}

inline int RunTrainSiamese(const std::string& ckpt_in,
                           const std::string& manifest_path,
                           const std::string& out, const TrainFlags& flags,
                           const std::string& log_path) {
  const TrainConfig cfg = ResolveTrainConfig(flags, "siamese");
  CheckpointMeta in_meta;
  Model<float> model = LoadCheckpoint(ckpt_in, &in_meta);
  const DatasetManifest manifest = LoadManifest(manifest_path);
  ClipStore store(manifest, cfg.workers);

  std::ofstream log_file(log_path.empty() ? out + ".log" : log_path);
  TeeStream log(std::cout, log_file);
  TrainResult res = FinetuneSiamese(&model, store, cfg, &log);
  SaveCheckpoint(out, model, res.meta);
  PrintRunSummary("train-siamese", cfg.seed, {ckpt_in, manifest_path});
  return 0;
}

inline int RunEnroll(const std::string& ckpt, const std::string& manifest_path,
                     const std::string& out, int workers) {
  Model<float> model = LoadCheckpoint(ckpt);
  const DatasetManifest manifest = LoadManifest(manifest_path);
  std::vector<std::string> resolved;
  resolved.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries)
    resolved.push_back(manifest.Resolve(e.path));
  const auto embs = EmbedPaths(&model, resolved, workers);

  std::map<std::string, std::vector<std::vector<float>>> per_speaker;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    per_speaker[manifest.entries[i].speaker_id].push_back(
        embs.at(resolved[i]));
  std::vector<SpeakerModel> models;
  models.reserve(per_speaker.size());
  for (const auto& [speaker, vecs] : per_speaker)
    models.push_back(EnrollSpeaker(speaker, vecs));
  SaveSpeakerModels(out, models);
  std::cout << "enrolled " << models.size() << " speakers to " << out << "\n";
  PrintRunSummary("enroll", 0, {ckpt, manifest_path});
  return 0;
}

inline int RunTrials(const std::string& manifest_path, std::int64_t genuine,
                     std::int64_t impostor, std::uint64_t seed,
                     const std::string& out) {
  const DatasetManifest manifest = LoadManifest(manifest_path);
  const TrialList list = GenerateTrials(manifest, genuine, impostor, seed);
  SaveTrials(out, list);
  std::cout << "wrote " << list.trials.size() << " trials to " << out << "\n";
  PrintRunSummary("trials", seed, {manifest_path});
  return 0;
}

inline int RunScore(const std::string& ckpt, const std::string& trials_path,
                    const std::string& out, const std::string& models_path,
                    int workers) {
  Model<float> model = LoadCheckpoint(ckpt);
  const TrialList trials = LoadTrials(trials_path);

  std::map<std::string, SpeakerModel> speaker_models;
  if (!models_path.empty())
    for (auto& m : LoadSpeakerModels(models_path))
      speaker_models.emplace(m.speaker_id, std::move(m));

  std::vector<std::string> paths;
  for (const auto& t : trials.trials) {
    paths.push_back(ResolveAgainst(trials_path, t.a));
    if (speaker_models.find(t.b) == speaker_models.end())
      paths.push_back(ResolveAgainst(trials_path, t.b));
  }
  const auto embs = EmbedPaths(&model, paths, workers);

  std::vector<ScoredTrial> scores;
  scores.reserve(trials.trials.size());
  for (const auto& t : trials.trials) {
    const auto& ea = embs.at(ResolveAgainst(trials_path, t.a));
    double score = 0.0;
    const auto it = speaker_models.find(t.b);
    if (it != speaker_models.end()) {
      score = CosineScore(it->second, ea);
    } else {
      const auto& eb = embs.at(ResolveAgainst(trials_path, t.b));
      // both sides unit-normalized, so the dot product is the cosine
      double dot = 0.0;
      for (std::size_t k = 0; k < ea.size(); ++k)
        dot += static_cast<double>(ea[k]) * eb[k];
      score = dot;
    }
    scores.push_back({t.label, score});
  }
  SaveScores(out, scores);
  std::cout << "scored " << scores.size() << " trials to " << out << "\n";
  PrintRunSummary("score", 0, {ckpt, trials_path, models_path});
  return 0;
}

inline int RunEer(const std::string& scores_path, const std::string& report,
                  const std::string& curve) {
  const auto scored = LoadScores(scores_path);
  std::vector<double> genuine, impostor;
  for (const auto& s : scored)
    (s.label == 1 ? genuine : impostor).push_back(s.score);
  const EerReport rep = ComputeEer(genuine, impostor);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "EER %.4f", rep.eer);
  std::cout << buf << "\n";
  if (!report.empty()) SaveEerReport(report, rep);
  if (!curve.empty()) SaveEerCurve(curve, rep);
  PrintRunSummary("eer", 0, {scores_path});
  return 0;
}

inline Tensor<double> ManifestBaselineFrames(const DatasetManifest& manifest,
                                             int workers,
                                             std::vector<Tensor<double>>*
                                                 per_utt = nullptr) {
  std::vector<Tensor<double>> frames(manifest.entries.size());
  ParallelFor(manifest.entries.size(), workers, [&](std::size_t i) {
    frames[i] = BaselineFrames(Ingest(manifest.Resolve(
        manifest.entries[i].path)));
  });
  Tensor<double> all = ConcatFrames(frames);
  if (per_utt != nullptr) *per_utt = std::move(frames);
  return all;
}

inline int RunUbmTrain(const std::string& manifest_path,
                       const std::string& out, int mixtures, int iters,
                       std::uint64_t seed, int workers) {
  const DatasetManifest manifest = LoadManifest(manifest_path);
  const Tensor<double> frames = ManifestBaselineFrames(manifest, workers);
  const UbmTrainResult res = TrainUbm(frames, mixtures, iters, seed);
  SaveGmm(out, res.gmm);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "ubm K=%d frames=%d final_ll %.6f",
                res.gmm.K, frames.dim(0), res.ll_trace.back());
  std::cout << buf << "\n";
  if (res.reseed_events > 0)
    std::cout << "reseeded " << res.reseed_events
              << " collapsed components\n";
  PrintRunSummary("ubm-train", seed, {manifest_path});
  return 0;
}

inline int RunUbmAdapt(const std::string& ubm_path,
                       const std::string& manifest_path,
                       const std::string& out, double relevance,
                       int workers) {
  const DiagGmm ubm = LoadGmm(ubm_path);
  const DatasetManifest manifest = LoadManifest(manifest_path);
  std::vector<Tensor<double>> per_utt;
  ManifestBaselineFrames(manifest, workers, &per_utt);
  std::map<std::string, std::vector<Tensor<double>>> per_speaker;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    per_speaker[manifest.entries[i].speaker_id].push_back(
        std::move(per_utt[i]));
  fs::create_directories(out);
  for (const auto& [speaker, parts] : per_speaker) {
    const DiagGmm adapted = MapAdapt(ubm, ConcatFrames(parts), relevance);
    SaveGmm((fs::path(out) / (speaker + ".gmm")).string(), adapted);
  }
  std::cout << "adapted " << per_speaker.size() << " speaker models to "
            << out << "\n";
  PrintRunSummary("ubm-adapt", 0, {ubm_path, manifest_path});
  return 0;
}

inline int RunUbmScore(const std::string& ubm_path,
                       const std::string& trials_path, const std::string& out,
                       const std::string& models_dir, double relevance,
                       int workers) {
  const DiagGmm ubm = LoadGmm(ubm_path);
  const TrialList trials = LoadTrials(trials_path);

  // Frames for every utterance referenced by a path.
  std::vector<std::string> paths;
  for (const auto& t : trials.trials) {
    paths.push_back(ResolveAgainst(trials_path, t.a));
    const bool b_is_model =
        !models_dir.empty() &&
        fs::exists(fs::path(models_dir) / (t.b + ".gmm"));
    if (!b_is_model) paths.push_back(ResolveAgainst(trials_path, t.b));
  }
  std::sort(paths.begin(), paths.end());
  paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
  std::vector<Tensor<double>> frame_list(paths.size());
  ParallelFor(paths.size(), workers, [&](std::size_t i) {
    frame_list[i] = BaselineFrames(Ingest(paths[i]));
  });
  std::unordered_map<std::string, const Tensor<double>*> frames;
  for (std::size_t i = 0; i < paths.size(); ++i)
    frames.emplace(paths[i], &frame_list[i]);

  std::map<std::string, DiagGmm> model_cache;
  auto speaker_model = [&](const std::string& b) -> const DiagGmm& {
    auto it = model_cache.find(b);
    if (it != model_cache.end()) return it->second;
    const fs::path model_file = fs::path(models_dir) / (b + ".gmm");
    DiagGmm m = !models_dir.empty() && fs::exists(model_file)
                    ? LoadGmm(model_file.string())
                    : MapAdapt(ubm, *frames.at(ResolveAgainst(trials_path, b)),
                               relevance);
    return model_cache.emplace(b, std::move(m)).first->second;
  };

  std::vector<ScoredTrial> scores;
  scores.reserve(trials.trials.size());
  for (const auto& t : trials.trials) {
    const DiagGmm& spk = speaker_model(t.b);
    const double s =
        LlrScore(spk, ubm, *frames.at(ResolveAgainst(trials_path, t.a)));
    scores.push_back({t.label, s});
  }
  SaveScores(out, scores);
  std::cout << "scored " << scores.size() << " trials to " << out << "\n";
  PrintRunSummary("ubm-score", 0, {ubm_path, trials_path});
  return 0;
}

// ---------- dispatch ----------

inline int Run(std::vector<std::string> args) {
  CLI::App app{"verid: speaker verification toolkit"};
  app.require_subcommand(1);

  // synth-fixture
  auto* synth = app.add_subcommand(
      "synth-fixture", "generate the deterministic synthetic dataset");
  std::string synth_out;
  int synth_speakers = 20, synth_utts = 20, synth_heldout = 5;
  double synth_duration = 2.0;
  std::uint64_t synth_seed = 1;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--speakers", synth_speakers, "speaker count");
  synth->add_option("--utterances", synth_utts, "utterances per speaker");
  synth->add_option("--heldout", synth_heldout, "held-out per speaker");
  synth->add_option("--duration", synth_duration, "seconds per utterance");
  synth->add_option("--seed", synth_seed, "RNG seed");

  // extract
  auto* extract = app.add_subcommand("extract",
                                     "dump feature maps for a manifest");
  std::string ex_manifest, ex_out;
  std::int64_t ex_offset = 0;
  int ex_workers = 0;
  extract->add_option("--manifest", ex_manifest, "dataset manifest")
      ->required();
  extract->add_option("--out", ex_out, "output directory")->required();
  extract->add_option("--offset", ex_offset, "crop offset in samples");
  extract->add_option("--workers", ex_workers, "parallel workers");

  // train-softmax
  auto* tsoft = app.add_subcommand("train-softmax",
                                   "phase one: speaker classifier");
  std::string ts_manifest, ts_out, ts_model = "paper", ts_log;
  int ts_embedding_dim = 0;
  TrainFlags ts_flags;
  tsoft->add_option("--manifest", ts_manifest, "training manifest")
      ->required();
  tsoft->add_option("--out", ts_out, "checkpoint output path")->required();
  tsoft->add_option("--model", ts_model, "model spec: paper | desk");
  tsoft->add_option("--embedding-dim", ts_embedding_dim,
                    "fc-2 width (0 = spec default)");
  tsoft->add_option("--log", ts_log, "training log path");
  AddTrainFlags(tsoft, &ts_flags, /*siamese=*/false);

  // train-siamese
  auto* tsiam = app.add_subcommand("train-siamese",
                                   "phase two: contrastive fine-tuning");
  std::string si_ckpt, si_manifest, si_out, si_log;
  TrainFlags si_flags;
  tsiam->add_option("--checkpoint", si_ckpt, "pretrained checkpoint")
      ->required();
  tsiam->add_option("--manifest", si_manifest, "training manifest")
      ->required();
  tsiam->add_option("--out", si_out, "checkpoint output path")->required();
  tsiam->add_option("--log", si_log, "training log path");
  AddTrainFlags(tsiam, &si_flags, /*siamese=*/true);

  // enroll
  auto* enroll = app.add_subcommand("enroll", "build speaker models");
  std::string en_ckpt, en_manifest, en_out;
  int en_workers = 0;
  enroll->add_option("--checkpoint", en_ckpt, "model checkpoint")->required();
  enroll->add_option("--manifest", en_manifest, "enrollment manifest")
      ->required();
  enroll->add_option("--out", en_out, "speaker models output")->required();
  enroll->add_option("--workers", en_workers, "parallel workers");

  // trials
  auto* trials = app.add_subcommand("trials", "sample a labeled trial list");
  std::string tr_manifest, tr_out;
  std::int64_t tr_genuine = 0, tr_impostor = 0;
  std::uint64_t tr_seed = 0;
  trials->add_option("--manifest", tr_manifest, "dataset manifest")
      ->required();
  trials->add_option("--genuine", tr_genuine, "genuine trial count")
      ->required();
  trials->add_option("--impostor", tr_impostor, "impostor trial count")
      ->required();
  trials->add_option("--seed", tr_seed, "RNG seed");
  trials->add_option("--out", tr_out, "trial list output")->required();

  // score
  auto* score = app.add_subcommand("score", "cosine-score a trial list");
  std::string sc_ckpt, sc_trials, sc_out, sc_models;
  int sc_workers = 0;
  score->add_option("--checkpoint", sc_ckpt, "model checkpoint")->required();
  score->add_option("--trials", sc_trials, "trial list")->required();
  score->add_option("--out", sc_out, "score file output")->required();
  score->add_option("--models", sc_models,
                    "enrolled speaker models (b-side ids)");
  score->add_option("--workers", sc_workers, "parallel workers");

  // eer
  auto* eer = app.add_subcommand("eer", "equal error rate of a score file");
  std::string ee_scores, ee_report, ee_curve;
  eer->add_option("--scores", ee_scores, "score file")->required();
  eer->add_option("--out", ee_report, "report output");
  eer->add_option("--curve", ee_curve, "threshold/far/frr curve output");

  // ubm-train
  auto* ubmt = app.add_subcommand("ubm-train",
                                  "train the GMM-UBM baseline background");
  std::string ut_manifest, ut_out;
  int ut_mixtures = 64, ut_iters = 20, ut_workers = 0;
  std::uint64_t ut_seed = 0;
  ubmt->add_option("--manifest", ut_manifest, "training manifest")
      ->required();
  ubmt->add_option("--out", ut_out, "GMM output path")->required();
  ubmt->add_option("--mixtures", ut_mixtures, "mixture count");
  ubmt->add_option("--iters", ut_iters, "EM iterations");
  ubmt->add_option("--seed", ut_seed, "RNG seed");
  ubmt->add_option("--workers", ut_workers, "parallel workers");

  // ubm-adapt
  auto* ubma = app.add_subcommand("ubm-adapt",
                                  "MAP-adapt per-speaker models from a UBM");
  std::string ua_ubm, ua_manifest, ua_out;
  double ua_relevance = 16.0;
  int ua_workers = 0;
  ubma->add_option("--ubm", ua_ubm, "trained UBM")->required();
  ubma->add_option("--manifest", ua_manifest, "enrollment manifest")
      ->required();
  ubma->add_option("--out", ua_out, "output directory")->required();
  ubma->add_option("--relevance", ua_relevance, "MAP relevance factor");
  ubma->add_option("--workers", ua_workers, "parallel workers");

  // ubm-score
  auto* ubms = app.add_subcommand("ubm-score",
                                  "LLR-score a trial list with the baseline");
  std::string us_ubm, us_trials, us_out, us_models;
  double us_relevance = 16.0;
  int us_workers = 0;
  ubms->add_option("--ubm", us_ubm, "trained UBM")->required();
  ubms->add_option("--trials", us_trials, "trial list")->required();
  ubms->add_option("--out", us_out, "score file output")->required();
  ubms->add_option("--models", us_models, "directory of adapted models");
  ubms->add_option("--relevance", us_relevance,
                   "relevance for on-the-fly adaptation");
  ubms->add_option("--workers", us_workers, "parallel workers");

  std::reverse(args.begin(), args.end());  // CLI11 consumes back-to-front
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    std::cerr << "run with --help for usage\n";
    return 1;
  }

  try {
    if (synth->parsed())
      return RunSynthFixture(synth_out, synth_speakers, synth_utts,
                             synth_heldout, synth_duration, synth_seed);
    if (extract->parsed())
      return RunExtract(ex_manifest, ex_out, ex_offset, ex_workers);
    if (tsoft->parsed())
      return RunTrainSoftmax(ts_manifest, ts_out, ts_flags, ts_model,
                             ts_embedding_dim, ts_log);
    if (tsiam->parsed())
      return RunTrainSiamese(si_ckpt, si_manifest, si_out, si_flags, si_log);
    if (enroll->parsed())
      return RunEnroll(en_ckpt, en_manifest, en_out, en_workers);
    if (trials->parsed())
      return RunTrials(tr_manifest, tr_genuine, tr_impostor, tr_seed, tr_out);
    if (score->parsed())
      return RunScore(sc_ckpt, sc_trials, sc_out, sc_models, sc_workers);
    if (eer->parsed()) return RunEer(ee_scores, ee_report, ee_curve);
    if (ubmt->parsed())
      return RunUbmTrain(ut_manifest, ut_out, ut_mixtures, ut_iters, ut_seed,
                         ut_workers);
    if (ubma->parsed())
      return RunUbmAdapt(ua_ubm, ua_manifest, ua_out, ua_relevance,
                         ua_workers);
    if (ubms->parsed())
      return RunUbmScore(us_ubm, us_trials, us_out, us_models, us_relevance,
                         us_workers);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << "no subcommand\n";
  return 1;
}

inline int Run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return Run(std::move(args));
}

}  // namespace verid::cli

#endif  // VERID_CLI_HPP_
