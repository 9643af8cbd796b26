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

#ifndef VERID_CHECKPOINT_HPP_
#define VERID_CHECKPOINT_HPP_

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "verid/common.hpp"
#include "verid/dsp.hpp"
#include "verid/model.hpp"

namespace verid {

struct TrainHistoryEntry {
  int epoch = 0;
  double loss = 0.0;
  double acc = 0.0;
};

struct CheckpointMeta {
  std::string phase = "init";  // init | softmax | siamese
  std::uint64_t seed = 0;
  int epoch = 0;
  std::vector<TrainHistoryEntry> history;
};

namespace ckpt_detail {

inline std::string FmtDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace ckpt_detail

// Text header describing the spec and every tensor, then raw float32
// little-endian blobs in declared order.
inline void SaveCheckpoint(const std::string& path, Model<float>& model,
                           const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  const ModelSpec& spec = model.spec();
  out << "SVCK1\n";
  out << "phase " << meta.phase << "\n";
  out << "seed " << meta.seed << "\n";
  out << "epoch " << meta.epoch << "\n";
  out << "spec name " << spec.name << "\n";
  out << "spec input " << spec.in_channels << " " << spec.in_h << " "
      << spec.in_w << "\n";
  for (const auto& c : spec.convs)
    out << "spec conv " << c.out_channels << " " << c.kernel_h << " "
        << c.kernel_w << " " << c.stride_h << " " << c.stride_w << "\n";
  out << "spec fc1 " << spec.fc1_width << "\n";
  out << "spec embedding " << spec.embedding_dim << "\n";
  out << "spec classes " << spec.n_classes << "\n";
  for (const auto& h : meta.history)
    out << "history " << h.epoch << " " << ckpt_detail::FmtDouble(h.loss)
        << " " << ckpt_detail::FmtDouble(h.acc) << "\n";
  auto tensors = model.NamedTensors();
  for (const auto& ref : tensors) {
    out << "tensor " << ref.name << " " << ref.tensor->ndim();
    for (int d : ref.tensor->shape) out << " " << d;
    out << "\n";
  }
  out << "end\n";
  for (const auto& ref : tensors)
    for (float v : ref.tensor->data) WriteFloatLe(out, v);
  if (!out) throw IoError("short write to checkpoint " + path);
}

// Rebuilds the model from the header and validates each declared tensor
// against the model it implies before reading any blob.
inline Model<float> LoadCheckpoint(const std::string& path,
                                   CheckpointMeta* meta = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::string line;
  if (!std::getline(in, line) || line != "SVCK1")
    throw ParseError("bad checkpoint magic in " + path);

  CheckpointMeta m;
  ModelSpec spec;
  spec.convs.clear();
  struct TensorDecl {
    std::string name;
    std::vector<int> shape;
  };
  std::vector<TensorDecl> decls;

  bool saw_end = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      saw_end = true;
      break;
    }
    std::istringstream is(line);
    std::string key;
    is >> key;
    if (key == "phase") {
      is >> m.phase;
    } else if (key == "seed") {
      is >> m.seed;
    } else if (key == "epoch") {
      is >> m.epoch;
    } else if (key == "spec") {
      std::string what;
      is >> what;
      if (what == "name") {
        is >> spec.name;
      } else if (what == "input") {
        is >> spec.in_channels >> spec.in_h >> spec.in_w;
      } else if (what == "conv") {
        ConvLayerSpec c;
        is >> c.out_channels >> c.kernel_h >> c.kernel_w >> c.stride_h >>
            c.stride_w;
        spec.convs.push_back(c);
      } else if (what == "fc1") {
        is >> spec.fc1_width;
      } else if (what == "embedding") {
        is >> spec.embedding_dim;
      } else if (what == "classes") {
        is >> spec.n_classes;
      } else {
        throw ParseError("unknown spec field '" + what + "' in " + path);
      }
    } else if (key == "history") {
      TrainHistoryEntry h;
      is >> h.epoch >> h.loss >> h.acc;
      m.history.push_back(h);
    } else if (key == "tensor") {
      TensorDecl d;
      int ndim = 0;
      is >> d.name >> ndim;
      d.shape.resize(ndim);
      for (int& v : d.shape) is >> v;
      decls.push_back(std::move(d));
    } else {
      throw ParseError("unknown checkpoint field '" + key + "' in " + path);
    }
    if (is.fail())
      throw ParseError("malformed checkpoint line '" + line + "' in " + path);
  }
  if (!saw_end) throw ParseError("checkpoint header missing 'end' in " + path);

  Model<float> model(spec);
  auto tensors = model.NamedTensors();
  if (tensors.size() != decls.size())
    throw ParseError("checkpoint declares " + std::to_string(decls.size()) +
                     " tensors, spec implies " +
                     std::to_string(tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (decls[i].name != tensors[i].name)
      throw ParseError("checkpoint tensor '" + decls[i].name +
                       "' where '" + tensors[i].name + "' expected");
    if (decls[i].shape != tensors[i].tensor->shape)
      throw ParseError("checkpoint tensor '" + decls[i].name +
                       "' has mismatched shape");
  }
  for (auto& ref : tensors) {
    for (auto& v : ref.tensor->data) v = ReadFloatLe(in);
    if (!in) throw ParseError("truncated checkpoint blob in " + path);
  }
  if (meta != nullptr) *meta = m;
  return model;
}

}  // namespace verid

#endif  // VERID_CHECKPOINT_HPP_
