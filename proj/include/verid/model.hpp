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

#ifndef VERID_MODEL_HPP_
#define VERID_MODEL_HPP_

#include <string>
#include <vector>

#include "verid/common.hpp"
#include "verid/layers.hpp"
#include "verid/rng.hpp"
#include "verid/tensor.hpp"

namespace verid {

struct ConvLayerSpec {
  int out_channels = 0;
  int kernel_h = 0, kernel_w = 0;
  int stride_h = 1, stride_w = 1;
};

// Conv stack + fc-1 + fc-2 (embedding) + fc-3 (classifier logits), with a
// batch-norm/ReLU pair after every conv and a ReLU after fc-1 only.
struct ModelSpec {
  std::string name = "custom";
  int in_channels = 3, in_h = 40, in_w = 100;
  std::vector<ConvLayerSpec> convs;
  int fc1_width = 1024;
  int embedding_dim = 256;
  int n_classes = 0;

  // The verification architecture: five convs without pooling, strides only
  // in the first layer.
  static ModelSpec Paper(int n_classes, int embedding_dim = 256) {
    ModelSpec s;
    s.name = "paper";
    s.convs = {{32, 7, 7, 2, 2},
               {64, 5, 5, 1, 1},
               {128, 3, 3, 1, 1},
               {256, 3, 3, 1, 1},
               {256, 3, 3, 1, 1}};
    s.fc1_width = 1024;
    s.embedding_dim = embedding_dim;
    s.n_classes = n_classes;
    return s;
  }

  // Same topology at a fraction of the width; trains in seconds on a CPU,
  // which is what the bundled synthetic fixtures need.
  static ModelSpec Desk(int n_classes, int embedding_dim = 64) {
    ModelSpec s;
    s.name = "desk";
    s.convs = {{4, 7, 7, 2, 2},
               {8, 5, 5, 1, 1},
               {8, 3, 3, 1, 1},
               {16, 3, 3, 1, 1},
               {16, 3, 3, 1, 1}};
    s.fc1_width = 128;
    s.embedding_dim = embedding_dim;
    s.n_classes = n_classes;
    return s;
  }

  static ModelSpec Named(const std::string& name, int n_classes,
                         int embedding_dim) {
    if (name == "paper")
      return Paper(n_classes, embedding_dim > 0 ? embedding_dim : 256);
    if (name == "desk")
      return Desk(n_classes, embedding_dim > 0 ? embedding_dim : 64);
    throw BadConfig("unknown model spec '" + name + "'");
  }

  // Output spatial sizes of each conv, for validation and reporting.
  std::vector<std::vector<int>> ConvChainShapes() const {
    std::vector<std::vector<int>> out;
    int c = in_channels, h = in_h, w = in_w;
    for (const auto& conv : convs) {
      const auto s = ConvOutputShape(h, w, conv.kernel_h, conv.kernel_w,
                                     conv.stride_h, conv.stride_w);
      c = conv.out_channels;
      h = s.out_h;
      w = s.out_w;
      out.push_back({c, h, w});
    }
    return out;
  }

  int FlattenedWidth() const {
    const auto shapes = ConvChainShapes();
    if (shapes.empty()) throw SpecMismatch("model spec has no conv layers");
    const auto& last = shapes.back();
    return last[0] * last[1] * last[2];
  }

  bool operator==(const ModelSpec& o) const {
    auto key = [](const ModelSpec& s) {
      std::vector<int> k = {s.in_channels, s.in_h, s.in_w, s.fc1_width,
                            s.embedding_dim, s.n_classes};
      for (const auto& c : s.convs) {
        k.push_back(c.out_channels);
        k.push_back(c.kernel_h);
        k.push_back(c.kernel_w);
        k.push_back(c.stride_h);
        k.push_back(c.stride_w);
      }
      return k;
    };
    return key(*this) == key(o);
  }
};

enum class Head { kClassifier, kEmbedding };
enum class InitKind { kHeNormal, kZeros };

template <class T>
struct ParamRef {
  std::string name;
  Tensor<T>* tensor;
  Tensor<T>* grad;  // null for running statistics
  bool is_weight;   // participates in the ||W||^2 term
};

template <class T>
class Model {
 public:
  explicit Model(ModelSpec spec) : spec_(std::move(spec)) {
    if (spec_.n_classes <= 0) throw SpecMismatch("n_classes must be positive");
    const auto chain = spec_.ConvChainShapes();
    int in_c = spec_.in_channels;
    for (const auto& conv : spec_.convs) {
      LayerParams<T> p;
      p.kind = LayerKind::kConv;
      p.weight = Tensor<T>({conv.out_channels, in_c, conv.kernel_h,
                            conv.kernel_w});
      p.bias = Tensor<T>({conv.out_channels});
      p.stride_h = conv.stride_h;
      p.stride_w = conv.stride_w;
      conv_.push_back(std::move(p));

      LayerParams<T> bn;
      bn.kind = LayerKind::kBatchNorm;
      bn.gamma = Tensor<T>({conv.out_channels});
      bn.beta = Tensor<T>({conv.out_channels});
      bn.running_mean = Tensor<T>({conv.out_channels});
      bn.running_var = Tensor<T>({conv.out_channels});
      bn_.push_back(std::move(bn));
      in_c = conv.out_channels;
    }
    (void)chain;
    auto make_fc = [](int out, int in) {
      LayerParams<T> p;
      p.kind = LayerKind::kFc;
      p.weight = Tensor<T>({out, in});
      p.bias = Tensor<T>({out});
      return p;
    };
    fc1_ = make_fc(spec_.fc1_width, spec_.FlattenedWidth());
    fc2_ = make_fc(spec_.embedding_dim, spec_.fc1_width);
    fc3_ = make_fc(spec_.n_classes, spec_.embedding_dim);
    AllocGrads();
    Init(0, InitKind::kZeros);
  }

  const ModelSpec& spec() const { return spec_; }

  // Weights ~ N(0, sqrt(2/fan_in)), biases 0, gamma 1, beta 0, running
  // stats (0, 1). Draw order is the parameter enumeration order, so a seed
  // pins every value.
  void Init(std::uint64_t seed, InitKind kind = InitKind::kHeNormal) {
    Rng rng(seed);
    for (auto& p : conv_) {
      const int fan_in = p.weight.dim(1) * p.weight.dim(2) * p.weight.dim(3);
      FillNormal(&p.weight, std::sqrt(2.0 / fan_in), &rng, kind);
      std::fill(p.bias.data.begin(), p.bias.data.end(), T(0));
    }
    for (auto& bn : bn_) {
      std::fill(bn.gamma.data.begin(), bn.gamma.data.end(), T(1));
      std::fill(bn.beta.data.begin(), bn.beta.data.end(), T(0));
      std::fill(bn.running_mean.data.begin(), bn.running_mean.data.end(), T(0));
      std::fill(bn.running_var.data.begin(), bn.running_var.data.end(), T(1));
    }
    for (LayerParams<T>* fc : {&fc1_, &fc2_, &fc3_}) {
      FillNormal(&fc->weight, std::sqrt(2.0 / fc->weight.dim(1)), &rng, kind);
      std::fill(fc->bias.data.begin(), fc->bias.data.end(), T(0));
    }
    ZeroGrads();
  }

  // Runs the conv stack and fc-1/fc-2; the classifier head continues into
  // fc-3 logits, the embedding head stops at the raw fc-2 output. Train mode
  // keeps layer caches so Backward can run.
  Tensor<T> Forward(const Tensor<T>& x, Mode mode, Head head) {
    if (x.ndim() != 4 || x.dim(1) != spec_.in_channels ||
        x.dim(2) != spec_.in_h || x.dim(3) != spec_.in_w)
      throw SpecMismatch("input " + x.ShapeStr() + " does not match spec (" +
                         std::to_string(spec_.in_channels) + "," +
                         std::to_string(spec_.in_h) + "," +
                         std::to_string(spec_.in_w) + ")");
    const bool caching = mode != Mode::kEval;
    const Mode bn_mode = mode == Mode::kTrain ? Mode::kTrain : Mode::kEval;
    const int B = x.dim(0);

    // Eval mode writes no member state (batch-norm running statistics are
    // read-only there too), so concurrent eval forwards on one model are
    // safe.
    Tensor<T> h = x;
    if (caching) {
      conv_cache_.assign(conv_.size(), {});
      bn_cache_.assign(conv_.size(), {});
      relu_cache_.assign(conv_.size(), {});
    }
    for (std::size_t i = 0; i < conv_.size(); ++i) {
      h = ConvForward(h, conv_[i], caching ? &conv_cache_[i] : nullptr);
      h = BatchNormForward(h, bn_[i], bn_mode,
                           caching ? &bn_cache_[i] : nullptr);
      h = ReluForward(h, caching ? &relu_cache_[i] : nullptr);
    }
    if (caching) {
      conv_out_shape_ = h.shape;
      last_head_ = head;
      has_cache_ = true;
    }
    h.shape = {B, spec_.FlattenedWidth()};  // row-major flatten

    h = FcForward(h, fc1_, caching ? &fc1_cache_ : nullptr);
    h = ReluForward(h, caching ? &fc1_relu_cache_ : nullptr);
    Tensor<T> emb = FcForward(h, fc2_, caching ? &fc2_cache_ : nullptr);
    if (head == Head::kEmbedding) return emb;
    return FcForward(emb, fc3_, caching ? &fc3_cache_ : nullptr);
  }

  // Accumulates parameter gradients for the last cached Forward. The
  // embedding head never touches fc-3.
  void Backward(const Tensor<T>& grad_head) {
    if (!has_cache_)
      throw MissingCache("backward without a train-mode forward");
    Tensor<T> g = grad_head;
    if (last_head_ == Head::kClassifier) {
      FcGrads<T> fg = FcBackward(g, fc3_, fc3_cache_);
      Accumulate(&fc3_grads_, fg);
      g = std::move(fg.grad_x);
    }
    {
      FcGrads<T> fg = FcBackward(g, fc2_, fc2_cache_);
      Accumulate(&fc2_grads_, fg);
      g = std::move(fg.grad_x);
    }
    g = ReluBackward(g, fc1_relu_cache_);
    {
      FcGrads<T> fg = FcBackward(g, fc1_, fc1_cache_);
      Accumulate(&fc1_grads_, fg);
      g = std::move(fg.grad_x);
    }
    g.shape = conv_out_shape_;
    for (std::size_t i = conv_.size(); i-- > 0;) {
      g = ReluBackward(g, relu_cache_[i]);
      BatchNormGrads<T> bg = BatchNormBackward(g, bn_[i], bn_cache_[i]);
      for (std::size_t j = 0; j < bg.grad_gamma.data.size(); ++j) {
        bn_grads_[i].gamma.data[j] += bg.grad_gamma.data[j];
        bn_grads_[i].beta.data[j] += bg.grad_beta.data[j];
      }
      g = std::move(bg.grad_x);
      ConvGrads<T> cg = ConvBackward(g, conv_[i], conv_cache_[i]);
      for (std::size_t j = 0; j < cg.grad_w.data.size(); ++j)
        conv_grads_[i].weight.data[j] += cg.grad_w.data[j];
      for (std::size_t j = 0; j < cg.grad_b.data.size(); ++j)
        conv_grads_[i].bias.data[j] += cg.grad_b.data[j];
      g = std::move(cg.grad_x);
    }
  }

  void ZeroGrads() {
    auto zero = [](Tensor<T>& t) {
      std::fill(t.data.begin(), t.data.end(), T(0));
    };
    for (auto& p : conv_grads_) {
      zero(p.weight);
      zero(p.bias);
    }
    for (auto& p : bn_grads_) {
      zero(p.gamma);
      zero(p.beta);
    }
    for (LayerParams<T>* p : {&fc1_grads_, &fc2_grads_, &fc3_grads_}) {
      zero(p->weight);
      zero(p->bias);
    }
  }

  // Trainable parameters with paired gradient storage, in a fixed order.
  std::vector<ParamRef<T>> Parameters() {
    std::vector<ParamRef<T>> refs;
    for (std::size_t i = 0; i < conv_.size(); ++i) {
      const std::string base = "conv" + std::to_string(i + 1);
      refs.push_back({base + ".weight", &conv_[i].weight,
                      &conv_grads_[i].weight, true});
      refs.push_back({base + ".bias", &conv_[i].bias, &conv_grads_[i].bias,
                      false});
      const std::string bn = "bn" + std::to_string(i + 1);
      refs.push_back({bn + ".gamma", &bn_[i].gamma, &bn_grads_[i].gamma,
                      false});
      refs.push_back({bn + ".beta", &bn_[i].beta, &bn_grads_[i].beta, false});
    }
    auto add_fc = [&refs](const std::string& base, LayerParams<T>* p,
                          LayerParams<T>* g) {
      refs.push_back({base + ".weight", &p->weight, &g->weight, true});
      refs.push_back({base + ".bias", &p->bias, &g->bias, false});
    };
    add_fc("fc1", &fc1_, &fc1_grads_);
    add_fc("fc2", &fc2_, &fc2_grads_);
    add_fc("fc3", &fc3_, &fc3_grads_);
    return refs;
  }

  // Everything the checkpoint carries, running statistics included.
  std::vector<ParamRef<T>> NamedTensors() {
    std::vector<ParamRef<T>> refs = Parameters();
    std::vector<ParamRef<T>> all;
    std::size_t trainable = 0;
    for (std::size_t i = 0; i < conv_.size(); ++i) {
      for (int j = 0; j < 4; ++j) all.push_back(refs[trainable++]);
      const std::string bn = "bn" + std::to_string(i + 1);
      all.push_back({bn + ".running_mean", &bn_[i].running_mean, nullptr,
                     false});
      all.push_back({bn + ".running_var", &bn_[i].running_var, nullptr,
                     false});
    }
    while (trainable < refs.size()) all.push_back(refs[trainable++]);
    return all;
  }

  // Sum of squared conv/fc weight entries. The Siamese branches end at
  // fc-2, so fine-tuning excludes the fc-3 matrix from the term.
  T WeightSquaredNorm(bool include_fc3 = true) {
    T acc = T(0);
    for (const auto& ref : Parameters()) {
      if (!ref.is_weight) continue;
      if (!include_fc3 && ref.name == "fc3.weight") continue;
      for (const T v : ref.tensor->data) acc += v * v;
    }
    return acc;
  }

  // d(lambda * sum ||W||^2)/dW = 2 lambda W, applied to weight tensors only.
  void AddWeightDecayGrad(T lambda, bool include_fc3 = true) {
    if (lambda == T(0)) return;
    for (const auto& ref : Parameters()) {
      if (!ref.is_weight) continue;
      if (!include_fc3 && ref.name == "fc3.weight") continue;
      for (std::size_t i = 0; i < ref.tensor->data.size(); ++i)
        ref.grad->data[i] += T(2) * lambda * ref.tensor->data[i];
    }
  }

 private:
  void AllocGrads() {
    conv_grads_.clear();
    bn_grads_.clear();
    for (const auto& p : conv_) {
      LayerParams<T> g;
      g.weight = Tensor<T>(p.weight.shape);
      g.bias = Tensor<T>(p.bias.shape);
      conv_grads_.push_back(std::move(g));
    }
    for (const auto& p : bn_) {
      LayerParams<T> g;
      g.gamma = Tensor<T>(p.gamma.shape);
      g.beta = Tensor<T>(p.beta.shape);
      bn_grads_.push_back(std::move(g));
    }
    auto alloc_fc = [](const LayerParams<T>& p) {
      LayerParams<T> g;
      g.weight = Tensor<T>(p.weight.shape);
      g.bias = Tensor<T>(p.bias.shape);
      return g;
    };
    fc1_grads_ = alloc_fc(fc1_);
    fc2_grads_ = alloc_fc(fc2_);
    fc3_grads_ = alloc_fc(fc3_);
  }

  static void FillNormal(Tensor<T>* t, double stddev, Rng* rng,
                         InitKind kind) {
    if (kind == InitKind::kZeros) {
      std::fill(t->data.begin(), t->data.end(), T(0));
      return;
    }
    for (auto& v : t->data) v = static_cast<T>(rng->Normal(0.0, stddev));
  }

  static void Accumulate(LayerParams<T>* grads, const FcGrads<T>& g) {
    for (std::size_t i = 0; i < g.grad_w.data.size(); ++i)
      grads->weight.data[i] += g.grad_w.data[i];
    for (std::size_t i = 0; i < g.grad_b.data.size(); ++i)
      grads->bias.data[i] += g.grad_b.data[i];
  }

  ModelSpec spec_;
  std::vector<LayerParams<T>> conv_, bn_;
  LayerParams<T> fc1_, fc2_, fc3_;
  std::vector<LayerParams<T>> conv_grads_, bn_grads_;
  LayerParams<T> fc1_grads_, fc2_grads_, fc3_grads_;

  std::vector<ConvCache<T>> conv_cache_;
  std::vector<BatchNormCache<T>> bn_cache_;
  std::vector<ReluCache<T>> relu_cache_;
  FcCache<T> fc1_cache_, fc2_cache_, fc3_cache_;
  ReluCache<T> fc1_relu_cache_;
  std::vector<int> conv_out_shape_;
  Head last_head_ = Head::kClassifier;
  bool has_cache_ = false;
};

}  // namespace verid

#endif  // VERID_MODEL_HPP_
