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

#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "grad_check.hpp"
#include "verid/checkpoint.hpp"
#include "verid/layers.hpp"
#include "verid/model.hpp"
#include "verid/rng.hpp"

using namespace verid;
using verid::testing::FiniteDifference;
using verid::testing::MaxRelError;
using verid::testing::Project;

namespace {

Tensor<double> RandomTensor(std::vector<int> shape, Rng* rng,
                            double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data) v = rng->Normal(0.0, scale);
  return t;
}

}  // namespace

TEST_CASE("conv output shapes follow the verification architecture chain") {
  const ModelSpec spec = ModelSpec::Paper(1251);
  const auto chain = spec.ConvChainShapes();
  REQUIRE(chain.size() == 5);
  REQUIRE(chain[0] == std::vector<int>({32, 17, 47}));
  REQUIRE(chain[1] == std::vector<int>({64, 13, 43}));
  REQUIRE(chain[2] == std::vector<int>({128, 11, 41}));
  REQUIRE(chain[3] == std::vector<int>({256, 9, 39}));
  REQUIRE(chain[4] == std::vector<int>({256, 7, 37}));
  REQUIRE(spec.FlattenedWidth() == 256 * 7 * 37);
  REQUIRE(spec.fc1_width == 1024);
  REQUIRE(spec.embedding_dim == 256);
  REQUIRE(spec.n_classes == 1251);
}

TEST_CASE("conv forward basics") {
  SECTION("1x1 identity kernel reproduces the input") {
    LayerParams<double> p;
    p.kind = LayerKind::kConv;
    p.weight = Tensor<double>({1, 1, 1, 1}, {1.0});
    p.bias = Tensor<double>({1});
    Tensor<double> x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    const Tensor<double> y = ConvForward(x, p);
    REQUIRE(y.shape == x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i)
      REQUIRE(y.data[i] == x.data[i]);
  }
  SECTION("all-ones 2x2 kernel computes sliding-window sums") {
    LayerParams<double> p;
    p.kind = LayerKind::kConv;
    p.weight = Tensor<double>({1, 1, 2, 2}, {1, 1, 1, 1});
    p.bias = Tensor<double>({1});
    Tensor<double> x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    const Tensor<double> y = ConvForward(x, p);
    REQUIRE(y.shape == std::vector<int>({1, 1, 2, 2}));
    REQUIRE(y.data == std::vector<double>({12, 16, 24, 28}));
  }
  SECTION("kernel exceeding the input is rejected") {
    LayerParams<double> p;
    p.kind = LayerKind::kConv;
    p.weight = Tensor<double>({1, 1, 4, 4});
    p.bias = Tensor<double>({1});
    Tensor<double> x({1, 1, 3, 3});
    REQUIRE_THROWS_AS(ConvForward(x, p), ShapeMismatch);
  }
  SECTION("channel mismatch is rejected") {
    LayerParams<double> p;
    p.kind = LayerKind::kConv;
    p.weight = Tensor<double>({1, 2, 2, 2});
    p.bias = Tensor<double>({1});
    Tensor<double> x({1, 1, 3, 3});
    REQUIRE_THROWS_AS(ConvForward(x, p), ShapeMismatch);
  }
}

TEST_CASE("conv backward") {
  Rng rng(101);
  LayerParams<double> p;
  p.kind = LayerKind::kConv;
  p.weight = RandomTensor({4, 3, 3, 3}, &rng, 0.5);
  p.bias = RandomTensor({4}, &rng, 0.5);
  p.stride_h = 2;
  p.stride_w = 1;
  Tensor<double> x = RandomTensor({2, 3, 8, 10}, &rng);

  ConvCache<double> cache;
  const Tensor<double> y = ConvForward(x, p, &cache);
  const Tensor<double> r = RandomTensor(y.shape, &rng);
  const ConvGrads<double> g = ConvBackward(r, p, cache);

  SECTION("input gradient matches finite differences") {
    auto objective = [&] { return Project(ConvForward(x, p), r); };
    const Tensor<double> fd = FiniteDifference(&x, objective);
    REQUIRE(MaxRelError(g.grad_x, fd) < 1e-4);
  }
  SECTION("weight gradient matches finite differences") {
    auto objective = [&] { return Project(ConvForward(x, p), r); };
    const Tensor<double> fd = FiniteDifference(&p.weight, objective);
    REQUIRE(MaxRelError(g.grad_w, fd) < 1e-4);
  }
  SECTION("bias gradient is the per-filter sum of grad_out") {
    const int out_c = y.dim(1);
    const std::size_t patch =
        static_cast<std::size_t>(y.dim(2)) * y.dim(3);
    for (int oc = 0; oc < out_c; ++oc) {
      double expect = 0.0;
      for (int b = 0; b < y.dim(0); ++b) {
        const double* row = r.data.data() +
                            (static_cast<std::size_t>(b) * out_c + oc) * patch;
        for (std::size_t i = 0; i < patch; ++i) expect += row[i];
      }
      REQUIRE(g.grad_b.data[oc] == Catch::Approx(expect).margin(1e-12));
    }
  }
  SECTION("zero upstream gradient gives zero gradients") {
    const ConvGrads<double> z = ConvBackward(Tensor<double>(y.shape), p, cache);
    for (double v : z.grad_x.data) REQUIRE(v == 0.0);
    for (double v : z.grad_w.data) REQUIRE(v == 0.0);
    for (double v : z.grad_b.data) REQUIRE(v == 0.0);
  }
  SECTION("backward without a cache is rejected") {
    REQUIRE_THROWS_AS(ConvBackward(r, p, ConvCache<double>{}), MissingCache);
  }
}

TEST_CASE("fc forward and backward") {
  Rng rng(103);
  LayerParams<double> p;
  p.kind = LayerKind::kFc;
  p.weight = RandomTensor({4, 5}, &rng);
  p.bias = RandomTensor({4}, &rng);
  Tensor<double> x = RandomTensor({3, 5}, &rng);

  FcCache<double> cache;
  const Tensor<double> y = FcForward(x, p, &cache);
  REQUIRE(y.shape == std::vector<int>({3, 4}));
  const Tensor<double> r = RandomTensor(y.shape, &rng);
  const FcGrads<double> g = FcBackward(r, p, cache);

  auto objective = [&] { return Project(FcForward(x, p), r); };
  REQUIRE(MaxRelError(g.grad_x, FiniteDifference(&x, objective, 1e-5)) < 1e-6);
  REQUIRE(MaxRelError(g.grad_w, FiniteDifference(&p.weight, objective, 1e-5)) <
          1e-6);
  REQUIRE(MaxRelError(g.grad_b, FiniteDifference(&p.bias, objective, 1e-5)) <
          1e-6);

  REQUIRE_THROWS_AS(FcForward(RandomTensor({3, 6}, &rng), p), ShapeMismatch);
}

TEST_CASE("relu") {
  Tensor<double> x({1, 3}, {-1.0, 0.0, 2.0});
  ReluCache<double> cache;
  const Tensor<double> y = ReluForward(x, &cache);
  REQUIRE(y.data == std::vector<double>({0.0, 0.0, 2.0}));

  Rng rng(107);
  Tensor<double> x2({4, 6});
  for (auto& v : x2.data) {
    do {
      v = rng.Normal();
    } while (std::abs(v) < 0.05);  // keep away from the kink
  }
  ReluCache<double> c2;
  const Tensor<double> y2 = ReluForward(x2, &c2);
  const Tensor<double> r = RandomTensor({4, 6}, &rng);
  const Tensor<double> g = ReluBackward(r, c2);
  auto objective = [&] { return Project(ReluForward(x2), r); };
  REQUIRE(MaxRelError(g, FiniteDifference(&x2, objective, 1e-5)) < 1e-6);
}

TEST_CASE("batchnorm") {
  Rng rng(109);
  const int C = 3;
  LayerParams<double> p;
  p.kind = LayerKind::kBatchNorm;
  p.gamma = Tensor<double>({C}, {1.0, 1.0, 1.0});
  p.beta = Tensor<double>({C});
  p.running_mean = Tensor<double>({C});
  p.running_var = Tensor<double>({C}, {1.0, 1.0, 1.0});

  SECTION("train mode normalizes each channel to mean 0, variance 1") {
    Tensor<double> x = RandomTensor({4, C, 2, 5}, &rng, 3.0);
    LayerParams<double> scratch = p;
    const Tensor<double> y = BatchNormForward(x, scratch, Mode::kTrain);
    const std::size_t plane = 2 * 5;
    for (int c = 0; c < C; ++c) {
      double mean = 0.0, var = 0.0;
      for (int b = 0; b < 4; ++b)
        for (std::size_t i = 0; i < plane; ++i)
          mean += y.data[(static_cast<std::size_t>(b) * C + c) * plane + i];
      mean /= 4 * plane;
      for (int b = 0; b < 4; ++b)
        for (std::size_t i = 0; i < plane; ++i) {
          const double d =
              y.data[(static_cast<std::size_t>(b) * C + c) * plane + i] - mean;
          var += d * d;
        }
      var /= 4 * plane;
      REQUIRE(std::abs(mean) < 1e-6);
      REQUIRE(std::abs(var - 1.0) < 1e-3);  // eps shrinks variance slightly
    }
  }
  SECTION("eval mode with unit running stats divides by sqrt(1+eps)") {
    Tensor<double> x = RandomTensor({2, C, 2, 2}, &rng);
    LayerParams<double> scratch = p;
    const Tensor<double> y = BatchNormForward(x, scratch, Mode::kEval);
    for (std::size_t i = 0; i < x.data.size(); ++i)
      REQUIRE(y.data[i] ==
              Catch::Approx(x.data[i] / std::sqrt(1.0 + kBnEpsilon)));
  }
  SECTION("train-mode backward matches finite differences") {
    Tensor<double> x = RandomTensor({4, C, 2, 5}, &rng);
    LayerParams<double> params = p;
    params.gamma = RandomTensor({C}, &rng, 0.5);
    params.beta = RandomTensor({C}, &rng, 0.5);
    BatchNormCache<double> cache;
    LayerParams<double> scratch = params;
    const Tensor<double> y = BatchNormForward(x, scratch, Mode::kTrain, &cache);
    const Tensor<double> r = RandomTensor(y.shape, &rng);
    const BatchNormGrads<double> g = BatchNormBackward(r, params, cache);

    auto objective = [&] {
      LayerParams<double> tmp = params;
      return Project(BatchNormForward(x, tmp, Mode::kTrain), r);
    };
    REQUIRE(MaxRelError(g.grad_x, FiniteDifference(&x, objective)) < 1e-4);
    REQUIRE(MaxRelError(g.grad_gamma,
                        FiniteDifference(&params.gamma, objective)) < 1e-4);
    REQUIRE(MaxRelError(g.grad_beta,
                        FiniteDifference(&params.beta, objective)) < 1e-4);
  }
  SECTION("frozen-stats backward matches finite differences") {
    Tensor<double> x = RandomTensor({3, C, 2, 4}, &rng);
    LayerParams<double> params = p;
    params.gamma = RandomTensor({C}, &rng, 0.5);
    params.running_mean = RandomTensor({C}, &rng, 0.5);
    params.running_var = Tensor<double>({C}, {0.9, 1.4, 2.0});
    BatchNormCache<double> cache;
    const Tensor<double> y = BatchNormForward(x, params, Mode::kEval, &cache);
    const Tensor<double> r = RandomTensor(y.shape, &rng);
    const BatchNormGrads<double> g = BatchNormBackward(r, params, cache);
    auto objective = [&] {
      return Project(BatchNormForward(x, params, Mode::kEval), r);
    };
    REQUIRE(MaxRelError(g.grad_x, FiniteDifference(&x, objective, 1e-5)) <
            1e-6);
  }
  SECTION("train mode requires batch >= 2") {
    Tensor<double> x = RandomTensor({1, C, 2, 2}, &rng);
    LayerParams<double> scratch = p;
    REQUIRE_THROWS_AS(BatchNormForward(x, scratch, Mode::kTrain),
                      BatchTooSmall);
  }
  SECTION("running statistics blend with momentum 0.9") {
    Tensor<double> x({2, 1, 1, 2}, {1.0, 1.0, 3.0, 3.0});
    LayerParams<double> bn;
    bn.gamma = Tensor<double>({1}, {1.0});
    bn.beta = Tensor<double>({1});
    bn.running_mean = Tensor<double>({1});
    bn.running_var = Tensor<double>({1}, {1.0});
    BatchNormForward(x, bn, Mode::kTrain);
    REQUIRE(bn.running_mean.data[0] == Catch::Approx(0.1 * 2.0));
    REQUIRE(bn.running_var.data[0] == Catch::Approx(0.9 * 1.0 + 0.1 * 1.0));
  }
}

TEST_CASE("sgd with momentum") {
  SECTION("zero learning rate leaves parameters unchanged") {
    Tensor<float> p({2}, {1.0f, -2.0f});
    Tensor<float> g({2}, {3.0f, 4.0f});
    Tensor<float> v({2});
    SgdStep(p, g, v, 0.0f, 0.9f);
    REQUIRE(p.data == std::vector<float>({1.0f, -2.0f}));
  }
  SECTION("plain SGD step") {
    Tensor<float> p({1}, {1.0f});
    Tensor<float> g({1}, {1.0f});
    Tensor<float> v({1});
    SgdStep(p, g, v, 0.1f, 0.0f);
    REQUIRE(p.data[0] == Catch::Approx(0.9f));
  }
  SECTION("momentum accumulates across steps") {
    Tensor<float> p({1}, {0.0f});
    Tensor<float> g({1}, {1.0f});
    Tensor<float> v({1});
    SgdStep(p, g, v, 0.1f, 0.9f);
    REQUIRE(p.data[0] == Catch::Approx(-0.1f));
    SgdStep(p, g, v, 0.1f, 0.9f);
    REQUIRE(p.data[0] == Catch::Approx(-0.29f));
  }
}

TEST_CASE("model forward heads and determinism") {
  ModelSpec spec = ModelSpec::Desk(5);
  Model<float> model(spec);
  model.Init(42, InitKind::kHeNormal);

  Rng rng(113);
  Tensor<float> x({2, 3, 40, 100});
  for (auto& v : x.data) v = static_cast<float>(rng.Normal());

  Tensor<float> logits = model.Forward(x, Mode::kEval, Head::kClassifier);
  REQUIRE(logits.shape == std::vector<int>({2, 5}));
  Tensor<float> emb = model.Forward(x, Mode::kEval, Head::kEmbedding);
  REQUIRE(emb.shape == std::vector<int>({2, spec.embedding_dim}));

  SECTION("eval forward is deterministic") {
    Tensor<float> again = model.Forward(x, Mode::kEval, Head::kEmbedding);
    REQUIRE(std::memcmp(emb.data.data(), again.data.data(),
                        emb.data.size() * sizeof(float)) == 0);
  }
  SECTION("a batch row embeds identically to the same item alone") {
    Tensor<float> solo({1, 3, 40, 100});
    std::copy_n(x.data.begin(), solo.data.size(), solo.data.begin());
    Tensor<float> e1 = model.Forward(solo, Mode::kEval, Head::kEmbedding);
    for (int k = 0; k < spec.embedding_dim; ++k)
      REQUIRE(e1.data[k] == emb.data[k]);
  }
  SECTION("input that does not match the spec is rejected") {
    Tensor<float> bad({1, 3, 40, 99});
    REQUIRE_THROWS_AS(model.Forward(bad, Mode::kEval, Head::kClassifier),
                      SpecMismatch);
  }
}

TEST_CASE("checkpoint round-trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "verid_test_ckpt";
  fs::create_directories(dir);
  const std::string path = (dir / "model.ckpt").string();

  ModelSpec spec = ModelSpec::Desk(7, 32);
  Model<float> model(spec);
  model.Init(9, InitKind::kHeNormal);
  CheckpointMeta meta;
  meta.phase = "softmax";
  meta.seed = 9;
  meta.epoch = 3;
  meta.history = {{1, 2.5, 0.3}, {2, 1.5, 0.6}, {3, 0.75, 0.9}};
  SaveCheckpoint(path, model, meta);

  CheckpointMeta back_meta;
  Model<float> back = LoadCheckpoint(path, &back_meta);
  REQUIRE(back.spec() == spec);
  REQUIRE(back_meta.phase == "softmax");
  REQUIRE(back_meta.seed == 9);
  REQUIRE(back_meta.epoch == 3);
  REQUIRE(back_meta.history.size() == 3);
  REQUIRE(back_meta.history[2].acc == Catch::Approx(0.9));

  auto a = model.NamedTensors();
  auto b = back.NamedTensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].name == b[i].name);
    REQUIRE(a[i].tensor->shape == b[i].tensor->shape);
    REQUIRE(std::memcmp(a[i].tensor->data.data(), b[i].tensor->data.data(),
                        a[i].tensor->data.size() * sizeof(float)) == 0);
  }

  SECTION("same parameters serialize to identical bytes") {
    const std::string path2 = (dir / "model2.ckpt").string();
    SaveCheckpoint(path2, model, meta);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)),
                         std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)),
                         std::istreambuf_iterator<char>());
    REQUIRE(b1 == b2);
  }
  SECTION("bad magic is rejected") {
    const std::string bad = (dir / "bad.ckpt").string();
    std::ofstream(bad) << "NOTCK\n";
    REQUIRE_THROWS_AS(LoadCheckpoint(bad), ParseError);
  }
  SECTION("header/blob shape disagreement is rejected") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    const std::string needle = "spec fc1 128";
    const std::size_t at = bytes.find(needle);
    REQUIRE(at != std::string::npos);
    bytes.replace(at, needle.size(), "spec fc1 964");
    const std::string tampered = (dir / "tampered.ckpt").string();
    std::ofstream(tampered, std::ios::binary) << bytes;
    REQUIRE_THROWS_AS(LoadCheckpoint(tampered), ParseError);
  }
}
