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

#include <cmath>
#include <filesystem>
#include <fstream>

#include "verid/gmm.hpp"
#include "verid/rng.hpp"
#include "verid/verification.hpp"

using namespace verid;

namespace {

namespace fs = std::filesystem;

std::string TempDir() {
  const fs::path dir = fs::temp_directory_path() / "verid_test_gmm";
  fs::create_directories(dir);
  return dir.string();
}

// Long-double direct mixture evaluation, the loglik oracle.
double LogLikOracle(const DiagGmm& g, const std::vector<double>& x) {
  long double sum = 0.0L;
  for (int k = 0; k < g.K; ++k) {
    long double logn = 0.0L;
    for (int d = 0; d < g.dim; ++d) {
      const long double var =
          g.variances.data[static_cast<std::size_t>(k) * g.dim + d];
      const long double diff =
          x[d] - g.means.data[static_cast<std::size_t>(k) * g.dim + d];
      logn += -0.5L * (logl(2.0L * M_PIl * var) + diff * diff / var);
    }
    sum += static_cast<long double>(g.weights[k]) * expl(logn);
  }
  return static_cast<double>(logl(sum));
}

DiagGmm MakeGmm(int K, int dim, const std::vector<double>& weights,
                const std::vector<double>& means,
                const std::vector<double>& vars) {
  DiagGmm g;
  g.K = K;
  g.dim = dim;
  g.weights = weights;
  g.means = Tensor<double>({K, dim}, means);
  g.variances = Tensor<double>({K, dim}, vars);
  return g;
}

// 1-D frames from two Gaussian clusters at -5 and +5, sigma 0.3.
Tensor<double> TwoClusterFrames(int per_cluster, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> frames({2 * per_cluster, 1});
  for (int i = 0; i < per_cluster; ++i) {
    frames.data[i] = rng.Normal(-5.0, 0.3);
    frames.data[per_cluster + i] = rng.Normal(5.0, 0.3);
  }
  return frames;
}

}  // namespace

TEST_CASE("gmm log-likelihood") {
  SECTION("standard normal at its mode") {
    const DiagGmm g = MakeGmm(1, 1, {1.0}, {0.0}, {1.0});
    REQUIRE(GmmLogLik(g, {0.0}) ==
            Catch::Approx(-0.5 * std::log(2.0 * M_PI)).margin(1e-12));
  }
  SECTION("well-separated mixture stays within ln 2 of the hit component") {
    const DiagGmm g = MakeGmm(2, 1, {0.5, 0.5}, {-10.0, 10.0}, {1.0, 1.0});
    const DiagGmm solo = MakeGmm(1, 1, {1.0}, {10.0}, {1.0});
    const double mix = GmmLogLik(g, {10.0});
    const double one = GmmLogLik(solo, {10.0});
    REQUIRE(mix <= one + 1e-12);
    REQUIRE(mix >= one - std::log(2.0) - 1e-12);
  }
  SECTION("random mixtures match the direct long-double oracle") {
    Rng rng(501);
    for (int trial = 0; trial < 20; ++trial) {
      const int K = 1 + static_cast<int>(rng.UniformInt(4));
      const int dim = 1 + static_cast<int>(rng.UniformInt(5));
      std::vector<double> w(K), mu(K * dim), var(K * dim);
      double wsum = 0.0;
      for (auto& v : w) {
        v = rng.Uniform(0.1, 1.0);
        wsum += v;
      }
      for (auto& v : w) v /= wsum;
      for (auto& v : mu) v = rng.Uniform(-3.0, 3.0);
      for (auto& v : var) v = rng.Uniform(0.2, 2.0);
      const DiagGmm g = MakeGmm(K, dim, w, mu, var);
      std::vector<double> x(dim);
      for (auto& v : x) v = rng.Uniform(-3.0, 3.0);
      REQUIRE(GmmLogLik(g, x) ==
              Catch::Approx(LogLikOracle(g, x)).margin(1e-10));
    }
  }
}

TEST_CASE("ubm training") {
  SECTION("too few frames is rejected") {
    Tensor<double> frames({15, 1});
    REQUIRE_THROWS_AS(TrainUbm(frames, 2, 5, 1), TooFewFrames);
  }
  SECTION("K=1 recovers the sample mean and variance exactly") {
    Rng rng(503);
    Tensor<double> frames({200, 2});
    for (auto& v : frames.data) v = rng.Normal(1.5, 2.0);
    const UbmTrainResult res = TrainUbm(frames, 1, 1, 7);
    double mean0 = 0.0, var0 = 0.0;
    for (int t = 0; t < 200; ++t) mean0 += frames.data[2 * t];
    mean0 /= 200;
    for (int t = 0; t < 200; ++t) {
      const double d = frames.data[2 * t] - mean0;
      var0 += d * d;
    }
    var0 /= 200;
    REQUIRE(res.gmm.weights[0] == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(res.gmm.means.data[0] == Catch::Approx(mean0).margin(1e-9));
    REQUIRE(res.gmm.variances.data[0] == Catch::Approx(var0).margin(1e-9));
  }
  SECTION("log-likelihood trace is non-decreasing") {
    const Tensor<double> frames = TwoClusterFrames(500, 11);
    const UbmTrainResult res = TrainUbm(frames, 2, 20, 3);
    REQUIRE(res.ll_trace.size() == 21);
    for (std::size_t i = 1; i < res.ll_trace.size(); ++i)
      REQUIRE(res.ll_trace[i] >= res.ll_trace[i - 1] - 1e-8);
  }
  SECTION("two clusters are recovered") {
    for (std::uint64_t seed : {1, 2, 3}) {
      const Tensor<double> frames = TwoClusterFrames(500, 100 + seed);
      const UbmTrainResult res = TrainUbm(frames, 2, 20, seed);
      double lo = res.gmm.means.data[0], hi = res.gmm.means.data[1];
      double wlo = res.gmm.weights[0], whi = res.gmm.weights[1];
      if (lo > hi) {
        std::swap(lo, hi);
        std::swap(wlo, whi);
      }
      REQUIRE(lo == Catch::Approx(-5.0).margin(0.05));
      REQUIRE(hi == Catch::Approx(5.0).margin(0.05));
      REQUIRE(wlo == Catch::Approx(0.5).margin(0.05));
      REQUIRE(whi == Catch::Approx(0.5).margin(0.05));
    }
  }
  SECTION("weights stay on the simplex and variances above the floor") {
    const Tensor<double> frames = TwoClusterFrames(200, 17);
    const UbmTrainResult res = TrainUbm(frames, 4, 10, 5);
    double sum = 0.0;
    for (double w : res.gmm.weights) {
      REQUIRE(w >= 0.0);
      sum += w;
    }
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
    for (double v : res.gmm.variances.data) REQUIRE(v >= kVarianceFloor);
  }
}

TEST_CASE("map adaptation") {
  const DiagGmm ubm = MakeGmm(2, 1, {0.5, 0.5}, {-5.0, 5.0}, {0.5, 0.5});

  SECTION("frames at the UBM means leave the means in place") {
    Tensor<double> frames({2, 1}, {-5.0, 5.0});
    const DiagGmm adapted = MapAdapt(ubm, frames, 16.0);
    REQUIRE(adapted.means.data[0] == Catch::Approx(-5.0).margin(1e-6));
    REQUIRE(adapted.means.data[1] == Catch::Approx(5.0).margin(1e-6));
  }
  SECTION("infinite relevance keeps the UBM") {
    Tensor<double> frames({4, 1}, {-4.0, -4.5, 4.2, 4.8});
    const DiagGmm adapted = MapAdapt(ubm, frames, 1e12);
    REQUIRE(adapted.means.data[0] == Catch::Approx(-5.0).margin(1e-9));
    REQUIRE(adapted.means.data[1] == Catch::Approx(5.0).margin(1e-9));
  }
  SECTION("single component blends by (T m + r mu) / (T + r)") {
    const DiagGmm solo = MakeGmm(1, 1, {1.0}, {2.0}, {1.0});
    Tensor<double> frames({5, 1}, {1.0, 2.0, 3.0, 4.0, 5.0});  // mean 3
    const double r = 16.0;
    const DiagGmm adapted = MapAdapt(solo, frames, r);
    REQUIRE(adapted.means.data[0] ==
            Catch::Approx((5.0 * 3.0 + r * 2.0) / (5.0 + r)).margin(1e-12));
  }
  SECTION("zero relevance reproduces responsibility-weighted sample means") {
    Rng rng(507);
    Tensor<double> frames({50, 1});
    for (auto& v : frames.data) v = rng.Normal(4.0, 1.0);
    const DiagGmm adapted = MapAdapt(ubm, frames, 0.0);
    // With r = 0, alpha = 1 where n_k > 0; recompute E_k directly.
    const auto consts = gmm_detail::LogConsts(ubm);
    std::vector<double> post(2), n(2, 0.0), e(2, 0.0);
    for (int t = 0; t < 50; ++t) {
      gmm_detail::LogLikFrame(ubm, consts, &frames.data[t], post.data());
      for (int k = 0; k < 2; ++k) {
        n[k] += std::exp(post[k]);
        e[k] += std::exp(post[k]) * frames.data[t];
      }
    }
    for (int k = 0; k < 2; ++k)
      if (n[k] > 0)
        REQUIRE(adapted.means.data[k] ==
                Catch::Approx(e[k] / n[k]).margin(1e-9));
  }
  SECTION("weights and variances are copied from the UBM") {
    Tensor<double> frames({3, 1}, {0.0, 1.0, -1.0});
    const DiagGmm adapted = MapAdapt(ubm, frames, 16.0);
    REQUIRE(adapted.weights == ubm.weights);
    REQUIRE(adapted.variances.data == ubm.variances.data);
  }
}

TEST_CASE("llr scoring") {
  const DiagGmm ubm = MakeGmm(2, 1, {0.5, 0.5}, {-5.0, 5.0}, {0.5, 0.5});

  SECTION("a model scored against itself is exactly zero") {
    Tensor<double> frames({3, 1}, {-5.0, 0.0, 5.0});
    REQUIRE(LlrScore(ubm, ubm, frames) == 0.0);
  }
  SECTION("frames from the adapted side score positive") {
    for (std::uint64_t seed : {21, 22, 23}) {
      Rng rng(seed);
      Tensor<double> enroll({100, 1}), test({100, 1});
      for (auto& v : enroll.data) v = rng.Normal(-4.2, 0.4);
      for (auto& v : test.data) v = rng.Normal(-4.2, 0.4);
      const DiagGmm spk = MapAdapt(ubm, enroll, 16.0);
      REQUIRE(LlrScore(spk, ubm, test) > 0.0);
    }
  }
  SECTION("duplicating the frame set leaves the average unchanged") {
    Rng rng(509);
    Tensor<double> frames({40, 1});
    for (auto& v : frames.data) v = rng.Normal(0.0, 3.0);
    Tensor<double> doubled({80, 1});
    std::copy(frames.data.begin(), frames.data.end(), doubled.data.begin());
    std::copy(frames.data.begin(), frames.data.end(),
              doubled.data.begin() + 40);
    const DiagGmm spk = MakeGmm(2, 1, {0.3, 0.7}, {-1.0, 2.0}, {1.0, 0.8});
    REQUIRE(LlrScore(spk, ubm, doubled) ==
            Catch::Approx(LlrScore(spk, ubm, frames)).margin(1e-12));
  }
}

TEST_CASE("llr scores separate a 2-cluster speaker fixture") {
  // Two synthetic speakers as clusters; UBM on pooled data; each speaker
  // MAP-adapted; verification trials scored by LLR and swept for EER.
  Rng rng(511);
  auto draw = [&rng](double mean, int n) {
    Tensor<double> t({n, 1});
    for (auto& v : t.data) v = rng.Normal(mean, 0.6);
    return t;
  };
  Tensor<double> pooled({400, 1});
  for (int i = 0; i < 200; ++i) {
    pooled.data[i] = rng.Normal(-5.0, 0.6);
    pooled.data[200 + i] = rng.Normal(5.0, 0.6);
  }
  const DiagGmm ubm = TrainUbm(pooled, 2, 10, 1).gmm;
  const DiagGmm spk_a = MapAdapt(ubm, draw(-5.0, 60), 16.0);
  const DiagGmm spk_b = MapAdapt(ubm, draw(5.0, 60), 16.0);

  std::vector<double> genuine, impostor;
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor<double> ta = draw(-5.0, 30);
    const Tensor<double> tb = draw(5.0, 30);
    genuine.push_back(LlrScore(spk_a, ubm, ta));
    genuine.push_back(LlrScore(spk_b, ubm, tb));
    impostor.push_back(LlrScore(spk_a, ubm, tb));
    impostor.push_back(LlrScore(spk_b, ubm, ta));
  }
  REQUIRE(ComputeEer(genuine, impostor).eer < 0.1);
}

TEST_CASE("gmm files round-trip at float32 precision") {
  Rng rng(513);
  std::vector<double> w = {0.25, 0.75};
  std::vector<double> mu(2 * 3), var(2 * 3);
  for (auto& v : mu) v = rng.Normal(0.0, 2.0);
  for (auto& v : var) v = rng.Uniform(0.01, 3.0);
  const DiagGmm g = MakeGmm(2, 3, w, mu, var);
  const std::string path = TempDir() + "/g.gmm";
  SaveGmm(path, g);
  const DiagGmm back = LoadGmm(path);
  REQUIRE(back.K == 2);
  REQUIRE(back.dim == 3);
  for (int k = 0; k < 2; ++k)
    REQUIRE(back.weights[k] == Catch::Approx(w[k]).margin(1e-6));
  for (std::size_t i = 0; i < mu.size(); ++i) {
    REQUIRE(back.means.data[i] ==
            Catch::Approx(mu[i]).epsilon(1e-6).margin(1e-6));
    REQUIRE(back.variances.data[i] >= kVarianceFloor);
  }

  std::ofstream(TempDir() + "/bad.gmm") << "NOTGM\n";
  REQUIRE_THROWS_AS(LoadGmm(TempDir() + "/bad.gmm"), ParseError);
}
