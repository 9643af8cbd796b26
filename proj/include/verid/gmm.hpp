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

#ifndef VERID_GMM_HPP_
#define VERID_GMM_HPP_

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "verid/common.hpp"
#include "verid/dsp.hpp"
#include "verid/rng.hpp"
#include "verid/tensor.hpp"

namespace verid {

inline constexpr double kVarianceFloor = 1e-4;
inline constexpr double kWeightFloor = 1e-8;

// Diagonal-covariance mixture. Weights live on the simplex and variances
// stay at or above the floor after every public operation.
struct DiagGmm {
  int K = 0, dim = 0;
  std::vector<double> weights;  // (K)
  Tensor<double> means;         // (K, dim)
  Tensor<double> variances;     // (K, dim)

  void Check() const {
    double sum = 0.0;
    for (double w : weights) {
      if (w < 0) throw ShapeMismatch("negative mixture weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ShapeMismatch("weights sum to " + std::to_string(sum));
  }
};

namespace gmm_detail {

inline constexpr double kLog2Pi = 1.8378770664093453;

// Per-component log N(x; mu_k, diag sigma_k^2) + log w_k, then log-sum-exp.
// `log_consts` caches log w_k - 1/2 sum_d log(2 pi sigma_kd^2).
inline std::vector<double> LogConsts(const DiagGmm& g) {
  std::vector<double> consts(g.K);
  for (int k = 0; k < g.K; ++k) {
    double acc = std::log(std::max(g.weights[k], 1e-300));
    for (int d = 0; d < g.dim; ++d)
      acc -= 0.5 * (kLog2Pi +
                    std::log(g.variances.data[static_cast<std::size_t>(k) *
                                                  g.dim +
                                              d]));
    consts[k] = acc;
  }
  return consts;
}

inline double LogLikFrame(const DiagGmm& g, const std::vector<double>& consts,
                          const double* x, double* log_post = nullptr) {
  double max_term = -std::numeric_limits<double>::infinity();
  thread_local std::vector<double> terms;
  terms.assign(g.K, 0.0);
  for (int k = 0; k < g.K; ++k) {
    const double* mu = g.means.data.data() + static_cast<std::size_t>(k) * g.dim;
    const double* var =
        g.variances.data.data() + static_cast<std::size_t>(k) * g.dim;
    double q = 0.0;
    for (int d = 0; d < g.dim; ++d) {
      const double diff = x[d] - mu[d];
      q += diff * diff / var[d];
    }
    terms[k] = consts[k] - 0.5 * q;
    max_term = std::max(max_term, terms[k]);
  }
  double sum = 0.0;
  for (int k = 0; k < g.K; ++k) sum += std::exp(terms[k] - max_term);
  const double ll = max_term + std::log(sum);
  if (log_post != nullptr)
    for (int k = 0; k < g.K; ++k) log_post[k] = terms[k] - ll;
  return ll;
}

}  // namespace gmm_detail

inline double GmmLogLik(const DiagGmm& gmm, const double* frame) {
  const auto consts = gmm_detail::LogConsts(gmm);
  return gmm_detail::LogLikFrame(gmm, consts, frame);
}

inline double GmmLogLik(const DiagGmm& gmm, const std::vector<double>& frame) {
  if (static_cast<int>(frame.size()) != gmm.dim)
    throw ShapeMismatch("frame dim vs gmm dim");
  return GmmLogLik(gmm, frame.data());
}

struct UbmTrainResult {
  DiagGmm gmm;
  std::vector<double> ll_trace;  // total LL before each update + final
  int reseed_events = 0;
};

// Seeded k-means++ centers on a frame subsample, then EM with variance
// flooring. Components whose weight collapses are reseeded to a random
// frame and the event is counted.
inline UbmTrainResult TrainUbm(const Tensor<double>& frames, int K,
                               int n_iters, std::uint64_t seed) {
  if (frames.ndim() != 2) throw ShapeMismatch("frames must be (T, dim)");
  const int T = frames.dim(0), D = frames.dim(1);
  if (T < 10 * K)
    throw TooFewFrames("need >= " + std::to_string(10 * K) + " frames for " +
                       std::to_string(K) + " mixtures, got " +
                       std::to_string(T));
  Rng rng(seed);

  // Global diagonal statistics seed the variances and back reseeded
  // components.
  std::vector<double> gmean(D, 0.0), gvar(D, 0.0);
  for (int t = 0; t < T; ++t)
    for (int d = 0; d < D; ++d)
      gmean[d] += frames.data[static_cast<std::size_t>(t) * D + d];
  for (int d = 0; d < D; ++d) gmean[d] /= T;
  for (int t = 0; t < T; ++t)
    for (int d = 0; d < D; ++d) {
      const double diff =
          frames.data[static_cast<std::size_t>(t) * D + d] - gmean[d];
      gvar[d] += diff * diff;
    }
  for (int d = 0; d < D; ++d) gvar[d] = std::max(gvar[d] / T, kVarianceFloor);

  // k-means++ on a subsample.
  const int n_sub = std::min(T, std::max(10 * K, 2048));
  std::vector<int> sub(n_sub);
  if (n_sub == T) {
    for (int i = 0; i < n_sub; ++i) sub[i] = i;
  } else {
    std::vector<int> all(T);
    for (int i = 0; i < T; ++i) all[i] = i;
    for (int i = 0; i < n_sub; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(
                                    rng.UniformInt(all.size() - i));
      std::swap(all[i], all[j]);
      sub[i] = all[i];
    }
  }
  auto frame_at = [&frames, D](int t) {
    return frames.data.data() + static_cast<std::size_t>(t) * D;
  };
  DiagGmm g;
  g.K = K;
  g.dim = D;
  g.weights.assign(K, 1.0 / K);
  g.means = Tensor<double>({K, D});
  g.variances = Tensor<double>({K, D});
  std::vector<double> min_d2(n_sub, std::numeric_limits<double>::infinity());
  int first = sub[static_cast<std::size_t>(rng.UniformInt(n_sub))];
  std::copy_n(frame_at(first), D, g.means.data.begin());
  for (int k = 1; k < K; ++k) {
    double total = 0.0;
    const double* prev =
        g.means.data.data() + static_cast<std::size_t>(k - 1) * D;
    for (int i = 0; i < n_sub; ++i) {
      const double* x = frame_at(sub[i]);
      double d2 = 0.0;
      for (int d = 0; d < D; ++d) {
        const double diff = x[d] - prev[d];
        d2 += diff * diff;
      }
      min_d2[i] = std::min(min_d2[i], d2);
      total += min_d2[i];
    }
    int chosen = sub[0];
    if (total > 0.0) {
      double r = rng.Uniform() * total;
      for (int i = 0; i < n_sub; ++i) {
        r -= min_d2[i];
        if (r <= 0.0) {
          chosen = sub[i];
          break;
        }
      }
    } else {
      chosen = sub[static_cast<std::size_t>(rng.UniformInt(n_sub))];
    }
    std::copy_n(frame_at(chosen), D,
                g.means.data.begin() + static_cast<std::size_t>(k) * D);
  }
  for (int k = 0; k < K; ++k)
    std::copy(gvar.begin(), gvar.end(),
              g.variances.data.begin() + static_cast<std::size_t>(k) * D);

  UbmTrainResult res;

  std::vector<double> post(K);
  Tensor<double> acc_x({K, D}), acc_x2({K, D});
  std::vector<double> acc_n(K);
  for (int iter = 0; iter <= n_iters; ++iter) {
    const auto consts = gmm_detail::LogConsts(g);
    std::fill(acc_n.begin(), acc_n.end(), 0.0);
    std::fill(acc_x.data.begin(), acc_x.data.end(), 0.0);
    std::fill(acc_x2.data.begin(), acc_x2.data.end(), 0.0);
    double total_ll = 0.0;
    for (int t = 0; t < T; ++t) {
      const double* x = frame_at(t);
      total_ll += gmm_detail::LogLikFrame(g, consts, x, post.data());
      for (int k = 0; k < K; ++k) {
        const double gamma = std::exp(post[k]);
        acc_n[k] += gamma;
        double* ax = acc_x.data.data() + static_cast<std::size_t>(k) * D;
        double* ax2 = acc_x2.data.data() + static_cast<std::size_t>(k) * D;
        for (int d = 0; d < D; ++d) {
          ax[d] += gamma * x[d];
          ax2[d] += gamma * x[d] * x[d];
        }
      }
    }
    res.ll_trace.push_back(total_ll);
    if (iter == n_iters) break;

    for (int k = 0; k < K; ++k) {
      const double nk = acc_n[k];
      if (nk / T < kWeightFloor) {
        // Collapsed component: reseed at a random frame with global spread.
        ++res.reseed_events;
        const int t = static_cast<int>(rng.UniformInt(T));
        std::copy_n(frame_at(t), D,
                    g.means.data.begin() + static_cast<std::size_t>(k) * D);
        std::copy(gvar.begin(), gvar.end(),
                  g.variances.data.begin() + static_cast<std::size_t>(k) * D);
        g.weights[k] = 1.0 / T;
        continue;
      }
      g.weights[k] = nk / T;
      double* mu = g.means.data.data() + static_cast<std::size_t>(k) * D;
      double* var = g.variances.data.data() + static_cast<std::size_t>(k) * D;
      const double* ax = acc_x.data.data() + static_cast<std::size_t>(k) * D;
      const double* ax2 = acc_x2.data.data() + static_cast<std::size_t>(k) * D;
      for (int d = 0; d < D; ++d) {
        mu[d] = ax[d] / nk;
        var[d] = std::max(ax2[d] / nk - mu[d] * mu[d], kVarianceFloor);
      }
    }
    double wsum = 0.0;
    for (double w : g.weights) wsum += w;
    for (double& w : g.weights) w /= wsum;
  }
  g.Check();
  res.gmm = std::move(g);
  return res;
}

// Means-only MAP adaptation with relevance factor r:
// mu_k' = alpha_k E_k + (1 - alpha_k) mu_k, alpha_k = n_k / (n_k + r).
inline DiagGmm MapAdapt(const DiagGmm& ubm, const Tensor<double>& frames,
                        double relevance = 16.0) {
  if (frames.ndim() != 2 || frames.dim(1) != ubm.dim)
    throw ShapeMismatch("frames must be (T, " + std::to_string(ubm.dim) + ")");
  const int T = frames.dim(0), D = ubm.dim, K = ubm.K;
  const auto consts = gmm_detail::LogConsts(ubm);
  std::vector<double> post(K), acc_n(K, 0.0);
  Tensor<double> acc_x({K, D});
  for (int t = 0; t < T; ++t) {
    const double* x = frames.data.data() + static_cast<std::size_t>(t) * D;
    gmm_detail::LogLikFrame(ubm, consts, x, post.data());
    for (int k = 0; k < K; ++k) {
      const double gamma = std::exp(post[k]);
      acc_n[k] += gamma;
      double* ax = acc_x.data.data() + static_cast<std::size_t>(k) * D;
      for (int d = 0; d < D; ++d) ax[d] += gamma * x[d];
    }
  }
  DiagGmm adapted = ubm;
  for (int k = 0; k < K; ++k) {
    const double nk = acc_n[k];
    if (nk <= 0.0) continue;  // alpha = 0, mean unchanged
    const double alpha = nk / (nk + relevance);
    double* mu =
        adapted.means.data.data() + static_cast<std::size_t>(k) * D;
    const double* ax = acc_x.data.data() + static_cast<std::size_t>(k) * D;
    for (int d = 0; d < D; ++d) {
      const double ek = ax[d] / nk;
      mu[d] = alpha * ek + (1.0 - alpha) * mu[d];
    }
  }
  return adapted;
}

// Average per-frame log-likelihood ratio of speaker model vs UBM.
inline double LlrScore(const DiagGmm& speaker, const DiagGmm& ubm,
                       const Tensor<double>& frames) {
  if (frames.ndim() != 2 || frames.dim(1) != ubm.dim ||
      speaker.dim != ubm.dim)
    throw ShapeMismatch("llr_score frame/model dims");
  const int T = frames.dim(0);
  if (T < 1) throw TooFewFrames("llr_score needs >= 1 frame");
  const auto consts_s = gmm_detail::LogConsts(speaker);
  const auto consts_u = gmm_detail::LogConsts(ubm);
  double acc = 0.0;
  for (int t = 0; t < T; ++t) {
    const double* x =
        frames.data.data() + static_cast<std::size_t>(t) * ubm.dim;
    acc += gmm_detail::LogLikFrame(speaker, consts_s, x) -
           gmm_detail::LogLikFrame(ubm, consts_u, x);
  }
  return acc / T;
}

// ---------- file format ----------

inline void SaveGmm(const std::string& path, const DiagGmm& gmm) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write gmm " + path);
  out << "SVGM1\n" << gmm.K << " " << gmm.dim << "\n";
  for (double w : gmm.weights) WriteFloatLe(out, static_cast<float>(w));
  for (double m : gmm.means.data) WriteFloatLe(out, static_cast<float>(m));
  for (double v : gmm.variances.data) WriteFloatLe(out, static_cast<float>(v));
  if (!out) throw IoError("short write to " + path);
}

inline DiagGmm LoadGmm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open gmm " + path);
  std::string line;
  if (!std::getline(in, line) || line != "SVGM1")
    throw ParseError("bad gmm magic in " + path);
  if (!std::getline(in, line)) throw ParseError("missing gmm header " + path);
  std::istringstream is(line);
  DiagGmm g;
  is >> g.K >> g.dim;
  if (is.fail() || g.K <= 0 || g.dim <= 0)
    throw ParseError("bad gmm header '" + line + "' in " + path);
  g.weights.resize(g.K);
  g.means = Tensor<double>({g.K, g.dim});
  g.variances = Tensor<double>({g.K, g.dim});
  for (auto& w : g.weights) w = ReadFloatLe(in);
  for (auto& m : g.means.data) m = ReadFloatLe(in);
  for (auto& v : g.variances.data) v = ReadFloatLe(in);
  if (!in) throw ParseError("truncated gmm " + path);
  // float32 storage nudges the simplex; renormalize on load.
  double sum = 0.0;
  for (double w : g.weights) sum += w;
  if (sum <= 0) throw ParseError("gmm weights not a simplex in " + path);
  for (auto& w : g.weights) w /= sum;
  for (auto& v : g.variances.data) v = std::max(v, kVarianceFloor);
  return g;
}

// MFCC+CMVN frames of one utterance, the baseline's features.
inline Tensor<double> BaselineFrames(const AudioClip& clip) {
  return Cmvn(ComputeMfcc(clip)).data;
}

// Stack per-utterance frame matrices.
inline Tensor<double> ConcatFrames(const std::vector<Tensor<double>>& parts) {
  if (parts.empty()) throw TooFewFrames("no frames to concatenate");
  const int D = parts.front().dim(1);
  std::int64_t total = 0;
  for (const auto& p : parts) {
    if (p.dim(1) != D) throw ShapeMismatch("frame dims differ");
    total += p.dim(0);
  }
  Tensor<double> out({static_cast<int>(total), D});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.data.begin(), p.data.end(), out.data.begin() + off);
    off += p.data.size();
  }
  return out;
}

}  // namespace verid

#endif  // VERID_GMM_HPP_
