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

#ifndef VERID_LOSSES_HPP_
#define VERID_LOSSES_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "verid/common.hpp"
#include "verid/tensor.hpp"

namespace verid {

template <class T>
struct SoftmaxXentResult {
  T loss = T(0);
  Tensor<T> grad;  // (B, S), already divided by B
};

// Mean cross-entropy over the batch, log-sum-exp stabilized.
template <class T>
SoftmaxXentResult<T> SoftmaxXent(const Tensor<T>& logits,
                                 const std::vector<int>& labels) {
  if (logits.ndim() != 2) throw ShapeMismatch("softmax expects (B, S) logits");
  const int B = logits.dim(0), S = logits.dim(1);
  if (static_cast<int>(labels.size()) != B)
    throw ShapeMismatch("labels length " + std::to_string(labels.size()) +
                        " vs batch " + std::to_string(B));
  SoftmaxXentResult<T> res;
  res.grad = Tensor<T>({B, S});
  T total = T(0);
  for (int b = 0; b < B; ++b) {
    const int y = labels[b];
    if (y < 0 || y >= S)
      throw LabelOutOfRange("label " + std::to_string(y) + " for " +
                            std::to_string(S) + " classes");
    const T* row = logits.data.data() + static_cast<std::size_t>(b) * S;
    T m = row[0];
    for (int s = 1; s < S; ++s) m = std::max(m, row[s]);
    T sum = T(0);
    for (int s = 0; s < S; ++s) sum += std::exp(row[s] - m);
    const T lse = m + std::log(sum);
    total += lse - row[y];
    T* grow = res.grad.data.data() + static_cast<std::size_t>(b) * S;
    for (int s = 0; s < S; ++s)
      grow[s] = std::exp(row[s] - lse) / static_cast<T>(B);
    grow[y] -= T(1) / static_cast<T>(B);
  }
  res.loss = total / static_cast<T>(B);
  return res;
}

// Per-row l2 distance between two embedding batches.
template <class T>
std::vector<T> EmbeddingDistance(const Tensor<T>& e1, const Tensor<T>& e2) {
  if (e1.ndim() != 2 || !e1.SameShape(e2))
    throw ShapeMismatch("embedding batches " + e1.ShapeStr() + " vs " +
                        e2.ShapeStr());
  const int B = e1.dim(0), d = e1.dim(1);
  std::vector<T> dist(B);
  for (int b = 0; b < B; ++b) {
    const T* a = e1.data.data() + static_cast<std::size_t>(b) * d;
    const T* c = e2.data.data() + static_cast<std::size_t>(b) * d;
    T acc = T(0);
    for (int i = 0; i < d; ++i) {
      const T diff = a[i] - c[i];
      acc += diff * diff;
    }
    dist[b] = std::sqrt(acc);
  }
  return dist;
}

struct ContrastiveConfig {
  double margin = 1.0;
  double lambda = 1e-4;  // weight decay strength on conv/fc weights
};

// Genuine pairs (y=1) pay 1/2 D^2, impostor pairs (y=0) pay the hinge
// 1/2 max(0, M-D)^2; terms are averaged and the caller's accumulated
// squared weight norm enters scaled by lambda.
template <class T>
struct ContrastiveResult {
  T loss = T(0);       // mean pair term + lambda * weight_sq_norm
  T pair_mean = T(0);  // mean pair term alone
  std::vector<T> distances;
  Tensor<T> grad_e1, grad_e2;
};

template <class T>
ContrastiveResult<T> ContrastiveLoss(const Tensor<T>& e1, const Tensor<T>& e2,
                                     const std::vector<int>& y,
                                     const ContrastiveConfig& cfg,
                                     T weight_sq_norm = T(0)) {
  if (e1.ndim() != 2 || !e1.SameShape(e2))
    throw ShapeMismatch("embedding batches " + e1.ShapeStr() + " vs " +
                        e2.ShapeStr());
  const int N = e1.dim(0), d = e1.dim(1);
  if (static_cast<int>(y.size()) != N)
    throw ShapeMismatch("pair labels length " + std::to_string(y.size()));
  const T margin = static_cast<T>(cfg.margin);

  ContrastiveResult<T> res;
  res.distances = EmbeddingDistance(e1, e2);
  res.grad_e1 = Tensor<T>(e1.shape);
  res.grad_e2 = Tensor<T>(e2.shape);
  T total = T(0);
  for (int i = 0; i < N; ++i) {
    if (y[i] != 0 && y[i] != 1)
      throw InvalidLabel("pair label must be 0 or 1, got " +
                         std::to_string(y[i]));
    const T D = res.distances[i];
    const T* a = e1.data.data() + static_cast<std::size_t>(i) * d;
    const T* b = e2.data.data() + static_cast<std::size_t>(i) * d;
    T* ga = res.grad_e1.data.data() + static_cast<std::size_t>(i) * d;
    T* gb = res.grad_e2.data.data() + static_cast<std::size_t>(i) * d;
    if (y[i] == 1) {
      total += T(0.5) * D * D;
      // d/de1 of 1/2 D^2 is (e1 - e2)
      for (int k = 0; k < d; ++k) {
        const T diff = (a[k] - b[k]) / static_cast<T>(N);
        ga[k] = diff;
        gb[k] = -diff;
      }
    } else {
      const T gap = margin - D;
      if (gap > T(0)) {
        total += T(0.5) * gap * gap;
        if (D > T(0)) {  // D = 0 takes the zero subgradient
          const T scale = -gap / (D * static_cast<T>(N));
          for (int k = 0; k < d; ++k) {
            const T g = scale * (a[k] - b[k]);
            ga[k] = g;
            gb[k] = -g;
          }
        }
      }
    }
  }
  res.pair_mean = total / static_cast<T>(N);
  res.loss = res.pair_mean + static_cast<T>(cfg.lambda) * weight_sq_norm;
  return res;
}

}  // namespace verid

#endif  // VERID_LOSSES_HPP_
