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

#ifndef VERID_LAYERS_HPP_
#define VERID_LAYERS_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "verid/common.hpp"
#include "verid/tensor.hpp"

namespace verid {

enum class LayerKind { kConv, kFc, kBatchNorm };

template <class T>
struct LayerParams {
  LayerKind kind = LayerKind::kConv;
  Tensor<T> weight;  // conv: (outC, inC, kh, kw); fc: (out, in)
  Tensor<T> bias;    // (outC) / (out)
  Tensor<T> gamma, beta, running_mean, running_var;  // batchnorm, per channel
  int stride_h = 1, stride_w = 1;
};

// kTrainFrozenBn keeps gradients flowing but normalizes batch-norm layers by
// their running statistics without updating them (the fine-tuning setting).
enum class Mode { kTrain, kTrainFrozenBn, kEval };

// ---------- convolution ----------

struct ConvOutShape {
  int out_h = 0, out_w = 0;
};

inline ConvOutShape ConvOutputShape(int h, int w, int kh, int kw, int sh,
                                    int sw) {
  if (kh > h || kw > w)
    throw ShapeMismatch("kernel " + std::to_string(kh) + "x" +
                        std::to_string(kw) + " exceeds input " +
                        std::to_string(h) + "x" + std::to_string(w));
  return {(h - kh) / sh + 1, (w - kw) / sw + 1};
}

template <class T>
struct ConvCache {
  Tensor<T> input;
  bool valid = false;
};

namespace conv_detail {

// Valid-convolution im2col: cols is (inC*kh*kw, outH*outW).
template <class T>
void Im2Col(const T* x, int in_c, int h, int w, int kh, int kw, int sh, int sw,
            int out_h, int out_w, T* cols) {
  const int patch = out_h * out_w;
  for (int c = 0; c < in_c; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        T* dst = cols + (static_cast<std::size_t>(c) * kh * kw + i * kw + j) *
                            patch;
        for (int oh = 0; oh < out_h; ++oh) {
          const T* src = x + (static_cast<std::size_t>(c) * h +
                              (oh * sh + i)) * w + j;
          for (int ow = 0; ow < out_w; ++ow) dst[oh * out_w + ow] = src[ow * sw];
        }
      }
    }
  }
}

template <class T>
void Col2ImAcc(const T* cols, int in_c, int h, int w, int kh, int kw, int sh,
               int sw, int out_h, int out_w, T* x) {
  const int patch = out_h * out_w;
  for (int c = 0; c < in_c; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        const T* src = cols + (static_cast<std::size_t>(c) * kh * kw + i * kw +
                               j) * patch;
        for (int oh = 0; oh < out_h; ++oh) {
          T* dst = x + (static_cast<std::size_t>(c) * h + (oh * sh + i)) * w + j;
          for (int ow = 0; ow < out_w; ++ow) dst[ow * sw] += src[oh * out_w + ow];
        }
      }
    }
  }
}

}  // namespace conv_detail

// Cross-correlation with bias, no padding.
template <class T>
Tensor<T> ConvForward(const Tensor<T>& x, const LayerParams<T>& p,
                      ConvCache<T>* cache = nullptr) {
  if (x.ndim() != 4 || p.weight.ndim() != 4)
    throw ShapeMismatch("conv expects 4-d input and weights");
  const int B = x.dim(0), in_c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int out_c = p.weight.dim(0), kh = p.weight.dim(2), kw = p.weight.dim(3);
  if (p.weight.dim(1) != in_c)
    throw ShapeMismatch("conv weight expects " + std::to_string(p.weight.dim(1)) +
                        " input channels, got " + std::to_string(in_c));
  const auto [out_h, out_w] = ConvOutputShape(h, w, kh, kw, p.stride_h,
                                              p.stride_w);
  const int patch = out_h * out_w;
  const int k = in_c * kh * kw;

  Tensor<T> y({B, out_c, out_h, out_w});
  std::vector<T> cols(static_cast<std::size_t>(k) * patch);
  for (int b = 0; b < B; ++b) {
    const T* xb = x.data.data() + static_cast<std::size_t>(b) * in_c * h * w;
    conv_detail::Im2Col(xb, in_c, h, w, kh, kw, p.stride_h, p.stride_w, out_h,
                        out_w, cols.data());
    T* yb = y.data.data() + static_cast<std::size_t>(b) * out_c * patch;
    MatMul(p.weight.data.data(), cols.data(), yb, out_c, k, patch);
    for (int oc = 0; oc < out_c; ++oc) {
      const T bias = p.bias.data[oc];
      T* row = yb + static_cast<std::size_t>(oc) * patch;
      for (int i = 0; i < patch; ++i) row[i] += bias;
    }
  }
  if (cache != nullptr) {
    cache->input = x;
    cache->valid = true;
  }
  return y;
}

template <class T>
struct ConvGrads {
  Tensor<T> grad_x, grad_w, grad_b;
};

template <class T>
ConvGrads<T> ConvBackward(const Tensor<T>& grad_out, const LayerParams<T>& p,
                          const ConvCache<T>& cache) {
  if (!cache.valid) throw MissingCache("conv backward without forward cache");
  const Tensor<T>& x = cache.input;
  const int B = x.dim(0), in_c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int out_c = p.weight.dim(0), kh = p.weight.dim(2), kw = p.weight.dim(3);
  const auto [out_h, out_w] = ConvOutputShape(h, w, kh, kw, p.stride_h,
                                              p.stride_w);
  if (grad_out.shape != std::vector<int>({B, out_c, out_h, out_w}))
    throw ShapeMismatch("conv grad_out shape " + grad_out.ShapeStr());
  const int patch = out_h * out_w;
  const int k = in_c * kh * kw;

  ConvGrads<T> g;
  g.grad_x = Tensor<T>(x.shape);
  g.grad_w = Tensor<T>(p.weight.shape);
  g.grad_b = Tensor<T>(p.bias.shape);

  std::vector<T> cols(static_cast<std::size_t>(k) * patch);
  std::vector<T> grad_cols(static_cast<std::size_t>(k) * patch);
  for (int b = 0; b < B; ++b) {
    const T* xb = x.data.data() + static_cast<std::size_t>(b) * in_c * h * w;
    const T* gyb = grad_out.data.data() +
                   static_cast<std::size_t>(b) * out_c * patch;
    conv_detail::Im2Col(xb, in_c, h, w, kh, kw, p.stride_h, p.stride_w, out_h,
                        out_w, cols.data());
    // dW += dY * cols^T
    MatMulNTAcc(gyb, cols.data(), g.grad_w.data.data(), out_c, patch, k);
    // dcols = W^T * dY
    std::fill(grad_cols.begin(), grad_cols.end(), T(0));
    MatMulTNAcc(p.weight.data.data(), gyb, grad_cols.data(), k, out_c, patch);
    conv_detail::Col2ImAcc(grad_cols.data(), in_c, h, w, kh, kw, p.stride_h,
                           p.stride_w, out_h, out_w,
                           g.grad_x.data.data() +
                               static_cast<std::size_t>(b) * in_c * h * w);
    for (int oc = 0; oc < out_c; ++oc) {
      T acc = T(0);
      const T* row = gyb + static_cast<std::size_t>(oc) * patch;
      for (int i = 0; i < patch; ++i) acc += row[i];
      g.grad_b.data[oc] += acc;
    }
  }
  return g;
}

// ---------- fully connected ----------

template <class T>
struct FcCache {
  Tensor<T> input;
  bool valid = false;
};

template <class T>
Tensor<T> FcForward(const Tensor<T>& x, const LayerParams<T>& p,
                    FcCache<T>* cache = nullptr) {
  if (x.ndim() != 2 || p.weight.ndim() != 2)
    throw ShapeMismatch("fc expects 2-d input and weights");
  const int B = x.dim(0), in = x.dim(1), out = p.weight.dim(0);
  if (p.weight.dim(1) != in)
    throw ShapeMismatch("fc weight expects input width " +
                        std::to_string(p.weight.dim(1)) + ", got " +
                        std::to_string(in));
  Tensor<T> y({B, out});
  MatMulNT(x.data.data(), p.weight.data.data(), y.data.data(), B, in, out);
  for (int b = 0; b < B; ++b)
    for (int o = 0; o < out; ++o)
      y.data[static_cast<std::size_t>(b) * out + o] += p.bias.data[o];
  if (cache != nullptr) {
    cache->input = x;
    cache->valid = true;
  }
  return y;
}

template <class T>
struct FcGrads {
  Tensor<T> grad_x, grad_w, grad_b;
};

template <class T>
FcGrads<T> FcBackward(const Tensor<T>& grad_out, const LayerParams<T>& p,
                      const FcCache<T>& cache) {
  if (!cache.valid) throw MissingCache("fc backward without forward cache");
  const Tensor<T>& x = cache.input;
  const int B = x.dim(0), in = x.dim(1), out = p.weight.dim(0);
  if (grad_out.shape != std::vector<int>({B, out}))
    throw ShapeMismatch("fc grad_out shape " + grad_out.ShapeStr());
  FcGrads<T> g;
  g.grad_x = Tensor<T>({B, in});
  g.grad_w = Tensor<T>(p.weight.shape);
  g.grad_b = Tensor<T>(p.bias.shape);
  MatMul(grad_out.data.data(), p.weight.data.data(), g.grad_x.data.data(), B,
         out, in);
  MatMulTNAcc(grad_out.data.data(), x.data.data(), g.grad_w.data.data(), out,
              B, in);
  for (int b = 0; b < B; ++b)
    for (int o = 0; o < out; ++o)
      g.grad_b.data[o] += grad_out.data[static_cast<std::size_t>(b) * out + o];
  return g;
}

// ---------- ReLU ----------

template <class T>
struct ReluCache {
  Tensor<T> input;
  bool valid = false;
};

template <class T>
Tensor<T> ReluForward(const Tensor<T>& x, ReluCache<T>* cache = nullptr) {
  Tensor<T> y = x;
  for (auto& v : y.data) v = v > T(0) ? v : T(0);
  if (cache != nullptr) {
    cache->input = x;
    cache->valid = true;
  }
  return y;
}

template <class T>
Tensor<T> ReluBackward(const Tensor<T>& grad_out, const ReluCache<T>& cache) {
  if (!cache.valid) throw MissingCache("relu backward without forward cache");
  if (!grad_out.SameShape(cache.input))
    throw ShapeMismatch("relu grad_out shape " + grad_out.ShapeStr());
  Tensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.data.size(); ++i)
    if (cache.input.data[i] <= T(0)) g.data[i] = T(0);
  return g;
}

// ---------- batch normalization (per channel of a 4-d activation) ----------

inline constexpr double kBnEpsilon = 1e-5;
inline constexpr double kBnMomentum = 0.9;

template <class T>
struct BatchNormCache {
  Tensor<T> x_hat;        // normalized activations
  std::vector<T> invstd;  // per channel
  bool batch_stats = true;  // which statistics produced x_hat
  bool valid = false;
};

// Train mode normalizes by batch statistics and folds them into the running
// estimates; eval mode normalizes by the running estimates. Either mode can
// populate a cache for the backward pass (fine-tuning runs with frozen
// statistics but still needs gradients).
template <class T>
Tensor<T> BatchNormForward(const Tensor<T>& x, LayerParams<T>& p, Mode mode,
                           BatchNormCache<T>* cache = nullptr) {
  if (x.ndim() != 4) throw ShapeMismatch("batchnorm expects 4-d input");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (p.gamma.numel() != C)
    throw ShapeMismatch("batchnorm expects " +
                        std::to_string(p.gamma.numel()) + " channels, got " +
                        std::to_string(C));
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const std::size_t stride_b = static_cast<std::size_t>(C) * plane;
  Tensor<T> y(x.shape);

  if (mode == Mode::kTrain) {
    if (B < 2) throw BatchTooSmall("batchnorm train mode needs batch >= 2");
    const T n = static_cast<T>(B) * static_cast<T>(plane);
    if (cache != nullptr) {
      cache->x_hat = Tensor<T>(x.shape);
      cache->invstd.assign(C, T(0));
      cache->batch_stats = true;
      cache->valid = true;
    }
    for (int c = 0; c < C; ++c) {
      T mean = T(0);
      for (int b = 0; b < B; ++b) {
        const T* src = x.data.data() + b * stride_b + c * plane;
        for (std::size_t i = 0; i < plane; ++i) mean += src[i];
      }
      mean /= n;
      T var = T(0);
      for (int b = 0; b < B; ++b) {
        const T* src = x.data.data() + b * stride_b + c * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const T d = src[i] - mean;
          var += d * d;
        }
      }
      var /= n;
      const T invstd = T(1) / std::sqrt(var + static_cast<T>(kBnEpsilon));
      const T gamma = p.gamma.data[c], beta = p.beta.data[c];
      for (int b = 0; b < B; ++b) {
        const T* src = x.data.data() + b * stride_b + c * plane;
        T* dst = y.data.data() + b * stride_b + c * plane;
        T* xh = cache != nullptr
                    ? cache->x_hat.data.data() + b * stride_b + c * plane
                    : nullptr;
        for (std::size_t i = 0; i < plane; ++i) {
          const T x_hat = (src[i] - mean) * invstd;
          if (xh != nullptr) xh[i] = x_hat;
          dst[i] = gamma * x_hat + beta;
        }
      }
      if (cache != nullptr) cache->invstd[c] = invstd;
      p.running_mean.data[c] = static_cast<T>(kBnMomentum) *
                                   p.running_mean.data[c] +
                               static_cast<T>(1.0 - kBnMomentum) * mean;
      p.running_var.data[c] = static_cast<T>(kBnMomentum) *
                                  p.running_var.data[c] +
                              static_cast<T>(1.0 - kBnMomentum) * var;
    }
  } else {
    if (cache != nullptr) {
      cache->x_hat = Tensor<T>(x.shape);
      cache->invstd.assign(C, T(0));
      cache->batch_stats = false;
      cache->valid = true;
    }
    for (int c = 0; c < C; ++c) {
      const T invstd =
          T(1) / std::sqrt(p.running_var.data[c] + static_cast<T>(kBnEpsilon));
      const T mean = p.running_mean.data[c];
      const T gamma = p.gamma.data[c], beta = p.beta.data[c];
      if (cache != nullptr) cache->invstd[c] = invstd;
      for (int b = 0; b < B; ++b) {
        const T* src = x.data.data() + b * stride_b + c * plane;
        T* dst = y.data.data() + b * stride_b + c * plane;
        T* xh = cache != nullptr
                    ? cache->x_hat.data.data() + b * stride_b + c * plane
                    : nullptr;
        for (std::size_t i = 0; i < plane; ++i) {
          const T x_hat = (src[i] - mean) * invstd;
          if (xh != nullptr) xh[i] = x_hat;
          dst[i] = gamma * x_hat + beta;
        }
      }
    }
  }
  return y;
}

template <class T>
struct BatchNormGrads {
  Tensor<T> grad_x, grad_gamma, grad_beta;
};

template <class T>
BatchNormGrads<T> BatchNormBackward(const Tensor<T>& grad_out,
                                    const LayerParams<T>& p,
                                    const BatchNormCache<T>& cache) {
  if (!cache.valid)
    throw MissingCache("batchnorm backward without train-mode cache");
  const Tensor<T>& x_hat = cache.x_hat;
  if (!grad_out.SameShape(x_hat))
    throw ShapeMismatch("batchnorm grad_out shape " + grad_out.ShapeStr());
  const int B = x_hat.dim(0), C = x_hat.dim(1), H = x_hat.dim(2),
            W = x_hat.dim(3);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const std::size_t stride_b = static_cast<std::size_t>(C) * plane;
  const T n = static_cast<T>(B) * static_cast<T>(plane);

  BatchNormGrads<T> g;
  g.grad_x = Tensor<T>(x_hat.shape);
  g.grad_gamma = Tensor<T>(p.gamma.shape);
  g.grad_beta = Tensor<T>(p.beta.shape);

  for (int c = 0; c < C; ++c) {
    T sum_dy = T(0), sum_dy_xhat = T(0);
    for (int b = 0; b < B; ++b) {
      const T* dy = grad_out.data.data() + b * stride_b + c * plane;
      const T* xh = x_hat.data.data() + b * stride_b + c * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += dy[i] * xh[i];
      }
    }
    g.grad_beta.data[c] = sum_dy;
    g.grad_gamma.data[c] = sum_dy_xhat;
    if (cache.batch_stats) {
      const T scale = p.gamma.data[c] * cache.invstd[c] / n;
      for (int b = 0; b < B; ++b) {
        const T* dy = grad_out.data.data() + b * stride_b + c * plane;
        const T* xh = x_hat.data.data() + b * stride_b + c * plane;
        T* dx = g.grad_x.data.data() + b * stride_b + c * plane;
        for (std::size_t i = 0; i < plane; ++i)
          dx[i] = scale * (n * dy[i] - sum_dy - xh[i] * sum_dy_xhat);
      }
    } else {
      // Frozen statistics: the map is an affine transform per channel.
      const T scale = p.gamma.data[c] * cache.invstd[c];
      for (int b = 0; b < B; ++b) {
        const T* dy = grad_out.data.data() + b * stride_b + c * plane;
        T* dx = g.grad_x.data.data() + b * stride_b + c * plane;
        for (std::size_t i = 0; i < plane; ++i) dx[i] = scale * dy[i];
      }
    }
  }
  return g;
}

// ---------- SGD with momentum ----------

// v <- momentum * v - lr * g;  p <- p + v
template <class T>
void SgdStep(Tensor<T>& param, const Tensor<T>& grad, Tensor<T>& velocity,
             T lr, T momentum) {
  if (!param.SameShape(grad) || !param.SameShape(velocity))
    throw ShapeMismatch("sgd_step shapes " + param.ShapeStr() + " vs " +
                        grad.ShapeStr());
  for (std::size_t i = 0; i < param.data.size(); ++i) {
    velocity.data[i] = momentum * velocity.data[i] - lr * grad.data[i];
    param.data[i] += velocity.data[i];
  }
}

}  // namespace verid

#endif  // VERID_LAYERS_HPP_
