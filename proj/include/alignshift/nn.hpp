// Copyright (c) 2026 The AlignShift Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Forward/backward operators on Volume4D.
//
// Every *_forward takes an optional cache pointer; the matching *_backward
// requires a cache filled by a forward call and throws StateError otherwise.
// A 2D feature map (C x H x W) is carried as a depth-1 Volume4D.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alignshift/convert.hpp"
#include "alignshift/error.hpp"
#include "alignshift/tensor.hpp"

namespace alignshift {

// ---------------------------------------------------------------------------
// 1xKxK convolution, stride 1, zero "same" padding in H and W.

struct ConvCache {
  std::optional<Volume4D> input;
};

struct ConvGrads {
  Volume4D input;
  std::vector<double> weights;
  std::vector<double> bias;
};

namespace detail {

inline void check_conv_shapes(const Shape4& in, std::span<const double> w,
                              std::span<const double> b, std::size_t k) {
  if (k == 0 || k % 2 == 0) {
    throw ShapeError("conv kernel size must be odd, got " + std::to_string(k));
  }
  if (b.empty()) throw ShapeError("conv needs at least one output channel");
  if (w.size() != b.size() * in.channels * k * k) {
    throw ShapeError("conv weights hold " + std::to_string(w.size()) +
                     " values; expected " + std::to_string(b.size()) + "x" +
                     std::to_string(in.channels) + "x" + std::to_string(k) +
                     "x" + std::to_string(k));
  }
}

// Valid output range [lo, hi) for a kernel tap at offset `off` (in pixels,
// relative to the output position) along an axis of length n.
inline void tap_range(std::ptrdiff_t off, std::size_t n, std::size_t& lo,
                      std::size_t& hi) {
  const auto len = static_cast<std::ptrdiff_t>(n);
  lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -off));
  hi = static_cast<std::size_t>(std::min<std::ptrdiff_t>(len, len - off));
  if (hi < lo) hi = lo;
}

}  // namespace detail

inline Volume4D conv3d_1kk_forward(const Volume4D& x, std::span<const double> w,
                                   std::span<const double> b, std::size_t k,
                                   ConvCache* cache = nullptr) {
  detail::check_conv_shapes(x.shape(), w, b, k);
  const std::size_t co = b.size();
  const std::size_t ci = x.channels();
  const std::size_t depth = x.depth();
  const std::size_t hh = x.height();
  const std::size_t ww = x.width();
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  Volume4D out(co, depth, hh, ww);
  for (std::size_t o = 0; o < co; ++o) {
    for (std::size_t d = 0; d < depth; ++d) {
      auto dst = out.plane(o, d);
      std::fill(dst.begin(), dst.end(), b[o]);
      for (std::size_t i = 0; i < ci; ++i) {
        auto src = x.plane(i, d);
        for (std::size_t kh = 0; kh < k; ++kh) {
          const std::ptrdiff_t dh = static_cast<std::ptrdiff_t>(kh) - pad;
          std::size_t h0 = 0;
          std::size_t h1 = 0;
          detail::tap_range(dh, hh, h0, h1);
          for (std::size_t kw = 0; kw < k; ++kw) {
            const std::ptrdiff_t dw = static_cast<std::ptrdiff_t>(kw) - pad;
            std::size_t w0 = 0;
            std::size_t w1 = 0;
            detail::tap_range(dw, ww, w0, w1);
            const double wt = w[((o * ci + i) * k + kh) * k + kw];
            if (wt == 0.0) continue;
            for (std::size_t h = h0; h < h1; ++h) {
              double* drow = dst.data() + h * ww;
              const double* srow = src.data() +
                                   static_cast<std::size_t>(
                                       static_cast<std::ptrdiff_t>(h) + dh) *
                                       ww;
              for (std::size_t c = w0; c < w1; ++c) {
                drow[c] += wt * srow[static_cast<std::ptrdiff_t>(c) + dw];
              }
            }
          }
        }
      }
    }
  }
  if (cache) cache->input = x;
  return out;
}

inline ConvGrads conv3d_1kk_backward(const Volume4D& grad_out,
                                     std::span<const double> w, std::size_t k,
                                     const ConvCache& cache) {
  if (!cache.input) throw StateError("conv backward called before forward");
  const Volume4D& x = *cache.input;
  const std::size_t co = grad_out.channels();
  const std::size_t ci = x.channels();
  if (grad_out.depth() != x.depth() || grad_out.height() != x.height() ||
      grad_out.width() != x.width() || w.size() != co * ci * k * k) {
    throw ShapeError("conv backward: gradient shape " + grad_out.shape().str() +
                     " does not match cached input " + x.shape().str());
  }
  const std::size_t depth = x.depth();
  const std::size_t hh = x.height();
  const std::size_t ww = x.width();
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  ConvGrads g{Volume4D(x.shape()), std::vector<double>(w.size(), 0.0),
              std::vector<double>(co, 0.0)};
  for (std::size_t o = 0; o < co; ++o) {
    double bsum = 0.0;
    for (std::size_t d = 0; d < depth; ++d) {
      for (double v : grad_out.plane(o, d)) bsum += v;
    }
    g.bias[o] = bsum;
    for (std::size_t i = 0; i < ci; ++i) {
      for (std::size_t kh = 0; kh < k; ++kh) {
        const std::ptrdiff_t dh = static_cast<std::ptrdiff_t>(kh) - pad;
        std::size_t h0 = 0;
        std::size_t h1 = 0;
        detail::tap_range(dh, hh, h0, h1);
        for (std::size_t kw = 0; kw < k; ++kw) {
          const std::ptrdiff_t dw = static_cast<std::ptrdiff_t>(kw) - pad;
          std::size_t w0 = 0;
          std::size_t w1 = 0;
          detail::tap_range(dw, ww, w0, w1);
          const std::size_t widx = ((o * ci + i) * k + kh) * k + kw;
          const double wt = w[widx];
          double wsum = 0.0;
          for (std::size_t d = 0; d < depth; ++d) {
            auto gplane = grad_out.plane(o, d);
            auto xplane = x.plane(i, d);
            auto gx = g.input.plane(i, d);
            for (std::size_t h = h0; h < h1; ++h) {
              const double* grow = gplane.data() + h * ww;
              const std::size_t src_row =
                  static_cast<std::size_t>(static_cast<std::ptrdiff_t>(h) + dh) * ww;
              const double* xrow = xplane.data() + src_row;
              double* gxrow = gx.data() + src_row;
              for (std::size_t c = w0; c < w1; ++c) {
                const auto sc = static_cast<std::size_t>(
                    static_cast<std::ptrdiff_t>(c) + dw);
                wsum += grow[c] * xrow[sc];
                gxrow[sc] += wt * grow[c];
              }
            }
          }
          g.weights[widx] = wsum;
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// ReLU

struct ReluCache {
  std::optional<Volume4D> input;
};

inline Volume4D relu_forward(const Volume4D& x, ReluCache* cache = nullptr) {
  Volume4D out = x;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  if (cache) cache->input = x;
  return out;
}

inline Volume4D relu_backward(const Volume4D& grad_out, const ReluCache& cache) {
  if (!cache.input) throw StateError("relu backward called before forward");
  if (grad_out.shape() != cache.input->shape()) {
    throw ShapeError("relu backward: shape mismatch");
  }
  Volume4D g = grad_out;
  const auto x = cache.input->data();
  auto gd = g.data();
  for (std::size_t i = 0; i < gd.size(); ++i) {
    if (!(x[i] > 0.0)) gd[i] = 0.0;
  }
  return g;
}

// ---------------------------------------------------------------------------
// 1xKxK max pooling, stride K in H and W, no pooling along depth. Trailing
// rows/columns that do not fill a window are dropped.

struct PoolCache {
  std::optional<Shape4> input_shape;
  std::vector<std::size_t> argmax;
};

inline Volume4D pool3d_1kk_forward(const Volume4D& x, std::size_t k,
                                   PoolCache* cache = nullptr) {
  if (k == 0) throw ShapeError("pool kernel must be positive");
  if (x.height() < k || x.width() < k) {
    throw ShapeError("pool kernel " + std::to_string(k) +
                     " larger than plane " + std::to_string(x.height()) + "x" +
                     std::to_string(x.width()));
  }
  const std::size_t oh = x.height() / k;
  const std::size_t ow = x.width() / k;
  Volume4D out(x.channels(), x.depth(), oh, ow);
  std::vector<std::size_t> argmax(out.size());
  std::size_t n = 0;
  for (std::size_t c = 0; c < x.channels(); ++c) {
    for (std::size_t d = 0; d < x.depth(); ++d) {
      for (std::size_t h = 0; h < oh; ++h) {
        for (std::size_t w = 0; w < ow; ++w, ++n) {
          std::size_t best = x.index(c, d, h * k, w * k);
          double best_v = x.data()[best];
          for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
              const std::size_t idx = x.index(c, d, h * k + i, w * k + j);
              if (x.data()[idx] > best_v) {
                best_v = x.data()[idx];
                best = idx;
              }
            }
          }
          out.data()[n] = best_v;
          argmax[n] = best;
        }
      }
    }
  }
  if (cache) {
    cache->input_shape = x.shape();
    cache->argmax = std::move(argmax);
  }
  return out;
}

/// Routes each output gradient to the first maximal input of its window.
inline Volume4D pool3d_1kk_backward(const Volume4D& grad_out,
                                    const PoolCache& cache) {
  if (!cache.input_shape) throw StateError("pool backward called before forward");
  if (grad_out.size() != cache.argmax.size()) {
    throw ShapeError("pool backward: gradient shape does not match forward output");
  }
  Volume4D g(*cache.input_shape);
  for (std::size_t n = 0; n < cache.argmax.size(); ++n) {
    g.data()[cache.argmax[n]] += grad_out.data()[n];
  }
  return g;
}

// ---------------------------------------------------------------------------
// Per-channel normalization. Inference uses the running statistics; training
// normalizes with the mean and (biased) variance over (D, H, W).

enum class NormMode { Inference, Training };

struct NormCache {
  std::optional<Volume4D> normalized;  // x_hat
  std::vector<double> inv_std;
  std::vector<double> batch_mean;
  std::vector<double> batch_var;
  NormMode mode = NormMode::Inference;
};

struct NormGrads {
  Volume4D input;
  std::vector<double> scale;
  std::vector<double> offset;
};

inline Volume4D norm3d_forward(const Volume4D& x, const NormStats& stats,
                               NormMode mode, NormCache* cache = nullptr) {
  const std::size_t channels = x.channels();
  if (stats.channels() != channels) {
    throw ShapeError("norm: statistics for " + std::to_string(stats.channels()) +
                     " channels applied to " + std::to_string(channels));
  }
  const std::size_t per_channel = x.depth() * x.shape().plane();
  Volume4D xhat(x.shape());
  Volume4D out(x.shape());
  std::vector<double> inv_std(channels);
  std::vector<double> mean(channels);
  std::vector<double> var(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    const auto src = x.data().subspan(c * per_channel, per_channel);
    if (mode == NormMode::Training) {
      double m = 0.0;
      for (double v : src) m += v;
      m /= static_cast<double>(per_channel);
      double s2 = 0.0;
      for (double v : src) s2 += (v - m) * (v - m);
      mean[c] = m;
      var[c] = s2 / static_cast<double>(per_channel);
    } else {
      mean[c] = stats.running_mean[c];
      var[c] = stats.running_var[c];
    }
    inv_std[c] = 1.0 / std::sqrt(var[c] + stats.eps);
    auto xh = xhat.data().subspan(c * per_channel, per_channel);
    auto dst = out.data().subspan(c * per_channel, per_channel);
    for (std::size_t i = 0; i < per_channel; ++i) {
      xh[i] = (src[i] - mean[c]) * inv_std[c];
      dst[i] = stats.scale[c] * xh[i] + stats.offset[c];
    }
  }
  if (cache) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->batch_mean = std::move(mean);
    cache->batch_var = std::move(var);
    cache->mode = mode;
  }
  return out;
}

inline NormGrads norm3d_backward(const Volume4D& grad_out, const NormStats& stats,
                                 const NormCache& cache) {
  if (!cache.normalized) throw StateError("norm backward called before forward");
  const Volume4D& xhat = *cache.normalized;
  if (grad_out.shape() != xhat.shape()) {
    throw ShapeError("norm backward: shape mismatch");
  }
  const std::size_t channels = xhat.channels();
  const std::size_t per_channel = xhat.depth() * xhat.shape().plane();
  const double n = static_cast<double>(per_channel);
  NormGrads g{Volume4D(xhat.shape()), std::vector<double>(channels, 0.0),
              std::vector<double>(channels, 0.0)};
  for (std::size_t c = 0; c < channels; ++c) {
    const auto go = grad_out.data().subspan(c * per_channel, per_channel);
    const auto xh = xhat.data().subspan(c * per_channel, per_channel);
    auto gx = g.input.data().subspan(c * per_channel, per_channel);
    double sum_g = 0.0;
    double sum_gx = 0.0;
    for (std::size_t i = 0; i < per_channel; ++i) {
      sum_g += go[i];
      sum_gx += go[i] * xh[i];
    }
    g.offset[c] = sum_g;
    g.scale[c] = sum_gx;
    const double k = stats.scale[c] * cache.inv_std[c];
    if (cache.mode == NormMode::Inference) {
      for (std::size_t i = 0; i < per_channel; ++i) gx[i] = k * go[i];
    } else {
      for (std::size_t i = 0; i < per_channel; ++i) {
        gx[i] = k * (go[i] - sum_g / n - xh[i] * sum_gx / n);
      }
    }
  }
  return g;
}

/// Exponential moving average of the batch statistics of a training forward.
inline void update_running_stats(NormStats& stats, const NormCache& cache,
                                 double momentum) {
  if (!cache.normalized || cache.mode != NormMode::Training) {
    throw StateError("running statistics need a training-mode forward");
  }
  const double n = static_cast<double>(cache.normalized->depth() *
                                       cache.normalized->shape().plane());
  for (std::size_t c = 0; c < stats.channels(); ++c) {
    const double unbiased = n > 1.0 ? cache.batch_var[c] * n / (n - 1.0)
                                    : cache.batch_var[c];
    stats.running_mean[c] =
        (1.0 - momentum) * stats.running_mean[c] + momentum * cache.batch_mean[c];
    stats.running_var[c] =
        (1.0 - momentum) * stats.running_var[c] + momentum * unbiased;
  }
}

// ---------------------------------------------------------------------------
// Depth squeeze: a Dx1x1 convolution with no depth padding, so the depth axis
// collapses to 1. Weights are (out, in, D); bias may be empty.

struct SqueezeCache {
  std::optional<Volume4D> input;
};

struct SqueezeGrads {
  Volume4D input;
  std::vector<double> weights;
  std::vector<double> bias;
};

inline Volume4D depth_squeeze(const Volume4D& x, std::span<const double> w,
                              std::size_t out_channels,
                              std::span<const double> b = {},
                              SqueezeCache* cache = nullptr) {
  if (out_channels == 0) throw ShapeError("depth squeeze needs output channels");
  if (w.size() != out_channels * x.channels() * x.depth()) {
    throw ShapeError("depth squeeze weights hold " + std::to_string(w.size()) +
                     " values; input " + x.shape().str() + " with " +
                     std::to_string(out_channels) + " outputs needs " +
                     std::to_string(out_channels * x.channels() * x.depth()));
  }
  if (!b.empty() && b.size() != out_channels) {
    throw ShapeError("depth squeeze bias length must equal output channels");
  }
  const std::size_t ci = x.channels();
  const std::size_t depth = x.depth();
  Volume4D out(out_channels, 1, x.height(), x.width());
  for (std::size_t o = 0; o < out_channels; ++o) {
    auto dst = out.plane(o, 0);
    std::fill(dst.begin(), dst.end(), b.empty() ? 0.0 : b[o]);
    for (std::size_t i = 0; i < ci; ++i) {
      for (std::size_t d = 0; d < depth; ++d) {
        const double wt = w[(o * ci + i) * depth + d];
        auto src = x.plane(i, d);
        for (std::size_t p = 0; p < dst.size(); ++p) dst[p] += wt * src[p];
      }
    }
  }
  if (cache) cache->input = x;
  return out;
}

inline SqueezeGrads depth_squeeze_backward(const Volume4D& grad_out,
                                           std::span<const double> w,
                                           const SqueezeCache& cache) {
  if (!cache.input) throw StateError("depth squeeze backward called before forward");
  const Volume4D& x = *cache.input;
  const std::size_t co = grad_out.channels();
  const std::size_t ci = x.channels();
  const std::size_t depth = x.depth();
  if (grad_out.depth() != 1 || grad_out.height() != x.height() ||
      grad_out.width() != x.width() || w.size() != co * ci * depth) {
    throw ShapeError("depth squeeze backward: shape mismatch");
  }
  SqueezeGrads g{Volume4D(x.shape()), std::vector<double>(w.size(), 0.0),
                 std::vector<double>(co, 0.0)};
  for (std::size_t o = 0; o < co; ++o) {
    auto go = grad_out.plane(o, 0);
    for (double v : go) g.bias[o] += v;
    for (std::size_t i = 0; i < ci; ++i) {
      for (std::size_t d = 0; d < depth; ++d) {
        const std::size_t widx = (o * ci + i) * depth + d;
        auto src = x.plane(i, d);
        auto gx = g.input.plane(i, d);
        double acc = 0.0;
        for (std::size_t p = 0; p < go.size(); ++p) {
          acc += go[p] * src[p];
          gx[p] += w[widx] * go[p];
        }
        g.weights[widx] = acc;
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Linear head on the flattened volume: y = W vec(x) + b, W is (out, size(x)).

struct LinearCache {
  std::optional<Volume4D> input;
};

struct LinearGrads {
  Volume4D input;
  std::vector<double> weights;
  std::vector<double> bias;
};

inline std::vector<double> linear_head_forward(const Volume4D& x,
                                               std::span<const double> w,
                                               std::span<const double> b,
                                               LinearCache* cache = nullptr) {
  const std::size_t n = x.size();
  if (b.empty() || w.size() != b.size() * n) {
    throw ShapeError("linear head: weights hold " + std::to_string(w.size()) +
                     " values for " + std::to_string(b.size()) + " outputs of " +
                     std::to_string(n) + " inputs");
  }
  std::vector<double> y(b.begin(), b.end());
  const auto xd = x.data();
  for (std::size_t o = 0; o < y.size(); ++o) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += w[o * n + i] * xd[i];
    y[o] += acc;
  }
  if (cache) cache->input = x;
  return y;
}

inline LinearGrads linear_head_backward(std::span<const double> grad_out,
                                        std::span<const double> w,
                                        const LinearCache& cache) {
  if (!cache.input) throw StateError("linear head backward called before forward");
  const Volume4D& x = *cache.input;
  const std::size_t n = x.size();
  if (w.size() != grad_out.size() * n) {
    throw ShapeError("linear head backward: shape mismatch");
  }
  LinearGrads g{Volume4D(x.shape()), std::vector<double>(w.size(), 0.0),
                std::vector<double>(grad_out.begin(), grad_out.end())};
  const auto xd = x.data();
  auto gx = g.input.data();
  for (std::size_t o = 0; o < grad_out.size(); ++o) {
    for (std::size_t i = 0; i < n; ++i) {
      g.weights[o * n + i] = grad_out[o] * xd[i];
      gx[i] += w[o * n + i] * grad_out[o];
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

/// Plain SGD without momentum: p -= lr * g.
inline void sgd_step(std::span<double> params, std::span<const double> grads,
                     double lr) {
  if (params.size() != grads.size()) {
    throw ShapeError("sgd: " + std::to_string(params.size()) + " parameters, " +
                     std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

struct LossResult {
  double loss = 0.0;
  Volume4D grad;
};

/// Mean per-element binary cross-entropy on logits; positives are weighted by
/// pos_weight.
inline LossResult bce_with_logits(const Volume4D& logits, const Volume4D& target,
                                  double pos_weight = 1.0) {
  if (logits.shape() != target.shape()) {
    throw ShapeError("bce: logits " + logits.shape().str() + " vs target " +
                     target.shape().str());
  }
  LossResult r{0.0, Volume4D(logits.shape())};
  const auto z = logits.data();
  const auto t = target.data();
  auto g = r.grad.data();
  const double n = static_cast<double>(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    // log(1 + exp(-|z|)) keeps both softplus terms finite.
    const double tail = std::log1p(std::exp(-std::abs(z[i])));
    const double sp_pos = std::max(z[i], 0.0) + tail;   // -log(1 - sigmoid)
    const double sp_neg = std::max(-z[i], 0.0) + tail;  // -log(sigmoid)
    const double sig = 1.0 / (1.0 + std::exp(-z[i]));
    r.loss += pos_weight * t[i] * sp_neg + (1.0 - t[i]) * sp_pos;
    g[i] = (pos_weight * t[i] * (sig - 1.0) + (1.0 - t[i]) * sig) / n;
  }
  r.loss /= n;
  return r;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace alignshift
