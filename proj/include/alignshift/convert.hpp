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

// Layer specifications and the 2D -> 3D conversion recipe:
//
//   Conv2D KxK  ->  (shift +) Conv3D 1xKxK
//   Pool2D KxK  ->  Pool3D 1xKxK   (no pooling along depth)
//   Norm2D      ->  Norm3D         (same per-channel statistics on every slice)
//
// Depth-1 kernels make the conversion value preserving and the shift operators
// carry no parameters, so the learnable parameter count never changes.

#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "alignshift/error.hpp"
#include "alignshift/shift.hpp"

namespace alignshift {

enum class LayerKind { Conv2D, Pool2D, Norm2D, Conv3D, Pool3D, Norm3D, ReLU };

/// Which depth-shift operator a shift-prefixed 3D conv applies to its input.
enum class ShiftOperator { AlignShift, Tsm };

inline const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::Pool2D: return "Pool2D";
    case LayerKind::Norm2D: return "Norm2D";
    case LayerKind::Conv3D: return "Conv3D";
    case LayerKind::Pool3D: return "Pool3D";
    case LayerKind::Norm3D: return "Norm3D";
    case LayerKind::ReLU: return "ReLU";
  }
  return "?";
}

inline bool is_2d(LayerKind k) {
  return k == LayerKind::Conv2D || k == LayerKind::Pool2D ||
         k == LayerKind::Norm2D;
}
inline bool is_3d(LayerKind k) {
  return k == LayerKind::Conv3D || k == LayerKind::Pool3D ||
         k == LayerKind::Norm3D;
}
inline bool is_conv(LayerKind k) {
  return k == LayerKind::Conv2D || k == LayerKind::Conv3D;
}
inline bool is_pool(LayerKind k) {
  return k == LayerKind::Pool2D || k == LayerKind::Pool3D;
}
inline bool is_norm(LayerKind k) {
  return k == LayerKind::Norm2D || k == LayerKind::Norm3D;
}

/// Per-channel affine normalization parameters. scale and offset are learned;
/// the running statistics are buffers.
struct NormStats {
  std::vector<double> scale;
  std::vector<double> offset;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double eps = 1e-5;

  static NormStats identity(std::size_t channels) {
    return {std::vector<double>(channels, 1.0),
            std::vector<double>(channels, 0.0),
            std::vector<double>(channels, 0.0),
            std::vector<double>(channels, 1.0), 1e-5};
  }

  std::size_t channels() const { return scale.size(); }

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Dense weight array with an explicit shape (out x in x K x K for 2D conv,
/// out x in x 1 x K x K for 3D conv).
struct WeightArray {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  std::size_t expected_size() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }
};

struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  std::size_t kernel = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  /// Conv only, (out, in, K, K) row-major; the 3D depth extent is always 1 so
  /// the flat layout is shared by both kinds.
  std::vector<double> weights;
  /// Conv only, one per output channel.
  std::vector<double> bias;
  /// Conv3D only.
  std::optional<ShiftConfig> shift_prefix;
  ShiftOperator shift_operator = ShiftOperator::AlignShift;
  /// Norm only.
  NormStats norm;

  static LayerSpec conv2d(std::size_t in, std::size_t out, std::size_t k,
                          std::vector<double> weights = {},
                          std::vector<double> bias = {}) {
    LayerSpec l;
    l.kind = LayerKind::Conv2D;
    l.kernel = k;
    l.in_channels = in;
    l.out_channels = out;
    l.weights = weights.empty() ? std::vector<double>(out * in * k * k, 0.0)
                                : std::move(weights);
    l.bias = bias.empty() ? std::vector<double>(out, 0.0) : std::move(bias);
    l.validate();
    return l;
  }

  static LayerSpec pool2d(std::size_t k) {
    LayerSpec l;
    l.kind = LayerKind::Pool2D;
    l.kernel = k;
    l.validate();
    return l;
  }

  static LayerSpec norm2d(NormStats stats) {
    LayerSpec l;
    l.kind = LayerKind::Norm2D;
    l.in_channels = l.out_channels = stats.channels();
    l.norm = std::move(stats);
    l.validate();
    return l;
  }

  static LayerSpec relu() { return LayerSpec{}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;

  std::size_t parameter_count() const {
    if (is_conv(kind)) return weights.size() + bias.size();
    if (is_norm(kind)) return norm.scale.size() + norm.offset.size();
    return 0;
  }

  void validate() const {
    const std::string name = to_string(kind);
    if (is_conv(kind)) {
      if (kernel == 0 || in_channels == 0 || out_channels == 0) {
        throw ConversionError(name + ": kernel and channels must be positive");
      }
      if (weights.size() != out_channels * in_channels * kernel * kernel) {
        throw ConversionError(name + ": weight array holds " +
                              std::to_string(weights.size()) + " values, shape needs " +
                              std::to_string(out_channels * in_channels * kernel * kernel));
      }
      if (bias.size() != out_channels) {
        throw ConversionError(name + ": bias length must equal out_channels");
      }
    } else if (is_pool(kind)) {
      if (kernel == 0) throw ConversionError(name + ": kernel must be positive");
    } else if (is_norm(kind)) {
      const std::size_t c = norm.channels();
      if (c == 0 || norm.offset.size() != c || norm.running_mean.size() != c ||
          norm.running_var.size() != c) {
        throw ConversionError(name + ": inconsistent per-channel statistics");
      }
      if (in_channels != c || out_channels != c) {
        throw ConversionError(name + ": channel count disagrees with statistics");
      }
      if (!(norm.eps > 0.0)) throw ConversionError(name + ": eps must be positive");
    }
    if (shift_prefix && kind != LayerKind::Conv3D) {
      throw ConversionError(name + ": only Conv3D layers take a shift prefix");
    }
    if (shift_prefix) shift_prefix->validate(in_channels);
  }
};

struct NetworkSpec {
  std::size_t input_channels = 0;
  std::vector<LayerSpec> layers;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;

  /// Channel count after every layer; throws on incompatible neighbours.
  std::size_t output_channels() const {
    std::size_t c = input_channels;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      l.validate();
      if (is_conv(l.kind) || is_norm(l.kind)) {
        if (l.in_channels != c) {
          throw ConversionError("layer " + std::to_string(i) + " (" +
                                to_string(l.kind) + ") expects " +
                                std::to_string(l.in_channels) +
                                " channels, receives " + std::to_string(c));
        }
        c = l.out_channels;
      }
    }
    return c;
  }

  void validate() const {
    if (input_channels == 0) throw ConversionError("network needs input channels");
    (void)output_channels();
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.parameter_count();
    return n;
  }

  std::size_t shift_layer_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.shift_prefix.has_value() ? 1 : 0;
    return n;
  }

  bool is_3d() const {
    for (const auto& l : layers) {
      if (is_2d(l.kind)) return false;
    }
    return true;
  }
};

/// Inserts a depth axis of extent 1: (out, in, K, K) -> (out, in, 1, K, K).
inline WeightArray inflate_conv_weights(const WeightArray& w2d) {
  if (w2d.shape.size() != 4) {
    throw ConversionError("2D conv weights must have rank 4, got rank " +
                          std::to_string(w2d.shape.size()));
  }
  if (w2d.shape[2] != w2d.shape[3]) {
    throw ConversionError("2D conv kernel must be square");
  }
  for (std::size_t d : w2d.shape) {
    if (d == 0) throw ConversionError("2D conv weights have an empty axis");
  }
  if (w2d.values.size() != w2d.expected_size()) {
    throw ConversionError("2D conv weights hold " +
                          std::to_string(w2d.values.size()) +
                          " values, shape needs " +
                          std::to_string(w2d.expected_size()));
  }
  return WeightArray{{w2d.shape[0], w2d.shape[1], 1, w2d.shape[2], w2d.shape[3]},
                     w2d.values};
}

inline LayerSpec convert_layer(const LayerSpec& layer, bool attach_shift,
                               const ShiftConfig& cfg) {
  if (!is_2d(layer.kind) && layer.kind != LayerKind::ReLU) {
    throw ConversionError(std::string("cannot convert ") + to_string(layer.kind) +
                          ": not a 2D layer");
  }
  layer.validate();
  if (attach_shift && layer.kind != LayerKind::Conv2D) {
    throw ConversionError(std::string("shift prefix requested on ") +
                          to_string(layer.kind) + "; only convolutions take one");
  }
  LayerSpec out = layer;
  switch (layer.kind) {
    case LayerKind::Conv2D: {
      out.kind = LayerKind::Conv3D;
      out.weights = inflate_conv_weights(
                        {{layer.out_channels, layer.in_channels, layer.kernel,
                          layer.kernel},
                         layer.weights})
                        .values;
      if (attach_shift) {
        out.shift_prefix = cfg;
        out.shift_operator = ShiftOperator::AlignShift;
      }
      break;
    }
    case LayerKind::Pool2D: out.kind = LayerKind::Pool3D; break;
    case LayerKind::Norm2D: out.kind = LayerKind::Norm3D; break;
    default: break;
  }
  out.validate();
  return out;
}

/// Layerwise convert_layer. shift_policy holds one flag per layer.
inline NetworkSpec convert_network(const NetworkSpec& net,
                                   const std::vector<bool>& shift_policy,
                                   const ShiftConfig& cfg) {
  if (shift_policy.size() != net.layers.size()) {
    throw ConversionError("shift policy has " +
                          std::to_string(shift_policy.size()) +
                          " flags for " + std::to_string(net.layers.size()) +
                          " layers");
  }
  net.validate();
  NetworkSpec out;
  out.input_channels = net.input_channels;
  out.layers.reserve(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    out.layers.push_back(convert_layer(net.layers[i], shift_policy[i], cfg));
  }
  return out;
}

/// Switches every shift prefix of a converted network to the given operator.
inline NetworkSpec with_shift_operator(NetworkSpec net, ShiftOperator op) {
  for (auto& l : net.layers) {
    if (l.shift_prefix) l.shift_operator = op;
  }
  return net;
}

}  // namespace alignshift
