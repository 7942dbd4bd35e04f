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

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alignshift/convert.hpp"
#include "alignshift/error.hpp"
#include "alignshift/nn.hpp"
#include "alignshift/shift.hpp"
#include "alignshift/tensor.hpp"

namespace alignshift {

struct LayerCache {
  ConvCache conv;
  ReluCache relu;
  PoolCache pool;
  NormCache norm;
};

/// Activations recorded by network_forward for network_backward.
struct NetworkState {
  std::vector<LayerCache> layers;
  std::optional<ThicknessMeta> thickness;
};

/// Gradients of one layer, laid out like its parameters. Layers without
/// parameters keep every vector empty.
struct LayerGrads {
  std::vector<double> weights;
  std::vector<double> bias;
  std::vector<double> scale;
  std::vector<double> offset;
};

struct NetworkGrads {
  std::vector<LayerGrads> layers;
  Volume4D input;
};

namespace detail {

inline void apply_shift(Volume4D& x, const LayerSpec& l, const ThicknessMeta& s) {
  if (l.shift_operator == ShiftOperator::Tsm) {
    tsm_shift(x, *l.shift_prefix);
  } else {
    align_shift(x, s, *l.shift_prefix);
  }
}

inline void apply_shift_adjoint(Volume4D& g, const LayerSpec& l,
                                const ThicknessMeta& s) {
  if (l.shift_operator == ShiftOperator::Tsm) {
    tsm_shift_adjoint(g, *l.shift_prefix);
  } else {
    align_shift_adjoint(g, s, *l.shift_prefix);
  }
}

}  // namespace detail

/// Runs a converted (all-3D) network. The slice spacing drives every
/// AlignShift prefix; TSM prefixes ignore it.
inline Volume4D network_forward(const NetworkSpec& net, const Volume4D& x,
                                const ThicknessMeta& thickness,
                                NetworkState* state = nullptr,
                                NormMode mode = NormMode::Inference) {
  net.validate();
  if (!net.is_3d()) {
    throw ConversionError("network_forward needs a converted 3D network");
  }
  if (x.channels() != net.input_channels) {
    throw ShapeError("network expects " + std::to_string(net.input_channels) +
                     " input channels, got " + std::to_string(x.channels()));
  }
  if (state) {
    state->layers.assign(net.layers.size(), LayerCache{});
    state->thickness = thickness;
  }
  Volume4D cur = x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    LayerCache* lc = state ? &state->layers[i] : nullptr;
    switch (l.kind) {
      case LayerKind::Conv3D:
        if (l.shift_prefix) detail::apply_shift(cur, l, thickness);
        cur = conv3d_1kk_forward(cur, l.weights, l.bias, l.kernel,
                                 lc ? &lc->conv : nullptr);
        break;
      case LayerKind::Pool3D:
        cur = pool3d_1kk_forward(cur, l.kernel, lc ? &lc->pool : nullptr);
        break;
      case LayerKind::Norm3D:
        cur = norm3d_forward(cur, l.norm, mode, lc ? &lc->norm : nullptr);
        break;
      case LayerKind::ReLU:
        cur = relu_forward(cur, lc ? &lc->relu : nullptr);
        break;
      default:
        throw ConversionError("unexpected 2D layer in network_forward");
    }
  }
  return cur;
}

/// Backpropagates through the layers recorded in `state`, applying the shift
/// adjoints in reverse order.
inline NetworkGrads network_backward(const NetworkSpec& net,
                                     const Volume4D& grad_out,
                                     const NetworkState& state) {
  if (!state.thickness || state.layers.size() != net.layers.size()) {
    throw StateError("network backward called without a matching forward");
  }
  NetworkGrads grads;
  grads.layers.resize(net.layers.size());
  Volume4D g = grad_out;
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    const LayerSpec& l = net.layers[i];
    const LayerCache& lc = state.layers[i];
    LayerGrads& lg = grads.layers[i];
    switch (l.kind) {
      case LayerKind::Conv3D: {
        ConvGrads cg = conv3d_1kk_backward(g, l.weights, l.kernel, lc.conv);
        lg.weights = std::move(cg.weights);
        lg.bias = std::move(cg.bias);
        g = std::move(cg.input);
        if (l.shift_prefix) detail::apply_shift_adjoint(g, l, *state.thickness);
        break;
      }
      case LayerKind::Pool3D:
        g = pool3d_1kk_backward(g, lc.pool);
        break;
      case LayerKind::Norm3D: {
        NormGrads ng = norm3d_backward(g, l.norm, lc.norm);
        lg.scale = std::move(ng.scale);
        lg.offset = std::move(ng.offset);
        g = std::move(ng.input);
        break;
      }
      case LayerKind::ReLU:
        g = relu_backward(g, lc.relu);
        break;
      default:
        throw ConversionError("unexpected 2D layer in network_backward");
    }
  }
  grads.input = std::move(g);
  return grads;
}

/// Learnable parameters in a fixed order: per layer conv weights, conv bias,
/// norm scale, norm offset.
inline std::vector<std::span<double>> parameter_views(NetworkSpec& net) {
  std::vector<std::span<double>> out;
  for (auto& l : net.layers) {
    if (is_conv(l.kind)) {
      out.emplace_back(l.weights);
      out.emplace_back(l.bias);
    } else if (is_norm(l.kind)) {
      out.emplace_back(l.norm.scale);
      out.emplace_back(l.norm.offset);
    }
  }
  return out;
}

/// Gradients in the order of parameter_views.
inline std::vector<std::span<const double>> gradient_views(
    const NetworkSpec& net, const NetworkGrads& grads) {
  std::vector<std::span<const double>> out;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    const auto& g = grads.layers.at(i);
    if (is_conv(l.kind)) {
      out.emplace_back(g.weights);
      out.emplace_back(g.bias);
    } else if (is_norm(l.kind)) {
      out.emplace_back(g.scale);
      out.emplace_back(g.offset);
    }
  }
  return out;
}

inline void apply_sgd(NetworkSpec& net, const NetworkGrads& grads, double lr) {
  auto params = parameter_views(net);
  const auto gs = gradient_views(net, grads);
  for (std::size_t i = 0; i < params.size(); ++i) sgd_step(params[i], gs[i], lr);
}

}  // namespace alignshift
