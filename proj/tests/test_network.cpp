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


#include <gtest/gtest.h>

#include <random>

#include "alignshift/network.hpp"
#include "oracles.hpp"

using namespace alignshift;

namespace {

using Planes = std::vector<std::vector<std::vector<double>>>;

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n) {
  return oracle::random_volume(rng, 1, 1, 1, n).storage();
}

std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

// conv(shift) -> relu -> pool -> conv(shift) -> norm
NetworkSpec toy_2d(std::mt19937_64& rng, std::size_t cin, std::size_t feat) {
  NetworkSpec net;
  net.input_channels = cin;
  net.layers.push_back(LayerSpec::conv2d(cin, feat, 3, random_values(rng, feat * cin * 9), random_values(rng, feat)));
  net.layers.push_back(LayerSpec::relu());
  net.layers.push_back(LayerSpec::pool2d(2));
  net.layers.push_back(LayerSpec::conv2d(feat, feat, 3, random_values(rng, feat * feat * 9), random_values(rng, feat)));
  NormStats st = NormStats::identity(feat);
  st.scale = random_values(rng, feat);
  st.offset = random_values(rng, feat);
  st.running_mean = random_values(rng, feat);
  for (double& v : st.running_var) v = 1.0 + 0.5 * std::abs(random_values(rng, 1)[0]);
  net.layers.push_back(LayerSpec::norm2d(st));
  return net;
}

// The 2D network evaluated on one slice with plain loops.
Planes run_2d(const NetworkSpec& net, Planes x) {
  for (const auto& l : net.layers) {
    switch (l.kind) {
      case LayerKind::Conv2D: x = oracle::conv2d(x, l.weights, l.bias, l.kernel); break;
      case LayerKind::ReLU:
        for (auto& c : x)
          for (auto& row : c)
            for (double& v : row) v = std::max(v, 0.0);
        break;
      case LayerKind::Pool2D: {
        Planes out(x.size(), std::vector<std::vector<double>>(x[0].size() / l.kernel,
                                                              std::vector<double>(x[0][0].size() / l.kernel)));
        for (std::size_t c = 0; c < x.size(); ++c)
          for (std::size_t h = 0; h < out[c].size(); ++h)
            for (std::size_t w = 0; w < out[c][h].size(); ++w) {
              double m = x[c][h * l.kernel][w * l.kernel];
              for (std::size_t i = 0; i < l.kernel; ++i)
                for (std::size_t j = 0; j < l.kernel; ++j) m = std::max(m, x[c][h * l.kernel + i][w * l.kernel + j]);
              out[c][h][w] = m;
            }
        x = std::move(out);
        break;
      }
      case LayerKind::Norm2D:
        for (std::size_t c = 0; c < x.size(); ++c)
          for (auto& row : x[c])
            for (double& v : row)
              v = l.norm.scale[c] * (v - l.norm.running_mean[c]) / std::sqrt(l.norm.running_var[c] + l.norm.eps) +
                  l.norm.offset[c];
        break;
      default: throw std::logic_error("unexpected layer");
    }
  }
  return x;
}

Planes slice_of(const Volume4D& v, std::size_t d) {
  Planes p(v.channels(), std::vector<std::vector<double>>(v.height(), std::vector<double>(v.width())));
  for (std::size_t c = 0; c < v.channels(); ++c)
    for (std::size_t h = 0; h < v.height(); ++h)
      for (std::size_t w = 0; w < v.width(); ++w) p[c][h][w] = v(c, d, h, w);
  return p;
}

const std::vector<bool> kPolicy = {true, false, false, true, false};

}  // namespace

TEST(Network, DepthConstantInteriorMatches2d) {
  std::mt19937_64 rng(1);
  const NetworkSpec net2d = toy_2d(rng, 4, 8);
  Volume4D plane = oracle::random_volume(rng, 4, 1, 8, 8);
  const std::size_t depth = 7;
  Volume4D x(4, depth, 8, 8);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t d = 0; d < depth; ++d)
      for (std::size_t i = 0; i < 64; ++i) x.plane(c, d)[i] = plane.plane(c, 0)[i];
  const Planes ref = run_2d(net2d, slice_of(plane, 0));

  const NetworkSpec net3d = convert_network(net2d, kPolicy, ShiftConfig{1, 1, 2.0});
  const std::size_t margin = net3d.shift_layer_count();
  for (auto op : {ShiftOperator::AlignShift, ShiftOperator::Tsm}) {
    for (double s : {2.0, 3.0, 5.0, 10.0}) {
      const Volume4D y = network_forward(with_shift_operator(net3d, op), x, ThicknessMeta(s));
      for (std::size_t d = margin; d + margin < depth; ++d) {
        const Planes got = slice_of(y, d);
        for (std::size_t c = 0; c < got.size(); ++c)
          for (std::size_t h = 0; h < got[c].size(); ++h)
            for (std::size_t w = 0; w < got[c][h].size(); ++w) EXPECT_NEAR(got[c][h][w], ref[c][h][w], 1e-10);
      }
    }
  }
}

TEST(Network, NoShiftIsPerSlice2d) {
  std::mt19937_64 rng(2);
  const NetworkSpec net2d = toy_2d(rng, 3, 4);
  const NetworkSpec net3d = convert_network(net2d, std::vector<bool>(5, false), {});
  const Volume4D x = oracle::random_volume(rng, 3, 5, 6, 6);
  const Volume4D y = network_forward(net3d, x, ThicknessMeta(5.0));
  for (std::size_t d = 0; d < 5; ++d) {
    const Planes ref = run_2d(net2d, slice_of(x, d));
    const Planes got = slice_of(y, d);
    for (std::size_t c = 0; c < got.size(); ++c)
      for (std::size_t h = 0; h < got[c].size(); ++h)
        for (std::size_t w = 0; w < got[c][h].size(); ++w) EXPECT_NEAR(got[c][h][w], ref[c][h][w], 1e-12);
  }
}

TEST(Network, EndToEndGradient) {
  std::mt19937_64 rng(3);
  for (auto op : {ShiftOperator::AlignShift, ShiftOperator::Tsm}) {
    for (auto mode : {NormMode::Inference, NormMode::Training}) {
      NetworkSpec net = with_shift_operator(convert_network(toy_2d(rng, 4, 4), kPolicy, ShiftConfig{1, 1, 2.0}), op);
      Volume4D x = oracle::random_volume(rng, 4, 4, 6, 6);
      const Volume4D r = oracle::random_volume(rng, 4, 4, 3, 3);
      const ThicknessMeta s(5.0);
      auto loss = [&] { return dot(network_forward(net, x, s, nullptr, mode), r); };
      NetworkState state;
      network_forward(net, x, s, &state, mode);
      const NetworkGrads g = network_backward(net, r, state);
      EXPECT_LT(oracle::max_relative_error(vec(g.input.data()), oracle::numeric_gradient(x.storage(), loss)), 1e-5);
      auto params = parameter_views(net);
      const auto grads = gradient_views(net, g);
      ASSERT_EQ(params.size(), grads.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        std::vector<double> p(params[i].begin(), params[i].end());
        auto numeric = [&] {
          std::copy(p.begin(), p.end(), params[i].begin());
          return loss();
        };
        const auto num = oracle::numeric_gradient(p, numeric);
        std::copy(p.begin(), p.end(), params[i].begin());
        EXPECT_LT(oracle::max_relative_error(vec(grads[i]), num), 1e-5) << "parameter block " << i;
      }
    }
  }
}

TEST(Network, ThicknessChangesOutputOnlyWithFractionalShift) {
  std::mt19937_64 rng(4);
  const NetworkSpec net2d = toy_2d(rng, 4, 4);
  const Volume4D x = oracle::random_volume(rng, 4, 5, 4, 4);
  const NetworkSpec align = convert_network(net2d, kPolicy, ShiftConfig{1, 1, 2.0});
  EXPECT_NE(network_forward(align, x, ThicknessMeta(2.0)), network_forward(align, x, ThicknessMeta(5.0)));
  EXPECT_NE(network_forward(align, x, ThicknessMeta(4.0)), network_forward(align, x, ThicknessMeta(5.0)));

  const NetworkSpec tsm = with_shift_operator(align, ShiftOperator::Tsm);
  EXPECT_EQ(network_forward(tsm, x, ThicknessMeta(2.0)), network_forward(tsm, x, ThicknessMeta(5.0)));
  // a TSM net equals the AlignShift net at alpha = 1
  EXPECT_EQ(network_forward(tsm, x, ThicknessMeta(2.0)), network_forward(align, x, ThicknessMeta(2.0)));

  const NetworkSpec plain = convert_network(net2d, std::vector<bool>(5, false), {});
  EXPECT_EQ(network_forward(plain, x, ThicknessMeta(2.0)), network_forward(plain, x, ThicknessMeta(5.0)));
}

TEST(Network, Errors) {
  std::mt19937_64 rng(5);
  const NetworkSpec net2d = toy_2d(rng, 4, 4);
  const Volume4D x = oracle::random_volume(rng, 4, 3, 4, 4);
  EXPECT_THROW(network_forward(net2d, x, ThicknessMeta(2.0)), ConversionError);
  const NetworkSpec net = convert_network(net2d, kPolicy, ShiftConfig{1, 1, 2.0});
  EXPECT_THROW(network_forward(net, x, ThicknessMeta(1.0)), AlignFactorError);
  EXPECT_THROW(network_forward(net, oracle::random_volume(rng, 3, 3, 4, 4), ThicknessMeta(2.0)), ShapeError);
  EXPECT_THROW(network_backward(net, x, NetworkState{}), StateError);
}

TEST(Network, SgdReducesLoss) {
  std::mt19937_64 rng(6);
  NetworkSpec net = convert_network(toy_2d(rng, 3, 4), kPolicy, ShiftConfig{1, 1, 2.0});
  const Volume4D x = oracle::random_volume(rng, 3, 3, 4, 4);
  const Volume4D target = oracle::random_volume(rng, 4, 3, 2, 2);
  const ThicknessMeta s(4.0);
  auto mse = [&](const Volume4D& y, Volume4D* grad) {
    double l = 0.0;
    if (grad) *grad = Volume4D(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double e = y.data()[i] - target.data()[i];
      l += 0.5 * e * e;
      if (grad) grad->data()[i] = e;
    }
    return l;
  };
  const double before = mse(network_forward(net, x, s), nullptr);
  for (int it = 0; it < 20; ++it) {
    NetworkState state;
    Volume4D grad;
    const Volume4D y = network_forward(net, x, s, &state);
    mse(y, &grad);
    apply_sgd(net, network_backward(net, grad, state), 0.01);
  }
  EXPECT_LT(mse(network_forward(net, x, s), nullptr), before);
}
