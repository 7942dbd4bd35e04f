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

#include "alignshift/resample.hpp"
#include "oracles.hpp"

using namespace alignshift;

namespace {

Volume4D depth_profile(const std::vector<double>& values) {
  Volume4D v(1, values.size(), 1, 1);
  v.storage() = values;
  return v;
}

}  // namespace

TEST(ThicknessPolicy, Routing) {
  const auto thin = thickness_policy(ThicknessMeta(1.0), 2.0);
  EXPECT_TRUE(thin.normalize());
  EXPECT_EQ(thin.target_mm, 2.0);
  const auto thick = thickness_policy(ThicknessMeta(5.0), 2.0);
  EXPECT_EQ(thick.action, ThicknessAction::KeepOriginal);
  EXPECT_FALSE(thick.target_mm.has_value());
  const auto edge = thickness_policy(ThicknessMeta(2.0), 2.0);
  EXPECT_TRUE(edge.normalize());
  EXPECT_THROW(thickness_policy(ThicknessMeta(1.0), 0.0), DomainError);
  EXPECT_THROW(thickness_policy(ThicknessMeta(1.0), -2.0), DomainError);
}

TEST(Resample, Examples) {
  auto [a, sa] = resample_depth(depth_profile({0, 4, 8}), ThicknessMeta(4.0), 2.0);
  EXPECT_EQ(sa.spacing_mm(), 2.0);
  EXPECT_EQ(a.storage(), (std::vector<double>{0, 2, 4, 6, 8}));

  auto [b, sb] = resample_depth(depth_profile({0, 10}), ThicknessMeta(5.0), 2.5);
  EXPECT_EQ(sb.spacing_mm(), 2.5);
  EXPECT_EQ(b.storage(), (std::vector<double>{0, 5, 10}));
}

TEST(Resample, IdentityWhenTargetEqualsSpacing) {
  std::mt19937_64 rng(1);
  const Volume4D v = oracle::random_volume(rng, 2, 5, 3, 3);
  auto [out, s] = resample_depth(v, ThicknessMeta(2.0), 2.0);
  EXPECT_EQ(out, v);
  EXPECT_EQ(s.spacing_mm(), 2.0);
  // a single slice is fine when nothing needs interpolating
  const Volume4D one = oracle::random_volume(rng, 1, 1, 2, 2);
  EXPECT_EQ(resample_depth(one, ThicknessMeta(1.0), 1.0).first, one);
}

TEST(Resample, Errors) {
  EXPECT_THROW(resample_depth(depth_profile({1}), ThicknessMeta(1.0), 2.0), ResampleError);
  EXPECT_THROW(resample_depth(depth_profile({1, 2}), ThicknessMeta(1.0), 0.0), DomainError);
}

TEST(Resample, MatchesPerPositionOracle) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> depth(2, 30);
  const double pairs[][2] = {{1, 2}, {5, 2}, {2.5, 2}, {0.7, 2}, {4, 1.5}, {1.25, 3.1}};
  for (const auto& p : pairs) {
    const Volume4D v = oracle::random_volume(rng, 2, depth(rng), 2, 3);
    auto [out, s] = resample_depth(v, ThicknessMeta(p[0]), p[1]);
    EXPECT_EQ(out.depth(), resampled_depth(v.depth(), p[0], p[1]));
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t h = 0; h < 2; ++h)
        for (std::size_t w = 0; w < 3; ++w) {
          std::vector<double> profile;
          for (std::size_t d = 0; d < v.depth(); ++d) profile.push_back(v(c, d, h, w));
          for (std::size_t j = 0; j < out.depth(); ++j) {
            const double pos = static_cast<double>(j) * p[1] / p[0];
            EXPECT_NEAR(out(c, j, h, w), oracle::interp_at(profile, pos), 1e-12);
            // monotone bounds: inside the bracketing pair
            const auto lo = std::min<std::size_t>(static_cast<std::size_t>(pos), v.depth() - 1);
            const auto hi = std::min<std::size_t>(lo + 1, v.depth() - 1);
            const double a = profile[lo], b = profile[hi];
            EXPECT_GE(out(c, j, h, w), std::min(a, b) - 1e-15);
            EXPECT_LE(out(c, j, h, w), std::max(a, b) + 1e-15);
          }
        }
  }
}

TEST(Resample, EndpointsOnCommensurateGrids) {
  std::mt19937_64 rng(3);
  // (D-1)*s/t integral: both grid ends coincide
  const double cases[][3] = {{5, 1, 2}, {9, 2, 1}, {3, 5, 2.5}, {11, 1, 2}, {4, 6, 2}};
  for (const auto& c : cases) {
    const Volume4D v = oracle::random_volume(rng, 1, static_cast<std::size_t>(c[0]), 2, 2);
    auto [out, s] = resample_depth(v, ThicknessMeta(c[1]), c[2]);
    for (std::size_t h = 0; h < 2; ++h)
      for (std::size_t w = 0; w < 2; ++w) {
        EXPECT_EQ(out(0, 0, h, w), v(0, 0, h, w));
        EXPECT_EQ(out(0, out.depth() - 1, h, w), v(0, v.depth() - 1, h, w));
      }
  }
}

TEST(Resample, UpsamplingIsExactOnAffineDepth) {
  for (double target : {0.5, 0.7, 1.0, 1.3, 1.9}) {
    const std::size_t depth = 8;
    const double s = 2.0;
    Volume4D v(1, depth, 1, 2);
    for (std::size_t d = 0; d < depth; ++d) {
      v(0, d, 0, 0) = 3.0 + 0.25 * static_cast<double>(d);
      v(0, d, 0, 1) = -1.0 - 2.0 * static_cast<double>(d);
    }
    auto [out, t] = resample_depth(v, ThicknessMeta(s), target);
    for (std::size_t j = 0; j < out.depth(); ++j) {
      const double pos = std::min(static_cast<double>(j) * target / s, static_cast<double>(depth - 1));
      EXPECT_NEAR(out(0, j, 0, 0), 3.0 + 0.25 * pos, 1e-12);
      EXPECT_NEAR(out(0, j, 0, 1), -1.0 - 2.0 * pos, 1e-12);
    }
  }
}

TEST(Resample, DepthCount) {
  EXPECT_EQ(resampled_depth(3, 4.0, 2.0), 5u);
  EXPECT_EQ(resampled_depth(2, 5.0, 2.5), 3u);
  EXPECT_EQ(resampled_depth(50, 1.0, 2.0), 26u);  // 24.5 rounds half away from zero
  EXPECT_EQ(resampled_depth(1, 1.0, 2.0), 1u);
}
