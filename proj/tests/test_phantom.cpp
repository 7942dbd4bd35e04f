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

#include "alignshift/phantom.hpp"

using namespace alignshift;

TEST(Phantom, Deterministic) {
  const Phantom a = generate_phantom(42, 24, 2);
  const Phantom b = generate_phantom(42, 24, 2);
  EXPECT_EQ(a.volume, b.volume);
  ASSERT_EQ(a.blobs.size(), 2u);
  EXPECT_EQ(a.blobs[0].x_mm, b.blobs[0].x_mm);
  EXPECT_EQ(a.key_depth_mm, b.key_depth_mm);
  const Phantom c = generate_phantom(43, 24, 2);
  EXPECT_NE(a.volume, c.volume);
}

TEST(Phantom, ShapeAndContents) {
  const PhantomGeometry g;
  const Phantom p = generate_phantom(7, g, 3);
  EXPECT_EQ(p.volume.shape(), (Shape4{1, g.fine_slices(), g.size, g.size}));
  EXPECT_EQ(p.thickness().spacing_mm(), g.fine_mm);
  EXPECT_EQ(p.distractors.size(), g.distractors);
  EXPECT_GE(p.key_depth_mm, g.key_depth_min_mm);
  EXPECT_LE(p.key_depth_mm, g.key_depth_max_mm);
  for (const Blob& b : p.blobs) {
    EXPECT_GT(blob_voxel_count(p, b), 0u);
    EXPECT_GE(b.radius_mm, g.radius_min_mm);
    EXPECT_LE(b.radius_mm, g.radius_max_mm);
    EXPECT_LT(b.key_slice, p.volume.depth());
    // the blob center carries signal
    const auto h = static_cast<std::size_t>(b.y_mm / g.pixel_mm);
    const auto w = static_cast<std::size_t>(b.x_mm / g.pixel_mm);
    EXPECT_GT(p.volume(0, b.key_slice, h, w), 0.0);
  }
  EXPECT_TRUE(all_finite(p.volume));
}

TEST(Phantom, Errors) {
  EXPECT_THROW(generate_phantom(1, 24, 0), GenerationError);
  // far too many lesions for a tiny image
  EXPECT_THROW(generate_phantom(1, 8, 30), GenerationError);
}

TEST(Acquire, IdentityAtFineSpacing) {
  const Phantom p = generate_phantom(3, 16, 1);
  auto [v, s] = acquire(p, p.geometry.fine_mm);
  EXPECT_EQ(v, p.volume);
  EXPECT_EQ(s.spacing_mm(), p.geometry.fine_mm);
  EXPECT_THROW(acquire(p, p.geometry.fine_mm / 2), DomainError);
}

TEST(Acquire, SlabsAverageFineSlices) {
  const Phantom p = generate_phantom(4, 24, 2);
  for (double mm : {1.0, 2.0, 5.0}) {
    auto [v, s] = acquire(p, mm);
    EXPECT_EQ(s.spacing_mm(), mm);
    const auto per = static_cast<std::size_t>(mm / p.geometry.fine_mm);
    ASSERT_EQ(v.depth(), acquired_slices(p, mm));
    for (std::size_t j = 0; j < v.depth(); ++j) {
      // sum oracle: slab sum times slab size equals the fine-slice sum
      double fine_sum = 0.0;
      for (std::size_t k = j * per; k < (j + 1) * per; ++k) fine_sum += sum_channel_slice(p.volume, 0, k);
      EXPECT_NEAR(sum_channel_slice(v, 0, j) * static_cast<double>(per), fine_sum, 1e-9);
    }
  }
}

TEST(Acquire, ThinAndThickAgreeAtMatchingDepths) {
  // a 5 mm slab is the mean of the five 1 mm slabs it covers
  const Phantom p = generate_phantom(5, 24, 2);
  auto [thin, a] = acquire(p, 1.0);
  auto [thick, b] = acquire(p, 5.0);
  for (std::size_t j = 0; j < thick.depth(); ++j)
    for (std::size_t h = 0; h < 24; ++h)
      for (std::size_t w = 0; w < 24; ++w) {
        double mean = 0.0;
        for (std::size_t k = 5 * j; k < 5 * j + 5; ++k) mean += thin(0, k, h, w);
        EXPECT_NEAR(thick(0, j, h, w), mean / 5.0, 1e-12);
      }
}

TEST(Acquire, TruncatedLastSlab) {
  PhantomGeometry g;
  g.size = 16;
  g.depth_mm = 51.0;  // 4 mm slabs leave a 3 mm remainder
  const Phantom p = generate_phantom(6, g, 1);
  auto [v, s] = acquire(p, 4.0);
  ASSERT_EQ(v.depth(), 13u);
  // last slab averages the final 6 fine slices only
  for (std::size_t h = 0; h < 16; ++h)
    for (std::size_t w = 0; w < 16; ++w) {
      double mean = 0.0;
      for (std::size_t k = 96; k < 102; ++k) mean += p.volume(0, k, h, w);
      EXPECT_NEAR(v(0, 12, h, w), mean / 6.0, 1e-12);
    }
}

TEST(Acquire, NoiseIsSeeded) {
  const Phantom p = generate_phantom(8, 16, 1);
  auto [a, sa] = acquire(p, 5.0);
  auto [b, sb] = acquire(p, 5.0);
  const Volume4D clean = a;
  add_acquisition_noise(a, 0.3, 99);
  add_acquisition_noise(b, 0.3, 99);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, clean);
  Volume4D c = clean;
  add_acquisition_noise(c, 0.0, 99);
  EXPECT_EQ(c, clean);
}
