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

#include <cstdio>
#include <filesystem>
#include <limits>
#include <random>

#include "alignshift/tensor.hpp"
#include "alignshift/volume_io.hpp"
#include "oracles.hpp"

using namespace alignshift;

TEST(Volume, FillSemantics) {
  Volume4D a = new_volume(1, 2, 2, 2, 0.0);
  EXPECT_EQ(a.size(), 8u);
  for (double v : a.data()) EXPECT_EQ(v, 0.0);

  Volume4D b = new_volume(2, 3, 1, 1, 1.5);
  EXPECT_EQ(b.size(), 6u);
  for (double v : b.data()) EXPECT_EQ(v, 1.5);

  Volume4D c = new_volume(1, 1, 1, 1, -3.0);
  EXPECT_EQ(c.size(), 1u);
  EXPECT_EQ(c(0, 0, 0, 0), -3.0);
}

TEST(Volume, RejectsBadDimensions) {
  EXPECT_THROW(new_volume(0, 1, 1, 1, 0.0), DimensionError);
  EXPECT_THROW(new_volume(1, 1, 0, 1, 0.0), DimensionError);
  const std::size_t huge = std::numeric_limits<std::size_t>::max() / 2;
  EXPECT_THROW(new_volume(huge, huge, 1, 1, 0.0), DimensionError);
  EXPECT_THROW(Volume4D(Shape4{1, 1, 2, 2}, std::vector<double>(3)), DimensionError);
}

TEST(Volume, RowMajorLayout) {
  Volume4D v(2, 3, 4, 5);
  for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = static_cast<double>(i);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t d = 0; d < 3; ++d)
      for (std::size_t h = 0; h < 4; ++h)
        for (std::size_t w = 0; w < 5; ++w) {
          const double want = static_cast<double>(((c * 3 + d) * 4 + h) * 5 + w);
          EXPECT_EQ(v(c, d, h, w), want);
          EXPECT_EQ(v.at(c, d, h, w), want);
        }
  EXPECT_THROW(v.at(2, 0, 0, 0), IndexError);
  EXPECT_THROW(v.at(0, 0, 0, 5), IndexError);
}

TEST(Volume, SliceDepth) {
  Volume4D v(2, 3, 2, 2);
  for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = static_cast<double>(i);
  const auto first = slice_depth(v, 0);
  const auto last = slice_depth(v, 2);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t h = 0; h < 2; ++h)
      for (std::size_t w = 0; w < 2; ++w) {
        EXPECT_EQ(first(c, h, w), v(c, 0, h, w));
        EXPECT_EQ(last(c, h, w), v(c, 2, h, w));
      }
  EXPECT_THROW(slice_depth(v, 3), IndexError);
}

TEST(Volume, SumChannelSlice) {
  EXPECT_EQ(sum_channel_slice(new_volume(1, 1, 2, 2, 1.0), 0, 0), 4.0);
  EXPECT_EQ(sum_channel_slice(new_volume(1, 2, 2, 2, 0.0), 0, 1), 0.0);
  Volume4D v(1, 2, 2, 2);
  v(0, 1, 0, 0) = 7.0;
  EXPECT_EQ(sum_channel_slice(v, 0, 1), 7.0);
  EXPECT_EQ(sum_channel_slice(v, 0, 0), 0.0);
  EXPECT_THROW(sum_channel_slice(v, 1, 0), IndexError);
  EXPECT_THROW(sum_channel_slice(v, 0, 2), IndexError);
}

TEST(Volume, DotAndShapes) {
  Volume4D a = new_volume(1, 1, 1, 3, 2.0);
  Volume4D b = new_volume(1, 1, 1, 3, 0.5);
  EXPECT_DOUBLE_EQ(dot(a, b), 3.0);
  EXPECT_THROW(dot(a, new_volume(1, 1, 3, 1, 1.0)), ShapeError);
}

TEST(Thickness, RejectsNonPositive) {
  EXPECT_THROW(ThicknessMeta(0.0), DomainError);
  EXPECT_THROW(ThicknessMeta(-1.0), DomainError);
  EXPECT_THROW(ThicknessMeta(std::numeric_limits<double>::quiet_NaN()), DomainError);
  EXPECT_EQ(ThicknessMeta(2.5).spacing_mm(), 2.5);
}

TEST(VolumeIo, RoundTripIsBitExact) {
  std::mt19937_64 rng(3);
  Volume4D v = oracle::random_volume(rng, 2, 3, 4, 5);
  v(0, 0, 0, 0) = -0.0;
  v(1, 2, 3, 4) = 1e-300;
  const auto bytes = encode_v4d(v, ThicknessMeta(1.25));
  const auto back = decode_v4d(bytes);
  EXPECT_EQ(back.thickness.spacing_mm(), 1.25);
  ASSERT_EQ(back.volume.shape(), v.shape());
  EXPECT_EQ(back.volume, v);
  EXPECT_TRUE(std::signbit(back.volume(0, 0, 0, 0)));

  const auto path = (std::filesystem::temp_directory_path() / "alignshift_io_test.v4d").string();
  write_v4d(path, v, ThicknessMeta(5.0));
  const auto file = read_v4d(path);
  EXPECT_EQ(file.volume, v);
  EXPECT_EQ(file.thickness.spacing_mm(), 5.0);
  std::remove(path.c_str());
}

TEST(VolumeIo, RejectsMalformedInput) {
  Volume4D v = new_volume(1, 2, 2, 2, 1.0);
  auto bytes = encode_v4d(v, ThicknessMeta(1.0));
  EXPECT_THROW(decode_v4d(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(decode_v4d(bytes + "x"), FormatError);
  EXPECT_THROW(decode_v4d("NOPE 1 1 1 1 1\n"), FormatError);
  EXPECT_THROW(decode_v4d(""), FormatError);
  EXPECT_THROW(read_v4d("/nonexistent/dir/file.v4d"), Error);
}
