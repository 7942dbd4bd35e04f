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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "alignshift/error.hpp"

namespace alignshift {

/// Extents of a rank-4 (C, D, H, W) tensor.
struct Shape4 {
  std::size_t channels = 0;
  std::size_t depth = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t plane() const { return height * width; }
  std::size_t size() const { return channels * depth * height * width; }

  friend bool operator==(const Shape4&, const Shape4&) = default;

  std::string str() const {
    return std::to_string(channels) + "x" + std::to_string(depth) + "x" +
           std::to_string(height) + "x" + std::to_string(width);
  }
};

/// Physical distance between adjacent depth slices, in millimeters.
class ThicknessMeta {
 public:
  explicit ThicknessMeta(double spacing_mm) : spacing_mm_(spacing_mm) {
    if (!(spacing_mm > 0.0) || !std::isfinite(spacing_mm)) {
      throw DomainError("slice spacing must be a positive finite number, got " +
                        std::to_string(spacing_mm));
    }
  }

  double spacing_mm() const { return spacing_mm_; }

  friend bool operator==(const ThicknessMeta&, const ThicknessMeta&) = default;

 private:
  double spacing_mm_;
};

/// Read-only C x H x W view of one depth slice of a Volume4D.
///
/// Channel planes of a depth slice are not contiguous in (C, D, H, W) order, so
/// the view keeps the channel stride and exposes one contiguous plane per
/// channel.
class DepthSliceView {
 public:
  DepthSliceView(const double* base, std::size_t channels, std::size_t height,
                 std::size_t width, std::size_t channel_stride)
      : base_(base),
        channels_(channels),
        height_(height),
        width_(width),
        channel_stride_(channel_stride) {}

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }

  double operator()(std::size_t c, std::size_t h, std::size_t w) const {
    return base_[c * channel_stride_ + h * width_ + w];
  }

  std::span<const double> plane(std::size_t c) const {
    return {base_ + c * channel_stride_, height_ * width_};
  }

 private:
  const double* base_;
  std::size_t channels_;
  std::size_t height_;
  std::size_t width_;
  std::size_t channel_stride_;
};

/// Dense channels x depth x height x width tensor of doubles, row-major.
class Volume4D {
 public:
  Volume4D() = default;

  Volume4D(std::size_t channels, std::size_t depth, std::size_t height,
           std::size_t width, double fill = 0.0)
      : shape_{channels, depth, height, width} {
    data_.assign(checked_size(shape_), fill);
  }

  explicit Volume4D(Shape4 shape, double fill = 0.0)
      : Volume4D(shape.channels, shape.depth, shape.height, shape.width,
                 fill) {}

  Volume4D(Shape4 shape, std::vector<double> data) : shape_(shape) {
    if (data.size() != checked_size(shape)) {
      throw DimensionError("data length " + std::to_string(data.size()) +
                           " does not match shape " + shape.str());
    }
    data_ = std::move(data);
  }

  const Shape4& shape() const { return shape_; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t depth() const { return shape_.depth; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(std::size_t c, std::size_t d, std::size_t h,
                    std::size_t w) const {
    return ((c * shape_.depth + d) * shape_.height + h) * shape_.width + w;
  }

  double& operator()(std::size_t c, std::size_t d, std::size_t h,
                     std::size_t w) {
    return data_[index(c, d, h, w)];
  }
  double operator()(std::size_t c, std::size_t d, std::size_t h,
                    std::size_t w) const {
    return data_[index(c, d, h, w)];
  }

  /// Bounds-checked element access.
  double& at(std::size_t c, std::size_t d, std::size_t h, std::size_t w) {
    check_index(c, d, h, w);
    return (*this)(c, d, h, w);
  }
  double at(std::size_t c, std::size_t d, std::size_t h, std::size_t w) const {
    check_index(c, d, h, w);
    return (*this)(c, d, h, w);
  }

  /// Contiguous H*W plane at (c, d).
  std::span<double> plane(std::size_t c, std::size_t d) {
    return {data_.data() + index(c, d, 0, 0), shape_.plane()};
  }
  std::span<const double> plane(std::size_t c, std::size_t d) const {
    return {data_.data() + index(c, d, 0, 0), shape_.plane()};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  void fill(double value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const Volume4D&, const Volume4D&) = default;

 private:
  static std::size_t checked_size(const Shape4& s) {
    const std::size_t dims[] = {s.channels, s.depth, s.height, s.width};
    std::size_t total = 1;
    for (std::size_t d : dims) {
      if (d == 0) {
        throw DimensionError("volume dimensions must be positive, got " +
                             s.str());
      }
      if (total > std::numeric_limits<std::size_t>::max() / sizeof(double) /
                      d) {
        throw DimensionError("volume dimensions overflow: " + s.str());
      }
      total *= d;
    }
    return total;
  }

  void check_index(std::size_t c, std::size_t d, std::size_t h,
                   std::size_t w) const {
    if (c >= shape_.channels || d >= shape_.depth || h >= shape_.height ||
        w >= shape_.width) {
      throw IndexError("index (" + std::to_string(c) + "," +
                       std::to_string(d) + "," + std::to_string(h) + "," +
                       std::to_string(w) + ") out of range for " +
                       shape_.str());
    }
  }

  Shape4 shape_{};
  std::vector<double> data_;
};

inline Volume4D new_volume(std::size_t channels, std::size_t depth,
                           std::size_t height, std::size_t width, double fill) {
  return Volume4D(channels, depth, height, width, fill);
}

inline DepthSliceView slice_depth(const Volume4D& v, std::size_t d) {
  if (d >= v.depth()) {
    throw IndexError("depth index " + std::to_string(d) +
                     " out of range for depth " + std::to_string(v.depth()));
  }
  return DepthSliceView(v.data().data() + v.index(0, d, 0, 0), v.channels(),
                        v.height(), v.width(), v.depth() * v.shape().plane());
}

inline double sum_channel_slice(const Volume4D& v, std::size_t c,
                                std::size_t d) {
  if (c >= v.channels() || d >= v.depth()) {
    throw IndexError("(channel " + std::to_string(c) + ", depth " +
                     std::to_string(d) + ") out of range for " +
                     v.shape().str());
  }
  double sum = 0.0;
  for (double x : v.plane(c, d)) sum += x;
  return sum;
}

/// Full elementwise inner product.
inline double dot(const Volume4D& a, const Volume4D& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("dot: shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
  double acc = 0.0;
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

inline bool all_finite(const Volume4D& v) {
  return std::all_of(v.data().begin(), v.data().end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace alignshift
