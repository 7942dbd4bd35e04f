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
#include <optional>
#include <string>
#include <utility>

#include "alignshift/error.hpp"
#include "alignshift/tensor.hpp"

namespace alignshift {

enum class ThicknessAction { Normalize, KeepOriginal };

struct ThicknessPolicyDecision {
  ThicknessAction action = ThicknessAction::KeepOriginal;
  /// Set iff action == Normalize.
  std::optional<double> target_mm;

  bool normalize() const { return action == ThicknessAction::Normalize; }
};

/// Thin volumes (s <= r) are normalized to r; thick ones keep their spacing.
inline ThicknessPolicyDecision thickness_policy(const ThicknessMeta& thickness,
                                                double reference_mm) {
  if (!(reference_mm > 0.0) || !std::isfinite(reference_mm)) {
    throw DomainError("reference thickness must be positive, got " +
                      std::to_string(reference_mm));
  }
  if (thickness.spacing_mm() <= reference_mm) {
    return {ThicknessAction::Normalize, reference_mm};
  }
  return {ThicknessAction::KeepOriginal, std::nullopt};
}

/// Number of output slices when resampling depth D from spacing s to target.
inline std::size_t resampled_depth(std::size_t depth, double spacing_mm,
                                   double target_mm) {
  const double span = static_cast<double>(depth - 1) * spacing_mm / target_mm;
  return static_cast<std::size_t>(std::llround(span)) + 1;
}

/// Linear interpolation along depth onto a grid of spacing target_mm that
/// starts at input slice 0. Positions past the last input slice are clamped.
inline std::pair<Volume4D, ThicknessMeta> resample_depth(
    const Volume4D& v, const ThicknessMeta& thickness, double target_mm) {
  if (!(target_mm > 0.0) || !std::isfinite(target_mm)) {
    throw DomainError("target thickness must be positive, got " +
                      std::to_string(target_mm));
  }
  const double s = thickness.spacing_mm();
  if (target_mm == s) return {v, thickness};
  if (v.depth() < 2) {
    throw ResampleError("cannot resample a single-slice volume from " +
                        std::to_string(s) + "mm to " +
                        std::to_string(target_mm) + "mm");
  }

  const std::size_t out_depth = resampled_depth(v.depth(), s, target_mm);
  const double last = static_cast<double>(v.depth() - 1);
  Volume4D out(v.channels(), out_depth, v.height(), v.width());
  for (std::size_t j = 0; j < out_depth; ++j) {
    const double pos =
        std::clamp(static_cast<double>(j) * target_mm / s, 0.0, last);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(lo);
    for (std::size_t c = 0; c < v.channels(); ++c) {
      auto dst = out.plane(c, j);
      auto a = v.plane(c, lo);
      if (frac == 0.0) {
        std::copy(a.begin(), a.end(), dst.begin());
        continue;
      }
      auto b = v.plane(c, lo + 1);
      for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = (1.0 - frac) * a[i] + frac * b[i];
      }
    }
  }
  return {std::move(out), ThicknessMeta(target_mm)};
}

}  // namespace alignshift
