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

// Depth-shift operators.
//
// Channels are split into three consecutive blocks:
//
//   [0, up)            shifted up:   slice d receives data from slice d+1
//   [up, up+down)      shifted down: slice d receives data from slice d-1
//   [up+down, C)       static
//
// Border slices read zeros. tsm_shift moves data by one whole slice.
// align_shift moves it by the fractional step alpha = r / s, building each
// output slice as the linear interpolation between a slice and its neighbour,
// so the displacement is always r millimeters whatever the input spacing s.
// Both maps are linear; the *_adjoint functions apply their exact transposes.

#pragma once

#include <algorithm>
#include <cstddef>
#include <string>

#include "alignshift/error.hpp"
#include "alignshift/tensor.hpp"

namespace alignshift {

struct ShiftConfig {
  std::size_t shift_up = 0;
  std::size_t shift_down = 0;
  double reference_mm = 2.0;

  friend bool operator==(const ShiftConfig&, const ShiftConfig&) = default;

  /// Throws ConfigError unless up + down < channels and r > 0.
  void validate(std::size_t channels) const {
    if (!(reference_mm > 0.0)) {
      throw ConfigError("reference thickness must be positive, got " +
                        std::to_string(reference_mm));
    }
    if (shift_up + shift_down >= channels) {
      throw ConfigError("shift channels up=" + std::to_string(shift_up) +
                        " down=" + std::to_string(shift_down) +
                        " leave no static channel out of " +
                        std::to_string(channels));
    }
  }
};

/// ceil(C/8) channels in each direction.
inline ShiftConfig default_shift_config(std::size_t channels,
                                        double reference_mm = 2.0) {
  const std::size_t part = (channels + 7) / 8;
  ShiftConfig cfg{part, part, reference_mm};
  cfg.validate(channels);
  return cfg;
}

/// Fractional shift step alpha = r / s, restricted to (0, 1].
class AlignFactor {
 public:
  AlignFactor(const ThicknessMeta& thickness, double reference_mm) {
    if (!(reference_mm > 0.0)) {
      throw ConfigError("reference thickness must be positive");
    }
    if (thickness.spacing_mm() < reference_mm) {
      throw AlignFactorError(
          "slice spacing " + std::to_string(thickness.spacing_mm()) +
          "mm is thinner than the reference " + std::to_string(reference_mm) +
          "mm; resample to the reference thickness first");
    }
    alpha_ = reference_mm / thickness.spacing_mm();
  }

  double alpha() const { return alpha_; }

 private:
  double alpha_ = 1.0;
};

namespace detail {

// out[d] = a*in[d+1] + (1-a)*in[d], in[D] = 0. Ascending order keeps in[d+1]
// unread-before-write, so no scratch buffer is needed.
inline void blend_from_next(Volume4D& x, std::size_t c, double a) {
  const double b = 1.0 - a;
  const std::size_t depth = x.depth();
  for (std::size_t d = 0; d < depth; ++d) {
    auto cur = x.plane(c, d);
    if (d + 1 < depth) {
      auto next = x.plane(c, d + 1);
      for (std::size_t i = 0; i < cur.size(); ++i) {
        cur[i] = a * next[i] + b * cur[i];
      }
    } else {
      for (double& v : cur) v = a * 0.0 + b * v;
    }
  }
}

// out[d] = a*in[d-1] + (1-a)*in[d], in[-1] = 0. Descending order.
inline void blend_from_prev(Volume4D& x, std::size_t c, double a) {
  const double b = 1.0 - a;
  for (std::size_t d = x.depth(); d-- > 0;) {
    auto cur = x.plane(c, d);
    if (d > 0) {
      auto prev = x.plane(c, d - 1);
      for (std::size_t i = 0; i < cur.size(); ++i) {
        cur[i] = a * prev[i] + b * cur[i];
      }
    } else {
      for (double& v : cur) v = a * 0.0 + b * v;
    }
  }
}

inline void move_from_next(Volume4D& x, std::size_t c) {
  const std::size_t depth = x.depth();
  for (std::size_t d = 0; d + 1 < depth; ++d) {
    auto next = x.plane(c, d + 1);
    std::copy(next.begin(), next.end(), x.plane(c, d).begin());
  }
  auto last = x.plane(c, depth - 1);
  std::fill(last.begin(), last.end(), 0.0);
}

inline void move_from_prev(Volume4D& x, std::size_t c) {
  for (std::size_t d = x.depth() - 1; d > 0; --d) {
    auto prev = x.plane(c, d - 1);
    std::copy(prev.begin(), prev.end(), x.plane(c, d).begin());
  }
  auto first = x.plane(c, 0);
  std::fill(first.begin(), first.end(), 0.0);
}

}  // namespace detail

inline Volume4D& tsm_shift(Volume4D& x, const ShiftConfig& cfg) {
  cfg.validate(x.channels());
  for (std::size_t c = 0; c < cfg.shift_up; ++c) detail::move_from_next(x, c);
  for (std::size_t c = cfg.shift_up; c < cfg.shift_up + cfg.shift_down; ++c) {
    detail::move_from_prev(x, c);
  }
  return x;
}

inline Volume4D& tsm_shift_adjoint(Volume4D& g, const ShiftConfig& cfg) {
  cfg.validate(g.channels());
  for (std::size_t c = 0; c < cfg.shift_up; ++c) detail::move_from_prev(g, c);
  for (std::size_t c = cfg.shift_up; c < cfg.shift_up + cfg.shift_down; ++c) {
    detail::move_from_next(g, c);
  }
  return g;
}

inline Volume4D& align_shift(Volume4D& x, const ThicknessMeta& thickness,
                             const ShiftConfig& cfg) {
  cfg.validate(x.channels());
  const double alpha = AlignFactor(thickness, cfg.reference_mm).alpha();
  for (std::size_t c = 0; c < cfg.shift_up; ++c) {
    detail::blend_from_next(x, c, alpha);
  }
  for (std::size_t c = cfg.shift_up; c < cfg.shift_up + cfg.shift_down; ++c) {
    detail::blend_from_prev(x, c, alpha);
  }
  return x;
}

/// Transpose of align_shift: up-shift blocks blend from the previous slice and
/// down-shift blocks from the next one, with the same alpha.
inline Volume4D& align_shift_adjoint(Volume4D& g, const ThicknessMeta& thickness,
                                     const ShiftConfig& cfg) {
  cfg.validate(g.channels());
  const double alpha = AlignFactor(thickness, cfg.reference_mm).alpha();
  for (std::size_t c = 0; c < cfg.shift_up; ++c) {
    detail::blend_from_prev(g, c, alpha);
  }
  for (std::size_t c = cfg.shift_up; c < cfg.shift_up + cfg.shift_down; ++c) {
    detail::blend_from_next(g, c, alpha);
  }
  return g;
}

}  // namespace alignshift
