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

// Synthetic lesion phantoms and a slab-averaging CT acquisition model.
//
// A phantom is a finely sampled single-channel volume holding
//   - lesions: ellipsoids with a parabolic profile, short along depth, all
//     centered near one key depth;
//   - distractors: straight tubes running through the whole depth with the
//     same in-plane cross-section and intensity as a lesion.
// On the key slice a lesion and a tube look alike; only depth context tells
// them apart, and a thick slab blurs exactly that context.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "alignshift/error.hpp"
#include "alignshift/tensor.hpp"

namespace alignshift {

struct PhantomGeometry {
  std::size_t size = 24;       // in-plane pixels per side
  double pixel_mm = 1.0;       // in-plane pixel pitch
  double fine_mm = 0.5;        // depth spacing of the ground-truth volume
  double depth_mm = 50.0;      // physical depth extent
  double key_depth_min_mm = 22.5;
  double key_depth_max_mm = 27.5;
  double center_jitter_mm = 1.0;  // lesion centers scatter around the key depth
  double radius_min_mm = 2.5;
  double radius_max_mm = 3.5;
  double depth_radius_min_mm = 2.0;
  double depth_radius_max_mm = 5.0;
  double amplitude_min = 0.6;
  double amplitude_max = 1.2;
  std::size_t distractors = 2;
  // Depth semi-axis range of distractors; 0 makes them run through the volume.
  double distractor_depth_radius_min_mm = 0.0;
  double distractor_depth_radius_max_mm = 0.0;
  double noise_sigma = 0.0;    // iid Gaussian noise on the fine volume
  double min_gap_mm = 1.0;     // clearance between in-plane footprints
  std::size_t max_retries = 200;

  std::size_t fine_slices() const {
    return static_cast<std::size_t>(std::llround(depth_mm / fine_mm));
  }
};

struct Blob {
  double x_mm = 0.0;
  double y_mm = 0.0;
  double z_mm = 0.0;
  double radius_mm = 0.0;        // in-plane semi-axis
  double depth_radius_mm = 0.0;  // depth semi-axis
  double amplitude = 0.0;
  std::size_t key_slice = 0;     // fine slice holding the center
};

struct Tube {
  double x_mm = 0.0;
  double y_mm = 0.0;
  double z_mm = 0.0;
  double radius_mm = 0.0;
  double depth_radius_mm = 0.0;  // 0: unbounded along depth
  double amplitude = 0.0;
};

struct Phantom {
  Volume4D volume;  // 1 x fine_slices x size x size
  PhantomGeometry geometry;
  double key_depth_mm = 0.0;
  std::vector<Blob> blobs;
  std::vector<Tube> distractors;

  ThicknessMeta thickness() const { return ThicknessMeta(geometry.fine_mm); }
};

namespace detail {

inline bool footprint_clear(double x, double y, double r,
                            const std::vector<std::pair<double, double>>& centers,
                            const std::vector<double>& radii, double gap) {
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const double dx = x - centers[i].first;
    const double dy = y - centers[i].second;
    if (std::sqrt(dx * dx + dy * dy) < r + radii[i] + gap) return false;
  }
  return true;
}

}  // namespace detail

/// Number of fine voxels inside a blob's ellipsoid.
inline std::size_t blob_voxel_count(const Phantom& p, const Blob& b) {
  const auto& g = p.geometry;
  std::size_t n = 0;
  for (std::size_t k = 0; k < g.fine_slices(); ++k) {
    const double z = (static_cast<double>(k) + 0.5) * g.fine_mm;
    for (std::size_t i = 0; i < g.size; ++i) {
      const double y = (static_cast<double>(i) + 0.5) * g.pixel_mm;
      for (std::size_t j = 0; j < g.size; ++j) {
        const double x = (static_cast<double>(j) + 0.5) * g.pixel_mm;
        const double rho2 = std::pow((x - b.x_mm) / b.radius_mm, 2) +
                            std::pow((y - b.y_mm) / b.radius_mm, 2) +
                            std::pow((z - b.z_mm) / b.depth_radius_mm, 2);
        if (rho2 < 1.0) ++n;
      }
    }
  }
  return n;
}

inline Phantom generate_phantom(std::uint64_t seed, const PhantomGeometry& geometry,
                                std::size_t n_blobs) {
  if (n_blobs == 0) throw GenerationError("a phantom needs at least one lesion");
  if (geometry.size == 0 || !(geometry.fine_mm > 0.0) ||
      !(geometry.depth_mm >= geometry.fine_mm) || !(geometry.pixel_mm > 0.0)) {
    throw GenerationError("invalid phantom geometry");
  }
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  Phantom p;
  p.geometry = geometry;
  p.key_depth_mm = uniform(geometry.key_depth_min_mm, geometry.key_depth_max_mm);
  const double extent = static_cast<double>(geometry.size) * geometry.pixel_mm;

  std::vector<std::pair<double, double>> centers;
  std::vector<double> radii;
  auto place = [&](double r, double& x, double& y) {
    for (std::size_t attempt = 0; attempt < geometry.max_retries; ++attempt) {
      x = uniform(r, extent - r);
      y = uniform(r, extent - r);
      if (detail::footprint_clear(x, y, r, centers, radii, geometry.min_gap_mm)) {
        centers.emplace_back(x, y);
        radii.push_back(r);
        return true;
      }
    }
    return false;
  };

  for (std::size_t n = 0; n < n_blobs; ++n) {
    Blob b;
    b.radius_mm = uniform(geometry.radius_min_mm, geometry.radius_max_mm);
    b.depth_radius_mm =
        uniform(geometry.depth_radius_min_mm, geometry.depth_radius_max_mm);
    b.amplitude = uniform(geometry.amplitude_min, geometry.amplitude_max);
    b.z_mm = p.key_depth_mm +
             uniform(-geometry.center_jitter_mm, geometry.center_jitter_mm);
    if (2.0 * b.radius_mm > extent || b.z_mm - b.depth_radius_mm < 0.0 ||
        b.z_mm + b.depth_radius_mm > geometry.depth_mm) {
      throw GenerationError("lesion does not fit inside the volume");
    }
    if (!place(b.radius_mm, b.x_mm, b.y_mm)) {
      throw GenerationError("could not place lesion " + std::to_string(n) +
                            " without overlap after " +
                            std::to_string(geometry.max_retries) + " attempts");
    }
    b.key_slice = std::min(geometry.fine_slices() - 1,
                           static_cast<std::size_t>(b.z_mm / geometry.fine_mm));
    p.blobs.push_back(b);
  }
  for (std::size_t n = 0; n < geometry.distractors; ++n) {
    Tube t;
    t.radius_mm = uniform(geometry.radius_min_mm, geometry.radius_max_mm);
    t.amplitude = uniform(geometry.amplitude_min, geometry.amplitude_max);
    if (geometry.distractor_depth_radius_max_mm > 0.0) {
      t.depth_radius_mm = uniform(geometry.distractor_depth_radius_min_mm,
                                  geometry.distractor_depth_radius_max_mm);
      t.z_mm = p.key_depth_mm +
               uniform(-geometry.center_jitter_mm, geometry.center_jitter_mm);
    }
    if (!place(t.radius_mm, t.x_mm, t.y_mm)) {
      throw GenerationError("could not place distractor " + std::to_string(n) +
                            " without overlap after " +
                            std::to_string(geometry.max_retries) + " attempts");
    }
    p.distractors.push_back(t);
  }

  const std::size_t depth = geometry.fine_slices();
  p.volume = Volume4D(1, depth, geometry.size, geometry.size);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t k = 0; k < depth; ++k) {
    const double z = (static_cast<double>(k) + 0.5) * geometry.fine_mm;
    for (std::size_t i = 0; i < geometry.size; ++i) {
      const double y = (static_cast<double>(i) + 0.5) * geometry.pixel_mm;
      for (std::size_t j = 0; j < geometry.size; ++j) {
        const double x = (static_cast<double>(j) + 0.5) * geometry.pixel_mm;
        double v = 0.0;
        for (const Blob& b : p.blobs) {
          const double rho2 = std::pow((x - b.x_mm) / b.radius_mm, 2) +
                              std::pow((y - b.y_mm) / b.radius_mm, 2) +
                              std::pow((z - b.z_mm) / b.depth_radius_mm, 2);
          if (rho2 < 1.0) v += b.amplitude * (1.0 - rho2);
        }
        for (const Tube& t : p.distractors) {
          double rho2 = std::pow((x - t.x_mm) / t.radius_mm, 2) +
                        std::pow((y - t.y_mm) / t.radius_mm, 2);
          if (t.depth_radius_mm > 0.0) rho2 += std::pow((z - t.z_mm) / t.depth_radius_mm, 2);
          if (rho2 < 1.0) v += t.amplitude * (1.0 - rho2);
        }
        if (geometry.noise_sigma > 0.0) v += geometry.noise_sigma * noise(rng);
        p.volume(0, k, i, j) = v;
      }
    }
  }
  return p;
}

inline Phantom generate_phantom(std::uint64_t seed, std::size_t size,
                                std::size_t n_blobs) {
  PhantomGeometry g;
  g.size = size;
  return generate_phantom(seed, g, n_blobs);
}

/// Number of slabs of thickness slice_mm covering the phantom depth; the last
/// slab is truncated when the depth is not a multiple of slice_mm.
inline std::size_t acquired_slices(const Phantom& p, double slice_mm) {
  const double n = p.geometry.depth_mm / slice_mm;
  return static_cast<std::size_t>(std::ceil(n - 1e-9));
}

/// Slice-averaging acquisition: acquired slice j is the overlap-weighted mean
/// of the fine slices inside [j*slice_mm, (j+1)*slice_mm). A slab running past
/// the volume is truncated to the part inside it.
inline std::pair<Volume4D, ThicknessMeta> acquire(const Phantom& p,
                                                  double slice_mm) {
  const double fine = p.geometry.fine_mm;
  if (!(slice_mm >= fine * (1.0 - 1e-12))) {
    throw DomainError("acquisition slice " + std::to_string(slice_mm) +
                      "mm is finer than the phantom spacing " +
                      std::to_string(fine) + "mm");
  }
  const Volume4D& src = p.volume;
  if (slice_mm == fine) return {src, ThicknessMeta(fine)};
  const std::size_t slabs = acquired_slices(p, slice_mm);
  Volume4D out(src.channels(), slabs, src.height(), src.width());
  for (std::size_t j = 0; j < slabs; ++j) {
    const double lo = static_cast<double>(j) * slice_mm;
    const double hi = std::min(lo + slice_mm, p.geometry.depth_mm);
    const auto k0 = static_cast<std::size_t>(std::floor(lo / fine + 1e-9));
    double total = 0.0;
    for (std::size_t k = k0; k < src.depth(); ++k) {
      const double a = std::max(lo, static_cast<double>(k) * fine);
      const double b = std::min(hi, static_cast<double>(k + 1) * fine);
      if (b <= a + 1e-12) {
        if (static_cast<double>(k) * fine >= hi) break;
        continue;
      }
      const double wgt = b - a;
      total += wgt;
      for (std::size_t c = 0; c < src.channels(); ++c) {
        auto dst = out.plane(c, j);
        auto s = src.plane(c, k);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += wgt * s[i];
      }
    }
    for (std::size_t c = 0; c < src.channels(); ++c) {
      for (double& v : out.plane(c, j)) v /= total;
    }
  }
  return {std::move(out), ThicknessMeta(slice_mm)};
}

/// Adds iid Gaussian detector noise to every acquired voxel.
inline void add_acquisition_noise(Volume4D& v, double sigma, std::uint64_t seed) {
  if (!(sigma > 0.0)) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& x : v.data()) x += noise(rng);
}

}  // namespace alignshift
