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

// Thin/thick gap experiment.
//
// Every phantom is acquired twice, once with thin and once with thick slabs.
// Three variants of one small heat-map network are trained on the mixed
// cohort and scored with FROC on the held-out phantoms:
//
//   2.5D        all volumes resampled to the reference thickness, the D slices
//               around the key slice stacked as input channels of a 2D net;
//   TSM         all volumes resampled to the reference thickness, converted
//               3D net with whole-slice shifts;
//   AlignShift  thin volumes resampled to the reference, thick volumes kept at
//               their own spacing, converted 3D net with aligned shifts.
//
// The gap of a variant is |diff_thin| + |diff_thick|, where diff is the
// cohort's average sensitivity minus that of all images together.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "alignshift/convert.hpp"
#include "alignshift/error.hpp"
#include "alignshift/froc.hpp"
#include "alignshift/network.hpp"
#include "alignshift/nn.hpp"
#include "alignshift/phantom.hpp"
#include "alignshift/resample.hpp"
#include "alignshift/shift.hpp"
#include "alignshift/tensor.hpp"

namespace alignshift::bench {

enum class Strategy { Stacked2p5D, Tsm, AlignShift };
enum class Cohort { All, Thin, Thick };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::Stacked2p5D: return "2.5D";
    case Strategy::Tsm: return "TSM";
    case Strategy::AlignShift: return "AlignShift";
  }
  return "?";
}

inline const char* to_string(Cohort c) {
  switch (c) {
    case Cohort::All: return "All";
    case Cohort::Thin: return "Thin";
    case Cohort::Thick: return "Thick";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& s) {
  for (Strategy v : {Strategy::Stacked2p5D, Strategy::Tsm, Strategy::AlignShift}) {
    if (s == to_string(v)) return v;
  }
  throw FormatError("unknown strategy '" + s + "'");
}

struct TrainConfig {
  double lr = 0.1;
  std::size_t epochs = 10;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
};

struct BenchConfig {
  // Required keys.
  std::uint64_t seed = 0;
  std::size_t n_phantoms = 0;
  double thin_mm = 1.0;
  double thick_mm = 5.0;
  double reference_mm = 2.0;
  std::size_t epochs = 0;
  double lr = 0.0;
  std::size_t slices_per_sample = 7;
  // Optional keys.
  std::size_t image_size = 24;
  std::size_t lesions_per_image = 2;
  std::size_t distractors_per_image = 2;
  double noise_sigma = 0.5;       // detector noise per acquired voxel
  double fine_noise_sigma = 0.0;  // noise on the fine phantom, averaged by slabs
  double lesion_depth_min_mm = 2.0;
  double lesion_depth_max_mm = 5.0;
  double distractor_depth_min_mm = 0.0;
  double distractor_depth_max_mm = 0.0;
  std::size_t channels = 8;
  std::size_t batch_size = 4;
  double test_fraction = 0.5;
  double pos_weight = 1.0;
  double detect_threshold = 0.02;
  std::vector<Strategy> strategies = {Strategy::Stacked2p5D, Strategy::Tsm,
                                      Strategy::AlignShift};

  PhantomGeometry geometry() const {
    PhantomGeometry g;
    g.size = image_size;
    g.distractors = distractors_per_image;
    g.noise_sigma = fine_noise_sigma;
    g.depth_radius_min_mm = lesion_depth_min_mm;
    g.depth_radius_max_mm = lesion_depth_max_mm;
    g.distractor_depth_radius_min_mm = distractor_depth_min_mm;
    g.distractor_depth_radius_max_mm = distractor_depth_max_mm;
    return g;
  }

  TrainConfig train() const { return {lr, epochs, batch_size, seed}; }

  std::size_t test_phantoms() const {
    return static_cast<std::size_t>(
        std::llround(static_cast<double>(n_phantoms) * test_fraction));
  }

  void validate() const {
    if (n_phantoms < 2) throw FormatError("n_phantoms must be at least 2");
    if (!(thin_mm > 0.0) || !(thick_mm > 0.0) || !(reference_mm > 0.0)) {
      throw FormatError("thicknesses must be positive");
    }
    if (thin_mm > reference_mm || thick_mm <= reference_mm) {
      throw FormatError("need thin_mm <= reference_mm < thick_mm");
    }
    if (epochs == 0 || !(lr > 0.0) || batch_size == 0) {
      throw FormatError("epochs, lr and batch_size must be positive");
    }
    if (slices_per_sample == 0 || slices_per_sample % 2 == 0) {
      throw FormatError("slices_per_sample must be odd");
    }
    if (channels < 3) throw FormatError("channels must be at least 3");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
      throw FormatError("test_fraction must lie in (0, 1)");
    }
    if (test_phantoms() == 0 || test_phantoms() >= n_phantoms) {
      throw FormatError("split leaves an empty train or test set");
    }
    if (!(lesion_depth_min_mm > 0.0) || lesion_depth_max_mm < lesion_depth_min_mm) {
      throw FormatError("need 0 < lesion_depth_min_mm <= lesion_depth_max_mm");
    }
    if (strategies.empty()) throw FormatError("no strategies selected");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T v{};
  in >> v;
  std::string rest;
  if (!in || (in >> rest)) {
    throw FormatError("config: bad value '" + text + "' for " + key);
  }
  if constexpr (std::is_unsigned_v<T>) {
    if (!text.empty() && text[0] == '-') {
      throw FormatError("config: negative value for " + key);
    }
  }
  return v;
}

}  // namespace detail

/// Parses a flat key=value config; '#' starts a comment.
inline BenchConfig parse_bench_config(const std::string& text) {
  BenchConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw FormatError("config: duplicate key " + key);
    using detail::parse_value;
    if (key == "seed") c.seed = parse_value<std::uint64_t>(key, val);
    else if (key == "n_phantoms") c.n_phantoms = parse_value<std::size_t>(key, val);
    else if (key == "thin_mm") c.thin_mm = parse_value<double>(key, val);
    else if (key == "thick_mm") c.thick_mm = parse_value<double>(key, val);
    else if (key == "reference_mm") c.reference_mm = parse_value<double>(key, val);
    else if (key == "epochs") c.epochs = parse_value<std::size_t>(key, val);
    else if (key == "lr") c.lr = parse_value<double>(key, val);
    else if (key == "slices_per_sample") c.slices_per_sample = parse_value<std::size_t>(key, val);
    else if (key == "image_size") c.image_size = parse_value<std::size_t>(key, val);
    else if (key == "lesions_per_image") c.lesions_per_image = parse_value<std::size_t>(key, val);
    else if (key == "distractors_per_image") c.distractors_per_image = parse_value<std::size_t>(key, val);
    else if (key == "noise_sigma") c.noise_sigma = parse_value<double>(key, val);
    else if (key == "lesion_depth_min_mm") c.lesion_depth_min_mm = parse_value<double>(key, val);
    else if (key == "lesion_depth_max_mm") c.lesion_depth_max_mm = parse_value<double>(key, val);
    else if (key == "distractor_depth_min_mm") c.distractor_depth_min_mm = parse_value<double>(key, val);
    else if (key == "distractor_depth_max_mm") c.distractor_depth_max_mm = parse_value<double>(key, val);
    else if (key == "fine_noise_sigma") c.fine_noise_sigma = parse_value<double>(key, val);
    else if (key == "channels") c.channels = parse_value<std::size_t>(key, val);
    else if (key == "batch_size") c.batch_size = parse_value<std::size_t>(key, val);
    else if (key == "test_fraction") c.test_fraction = parse_value<double>(key, val);
    else if (key == "pos_weight") c.pos_weight = parse_value<double>(key, val);
    else if (key == "detect_threshold") c.detect_threshold = parse_value<double>(key, val);
    else if (key == "strategies") {
      c.strategies.clear();
      std::istringstream ss(val);
      std::string item;
      while (std::getline(ss, item, ',')) c.strategies.push_back(parse_strategy(detail::trim(item)));
    } else {
      throw FormatError("config: unknown key " + key);
    }
  }
  for (const char* req : {"seed", "n_phantoms", "thin_mm", "thick_mm", "reference_mm",
                          "epochs", "lr", "slices_per_sample"}) {
    if (!seen.count(req)) throw FormatError(std::string("config: missing key ") + req);
  }
  c.validate();
  return c;
}

inline BenchConfig load_bench_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_bench_config(ss.str());
}

/// Deterministic per-purpose seed derived from the run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// ---------------------------------------------------------------------------
// Samples

struct Lesion2D {
  double x_mm = 0.0;
  double y_mm = 0.0;
  double radius_mm = 0.0;
};

struct Sample {
  Volume4D input;
  ThicknessMeta thickness{1.0};
  Volume4D target;  // 1 x 1 x H x W, 1 inside lesion footprints
  std::vector<Lesion2D> lesions;
  Cohort cohort = Cohort::Thin;
  std::size_t phantom = 0;
};

/// Depth window of `count` slices centered on `center`; slices outside the
/// volume are zero.
inline Volume4D depth_window(const Volume4D& v, std::ptrdiff_t center,
                             std::size_t count) {
  Volume4D out(v.channels(), count, v.height(), v.width());
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(count / 2);
  for (std::size_t k = 0; k < count; ++k) {
    const std::ptrdiff_t src = center - half + static_cast<std::ptrdiff_t>(k);
    if (src < 0 || src >= static_cast<std::ptrdiff_t>(v.depth())) continue;
    for (std::size_t c = 0; c < v.channels(); ++c) {
      auto s = v.plane(c, static_cast<std::size_t>(src));
      std::copy(s.begin(), s.end(), out.plane(c, k).begin());
    }
  }
  return out;
}

/// Depth slices become channels: (1, D, H, W) -> (D, 1, H, W). The flat data
/// is unchanged.
inline Volume4D stack_slices_as_channels(Volume4D v) {
  if (v.channels() != 1) throw ShapeError("slice stacking expects one channel");
  const Shape4 s{v.depth(), 1, v.height(), v.width()};
  return Volume4D(s, std::move(v.storage()));
}

inline Sample prepare_sample(const Phantom& phantom, std::size_t phantom_index,
                             const Volume4D& acquired, const ThicknessMeta& acquired_mm,
                             Cohort cohort, Strategy strategy, const BenchConfig& cfg) {
  const double r = cfg.reference_mm;
  bool normalize = true;
  if (strategy == Strategy::AlignShift) {
    normalize = thickness_policy(acquired_mm, r).normalize();
  }
  Volume4D grid = acquired;
  ThicknessMeta spacing = acquired_mm;
  if (normalize) std::tie(grid, spacing) = resample_depth(acquired, acquired_mm, r);

  // Resampled grids start at the center of the first acquired slab.
  const double origin = 0.5 * acquired_mm.spacing_mm();
  auto key = static_cast<std::ptrdiff_t>(
      std::llround((phantom.key_depth_mm - origin) / spacing.spacing_mm()));
  key = std::clamp<std::ptrdiff_t>(key, 0, static_cast<std::ptrdiff_t>(grid.depth()) - 1);

  Sample s;
  s.input = depth_window(grid, key, cfg.slices_per_sample);
  s.thickness = spacing;
  if (strategy == Strategy::Stacked2p5D) s.input = stack_slices_as_channels(std::move(s.input));
  s.cohort = cohort;
  s.phantom = phantom_index;
  const auto& g = phantom.geometry;
  s.target = Volume4D(1, 1, g.size, g.size);
  for (const Blob& b : phantom.blobs) {
    s.lesions.push_back({b.x_mm, b.y_mm, b.radius_mm});
    for (std::size_t i = 0; i < g.size; ++i) {
      for (std::size_t j = 0; j < g.size; ++j) {
        const double x = (static_cast<double>(j) + 0.5) * g.pixel_mm;
        const double y = (static_cast<double>(i) + 0.5) * g.pixel_mm;
        if (std::hypot(x - b.x_mm, y - b.y_mm) <= b.radius_mm) s.target(0, 0, i, j) = 1.0;
      }
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Heat-map model: converted backbone -> depth squeeze -> ReLU -> KxK head.

struct HeatmapModel {
  NetworkSpec backbone;
  std::size_t squeeze_out = 0;
  std::vector<double> squeeze_w;
  std::vector<double> squeeze_b;
  std::size_t head_k = 3;
  std::vector<double> head_w;
  std::vector<double> head_b;

  std::size_t parameter_count() const {
    return backbone.parameter_count() + squeeze_w.size() + squeeze_b.size() +
           head_w.size() + head_b.size();
  }
};

struct ModelState {
  NetworkState backbone;
  SqueezeCache squeeze;
  ReluCache relu;
  ConvCache head;
};

struct ModelGrads {
  NetworkGrads backbone;
  std::vector<double> squeeze_w;
  std::vector<double> squeeze_b;
  std::vector<double> head_w;
  std::vector<double> head_b;
};

namespace detail {

inline std::vector<double> he_uniform(std::mt19937_64& rng, std::size_t n,
                                      std::size_t fan_in) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<double> out(n);
  for (double& v : out) v = u(rng);
  return out;
}

}  // namespace detail

/// The 2D backbone every strategy starts from: three 3x3 conv + ReLU stages.
inline NetworkSpec make_backbone_2d(std::size_t in_channels, std::size_t features,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  NetworkSpec net;
  net.input_channels = in_channels;
  std::size_t c = in_channels;
  for (int stage = 0; stage < 3; ++stage) {
    net.layers.push_back(LayerSpec::conv2d(
        c, features, 3, detail::he_uniform(rng, features * c * 9, c * 9)));
    net.layers.push_back(LayerSpec::relu());
    c = features;
  }
  return net;
}

inline HeatmapModel build_model(Strategy strategy, const BenchConfig& cfg) {
  const std::size_t depth = cfg.slices_per_sample;
  const bool stacked = strategy == Strategy::Stacked2p5D;
  const std::uint64_t init_seed = derive_seed(cfg.seed, 1, 0);
  const NetworkSpec net2d =
      make_backbone_2d(stacked ? depth : 1, cfg.channels, init_seed);

  // Shift prefixes go on the second and third convolutions; the first one sees
  // a single input channel, which leaves nothing to partition.
  std::vector<bool> policy(net2d.layers.size(), false);
  if (!stacked) policy[2] = policy[4] = true;
  const ShiftConfig shift = default_shift_config(cfg.channels, cfg.reference_mm);

  HeatmapModel m;
  m.backbone = convert_network(net2d, policy, shift);
  if (strategy == Strategy::Tsm) m.backbone = with_shift_operator(m.backbone, ShiftOperator::Tsm);

  std::mt19937_64 rng(derive_seed(cfg.seed, 2, 0));
  const std::size_t squeeze_depth = stacked ? 1 : depth;
  m.squeeze_out = cfg.channels;
  m.squeeze_w = detail::he_uniform(rng, m.squeeze_out * cfg.channels * squeeze_depth,
                                   cfg.channels * squeeze_depth);
  m.squeeze_b.assign(m.squeeze_out, 0.0);
  m.head_w = detail::he_uniform(rng, m.head_k * m.head_k * m.squeeze_out,
                                m.head_k * m.head_k * m.squeeze_out);
  m.head_b.assign(1, 0.0);
  return m;
}

inline Volume4D model_forward(const HeatmapModel& m, const Volume4D& x,
                              const ThicknessMeta& s, ModelState* state = nullptr) {
  Volume4D f = network_forward(m.backbone, x, s, state ? &state->backbone : nullptr);
  f = depth_squeeze(f, m.squeeze_w, m.squeeze_out, m.squeeze_b,
                    state ? &state->squeeze : nullptr);
  f = relu_forward(f, state ? &state->relu : nullptr);
  return conv3d_1kk_forward(f, m.head_w, m.head_b, m.head_k, state ? &state->head : nullptr);
}

inline ModelGrads model_backward(const HeatmapModel& m, const Volume4D& grad_logits,
                                 const ModelState& state) {
  ModelGrads g;
  ConvGrads hg = conv3d_1kk_backward(grad_logits, m.head_w, m.head_k, state.head);
  g.head_w = std::move(hg.weights);
  g.head_b = std::move(hg.bias);
  Volume4D gr = relu_backward(hg.input, state.relu);
  SqueezeGrads sg = depth_squeeze_backward(gr, m.squeeze_w, state.squeeze);
  g.squeeze_w = std::move(sg.weights);
  g.squeeze_b = std::move(sg.bias);
  g.backbone = network_backward(m.backbone, sg.input, state.backbone);
  return g;
}

inline std::vector<std::span<double>> parameter_views(HeatmapModel& m) {
  auto out = parameter_views(m.backbone);
  out.emplace_back(m.squeeze_w);
  out.emplace_back(m.squeeze_b);
  out.emplace_back(m.head_w);
  out.emplace_back(m.head_b);
  return out;
}

inline std::vector<std::span<const double>> gradient_views(const HeatmapModel& m,
                                                           const ModelGrads& g) {
  auto out = gradient_views(m.backbone, g.backbone);
  out.emplace_back(g.squeeze_w);
  out.emplace_back(g.squeeze_b);
  out.emplace_back(g.head_w);
  out.emplace_back(g.head_b);
  return out;
}

/// Mean loss per epoch.
inline std::vector<double> train_model(HeatmapModel& m, const std::vector<Sample>& data,
                                       const TrainConfig& tc, double pos_weight) {
  if (data.empty()) throw FormatError("no training samples");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(tc.seed, 3, 0));
  std::vector<double> curve;
  auto params = parameter_views(m);
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t end = std::min(order.size(), start + tc.batch_size);
      std::vector<std::vector<double>> acc;
      for (std::size_t n = start; n < end; ++n) {
        const Sample& s = data[order[n]];
        ModelState st;
        const Volume4D logits = model_forward(m, s.input, s.thickness, &st);
        const LossResult loss = bce_with_logits(logits, s.target, pos_weight);
        epoch_loss += loss.loss;
        const ModelGrads g = model_backward(m, loss.grad, st);
        const auto views = gradient_views(m, g);
        if (acc.empty()) {
          for (const auto& v : views) acc.emplace_back(v.begin(), v.end());
        } else {
          for (std::size_t i = 0; i < views.size(); ++i) {
            for (std::size_t j = 0; j < views[i].size(); ++j) acc[i][j] += views[i][j];
          }
        }
      }
      const double step = tc.lr / static_cast<double>(end - start);
      for (std::size_t i = 0; i < params.size(); ++i) sgd_step(params[i], acc[i], step);
    }
    curve.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Detection

struct Peak {
  double score = 0.0;
  double x_mm = 0.0;
  double y_mm = 0.0;
};

/// Peak extraction on a probability map. Pixels >= threshold form plateaus
/// of equal value joined 8-connectedly; a plateau with no strictly higher
/// 8-neighbour is a peak, reported at its first pixel in scan order. Each peak
/// scores its probability.
inline std::vector<Peak> extract_peaks(const Volume4D& prob, double threshold,
                                       double pixel_mm) {
  const std::size_t h = prob.height();
  const std::size_t w = prob.width();
  const auto p = prob.plane(0, 0);
  std::vector<int> seen(h * w, 0);
  std::vector<Peak> peaks;
  std::vector<std::size_t> stack;
  std::vector<std::size_t> members;
  for (std::size_t start = 0; start < h * w; ++start) {
    if (seen[start] || p[start] < threshold) continue;
    const double value = p[start];
    bool is_max = true;
    members.clear();
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      members.push_back(cur);
      const std::size_t i = cur / w;
      const std::size_t j = cur % w;
      for (std::size_t ni = (i > 0 ? i - 1 : 0); ni <= std::min(h - 1, i + 1); ++ni) {
        for (std::size_t nj = (j > 0 ? j - 1 : 0); nj <= std::min(w - 1, j + 1); ++nj) {
          const std::size_t nb = ni * w + nj;
          if (nb == cur) continue;
          if (p[nb] > value) {
            is_max = false;
          } else if (p[nb] == value && !seen[nb]) {
            seen[nb] = 1;
            stack.push_back(nb);
          }
        }
      }
    }
    if (!is_max) continue;
    const std::size_t at = *std::min_element(members.begin(), members.end());
    peaks.push_back({value, (static_cast<double>(at % w) + 0.5) * pixel_mm,
                     (static_cast<double>(at / w) + 0.5) * pixel_mm});
  }
  return peaks;
}

/// Greedy matching in descending score order: a peak within a lesion's radius
/// of its center claims the nearest unclaimed lesion; everything else is a
/// false positive.
inline DetectionRecord match_peaks(std::vector<Peak> peaks,
                                   const std::vector<Lesion2D>& lesions) {
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.score > b.score; });
  DetectionRecord rec;
  rec.positives = lesions.size();
  std::vector<bool> claimed(lesions.size(), false);
  for (const Peak& pk : peaks) {
    std::size_t hit = lesions.size();
    double best = 0.0;
    for (std::size_t l = 0; l < lesions.size(); ++l) {
      if (claimed[l]) continue;
      const double dist = std::hypot(pk.x_mm - lesions[l].x_mm, pk.y_mm - lesions[l].y_mm);
      if (dist <= lesions[l].radius_mm && (hit == lesions.size() || dist < best)) {
        hit = l;
        best = dist;
      }
    }
    if (hit < lesions.size()) claimed[hit] = true;
    rec.detections.push_back({pk.score, hit < lesions.size()});
  }
  return rec;
}

inline DetectionRecord detect(const HeatmapModel& m, const Sample& s,
                              double threshold, double pixel_mm) {
  Volume4D prob = model_forward(m, s.input, s.thickness);
  for (double& v : prob.data()) v = sigmoid(v);
  return match_peaks(extract_peaks(prob, threshold, pixel_mm), s.lesions);
}

// ---------------------------------------------------------------------------
// Report

struct CohortResult {
  Cohort cohort = Cohort::All;
  std::size_t images = 0;
  FrocResult froc;
};

struct StrategyResult {
  Strategy strategy = Strategy::AlignShift;
  std::vector<CohortResult> cohorts;  // All, Thin, Thick
  std::vector<double> loss_curve;
  std::size_t parameters = 0;

  const CohortResult& cohort(Cohort c) const {
    for (const auto& r : cohorts) {
      if (r.cohort == c) return r;
    }
    throw MetricError(std::string("missing cohort ") + to_string(c));
  }

  double diff(Cohort c) const {
    return cohort(c).froc.average - cohort(Cohort::All).froc.average;
  }

  /// |diff_thin| + |diff_thick|
  double gap() const {
    return std::abs(diff(Cohort::Thin)) + std::abs(diff(Cohort::Thick));
  }
};

struct GapReport {
  std::vector<StrategyResult> strategies;

  const StrategyResult& at(Strategy s) const {
    for (const auto& r : strategies) {
      if (r.strategy == s) return r;
    }
    throw MetricError(std::string("missing strategy ") + to_string(s));
  }
};

inline std::string format_fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

/// strategy,cohort,fp_level,sensitivity,avg,diff; one row per FP level.
inline std::string gap_report_csv(const GapReport& report) {
  std::string out = "strategy,cohort,fp_level,sensitivity,avg,diff\n";
  for (const auto& s : report.strategies) {
    for (const auto& c : s.cohorts) {
      for (std::size_t i = 0; i < c.froc.fp_levels.size(); ++i) {
        out += std::string(to_string(s.strategy)) + "," + to_string(c.cohort) + "," +
               format_fixed(c.froc.fp_levels[i]) + "," + format_fixed(c.froc.sensitivity[i]) +
               "," + format_fixed(c.froc.average) + "," + format_fixed(s.diff(c.cohort)) + "\n";
      }
    }
  }
  return out;
}

/// Human-readable table in the layout of a thin/thick gap analysis.
inline std::string gap_report_table(const GapReport& report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-11s %-6s %6s %6s %6s %6s %6s %6s %8s %8s\n",
                "strategy", "cohort", "0.5", "1", "2", "4", "8", "16", "avg", "diff");
  out << line;
  for (const auto& s : report.strategies) {
    for (const auto& c : s.cohorts) {
      std::string row;
      std::snprintf(line, sizeof(line), "%-11s %-6s", to_string(s.strategy), to_string(c.cohort));
      row += line;
      for (double v : c.froc.sensitivity) {
        std::snprintf(line, sizeof(line), " %6.2f", 100.0 * v);
        row += line;
      }
      std::snprintf(line, sizeof(line), " %8.2f %+8.2f\n", 100.0 * c.froc.average,
                    100.0 * s.diff(c.cohort));
      row += line;
      out << row;
    }
    std::snprintf(line, sizeof(line), "%-11s gap |diff_thin|+|diff_thick| = %.2f\n",
                  to_string(s.strategy), 100.0 * s.gap());
    out << line;
  }
  return out.str();
}

struct PhantomSet {
  std::vector<Phantom> phantoms;
  std::size_t train_count = 0;
};

inline PhantomSet make_phantoms(const BenchConfig& cfg) {
  PhantomSet set;
  const auto geom = cfg.geometry();
  for (std::size_t p = 0; p < cfg.n_phantoms; ++p) {
    set.phantoms.push_back(
        generate_phantom(derive_seed(cfg.seed, 0, p), geom, cfg.lesions_per_image));
  }
  set.train_count = cfg.n_phantoms - cfg.test_phantoms();
  return set;
}

inline StrategyResult run_strategy(Strategy strategy, const BenchConfig& cfg,
                                   const PhantomSet& set) {
  std::vector<Sample> train;
  std::vector<Sample> test;
  for (std::size_t p = 0; p < set.phantoms.size(); ++p) {
    const Phantom& ph = set.phantoms[p];
    for (Cohort cohort : {Cohort::Thin, Cohort::Thick}) {
      const double mm = cohort == Cohort::Thin ? cfg.thin_mm : cfg.thick_mm;
      auto [vol, spacing] = acquire(ph, mm);
      add_acquisition_noise(vol, cfg.noise_sigma,
                            derive_seed(cfg.seed, 4, 2 * p + (cohort == Cohort::Thick ? 1 : 0)));
      Sample s = prepare_sample(ph, p, vol, spacing, cohort, strategy, cfg);
      (p < set.train_count ? train : test).push_back(std::move(s));
    }
  }

  StrategyResult result;
  result.strategy = strategy;
  HeatmapModel model = build_model(strategy, cfg);
  result.parameters = model.parameter_count();
  result.loss_curve = train_model(model, train, cfg.train(), cfg.pos_weight);

  std::vector<DetectionRecord> all;
  std::vector<DetectionRecord> thin;
  std::vector<DetectionRecord> thick;
  const double pixel_mm = cfg.geometry().pixel_mm;
  for (const Sample& s : test) {
    DetectionRecord rec = detect(model, s, cfg.detect_threshold, pixel_mm);
    (s.cohort == Cohort::Thin ? thin : thick).push_back(rec);
    all.push_back(std::move(rec));
  }
  result.cohorts.push_back({Cohort::All, all.size(), froc_sensitivity(all)});
  result.cohorts.push_back({Cohort::Thin, thin.size(), froc_sensitivity(thin)});
  result.cohorts.push_back({Cohort::Thick, thick.size(), froc_sensitivity(thick)});
  return result;
}

inline GapReport run_gap_experiment(const BenchConfig& cfg) {
  cfg.validate();
  const PhantomSet set = make_phantoms(cfg);
  GapReport report;
  for (Strategy s : cfg.strategies) report.strategies.push_back(run_strategy(s, cfg, set));
  return report;
}

}  // namespace alignshift::bench
