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

// Free-response ROC: sensitivity at fixed numbers of false positives per image.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "alignshift/error.hpp"

namespace alignshift {

struct Detection {
  double score = 0.0;
  bool is_true_positive = false;
};

/// Scored detections of one image and its number of ground-truth lesions.
/// Each lesion may be claimed by at most one true-positive detection.
struct DetectionRecord {
  std::vector<Detection> detections;
  std::size_t positives = 0;
};

inline constexpr std::array<double, 6> kFrocLevels = {0.5, 1.0, 2.0,
                                                      4.0, 8.0, 16.0};
inline constexpr std::array<double, 4> kFrocAverageLevels = {0.5, 1.0, 2.0, 4.0};

struct FrocResult {
  std::vector<double> fp_levels;
  std::vector<double> sensitivity;
  /// Mean sensitivity at 0.5, 1, 2 and 4 FPs per image.
  double average = 0.0;
};

namespace detail {

struct FrocCurve {
  // Operating points after admitting each distinct score, starting at the
  // empty detection set.
  std::vector<std::size_t> true_positives;
  std::vector<std::size_t> false_positives;
  std::size_t positives = 0;
  std::size_t images = 0;

  double at(double level) const {
    std::size_t best = 0;
    for (std::size_t i = 0; i < true_positives.size(); ++i) {
      const double fp_rate = static_cast<double>(false_positives[i]) /
                             static_cast<double>(images);
      if (fp_rate <= level) best = std::max(best, true_positives[i]);
    }
    return static_cast<double>(best) / static_cast<double>(positives);
  }
};

inline FrocCurve build_froc_curve(std::span<const DetectionRecord> records) {
  if (records.empty()) throw MetricError("FROC needs at least one image");
  FrocCurve curve;
  curve.images = records.size();
  std::vector<Detection> all;
  for (const auto& r : records) {
    std::size_t hits = 0;
    for (const auto& d : r.detections) {
      if (!std::isfinite(d.score)) throw MetricError("non-finite detection score");
      hits += d.is_true_positive ? 1 : 0;
      all.push_back(d);
    }
    if (hits > r.positives) {
      throw MetricError("image has " + std::to_string(hits) +
                        " true positives but only " +
                        std::to_string(r.positives) + " lesions");
    }
    curve.positives += r.positives;
  }
  if (curve.positives == 0) throw MetricError("FROC needs at least one ground-truth lesion");

  std::stable_sort(all.begin(), all.end(), [](const Detection& a, const Detection& b) {
    return a.score > b.score;
  });
  std::size_t tp = 0;
  std::size_t fp = 0;
  curve.true_positives.push_back(0);
  curve.false_positives.push_back(0);
  for (std::size_t i = 0; i < all.size();) {
    // Detections with equal scores are admitted together.
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) {
      (all[j].is_true_positive ? tp : fp) += 1;
      ++j;
    }
    curve.true_positives.push_back(tp);
    curve.false_positives.push_back(fp);
    i = j;
  }
  return curve;
}

}  // namespace detail

/// Sensitivity at each FP-per-image level: the best recall reachable by a
/// score threshold whose false positives per image do not exceed the level.
inline FrocResult froc_sensitivity(std::span<const DetectionRecord> records,
                                   std::span<const double> fp_levels) {
  const auto curve = detail::build_froc_curve(records);
  FrocResult out;
  for (double level : fp_levels) {
    if (!(level >= 0.0)) throw MetricError("FP level must be non-negative");
    out.fp_levels.push_back(level);
    out.sensitivity.push_back(curve.at(level));
  }
  double sum = 0.0;
  for (double level : kFrocAverageLevels) sum += curve.at(level);
  out.average = sum / static_cast<double>(kFrocAverageLevels.size());
  return out;
}

inline FrocResult froc_sensitivity(std::span<const DetectionRecord> records) {
  return froc_sensitivity(records, kFrocLevels);
}

/// Parses detection records, one image per line:
///
///   <positives> [<score>:<0|1> ...]
///
/// Blank lines and lines starting with '#' are skipped.
inline std::vector<DetectionRecord> parse_detection_records(const std::string& text) {
  std::vector<DetectionRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    const std::string where = "records line " + std::to_string(lineno) + ": ";
    long long positives = -1;
    if (!(ls >> positives) || positives < 0) {
      throw FormatError(where + "expected a non-negative lesion count");
    }
    DetectionRecord rec;
    rec.positives = static_cast<std::size_t>(positives);
    std::string tok;
    while (ls >> tok) {
      const auto colon = tok.rfind(':');
      if (colon == std::string::npos) throw FormatError(where + "expected score:flag, got " + tok);
      const std::string flag = tok.substr(colon + 1);
      if (flag != "0" && flag != "1") throw FormatError(where + "flag must be 0 or 1");
      std::size_t used = 0;
      double score = 0.0;
      try {
        score = std::stod(tok.substr(0, colon), &used);
      } catch (const std::exception&) {
        throw FormatError(where + "bad score in " + tok);
      }
      if (used != colon) throw FormatError(where + "bad score in " + tok);
      rec.detections.push_back({score, flag == "1"});
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace alignshift
