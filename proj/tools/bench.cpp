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

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "alignshift/alignshift.hpp"

namespace {

using namespace alignshift;

int run_cmd(const std::string& config_path, const std::string& out_dir) {
  const bench::BenchConfig cfg = bench::load_bench_config(config_path);
  std::filesystem::create_directories(out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  const bench::GapReport report = bench::run_gap_experiment(cfg);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string table = bench::gap_report_table(report);
  detail::write_file_bytes(out_dir + "/gap_report.csv", bench::gap_report_csv(report));
  detail::write_file_bytes(out_dir + "/gap_report.txt", table);

  const Phantom p0 = generate_phantom(bench::derive_seed(cfg.seed, 0, 0), cfg.geometry(),
                                      cfg.lesions_per_image);
  for (const auto& [name, mm] : {std::pair{"thin", cfg.thin_mm}, std::pair{"thick", cfg.thick_mm}}) {
    const auto [vol, spacing] = acquire(p0, mm);
    write_v4d(out_dir + "/phantom0_" + name + ".v4d", vol, spacing);
  }

  std::cout << table;
  for (const auto& s : report.strategies) {
    std::printf("%-11s params=%zu final_loss=%.6f\n", bench::to_string(s.strategy),
                s.parameters, s.loss_curve.empty() ? 0.0 : s.loss_curve.back());
  }
  std::printf("elapsed %.1f s\n", secs);
  return 0;
}

int phantom_cmd(std::uint64_t seed, const std::string& out, std::size_t size,
                std::size_t lesions, double slice_mm) {
  const Phantom p = generate_phantom(seed, size, lesions);
  if (slice_mm > 0.0) {
    const auto [vol, spacing] = acquire(p, slice_mm);
    write_v4d(out, vol, spacing);
  } else {
    write_v4d(out, p.volume, p.thickness());
  }
  std::printf("key_depth_mm %.3f\n", p.key_depth_mm);
  for (const Blob& b : p.blobs) {
    std::printf("lesion x=%.3f y=%.3f z=%.3f radius=%.3f depth_radius=%.3f key_slice=%zu\n",
                b.x_mm, b.y_mm, b.z_mm, b.radius_mm, b.depth_radius_mm, b.key_slice);
  }
  return 0;
}

int froc_cmd(const std::string& path) {
  const auto records = parse_detection_records(detail::read_file_bytes(path));
  const FrocResult r = froc_sensitivity(records);
  std::printf("images %zu\n", records.size());
  for (std::size_t i = 0; i < r.fp_levels.size(); ++i) {
    std::printf("fp_per_image %g sensitivity %.6f\n", r.fp_levels[i], r.sensitivity[i]);
  }
  std::printf("avg[0.5,1,2,4] %.6f\n", r.average);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thin/thick slice gap benchmark"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "train all strategies and write the gap report");
  run->add_option("--config", config_path, "key=value config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory")->required();

  std::uint64_t seed = 0;
  std::string phantom_out;
  std::size_t size = 24;
  std::size_t lesions = 2;
  double slice_mm = 0.0;
  auto* phantom = app.add_subcommand("phantom", "write a synthetic phantom as a V4D file");
  phantom->add_option("--seed", seed, "generator seed")->required();
  phantom->add_option("--out", phantom_out, "V4D output path")->required();
  phantom->add_option("--size", size, "in-plane size in pixels");
  phantom->add_option("--lesions", lesions, "number of lesions");
  phantom->add_option("--slice-mm", slice_mm, "acquire with this slab thickness instead of writing the fine volume");

  std::string records_path;
  auto* froc = app.add_subcommand("froc", "FROC sensitivities of a detection-records file");
  froc->add_option("--records", records_path, "records file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_cmd(config_path, out_dir);
    if (*phantom) return phantom_cmd(seed, phantom_out, size, lesions, slice_mm);
    if (*froc) return froc_cmd(records_path);
  } catch (const alignshift::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
