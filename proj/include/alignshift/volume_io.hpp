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

// Raw V4D volume files:
//
//   V4D <C> <D> <H> <W> <spacing_mm>\n
//   C*D*H*W little-endian IEEE-754 doubles, (C, D, H, W) row-major
//
// The spacing is written in shortest round-trip decimal form.

#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "alignshift/error.hpp"
#include "alignshift/tensor.hpp"

namespace alignshift {

struct VolumeFile {
  Volume4D volume;
  ThicknessMeta thickness{1.0};
};

namespace detail {

inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline void append_le_doubles(std::string& out, std::span<const double> values) {
  const std::size_t start = out.size();
  out.resize(start + values.size() * 8);
  char* dst = out.data() + start;
  for (double v : values) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      *dst++ = static_cast<char>((bits >> (8 * b)) & 0xffu);
    }
  }
}

inline std::vector<double> parse_le_doubles(std::string_view bytes) {
  std::vector<double> out(bytes.size() / 8);
  const auto* src = reinterpret_cast<const unsigned char*>(bytes.data());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(src[8 * i + b]) << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path);
}

}  // namespace detail

inline std::string encode_v4d(const Volume4D& v, const ThicknessMeta& t) {
  std::string out = "V4D " + std::to_string(v.channels()) + " " +
                    std::to_string(v.depth()) + " " +
                    std::to_string(v.height()) + " " +
                    std::to_string(v.width()) + " " +
                    detail::format_double(t.spacing_mm()) + "\n";
  detail::append_le_doubles(out, v.data());
  return out;
}

inline VolumeFile decode_v4d(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw FormatError("V4D: missing header line");
  std::istringstream header{std::string(bytes.substr(0, nl))};
  std::string magic;
  long long dims[4] = {0, 0, 0, 0};
  std::string spacing_text;
  header >> magic >> dims[0] >> dims[1] >> dims[2] >> dims[3] >> spacing_text;
  if (!header || magic != "V4D") throw FormatError("V4D: malformed header");
  std::string trailing;
  if (header >> trailing) throw FormatError("V4D: trailing header fields");
  for (long long d : dims) {
    if (d <= 0) throw FormatError("V4D: non-positive dimension in header");
  }
  double spacing = 0.0;
  const char* first = spacing_text.data();
  const char* last = first + spacing_text.size();
  auto [ptr, ec] = std::from_chars(first, last, spacing);
  if (ec != std::errc() || ptr != last) throw FormatError("V4D: bad spacing field");

  const Shape4 shape{static_cast<std::size_t>(dims[0]),
                     static_cast<std::size_t>(dims[1]),
                     static_cast<std::size_t>(dims[2]),
                     static_cast<std::size_t>(dims[3])};
  const auto payload = bytes.substr(nl + 1);
  // Compare without forming size()*8 first, which could overflow on a hostile header.
  if (payload.size() % 8 != 0 || payload.size() / 8 != shape.size() ||
      shape.size() / shape.channels / shape.depth / shape.height !=
          shape.width) {
    throw FormatError("V4D: payload holds " + std::to_string(payload.size()) +
                      " bytes, header declares " + shape.str() + " doubles");
  }
  try {
    return VolumeFile{Volume4D(shape, detail::parse_le_doubles(payload)),
                      ThicknessMeta(spacing)};
  } catch (const DomainError& e) {
    throw FormatError(std::string("V4D: ") + e.what());
  }
}

inline void write_v4d(const std::string& path, const Volume4D& v,
                      const ThicknessMeta& t) {
  detail::write_file_bytes(path, encode_v4d(v, t));
}

inline VolumeFile read_v4d(const std::string& path) {
  return decode_v4d(detail::read_file_bytes(path));
}

}  // namespace alignshift
