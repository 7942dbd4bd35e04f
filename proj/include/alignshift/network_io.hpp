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

// NetworkSpec serialization.
//
// Manifest (UTF-8, one record per line, '#' starts a comment line):
//
//   alignshift-network 1
//   input_channels <C>
//   <kind> <K> <in_channels> <out_channels> <shift>
//   ...
//
// <kind> is one of Conv2D Pool2D Norm2D Conv3D Pool3D Norm3D ReLU. Unused
// numeric fields are written as 0. <shift> is "-" or
// "<align|tsm>:<up>:<down>:<reference_mm>". Norm lines carry eps as a sixth
// field.
//
// Weights sidecar: little-endian doubles concatenated in layer order; per conv
// layer weights (out, in, K, K) then bias, per norm layer scale, offset,
// running_mean, running_var. Other kinds contribute nothing.

#pragma once

#include <charconv>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "alignshift/convert.hpp"
#include "alignshift/error.hpp"
#include "alignshift/volume_io.hpp"

namespace alignshift {

struct EncodedNetwork {
  std::string manifest;
  std::string weights;
};

namespace detail {

inline LayerKind parse_layer_kind(const std::string& s) {
  for (LayerKind k : {LayerKind::Conv2D, LayerKind::Pool2D, LayerKind::Norm2D,
                      LayerKind::Conv3D, LayerKind::Pool3D, LayerKind::Norm3D,
                      LayerKind::ReLU}) {
    if (s == to_string(k)) return k;
  }
  throw FormatError("unknown layer kind '" + s + "'");
}

inline double parse_double_field(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError("bad number '" + s + "'");
  }
  return v;
}

inline std::size_t parse_count_field(const std::string& s) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError("bad count '" + s + "'");
  }
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

class DoubleReader {
 public:
  explicit DoubleReader(std::string_view bytes) : values_(parse_le_doubles(bytes)) {
    if (bytes.size() % 8 != 0) throw FormatError("weights file length is not a multiple of 8");
  }

  std::vector<double> take(std::size_t n) {
    if (values_.size() - pos_ < n) throw FormatError("weights file too short");
    std::vector<double> out(values_.begin() + static_cast<std::ptrdiff_t>(pos_),
                            values_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
  }

  bool exhausted() const { return pos_ == values_.size(); }

 private:
  std::vector<double> values_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline EncodedNetwork encode_network(const NetworkSpec& net) {
  net.validate();
  std::ostringstream m;
  m << "alignshift-network 1\n";
  m << "input_channels " << net.input_channels << "\n";
  EncodedNetwork out;
  for (const auto& l : net.layers) {
    m << to_string(l.kind) << ' ' << l.kernel << ' ' << l.in_channels << ' '
      << l.out_channels << ' ';
    if (l.shift_prefix) {
      m << (l.shift_operator == ShiftOperator::Tsm ? "tsm" : "align") << ':'
        << l.shift_prefix->shift_up << ':' << l.shift_prefix->shift_down << ':'
        << detail::format_double(l.shift_prefix->reference_mm);
    } else {
      m << '-';
    }
    if (is_norm(l.kind)) m << ' ' << detail::format_double(l.norm.eps);
    m << '\n';
    if (is_conv(l.kind)) {
      detail::append_le_doubles(out.weights, l.weights);
      detail::append_le_doubles(out.weights, l.bias);
    } else if (is_norm(l.kind)) {
      detail::append_le_doubles(out.weights, l.norm.scale);
      detail::append_le_doubles(out.weights, l.norm.offset);
      detail::append_le_doubles(out.weights, l.norm.running_mean);
      detail::append_le_doubles(out.weights, l.norm.running_var);
    }
  }
  out.manifest = m.str();
  return out;
}

inline NetworkSpec decode_network(const std::string& manifest,
                                  std::string_view weights) {
  std::istringstream in(manifest);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    lines.push_back(line);
  }
  if (lines.size() < 2 || lines[0] != "alignshift-network 1") {
    throw FormatError("network manifest: missing 'alignshift-network 1' header");
  }
  NetworkSpec net;
  {
    std::istringstream hdr(lines[1]);
    std::string key;
    std::string value;
    hdr >> key >> value;
    if (key != "input_channels") throw FormatError("network manifest: expected input_channels");
    net.input_channels = detail::parse_count_field(value);
  }
  detail::DoubleReader reader(weights);
  for (std::size_t i = 2; i < lines.size(); ++i) {
    std::istringstream ls(lines[i]);
    std::vector<std::string> f;
    std::string tok;
    while (ls >> tok) f.push_back(tok);
    if (f.size() < 5) throw FormatError("network manifest: short layer line '" + lines[i] + "'");
    LayerSpec l;
    l.kind = detail::parse_layer_kind(f[0]);
    l.kernel = detail::parse_count_field(f[1]);
    l.in_channels = detail::parse_count_field(f[2]);
    l.out_channels = detail::parse_count_field(f[3]);
    if (f[4] != "-") {
      const auto parts = detail::split(f[4], ':');
      if (parts.size() != 4 || (parts[0] != "align" && parts[0] != "tsm")) {
        throw FormatError("network manifest: bad shift field '" + f[4] + "'");
      }
      l.shift_operator = parts[0] == "tsm" ? ShiftOperator::Tsm : ShiftOperator::AlignShift;
      l.shift_prefix = ShiftConfig{detail::parse_count_field(parts[1]),
                                   detail::parse_count_field(parts[2]),
                                   detail::parse_double_field(parts[3])};
    }
    if (is_norm(l.kind)) {
      if (f.size() != 6) throw FormatError("network manifest: norm line needs eps");
      l.norm.eps = detail::parse_double_field(f[5]);
    } else if (f.size() != 5) {
      throw FormatError("network manifest: extra fields on '" + lines[i] + "'");
    }
    if (is_conv(l.kind)) {
      l.weights = reader.take(l.out_channels * l.in_channels * l.kernel * l.kernel);
      l.bias = reader.take(l.out_channels);
    } else if (is_norm(l.kind)) {
      const std::size_t c = l.in_channels;
      l.norm.scale = reader.take(c);
      l.norm.offset = reader.take(c);
      l.norm.running_mean = reader.take(c);
      l.norm.running_var = reader.take(c);
    }
    try {
      l.validate();
    } catch (const ConfigError& e) {
      throw FormatError(std::string("network manifest: ") + e.what());
    }
    net.layers.push_back(std::move(l));
  }
  if (!reader.exhausted()) throw FormatError("weights file has trailing values");
  net.validate();
  return net;
}

inline void write_network(const std::string& manifest_path,
                          const std::string& weights_path,
                          const NetworkSpec& net) {
  const auto enc = encode_network(net);
  detail::write_file_bytes(manifest_path, enc.manifest);
  detail::write_file_bytes(weights_path, enc.weights);
}

inline NetworkSpec read_network(const std::string& manifest_path,
                                const std::string& weights_path) {
  return decode_network(detail::read_file_bytes(manifest_path),
                        detail::read_file_bytes(weights_path));
}

}  // namespace alignshift
