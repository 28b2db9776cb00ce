// Copyright 2026 The vocalf0 Authors
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

#include "vocalf0/annotation.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "vocalf0/decoder.hpp"
#include "vocalf0/error.hpp"

namespace vocalf0 {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

[[noreturn]] void fail_line(const std::string& name, std::size_t line,
                            const std::string& what) {
  throw FormatError(name + ":" + std::to_string(line) + ": " + what);
}

// Half the spacing of a (nominally uniform) grid; infinite for < 2 frames.
double half_step(std::span<const double> times) {
  if (times.size() < 2) return std::numeric_limits<double>::infinity();
  return 0.5 * (times.back() - times.front()) / static_cast<double>(times.size() - 1);
}

}  // namespace

std::size_t MultiF0Annotation::total_f0s() const {
  std::size_t n = 0;
  for (const auto& s : f0_sets) n += s.size();
  return n;
}

F0Track parse_f0_track(std::istream& in, const std::string& name) {
  F0Track track;
  std::string line;
  std::size_t line_no = 0;
  std::size_t filtered = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row = trim(line);
    if (row.empty() || row.front() == '#') continue;
    const auto comma = row.find(',');
    if (comma == std::string_view::npos) {
      fail_line(name, line_no, "expected `time_sec,f0_hz`");
    }
    double t = 0.0, f = 0.0;
    const bool ok = parse_double(row.substr(0, comma), t) &&
                    parse_double(row.substr(comma + 1), f);
    if (!ok) {
      // A non-numeric first row is a header.
      if (track.times.empty() && line_no == 1) continue;
      fail_line(name, line_no, "unparseable row `" + std::string(row) + "`");
    }
    if (!track.times.empty() && !(t > track.times.back())) {
      fail_line(name, line_no, "time " + std::to_string(t) + " is not increasing");
    }
    if (f <= 0.0) {
      f = 0.0;
    } else if (f < kMinVoicedF0 || f > kMaxVoicedF0) {
      f = 0.0;
      ++filtered;
    }
    track.times.push_back(t);
    track.f0.push_back(f);
  }
  if (filtered > 0) {
    spdlog::warn("{}: {} voiced values outside [{}, {}] Hz marked unvoiced", name,
                 filtered, kMinVoicedF0, kMaxVoicedF0);
  }
  return track;
}

F0Track read_f0_track(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open F0 track " + path.string());
  return parse_f0_track(in, path.string());
}

void write_f0_track(const std::filesystem::path& path, const F0Track& track) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write F0 track " + path.string());
  char buf[64];
  for (std::size_t i = 0; i < track.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f\n", track.times[i], track.f0[i]);
    out << buf;
  }
}

MultiF0Annotation merge_tracks(std::span<const F0Track> tracks,
                               std::span<const double> frame_times) {
  MultiF0Annotation ann;
  ann.frame_times.assign(frame_times.begin(), frame_times.end());
  ann.f0_sets.assign(frame_times.size(), {});
  const double window = half_step(frame_times);

  for (const F0Track& track : tracks) {
    if (track.times.empty()) continue;
    for (std::size_t t = 0; t < frame_times.size(); ++t) {
      const double ft = frame_times[t];
      const auto it = std::lower_bound(track.times.begin(), track.times.end(), ft);
      std::size_t best = track.size();
      double best_dist = std::numeric_limits<double>::infinity();
      if (it != track.times.end()) {
        best = static_cast<std::size_t>(it - track.times.begin());
        best_dist = *it - ft;
      }
      if (it != track.times.begin()) {
        const auto prev = static_cast<std::size_t>(it - track.times.begin()) - 1;
        // Ties go to the earlier point.
        if (ft - track.times[prev] <= best_dist) {
          best = prev;
          best_dist = ft - track.times[prev];
        }
      }
      if (best < track.size() && best_dist <= window + 1e-9 && track.f0[best] > 0.0) {
        ann.f0_sets[t].push_back(track.f0[best]);
      }
    }
  }
  for (auto& s : ann.f0_sets) std::sort(s.begin(), s.end());
  return ann;
}

SalienceTarget annotation_to_target(const MultiF0Annotation& ann,
                                    const HcqtParams& params) {
  const int n_bins = params.n_bins();
  SalienceTarget target;
  target.grid = SalienceMap(static_cast<std::size_t>(n_bins), ann.n_frames(), 0.0f);
  target.params_hash = params.hash();

  float kernel[kTargetKernelRadius + 1];
  for (int d = 0; d <= kTargetKernelRadius; ++d) {
    kernel[d] = static_cast<float>(std::exp(-0.5 * d * d));
  }

  for (std::size_t t = 0; t < ann.n_frames(); ++t) {
    for (double f : ann.f0_sets[t]) {
      int bin = 0;
      try {
        bin = freq_to_bin(f, params);
      } catch (const RangeError&) {
        ++target.skipped;
        continue;
      }
      for (int d = -kTargetKernelRadius; d <= kTargetKernelRadius; ++d) {
        const int b = bin + d;
        if (b < 0 || b >= n_bins) continue;
        float& v = target.grid(static_cast<std::size_t>(b), t);
        v = std::max(v, kernel[std::abs(d)]);
      }
    }
  }
  if (target.skipped > 0) {
    spdlog::warn("annotation_to_target: skipped {} F0 values outside the analysed range",
                 target.skipped);
  }
  return target;
}

MultiF0Annotation target_to_annotation(const SalienceTarget& target,
                                       double threshold, const HcqtParams& params) {
  const auto times = params.frame_times(target.grid.cols());
  return threshold_decode(target.grid, times, DecoderConfig{threshold}, params);
}

void write_multif0(std::ostream& out, const MultiF0Annotation& ann) {
  char buf[64];
  for (std::size_t t = 0; t < ann.n_frames(); ++t) {
    std::snprintf(buf, sizeof buf, "%.6f", ann.frame_times[t]);
    out << buf;
    for (double f : ann.f0_sets[t]) {
      std::snprintf(buf, sizeof buf, "\t%.6f", f);
      out << buf;
    }
    out << '\n';
  }
}

void write_multif0(const std::filesystem::path& path, const MultiF0Annotation& ann) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write annotation " + path.string());
  write_multif0(out, ann);
}

MultiF0Annotation parse_multif0(std::istream& in, const std::string& name) {
  MultiF0Annotation ann;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row = trim(line);
    if (row.empty() || row.front() == '#') continue;
    std::vector<double> values;
    std::size_t pos = 0;
    while (pos < row.size()) {
      const auto next = row.find_first_of("\t ,", pos);
      const auto field = row.substr(pos, next == std::string_view::npos ? row.npos : next - pos);
      if (!trim(field).empty()) {
        double v = 0.0;
        if (!parse_double(field, v)) {
          fail_line(name, line_no, "unparseable value `" + std::string(field) + "`");
        }
        values.push_back(v);
      }
      if (next == std::string_view::npos) break;
      pos = next + 1;
    }
    const double t = values.front();
    if (!ann.frame_times.empty() && !(t > ann.frame_times.back())) {
      fail_line(name, line_no, "time is not increasing");
    }
    ann.frame_times.push_back(t);
    std::vector<double> set;
    for (std::size_t i = 1; i < values.size(); ++i) {
      if (values[i] > 0.0) set.push_back(values[i]);
    }
    ann.f0_sets.push_back(std::move(set));
  }
  return ann;
}

MultiF0Annotation read_multif0(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open annotation " + path.string());
  return parse_multif0(in, path.string());
}

}  // namespace vocalf0
