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

// F0 annotations: per-voice tracks, merged multi-F0 frames, and the
// Gaussian-blurred salience targets the networks are trained against.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "vocalf0/array.hpp"
#include "vocalf0/hcqt.hpp"

namespace vocalf0 {

/// One singer's F0 contour. f0 == 0 marks an unvoiced point.
struct F0Track {
  std::vector<double> times;
  std::vector<double> f0;

  std::size_t size() const { return times.size(); }
};

inline constexpr double kMinVoicedF0 = 20.0;
inline constexpr double kMaxVoicedF0 = 2000.0;

/// Per-frame sets of concurrent F0 values (Hz) on a uniform time grid.
struct MultiF0Annotation {
  std::vector<double> frame_times;
  std::vector<std::vector<double>> f0_sets;

  std::size_t n_frames() const { return frame_times.size(); }
  std::size_t total_f0s() const;
};

/// Salience map on the h = 1 grid: [n_bins x n_frames], values in [0, 1].
using SalienceMap = Matrix<float>;

struct SalienceTarget {
  SalienceMap grid;
  std::string params_hash;
  /// Annotated F0s that fell outside the analysed range and were dropped.
  std::size_t skipped = 0;
};

/// Parses `time_sec,f0_hz` rows; an optional header line is skipped. Voiced
/// values outside [20, 2000] Hz are marked unvoiced. Throws FormatError
/// naming the line on unparseable rows or non-increasing times.
F0Track parse_f0_track(std::istream& in, const std::string& name = "<stream>");
F0Track read_f0_track(const std::filesystem::path& path);
void write_f0_track(const std::filesystem::path& path, const F0Track& track);

/// Resamples every track onto `frame_times` (nearest point within half a
/// frame step, otherwise unvoiced) and takes the per-frame union of voiced
/// values. Frame sets are sorted ascending, which makes the result
/// independent of track order.
MultiF0Annotation merge_tracks(std::span<const F0Track> tracks,
                               std::span<const double> frame_times);

/// Kernel half-width in bins; the Gaussian (sigma = 1 bin) is zero beyond.
inline constexpr int kTargetKernelRadius = 2;

/// Rasterises `ann` onto the [n_bins x n_frames] grid: the nearest bin of
/// each F0 is 1, neighbours within +-2 bins get exp(-d^2/2), overlaps combine
/// by maximum. Out-of-range F0s are skipped and counted.
SalienceTarget annotation_to_target(const MultiF0Annotation& ann,
                                    const HcqtParams& params);

/// Decodes a target back to F0 sets via threshold_decode.
MultiF0Annotation target_to_annotation(const SalienceTarget& target,
                                       double threshold,
                                       const HcqtParams& params = {});

/// Multi-F0 exchange format: one line per frame, `time` followed by zero or
/// more tab-separated Hz values, all with 6 decimals.
void write_multif0(std::ostream& out, const MultiF0Annotation& ann);
void write_multif0(const std::filesystem::path& path, const MultiF0Annotation& ann);
MultiF0Annotation parse_multif0(std::istream& in, const std::string& name = "<stream>");
MultiF0Annotation read_multif0(const std::filesystem::path& path);

}  // namespace vocalf0
