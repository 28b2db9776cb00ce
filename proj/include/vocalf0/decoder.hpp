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

// Salience map -> frame-wise F0 sets: peak picking along frequency plus a
// global threshold, and a grid search for that threshold.

#pragma once

#include <span>
#include <vector>

#include "vocalf0/annotation.hpp"
#include "vocalf0/hcqt.hpp"

namespace vocalf0 {

struct DecoderConfig {
  double threshold = 0.5;

  /// Throws RangeError unless threshold is in (0, 1).
  void validate() const;
};

/// Strict local maxima of `column`. A plateau of equal values counts once,
/// at its lower-median bin, when both outer neighbours are lower; edge bins
/// need only beat their single neighbour. A plateau covering the whole axis
/// is not a peak.
std::vector<int> pick_peaks(std::span<const float> column);

/// Per frame, peaks with value >= threshold mapped to bin-centre frequencies.
MultiF0Annotation threshold_decode(const SalienceMap& salience,
                                   std::span<const double> frame_times,
                                   const DecoderConfig& cfg,
                                   const HcqtParams& params = {});

/// Tolerance used when scoring candidate thresholds.
inline constexpr double kThresholdToleranceCents = 50.0;

/// One validation file: predicted salience and its reference annotation.
struct ThresholdCase {
  const SalienceMap* salience = nullptr;
  const MultiF0Annotation* reference = nullptr;
};

struct ThresholdSearch {
  double threshold = 0.0;
  double accuracy = 0.0;
  std::vector<double> grid;
  std::vector<double> mean_accuracy;  // one per grid point
};

/// Grid search over {0.01, ..., 0.99}: decodes every case, scores accuracy
/// TP/(TP+FP+FN) at 50 cents, and keeps the threshold with the highest
/// unweighted mean over cases (ties go to the larger threshold).
ThresholdSearch optimize_threshold(std::span<const ThresholdCase> cases,
                                   const HcqtParams& params = {});

}  // namespace vocalf0
