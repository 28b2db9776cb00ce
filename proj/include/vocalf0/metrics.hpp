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

// Frame-wise multiple-F0 scoring (MIREX style) with one-to-one matching.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "vocalf0/annotation.hpp"

namespace vocalf0 {

struct EvalScores {
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  double accuracy = 0.0;
  double tolerance_cents = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  /// Recomputes precision/recall/f_score/accuracy from the counts.
  static EvalScores from_counts(std::size_t tp, std::size_t fp, std::size_t fn,
                                double tolerance_cents);
};

/// Size of a maximum one-to-one matching between `ref` and `est` where a
/// pair matches when |1200 log2(est/ref)| <= tolerance_cents.
std::size_t match_count(std::span<const double> ref, std::span<const double> est,
                        double tolerance_cents);

/// Resamples `ann` onto `grid_times` by taking, for each grid frame, the
/// nearest source frame within half a grid step (otherwise empty).
/// Throws ShapeError if the grid is not uniform.
MultiF0Annotation align_to_grid(const MultiF0Annotation& ann,
                                std::span<const double> grid_times);

/// Counts accumulate over frames; ref and est must share a time grid
/// (ShapeError otherwise).
EvalScores frame_scores(const MultiF0Annotation& ref, const MultiF0Annotation& est,
                        double tolerance_cents);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct ScoreSummary {
  std::size_t n_files = 0;
  double tolerance_cents = 0.0;
  MeanStd precision, recall, f_score, accuracy;
};

/// Unweighted mean and population standard deviation over files.
ScoreSummary aggregate(std::span<const EvalScores> per_file);

nlohmann::json to_json(const EvalScores& s);
nlohmann::json to_json(const ScoreSummary& s);

}  // namespace vocalf0
