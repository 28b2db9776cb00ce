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

#include "vocalf0/decoder.hpp"

#include "vocalf0/error.hpp"
#include "vocalf0/metrics.hpp"

namespace vocalf0 {

void DecoderConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw RangeError("decoder threshold must be in (0, 1), got " +
                     std::to_string(threshold));
  }
}

std::vector<int> pick_peaks(std::span<const float> column) {
  std::vector<int> peaks;
  const std::size_t n = column.size();
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && column[j + 1] == column[i]) ++j;
    const bool left_lower = i == 0 || column[i - 1] < column[i];
    const bool right_lower = j + 1 == n || column[j + 1] < column[j];
    const bool whole_axis = i == 0 && j + 1 == n;
    if (left_lower && right_lower && !whole_axis) {
      peaks.push_back(static_cast<int>(i + (j - i) / 2));
    }
    i = j + 1;
  }
  return peaks;
}

MultiF0Annotation threshold_decode(const SalienceMap& salience,
                                   std::span<const double> frame_times,
                                   const DecoderConfig& cfg,
                                   const HcqtParams& params) {
  cfg.validate();
  if (frame_times.size() != salience.cols()) {
    throw ShapeError("threshold_decode: " + std::to_string(frame_times.size()) +
                     " frame times for " + std::to_string(salience.cols()) + " frames");
  }
  MultiF0Annotation ann;
  ann.frame_times.assign(frame_times.begin(), frame_times.end());
  ann.f0_sets.resize(salience.cols());
  std::vector<float> column(salience.rows());
  for (std::size_t t = 0; t < salience.cols(); ++t) {
    for (std::size_t f = 0; f < salience.rows(); ++f) column[f] = salience(f, t);
    for (int b : pick_peaks(column)) {
      if (column[static_cast<std::size_t>(b)] >= cfg.threshold) {
        ann.f0_sets[t].push_back(bin_to_freq(b, params));
      }
    }
  }
  return ann;
}

ThresholdSearch optimize_threshold(std::span<const ThresholdCase> cases,
                                   const HcqtParams& params) {
  if (cases.empty()) throw Error("optimize_threshold: no validation files");

  // Peak positions do not depend on the threshold; extract them once and
  // keep (frame, bin, value) triples per case.
  struct Peak {
    std::size_t frame;
    double freq;
    float value;
  };
  std::vector<std::vector<Peak>> peaks(cases.size());
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const SalienceMap& s = *cases[c].salience;
    if (s.cols() != cases[c].reference->n_frames()) {
      throw ShapeError("optimize_threshold: case " + std::to_string(c) +
                       " salience and reference frame counts differ");
    }
    std::vector<float> column(s.rows());
    for (std::size_t t = 0; t < s.cols(); ++t) {
      for (std::size_t f = 0; f < s.rows(); ++f) column[f] = s(f, t);
      for (int b : pick_peaks(column)) {
        peaks[c].push_back({t, bin_to_freq(b, params), column[static_cast<std::size_t>(b)]});
      }
    }
  }

  ThresholdSearch result;
  result.accuracy = -1.0;
  for (int step = 1; step <= 99; ++step) {
    const double threshold = step / 100.0;
    double sum = 0.0;
    for (std::size_t c = 0; c < cases.size(); ++c) {
      const MultiF0Annotation& ref = *cases[c].reference;
      MultiF0Annotation est;
      est.frame_times = ref.frame_times;
      est.f0_sets.resize(ref.n_frames());
      for (const Peak& p : peaks[c]) {
        if (p.value >= threshold) est.f0_sets[p.frame].push_back(p.freq);
      }
      sum += frame_scores(ref, est, kThresholdToleranceCents).accuracy;
    }
    const double mean = sum / static_cast<double>(cases.size());
    result.grid.push_back(threshold);
    result.mean_accuracy.push_back(mean);
    if (mean >= result.accuracy) {
      result.accuracy = mean;
      result.threshold = threshold;
    }
  }
  return result;
}

}  // namespace vocalf0
