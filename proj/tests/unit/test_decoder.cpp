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

#include <gtest/gtest.h>

#include <random>

#include "vocalf0/error.hpp"
#include "vocalf0/metrics.hpp"

namespace vocalf0 {
namespace {

std::vector<int> peaks(std::vector<float> v) { return pick_peaks(v); }

TEST(PickPeaks, Basics) {
  EXPECT_EQ(peaks({0, 1, 0}), std::vector<int>{1});
  EXPECT_EQ(peaks({0.5f, 0.5f, 0.5f, 0.5f}), std::vector<int>{});
  EXPECT_EQ(peaks({1, 0, 0, 2}), (std::vector<int>{0, 3}));
  EXPECT_EQ(peaks({}), std::vector<int>{});
  EXPECT_EQ(peaks({0.3f}), std::vector<int>{});
}

TEST(PickPeaks, PlateauLowerMedian) {
  EXPECT_EQ(peaks({0, 1, 1, 0}), std::vector<int>{1});
  EXPECT_EQ(peaks({0, 1, 1, 1, 0}), std::vector<int>{2});
  EXPECT_EQ(peaks({0, 1, 1, 1, 1, 0}), std::vector<int>{2});
  // A plateau next to a higher value is not a peak.
  EXPECT_EQ(peaks({0, 1, 1, 2, 0}), std::vector<int>{3});
  // Edge plateaus.
  EXPECT_EQ(peaks({1, 1, 0}), std::vector<int>{0});
  EXPECT_EQ(peaks({0, 1, 1}), std::vector<int>{1});
}

SalienceMap column_map(const std::vector<float>& column) {
  SalienceMap m(column.size(), 1);
  for (std::size_t r = 0; r < column.size(); ++r) m(r, 0) = column[r];
  return m;
}

std::vector<float> kernel_column(std::vector<int> centres, std::size_t n = 360) {
  std::vector<float> c(n, 0.0f);
  for (int b : centres) {
    for (int d = -2; d <= 2; ++d) {
      if (b + d < 0 || b + d >= static_cast<int>(n)) continue;
      c[b + d] = std::max(c[b + d], static_cast<float>(std::exp(-0.5 * d * d)));
    }
  }
  return c;
}

TEST(PickPeaks, KernelColumns) {
  EXPECT_EQ(pick_peaks(kernel_column({100})), std::vector<int>{100});
  EXPECT_EQ(pick_peaks(kernel_column({100, 105})), (std::vector<int>{100, 105}));
}

TEST(ThresholdDecode, Examples) {
  HcqtParams p;
  const std::vector<double> times{0.0};
  EXPECT_TRUE(threshold_decode(SalienceMap(360, 1), times, {0.5}, p).f0_sets[0].empty());
  SalienceMap uniform(360, 1);
  for (auto& v : uniform.values()) v = 0.1f;
  EXPECT_TRUE(threshold_decode(uniform, times, {0.2}, p).f0_sets[0].empty());

  const auto dec = threshold_decode(column_map(kernel_column({100, 200})), times, {0.5}, p);
  ASSERT_EQ(dec.f0_sets[0].size(), 2u);
  EXPECT_EQ(dec.f0_sets[0][0], bin_to_freq(100, p));
  EXPECT_EQ(dec.f0_sets[0][1], bin_to_freq(200, p));
}

TEST(ThresholdDecode, Validation) {
  const std::vector<double> times{0.0};
  EXPECT_THROW(threshold_decode(SalienceMap(360, 1), times, {0.0}, {}), RangeError);
  EXPECT_THROW(threshold_decode(SalienceMap(360, 1), times, {1.0}, {}), RangeError);
  const std::vector<double> two{0.0, 0.1};
  EXPECT_THROW(threshold_decode(SalienceMap(360, 1), two, {0.5}, {}), ShapeError);
}

// Properties: raising the threshold never adds F0s; every output is a bin
// centre; decoding is deterministic.
TEST(ThresholdDecode, MonotoneAndOnGrid) {
  HcqtParams p;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  SalienceMap m(360, 20);
  for (auto& v : m.values()) v = u(rng);
  const auto times = p.frame_times(20);
  std::vector<std::size_t> prev(20, 1000);
  for (double th = 0.05; th < 1.0; th += 0.05) {
    const auto dec = threshold_decode(m, times, {th}, p);
    EXPECT_EQ(dec.f0_sets, threshold_decode(m, times, {th}, p).f0_sets);
    for (std::size_t t = 0; t < 20; ++t) {
      ASSERT_LE(dec.f0_sets[t].size(), prev[t]);
      prev[t] = dec.f0_sets[t].size();
      for (double f : dec.f0_sets[t]) ASSERT_EQ(f, bin_to_freq(freq_to_bin(f, p), p));
    }
  }
}

// Rasterise -> decode roundtrip on random annotations with concurrent F0s at
// least 100 cents apart.
TEST(ThresholdDecode, RasterRoundTrip) {
  HcqtParams p;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> f(40.0, 1900.0);
  std::uniform_int_distribution<int> count(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    MultiF0Annotation ann;
    ann.frame_times = p.frame_times(8);
    for (int t = 0; t < 8; ++t) {
      std::vector<double> set;
      const int n = count(rng);
      while (static_cast<int>(set.size()) < n) {
        const double c = f(rng);
        bool ok = true;
        for (double o : set) ok = ok && std::abs(cents(c, o)) >= 100.0;
        if (ok) set.push_back(c);
      }
      std::sort(set.begin(), set.end());
      ann.f0_sets.push_back(set);
    }
    const auto dec = target_to_annotation(annotation_to_target(ann, p), 0.5, p);
    for (int t = 0; t < 8; ++t) {
      ASSERT_EQ(dec.f0_sets[t].size(), ann.f0_sets[t].size());
      for (std::size_t i = 0; i < ann.f0_sets[t].size(); ++i) {
        ASSERT_LE(std::abs(cents(dec.f0_sets[t][i], ann.f0_sets[t][i])), 20.0);
      }
    }
  }
}

TEST(OptimizeThreshold, PerfectMapsTieToTop) {
  HcqtParams p;
  MultiF0Annotation ann;
  ann.frame_times = p.frame_times(4);
  ann.f0_sets = {{220.0, 330.0}, {}, {440.0}, {110.0, 550.0}};
  const auto target = annotation_to_target(ann, p).grid;
  const ThresholdCase c{&target, &ann};
  const auto res = optimize_threshold(std::span(&c, 1), p);
  EXPECT_EQ(res.grid.size(), 99u);
  EXPECT_NEAR(res.grid.front(), 0.01, 1e-12);
  EXPECT_NEAR(res.grid.back(), 0.99, 1e-12);
  // Only the unit peaks survive peak picking, so every threshold is perfect.
  for (double a : res.mean_accuracy) EXPECT_DOUBLE_EQ(a, 1.0);
  EXPECT_NEAR(res.threshold, 0.99, 1e-12);
  EXPECT_DOUBLE_EQ(res.accuracy, 1.0);
}

TEST(OptimizeThreshold, EmptyPredictionsTieToTop) {
  HcqtParams p;
  MultiF0Annotation ann;
  ann.frame_times = p.frame_times(2);
  ann.f0_sets = {{220.0}, {330.0}};
  SalienceMap zero(360, 2);
  const ThresholdCase c{&zero, &ann};
  const auto res = optimize_threshold(std::span(&c, 1), p);
  EXPECT_NEAR(res.threshold, 0.99, 1e-12);
  EXPECT_EQ(res.accuracy, 0.0);
}

// Constructed oracle: a true peak of height 0.755 plus spurious peaks of
// height 0.4. Any threshold in (0.4, 0.755] is perfect; the largest grid
// point there is 0.75.
TEST(OptimizeThreshold, ConstructedArgmax) {
  HcqtParams p;
  MultiF0Annotation ann;
  ann.frame_times = p.frame_times(3);
  ann.f0_sets = {{bin_to_freq(150, p)}, {bin_to_freq(150, p)}, {bin_to_freq(150, p)}};
  SalienceMap m(360, 3);
  for (std::size_t t = 0; t < 3; ++t) {
    m(150, t) = 0.755f;
    m(50, t) = 0.4f;
    m(250, t) = 0.4f;
  }
  const ThresholdCase c{&m, &ann};
  const auto res = optimize_threshold(std::span(&c, 1), p);
  EXPECT_NEAR(res.threshold, 0.75, 1e-9);
  EXPECT_DOUBLE_EQ(res.accuracy, 1.0);
  EXPECT_NEAR(res.mean_accuracy[0], 1.0 / 3.0, 1e-12);
}

TEST(OptimizeThreshold, NoCases) {
  EXPECT_THROW(optimize_threshold({}, {}), Error);
}

}  // namespace
}  // namespace vocalf0
