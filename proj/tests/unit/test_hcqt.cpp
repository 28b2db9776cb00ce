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

#include "vocalf0/hcqt.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

#include "test_util.hpp"
#include "vocalf0/error.hpp"

namespace vocalf0 {
namespace {

using testing::sine;

std::size_t argmax_mean_column(const Tensor3<float>& mag, std::size_t h) {
  std::vector<double> mean(mag.rows());
  for (std::size_t f = 0; f < mag.rows(); ++f) {
    for (std::size_t t = 0; t < mag.cols(); ++t) mean[f] += mag(h, f, t);
  }
  return static_cast<std::size_t>(std::max_element(mean.begin(), mean.end()) - mean.begin());
}

TEST(HcqtParams, DefaultGrid) {
  HcqtParams p;
  EXPECT_EQ(p.n_bins(), 360);
  EXPECT_EQ(p.n_harmonics(), 5);
  EXPECT_NO_THROW(p.validate());
  EXPECT_DOUBLE_EQ(p.frame_time(10), 10 * 256 / 22050.0);
}

TEST(HcqtParams, Validation) {
  HcqtParams p;
  p.harmonics = {2, 3};
  EXPECT_THROW(p.validate(), RangeError);
  p.harmonics = {1, 3, 2};
  EXPECT_THROW(p.validate(), RangeError);
  p.harmonics = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};  // 10 * 32.7 * 64 Hz > Nyquist
  EXPECT_THROW(p.validate(), RangeError);
  p = HcqtParams{};
  p.hop_length = 0;
  EXPECT_THROW(p.validate(), RangeError);
}

TEST(HcqtParams, HashTracksContent) {
  HcqtParams a, b;
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
  b.hop_length = 512;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(Grid, BinToFreqExamples) {
  HcqtParams p;
  EXPECT_NEAR(bin_to_freq(0, p), 32.70, 1e-12);
  EXPECT_NEAR(bin_to_freq(60, p), 65.40, 1e-9);
  // Oracle: nearest bin in log frequency.
  const int oracle = static_cast<int>(std::lround(60.0 * std::log2(440.0 / 32.70)));
  EXPECT_EQ(oracle, 225);
  EXPECT_EQ(freq_to_bin(440.0, p), oracle);
}

TEST(Grid, RoundTripEveryBin) {
  HcqtParams p;
  for (int b = 0; b < p.n_bins(); ++b) EXPECT_EQ(freq_to_bin(bin_to_freq(b, p), p), b);
}

TEST(Grid, AdjacentBinsAreTwentyCents) {
  HcqtParams p;
  for (int b = 0; b + 1 < p.n_bins(); ++b) {
    EXPECT_NEAR(1200.0 * std::log2(bin_to_freq(b + 1, p) / bin_to_freq(b, p)), 20.0, 1e-9);
  }
}

TEST(Grid, OutOfRangeFrequencies) {
  HcqtParams p;
  EXPECT_THROW(freq_to_bin(10.0, p), RangeError);
  EXPECT_THROW(freq_to_bin(5000.0, p), RangeError);
  EXPECT_THROW(freq_to_bin(0.0, p), RangeError);
  EXPECT_EQ(freq_to_bin(32.70 * std::exp2(-0.4 / 60), p), 0);
  EXPECT_EQ(freq_to_bin(bin_to_freq(359, p) * std::exp2(0.4 / 60), p), 359);
}

// Golden frame counts, frozen from the framing rule T = floor(n / hop) + 1.
TEST(Cqt, GoldenFrameCounts) {
  HcqtParams p;
  const std::pair<std::size_t, std::size_t> golden[] = {
      {1, 1}, {255, 1}, {256, 2}, {22050, 87}, {220500, 862}};
  for (const auto& [n, t] : golden) EXPECT_EQ(p.n_frames(n), t) << n;
  const auto tf = compute_cqt(std::vector<float>(22050, 0.1f), p, 1);
  EXPECT_EQ(tf.rows(), 360u);
  EXPECT_EQ(tf.cols(), 87u);
}

TEST(Cqt, SilenceIsZero) {
  HcqtParams p;
  const auto tf = compute_cqt(std::vector<float>(4096, 0.0f), p, 2);
  for (const auto& v : tf.values()) EXPECT_EQ(std::abs(v), 0.0f);
}

TEST(Cqt, Errors) {
  HcqtParams p;
  EXPECT_THROW(compute_cqt(std::vector<float>{}, p, 1), Error);
  EXPECT_THROW(compute_cqt(std::vector<float>(100, 0.0f), p, 7), RangeError);
}

TEST(Cqt, SecondHarmonicStartsAtDoubleFmin) {
  HcqtParams p;
  p.harmonics = {1, 2};
  const auto feats = compute_hcqt(sine(2 * 32.70, 2.0), p, false);
  EXPECT_EQ(argmax_mean_column(feats.magnitude, 1), 0u);
  EXPECT_EQ(argmax_mean_column(feats.magnitude, 0), 60u);
}

TEST(Hcqt, TenSecondShapes) {
  HcqtParams p;
  const auto feats = compute_hcqt(sine(220.0, 10.0), p);
  EXPECT_EQ(feats.magnitude.channels(), 5u);
  EXPECT_EQ(feats.magnitude.rows(), 360u);
  EXPECT_EQ(feats.magnitude.cols(), 862u);
  EXPECT_TRUE(feats.magnitude.same_shape(feats.phase_diff));
  ASSERT_EQ(feats.frame_times.size(), 862u);
  for (std::size_t t = 0; t < 862; ++t) EXPECT_DOUBLE_EQ(feats.frame_times[t], t * 256 / 22050.0);
  for (float v : feats.magnitude.values()) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
  }
  EXPECT_EQ(*std::max_element(feats.magnitude.values().begin(), feats.magnitude.values().end()),
            1.0f);
}

TEST(Hcqt, SineArgmax) {
  HcqtParams p;
  const auto feats = compute_hcqt(sine(440.0, 2.0), p, false);
  EXPECT_FALSE(feats.has_phase());
  EXPECT_EQ(argmax_mean_column(feats.magnitude, 0), 225u);
  // Harmonic h sees 440 Hz at 225 - 60 log2(h).
  EXPECT_EQ(argmax_mean_column(feats.magnitude, 1), 165u);
  EXPECT_EQ(argmax_mean_column(feats.magnitude, 3), 105u);
}

TEST(Hcqt, SilenceMapsToZeroMagnitude) {
  const auto feats = compute_hcqt(std::vector<float>(22050, 0.0f), HcqtParams{});
  for (float v : feats.magnitude.values()) ASSERT_EQ(v, 0.0f);
}

TEST(PhaseDifferentials, ConstantPhaseIsZero) {
  ComplexMatrix tf(4, 6);
  for (auto& v : tf.values()) v = {2.0f, 0.0f};
  const auto d = phase_differentials(tf);
  for (float v : d.values()) EXPECT_EQ(v, 0.0f);
}

TEST(PhaseDifferentials, UnwrapsJumps) {
  // Phase advancing by 0.1 rad per frame, wrapped into (-pi, pi].
  ComplexMatrix tf(1, 80);
  for (std::size_t t = 0; t < 80; ++t) tf(0, t) = std::polar(1.0f, static_cast<float>(0.1 * t + 3.0));
  const auto d = phase_differentials(tf);
  for (std::size_t t = 0; t < 80; ++t) EXPECT_NEAR(d(0, t), 0.1, 1e-5) << t;
}

TEST(PhaseDifferentials, FullTurnBetweenFramesIsZero) {
  ComplexMatrix tf(1, 3);
  tf(0, 0) = std::polar(1.0f, 0.5f);
  tf(0, 1) = std::polar(1.0f, 0.5f + 2.0f * std::numbers::pi_v<float>);
  tf(0, 2) = std::polar(1.0f, 0.5f);
  const auto d = phase_differentials(tf);
  for (float v : d.values()) EXPECT_NEAR(v, 0.0f, 1e-5);
}

TEST(PhaseDifferentials, FirstColumnExtendsTheFirstDifference) {
  ComplexMatrix tf(1, 3);
  tf(0, 0) = std::polar(1.0f, 0.0f);
  tf(0, 1) = std::polar(1.0f, 0.3f);
  tf(0, 2) = std::polar(1.0f, 1.0f);
  const auto d = phase_differentials(tf);
  EXPECT_NEAR(d(0, 0), 0.3f, 1e-6);
  EXPECT_NEAR(d(0, 1), 0.3f, 1e-6);
  EXPECT_NEAR(d(0, 2), 0.7f, 1e-6);
  ComplexMatrix one(2, 1);
  one(0, 0) = {1.0f, 1.0f};
  EXPECT_EQ(phase_differentials(one)(0, 0), 0.0f);
}

TEST(InstantaneousFrequency, BinCentreSinusoid) {
  HcqtParams p;
  p.harmonics = {1};
  const int bin = 200;
  const double f = bin_to_freq(bin, p);
  const auto feats = compute_hcqt(sine(f, 1.0), p);
  const std::size_t mid = feats.n_frames() / 2;
  const double est = instantaneous_frequency(bin, feats.phase_diff(0, bin, mid), p);
  EXPECT_LT(std::abs(cents(est, f)), 10.0);
}

// Property: 20 random sinusoids in [100, 800] Hz recovered within 10 cents
// from the phase differential at the dominant bin, away from the edges.
TEST(InstantaneousFrequency, RandomSinusoids) {
  HcqtParams p;
  p.harmonics = {1};
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> freq(100.0, 800.0);
  for (int k = 0; k < 20; ++k) {
    const double f = freq(rng);
    const auto feats = compute_hcqt(sine(f, 1.0, 22050.0, 0.3, 0.7 * k), p);
    const std::size_t n = feats.n_frames();
    for (std::size_t t = n / 4; t < 3 * n / 4; t += 7) {
      int best = 0;
      for (int b = 1; b < p.n_bins(); ++b) {
        if (feats.magnitude(0, b, t) > feats.magnitude(0, best, t)) best = b;
      }
      const double est = instantaneous_frequency(best, feats.phase_diff(0, best, t), p);
      ASSERT_LT(std::abs(cents(est, f)), 10.0) << "f=" << f << " t=" << t;
    }
  }
}

TEST(InstantaneousFrequency, HigherHarmonicChannel) {
  HcqtParams p;
  p.harmonics = {1, 2};
  const double f = 300.0;
  const auto feats = compute_hcqt(sine(f, 1.0), p);
  const std::size_t t = feats.n_frames() / 2;
  int best = 0;
  for (int b = 1; b < p.n_bins(); ++b) {
    if (feats.magnitude(1, b, t) > feats.magnitude(1, best, t)) best = b;
  }
  EXPECT_LT(std::abs(cents(instantaneous_frequency(best, feats.phase_diff(1, best, t), p, 2), f)),
            10.0);
}

}  // namespace
}  // namespace vocalf0
