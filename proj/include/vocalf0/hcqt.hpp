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

// Harmonic constant-Q transform: magnitude and phase-differential features,
// plus the canonical time/frequency grid shared by targets and decoding.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vocalf0/array.hpp"

namespace vocalf0 {

struct HcqtParams {
  double sample_rate = 22050.0;
  int hop_length = 256;
  double f_min = 32.70;
  int bins_per_octave = 60;
  int n_octaves = 6;
  std::vector<int> harmonics{1, 2, 3, 4, 5};

  int n_bins() const { return bins_per_octave * n_octaves; }
  int n_harmonics() const { return static_cast<int>(harmonics.size()); }
  double frame_period() const { return hop_length / sample_rate; }

  /// Number of frames for a signal of `n_samples` samples.
  std::size_t n_frames(std::size_t n_samples) const {
    return n_samples / static_cast<std::size_t>(hop_length) + 1;
  }
  double frame_time(std::size_t t) const {
    return static_cast<double>(t) * hop_length / sample_rate;
  }
  std::vector<double> frame_times(std::size_t n_frames) const;

  /// Throws RangeError when harmonics are not strictly increasing from 1,
  /// sizes are non-positive or the top analysed frequency reaches Nyquist.
  void validate() const;

  /// Canonical one-line serialisation; equal params <=> equal string.
  std::string canonical() const;
  /// 16 hex digit FNV-1a hash of canonical().
  std::string hash() const;

  bool operator==(const HcqtParams&) const = default;
};

/// Centre frequency of `bin` on the h = 1 grid: f_min * 2^(bin / bpo).
double bin_to_freq(int bin, const HcqtParams& params);

/// Nearest bin in log-frequency. Throws RangeError outside
/// [f_min * 2^(-0.5/bpo), f_min * 2^((n_bins - 0.5)/bpo)).
int freq_to_bin(double freq, const HcqtParams& params);

using ComplexMatrix = Matrix<std::complex<float>>;

/// Constant-Q transform for harmonic `harmonic` (minimum frequency
/// harmonic * f_min). Returns [n_bins x n_frames]. Frame t is centred on
/// sample t * hop_length; coefficient phases are referenced to absolute time,
/// so a stationary sinusoid at a bin centre has constant phase in that bin.
ComplexMatrix compute_cqt(std::span<const float> audio, const HcqtParams& params,
                          int harmonic);

/// Per-bin phase unwrapped along time then differenced. The first column
/// repeats the difference between frames 1 and 0; a single frame gives 0.
Matrix<float> phase_differentials(const ComplexMatrix& tf);

/// Instantaneous frequency in Hz implied by a phase differential observed in
/// `bin` of harmonic channel `harmonic`.
double instantaneous_frequency(int bin, double phase_diff,
                               const HcqtParams& params, int harmonic = 1);

struct HcqtFeatures {
  HcqtParams params;
  Tensor3<float> magnitude;   // [H x F x T], in [0, 1]
  Tensor3<float> phase_diff;  // [H x F x T], radians per frame; empty if skipped
  std::vector<double> frame_times;

  std::size_t n_frames() const { return frame_times.size(); }
  bool has_phase() const { return !phase_diff.empty(); }
};

/// Magnitude floor in dB relative to the recording maximum.
inline constexpr double kMagnitudeFloorDb = -80.0;

/// Stacks per-harmonic CQTs. Magnitude is converted to dB relative to the
/// recording's maximum over all channels, floored at -80 dB and mapped
/// linearly onto [0, 1]. Pass with_phase = false to skip phase_diff.
HcqtFeatures compute_hcqt(std::span<const float> audio, const HcqtParams& params,
                          bool with_phase = true);

/// Cent distance 1200 * log2(a / b).
inline double cents(double a, double b) {
  return 1200.0 * std::log2(a / b);
}

}  // namespace vocalf0
