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

#pragma once

#include <span>
#include <vector>

namespace vocalf0::dsp {

/// Wraps an angle into (-pi, pi].
double princarg(double phase);

/// Full linear convolution (length a.size() + b.size() - 1) via FFT.
std::vector<float> fft_convolve(std::span<const float> a,
                                std::span<const float> b);

/// Phase-vocoder time stretch. `factor` > 1 lengthens the signal; the output
/// has round(input.size() * factor) samples and the same pitch.
std::vector<float> time_stretch(std::span<const float> input, double factor,
                                int fft_size = 2048);

/// Duration-preserving pitch shift by `semitones` (time stretch followed by
/// band-limited resampling back to the original length).
std::vector<float> pitch_shift(std::span<const float> input, double semitones);

}  // namespace vocalf0::dsp
