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

#include <filesystem>
#include <span>
#include <vector>

namespace vocalf0 {

/// Mono audio buffer.
struct Audio {
  std::vector<float> samples;
  double sample_rate = 0.0;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
  bool empty() const { return samples.empty(); }
};

/// Reads a RIFF/WAVE file (PCM 8/16/24/32 bit or IEEE float 32/64).
/// Multi-channel files are downmixed to mono by averaging the channels.
Audio read_wav(const std::filesystem::path& path);

/// Writes 32-bit float mono WAV.
void write_wav(const std::filesystem::path& path, const Audio& audio);

/// Band-limited resampling by an arbitrary ratio (output_rate / input_rate)
/// using a Kaiser-windowed sinc interpolator. Output length is
/// round(input.size() * ratio). ratio == 1 returns the input unchanged.
std::vector<float> resample(std::span<const float> input, double ratio);

Audio resample_to(const Audio& audio, double sample_rate);

/// read_wav followed by resample_to.
Audio load_audio(const std::filesystem::path& path, double sample_rate);

/// Largest absolute sample value.
float peak_amplitude(std::span<const float> samples);

/// Root mean square.
double rms(std::span<const float> samples);

}  // namespace vocalf0
