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

#include "vocalf0/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include "vocalf0/error.hpp"

namespace vocalf0 {

namespace {

static_assert(std::endian::native == std::endian::little,
              "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T load_le(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double decode_sample(const unsigned char* p, std::uint16_t format,
                     std::uint16_t bits) {
  if (format == kFormatFloat) {
    if (bits == 32) return load_le<float>(p);
    if (bits == 64) return load_le<double>(p);
  } else {
    switch (bits) {
      case 8:
        return (static_cast<int>(p[0]) - 128) / 128.0;
      case 16:
        return load_le<std::int16_t>(p) / 32768.0;
      case 24: {
        std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
        if (v & 0x800000) v |= ~0xFFFFFF;
        return v / 8388608.0;
      }
      case 32:
        return load_le<std::int32_t>(p) / 2147483648.0;
    }
  }
  throw FormatError("unsupported WAV sample format " + std::to_string(format) +
                    " with " + std::to_string(bits) + " bits");
}

template <typename T>
void put_le(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

// Kaiser-windowed sinc, tabulated at kTableOversample points per zero
// crossing for linear interpolation.
class SincTable {
 public:
  static constexpr int kZeroCrossings = 32;
  static constexpr int kTableOversample = 512;

  SincTable() : table_(kZeroCrossings * kTableOversample + 2) {
    const double beta = 9.0;
    const double norm = std::cyl_bessel_i(0.0, beta);
    for (std::size_t i = 0; i < table_.size(); ++i) {
      const double x = static_cast<double>(i) / kTableOversample;
      const double r = x / kZeroCrossings;
      double w = 0.0;
      if (r < 1.0) w = std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - r * r)) / norm;
      const double s =
          x == 0.0 ? 1.0
                   : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      table_[i] = s * w;
    }
  }

  // Windowed sinc at |x| zero crossings.
  double operator()(double x) const {
    x = std::abs(x) * kTableOversample;
    const auto i = static_cast<std::size_t>(x);
    if (i + 1 >= table_.size()) return 0.0;
    const double frac = x - static_cast<double>(i);
    return table_[i] + frac * (table_[i + 1] - table_[i]);
  }

 private:
  std::vector<double> table_;
};

const SincTable& sinc_table() {
  static const SincTable table;
  return table;
}

}  // namespace

Audio read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open audio file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(path.string() + ": not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const auto size = load_le<std::uint32_t>(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw FormatError(path.string() + ": short fmt chunk");
      format = load_le<std::uint16_t>(chunk + 8);
      channels = load_le<std::uint16_t>(chunk + 10);
      rate = load_le<std::uint32_t>(chunk + 12);
      block_align = load_le<std::uint16_t>(chunk + 20);
      bits = load_le<std::uint16_t>(chunk + 22);
      if (format == kFormatExtensible && avail >= 26) {
        format = load_le<std::uint16_t>(chunk + 8 + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = avail;
    }
    pos = body + size + (size & 1u);
  }

  if (channels == 0 || rate == 0 || bits == 0) {
    throw FormatError(path.string() + ": missing or invalid fmt chunk");
  }
  if (format != kFormatPcm && format != kFormatFloat) {
    throw FormatError(path.string() + ": unsupported WAV format tag " +
                      std::to_string(format));
  }
  if (data == nullptr) throw FormatError(path.string() + ": no data chunk");

  const std::size_t bytes_per_sample = bits / 8;
  if (block_align == 0) block_align = channels * bytes_per_sample;
  const std::size_t n_frames = data_size / block_align;

  Audio audio;
  audio.sample_rate = rate;
  audio.samples.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      acc += decode_sample(data + i * block_align + c * bytes_per_sample,
                           format, bits);
    }
    audio.samples[i] = static_cast<float>(acc / channels);
  }
  return audio;
}

void write_wav(const std::filesystem::path& path, const Audio& audio) {
  if (audio.sample_rate <= 0) throw Error("write_wav: invalid sample rate");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write audio file " + path.string());

  const auto data_bytes =
      static_cast<std::uint32_t>(audio.samples.size() * sizeof(float));
  const auto rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));
  os.write("RIFF", 4);
  put_le<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_le<std::uint32_t>(os, 16);
  put_le<std::uint16_t>(os, kFormatFloat);
  put_le<std::uint16_t>(os, 1);
  put_le<std::uint32_t>(os, rate);
  put_le<std::uint32_t>(os, rate * sizeof(float));
  put_le<std::uint16_t>(os, sizeof(float));
  put_le<std::uint16_t>(os, 32);
  os.write("data", 4);
  put_le<std::uint32_t>(os, data_bytes);
  os.write(reinterpret_cast<const char*>(audio.samples.data()), data_bytes);
  if (!os) throw FormatError("failed writing " + path.string());
}

std::vector<float> resample(std::span<const float> input, double ratio) {
  if (!(ratio > 0.0)) throw RangeError("resample: ratio must be positive");
  if (ratio == 1.0) return {input.begin(), input.end()};

  const auto n_out =
      static_cast<std::size_t>(std::llround(input.size() * ratio));
  std::vector<float> out(n_out);
  if (input.empty()) return out;

  const SincTable& sinc = sinc_table();
  // Cutoff relative to the input Nyquist; lowered when downsampling.
  const double cutoff = std::min(1.0, ratio) * 0.97;
  const double half_width = SincTable::kZeroCrossings / cutoff;
  const auto n_in = static_cast<std::ptrdiff_t>(input.size());

  for (std::size_t m = 0; m < n_out; ++m) {
    const double t = static_cast<double>(m) / ratio;
    const auto lo = std::max<std::ptrdiff_t>(
        0, static_cast<std::ptrdiff_t>(std::ceil(t - half_width)));
    const auto hi = std::min<std::ptrdiff_t>(
        n_in - 1, static_cast<std::ptrdiff_t>(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      acc += input[k] * sinc((t - static_cast<double>(k)) * cutoff);
    }
    out[m] = static_cast<float>(acc * cutoff);
  }
  return out;
}

Audio resample_to(const Audio& audio, double sample_rate) {
  if (audio.sample_rate <= 0) throw Error("resample_to: input has no sample rate");
  Audio out;
  out.sample_rate = sample_rate;
  out.samples = resample(audio.samples, sample_rate / audio.sample_rate);
  return out;
}

Audio load_audio(const std::filesystem::path& path, double sample_rate) {
  return resample_to(read_wav(path), sample_rate);
}

float peak_amplitude(std::span<const float> samples) {
  float peak = 0.0f;
  for (float s : samples) peak = std::max(peak, std::abs(s));
  return peak;
}

double rms(std::span<const float> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (float s : samples) acc += static_cast<double>(s) * s;
  return std::sqrt(acc / samples.size());
}

}  // namespace vocalf0
