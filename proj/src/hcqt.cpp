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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "vocalf0/dsp.hpp"
#include "vocalf0/error.hpp"
#include "vocalf0/hash.hpp"

namespace vocalf0 {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Fraction of the decimated sample rate below which the halving filter is
// flat and alias free (passband edge 0.15 R of the pre-decimation rate R).
constexpr double kDecimatedBand = 0.3;
// Frames processed per GEMM block.
constexpr std::size_t kFrameBlock = 512;

// 33-tap Kaiser windowed half-band lowpass (cutoff at a quarter of the
// input rate), unity DC gain.
const std::vector<float>& halving_filter() {
  static const std::vector<float> taps = [] {
    constexpr int kTaps = 33;
    constexpr double kBeta = 7.86;
    std::vector<double> h(kTaps);
    const double norm = std::cyl_bessel_i(0.0, kBeta);
    double sum = 0.0;
    for (int i = 0; i < kTaps; ++i) {
      const double n = i - (kTaps - 1) / 2.0;
      const double x = 0.5 * n;
      const double sinc =
          n == 0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      const double r = 2.0 * n / (kTaps - 1);
      const double w = std::cyl_bessel_i(0.0, kBeta * std::sqrt(1.0 - r * r)) / norm;
      h[i] = sinc * w;
      sum += h[i];
    }
    std::vector<float> out(kTaps);
    for (int i = 0; i < kTaps; ++i) out[i] = static_cast<float>(h[i] / sum);
    return out;
  }();
  return taps;
}

// Zero-phase lowpass then keep every second sample; sample m of the output
// is aligned with sample 2m of the input.
std::vector<float> halve(const std::vector<float>& x) {
  const auto& h = halving_filter();
  const auto half = static_cast<std::ptrdiff_t>(h.size() / 2);
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<float> y((x.size() + 1) / 2);
  for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(y.size()); ++m) {
    const std::ptrdiff_t c = 2 * m;
    double acc = 0.0;
    for (std::ptrdiff_t i = -half; i <= half; ++i) {
      const std::ptrdiff_t k = c + i;
      if (k >= 0 && k < n) acc += h[i + half] * x[k];
    }
    y[m] = static_cast<float>(acc);
  }
  return y;
}

int max_decimation(int hop) {
  int d = 0;
  while (hop % (1 << (d + 1)) == 0) ++d;
  return d;
}

double quality_factor(const HcqtParams& p) {
  return 1.0 / (std::exp2(1.0 / p.bins_per_octave) - 1.0);
}

}  // namespace

std::vector<double> HcqtParams::frame_times(std::size_t n) const {
  std::vector<double> times(n);
  for (std::size_t t = 0; t < n; ++t) times[t] = frame_time(t);
  return times;
}

void HcqtParams::validate() const {
  if (sample_rate <= 0 || hop_length <= 0 || f_min <= 0 ||
      bins_per_octave <= 0 || n_octaves <= 0) {
    throw RangeError("HcqtParams: sizes and rates must be positive");
  }
  if (harmonics.empty() || harmonics.front() != 1) {
    throw RangeError("HcqtParams: harmonics must start at 1");
  }
  for (std::size_t i = 1; i < harmonics.size(); ++i) {
    if (harmonics[i] <= harmonics[i - 1]) {
      throw RangeError("HcqtParams: harmonics must be strictly increasing");
    }
  }
  const double top = harmonics.back() * f_min * std::exp2(n_octaves);
  if (!(top < sample_rate / 2.0)) {
    std::ostringstream os;
    os << "HcqtParams: highest analysed frequency " << top
       << " Hz is not below Nyquist " << sample_rate / 2.0 << " Hz";
    throw RangeError(os.str());
  }
}

std::string HcqtParams::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "sr=" << sample_rate << ";hop=" << hop_length << ";fmin=" << f_min
     << ";bpo=" << bins_per_octave << ";oct=" << n_octaves << ";h=";
  for (std::size_t i = 0; i < harmonics.size(); ++i) {
    os << (i ? "," : "") << harmonics[i];
  }
  return os.str();
}

std::string HcqtParams::hash() const { return fnv1a_hex(canonical()); }

double bin_to_freq(int bin, const HcqtParams& params) {
  return params.f_min *
         std::exp2(static_cast<double>(bin) / params.bins_per_octave);
}

int freq_to_bin(double freq, const HcqtParams& params) {
  const double pos = params.bins_per_octave * std::log2(freq / params.f_min);
  if (!(freq > 0.0) || !(pos >= -0.5) || !(pos < params.n_bins() - 0.5)) {
    std::ostringstream os;
    os << "frequency " << freq << " Hz is outside the analysed range ["
       << bin_to_freq(0, params) * std::exp2(-0.5 / params.bins_per_octave)
       << ", "
       << params.f_min *
              std::exp2((params.n_bins() - 0.5) / params.bins_per_octave)
       << ") Hz";
    throw RangeError(os.str());
  }
  return static_cast<int>(std::lround(pos));
}

ComplexMatrix compute_cqt(std::span<const float> audio, const HcqtParams& params,
                          int harmonic) {
  params.validate();
  if (std::find(params.harmonics.begin(), params.harmonics.end(), harmonic) ==
      params.harmonics.end()) {
    throw RangeError("compute_cqt: harmonic " + std::to_string(harmonic) +
                     " is not in params.harmonics");
  }
  if (audio.empty()) throw Error("compute_cqt: empty audio");

  const int n_bins = params.n_bins();
  const double sr = params.sample_rate;
  const double base = harmonic * params.f_min;
  const double top_bin = base * std::exp2((n_bins - 1.0) / params.bins_per_octave);
  if (!(top_bin < sr / 2.0)) {
    throw RangeError("compute_cqt: top bin of harmonic " +
                     std::to_string(harmonic) + " violates Nyquist");
  }

  const double q = quality_factor(params);
  const double lobe = 1.0 + 2.0 / q;  // main-lobe half width, relative
  const int d_max = max_decimation(params.hop_length);
  const std::size_t n_frames = params.n_frames(audio.size());

  // levels[d] is the signal decimated by 2^d.
  std::vector<std::vector<float>> levels;
  levels.emplace_back(audio.begin(), audio.end());

  ComplexMatrix out(n_bins, n_frames);

  for (int b0 = 0; b0 < n_bins; b0 += params.bins_per_octave) {
    const int b1 = std::min(n_bins, b0 + params.bins_per_octave);
    const double f_top = base * std::exp2((b1 - 1.0) / params.bins_per_octave);

    int d = d_max;
    while (d > 0 && f_top * lobe > kDecimatedBand * sr / (1 << d)) --d;
    while (static_cast<int>(levels.size()) <= d) levels.push_back(halve(levels.back()));

    const std::vector<float>& x = levels[d];
    const double sr_d = sr / (1 << d);
    const int hop_d = params.hop_length >> d;
    const int n_group = b1 - b0;

    std::vector<int> half_len(n_group);
    int max_half = 0;
    for (int i = 0; i < n_group; ++i) {
      const double f = base * std::exp2(static_cast<double>(b0 + i) / params.bins_per_octave);
      half_len[i] = static_cast<int>(std::floor(q * sr_d / (2.0 * f)));
      max_half = std::max(max_half, half_len[i]);
    }
    const int width = 2 * max_half + 1;

    // Rows 2i / 2i+1 hold the real / imaginary kernel of bin b0 + i.
    Eigen::MatrixXf kernels = Eigen::MatrixXf::Zero(2 * n_group, width);
    std::vector<double> omega(n_group);
    for (int i = 0; i < n_group; ++i) {
      const double f = base * std::exp2(static_cast<double>(b0 + i) / params.bins_per_octave);
      omega[i] = kTwoPi * f / sr_d;
      const int m = half_len[i];
      double wsum = 0.0;
      for (int j = -m; j <= m; ++j) {
        wsum += 0.5 * (1.0 + std::cos(std::numbers::pi * j / (m + 1.0)));
      }
      for (int j = -m; j <= m; ++j) {
        const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * j / (m + 1.0))) / wsum;
        kernels(2 * i, j + max_half) = static_cast<float>(w * std::cos(omega[i] * j));
        kernels(2 * i + 1, j + max_half) = static_cast<float>(-w * std::sin(omega[i] * j));
      }
    }

    const auto n_x = static_cast<std::ptrdiff_t>(x.size());
    for (std::size_t t0 = 0; t0 < n_frames; t0 += kFrameBlock) {
      const std::size_t nt = std::min(kFrameBlock, n_frames - t0);
      Eigen::MatrixXf frames = Eigen::MatrixXf::Zero(width, static_cast<Eigen::Index>(nt));
      for (std::size_t t = 0; t < nt; ++t) {
        const std::ptrdiff_t c = static_cast<std::ptrdiff_t>((t0 + t) * hop_d);
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, c - max_half);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n_x - 1, c + max_half);
        for (std::ptrdiff_t k = lo; k <= hi; ++k) {
          frames(k - c + max_half, static_cast<Eigen::Index>(t)) = x[k];
        }
      }
      const Eigen::MatrixXf local = kernels * frames;
      for (int i = 0; i < n_group; ++i) {
        const double f_over_sr = omega[i] / kTwoPi;
        for (std::size_t t = 0; t < nt; ++t) {
          const double c = static_cast<double>((t0 + t) * hop_d);
          // exp(-i * omega * c) with the argument reduced before scaling.
          const double cycles = f_over_sr * c;
          const double ref = -kTwoPi * (cycles - std::floor(cycles));
          const std::complex<double> rot(std::cos(ref), std::sin(ref));
          const std::complex<double> v(local(2 * i, static_cast<Eigen::Index>(t)),
                                       local(2 * i + 1, static_cast<Eigen::Index>(t)));
          out(b0 + i, t0 + t) = std::complex<float>(v * rot);
        }
      }
    }
  }
  return out;
}

Matrix<float> phase_differentials(const ComplexMatrix& tf) {
  const std::size_t n_bins = tf.rows();
  const std::size_t n_frames = tf.cols();
  Matrix<float> out(n_bins, n_frames, 0.0f);
  if (n_frames < 2) return out;

  std::vector<double> unwrapped(n_frames);
  for (std::size_t f = 0; f < n_bins; ++f) {
    unwrapped[0] = std::arg(tf(f, 0));
    double offset = 0.0;
    double prev_raw = unwrapped[0];
    for (std::size_t t = 1; t < n_frames; ++t) {
      const double raw = std::arg(tf(f, t));
      const double step = raw - prev_raw;
      offset += dsp::princarg(step) - step;
      unwrapped[t] = raw + offset;
      prev_raw = raw;
    }
    for (std::size_t t = 1; t < n_frames; ++t) {
      out(f, t) = static_cast<float>(unwrapped[t] - unwrapped[t - 1]);
    }
    out(f, 0) = out(f, 1);
  }
  return out;
}

double instantaneous_frequency(int bin, double phase_diff,
                               const HcqtParams& params, int harmonic) {
  return harmonic * bin_to_freq(bin, params) +
         phase_diff * params.sample_rate / (kTwoPi * params.hop_length);
}

HcqtFeatures compute_hcqt(std::span<const float> audio, const HcqtParams& params,
                          bool with_phase) {
  params.validate();
  if (audio.empty()) throw Error("compute_hcqt: empty audio");

  const auto n_h = static_cast<std::size_t>(params.n_harmonics());
  const auto n_bins = static_cast<std::size_t>(params.n_bins());
  const std::size_t n_frames = params.n_frames(audio.size());

  HcqtFeatures feats;
  feats.params = params;
  feats.frame_times = params.frame_times(n_frames);
  feats.magnitude = Tensor3<float>(n_h, n_bins, n_frames);
  if (with_phase) feats.phase_diff = Tensor3<float>(n_h, n_bins, n_frames);

  float max_abs = 0.0f;
  for (std::size_t h = 0; h < n_h; ++h) {
    const ComplexMatrix cqt = compute_cqt(audio, params, params.harmonics[h]);
    auto mag = feats.magnitude.channel(h);
    for (std::size_t i = 0; i < mag.size(); ++i) {
      mag[i] = std::abs(cqt.values()[i]);
      max_abs = std::max(max_abs, mag[i]);
    }
    if (with_phase) {
      const Matrix<float> dphi = phase_differentials(cqt);
      std::copy(dphi.values().begin(), dphi.values().end(),
                feats.phase_diff.channel(h).begin());
    }
  }

  auto& mag = feats.magnitude.values();
  if (max_abs <= 0.0f) {
    std::fill(mag.begin(), mag.end(), 0.0f);
    return feats;
  }
  const double floor = kMagnitudeFloorDb;
  for (float& v : mag) {
    if (v <= 0.0f) {
      v = 0.0f;
      continue;
    }
    const double db = 20.0 * std::log10(static_cast<double>(v) / max_abs);
    v = static_cast<float>(std::clamp((db - floor) / -floor, 0.0, 1.0));
  }
  return feats;
}

}  // namespace vocalf0
