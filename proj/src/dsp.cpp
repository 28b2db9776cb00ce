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

#include "vocalf0/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>

#include "vocalf0/audio.hpp"
#include "vocalf0/error.hpp"

namespace vocalf0::dsp {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// The FFTW planner is not thread safe; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw Error("fftw_malloc failed");
  return FftwBuffer<T>(p);
}

// Real-to-complex / complex-to-real plan pair of a fixed size.
class RealFft {
 public:
  explicit RealFft(std::size_t n)
      : n_(n), time_(fftw_buffer<double>(n)),
        freq_(fftw_buffer<fftw_complex>(n / 2 + 1)) {
    std::lock_guard lock(planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), time_.get(),
                                    freq_.get(), FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), freq_.get(),
                                    time_.get(), FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }
  double* time() { return time_.get(); }
  std::complex<double>* freq() {
    return reinterpret_cast<std::complex<double>*>(freq_.get());
  }
  void forward() { fftw_execute(forward_); }
  // Unnormalised; callers scale by 1/n.
  void inverse() { fftw_execute(inverse_); }

 private:
  std::size_t n_;
  FftwBuffer<double> time_;
  FftwBuffer<fftw_complex> freq_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

std::size_t next_fast_size(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / n);
  }
  return w;
}

}  // namespace

double princarg(double phase) {
  double p = std::fmod(phase + std::numbers::pi, kTwoPi);
  if (p <= 0.0) p += kTwoPi;
  return p - std::numbers::pi;
}

std::vector<float> fft_convolve(std::span<const float> a,
                                std::span<const float> b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  const std::size_t n = next_fast_size(out_len);

  RealFft fa(n);
  RealFft fb(n);
  std::fill_n(fa.time(), n, 0.0);
  std::fill_n(fb.time(), n, 0.0);
  std::copy(a.begin(), a.end(), fa.time());
  std::copy(b.begin(), b.end(), fb.time());
  fa.forward();
  fb.forward();
  for (std::size_t k = 0; k < fa.bins(); ++k) fa.freq()[k] *= fb.freq()[k];
  fa.inverse();

  std::vector<float> out(out_len);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < out_len; ++i) {
    out[i] = static_cast<float>(fa.time()[i] * scale);
  }
  return out;
}

// Phase vocoder with identity phase locking: phases are propagated at
// spectral peaks and every other bin keeps its analysis phase offset to the
// peak whose region it belongs to.
std::vector<float> time_stretch(std::span<const float> input, double factor,
                                int fft_size) {
  if (!(factor > 0.0)) throw RangeError("time_stretch: factor must be positive");
  if (input.empty()) return {};
  if (factor == 1.0) return {input.begin(), input.end()};

  const std::size_t n = static_cast<std::size_t>(fft_size);
  const std::size_t synthesis_hop = n / 4;
  const double analysis_hop = synthesis_hop / factor;
  const std::size_t out_len =
      static_cast<std::size_t>(std::llround(input.size() * factor));

  // Centre frames by padding half a window on each side.
  const std::size_t pad = n / 2;
  std::vector<double> padded(input.size() + 2 * pad + n, 0.0);
  std::copy(input.begin(), input.end(), padded.begin() + pad);

  const std::size_t n_frames =
      static_cast<std::size_t>(std::ceil((out_len + 2.0 * pad) / synthesis_hop)) + 1;
  std::vector<double> output((n_frames + 1) * synthesis_hop + n, 0.0);
  std::vector<double> norm(output.size(), 0.0);

  const auto window = hann(n);
  RealFft fft(n);
  const std::size_t bins = fft.bins();

  std::vector<double> magnitude(bins), phase(bins), prev_phase(bins),
      synth_phase(bins), peak_synth(bins);
  std::vector<std::size_t> peaks;
  double prev_pos = 0.0;

  for (std::size_t i = 0; i < n_frames; ++i) {
    const double pos = i * analysis_hop;
    const auto start = static_cast<std::size_t>(std::llround(pos));
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t idx = start + j;
      fft.time()[j] = (idx < padded.size() ? padded[idx] : 0.0) * window[j];
    }
    fft.forward();
    for (std::size_t k = 0; k < bins; ++k) {
      magnitude[k] = std::abs(fft.freq()[k]);
      phase[k] = std::arg(fft.freq()[k]);
    }

    if (i == 0) {
      synth_phase = phase;
    } else {
      const double hop = static_cast<double>(start) - prev_pos;
      peaks.clear();
      for (std::size_t k = 1; k + 1 < bins; ++k) {
        if (magnitude[k] > magnitude[k - 1] && magnitude[k] >= magnitude[k + 1]) {
          peaks.push_back(k);
        }
      }
      if (peaks.empty()) peaks.push_back(0);
      for (std::size_t p : peaks) {
        const double omega = kTwoPi * static_cast<double>(p) / n;
        const double dev = princarg(phase[p] - prev_phase[p] - omega * hop);
        const double inst = omega + (hop > 0 ? dev / hop : 0.0);
        peak_synth[p] = synth_phase[p] + inst * synthesis_hop;
      }
      // Region boundaries sit halfway between neighbouring peaks.
      std::size_t region = 0;
      for (std::size_t k = 0; k < bins; ++k) {
        while (region + 1 < peaks.size() &&
               k > (peaks[region] + peaks[region + 1]) / 2) {
          ++region;
        }
        const std::size_t p = peaks[region];
        synth_phase[k] = peak_synth[p] + (phase[k] - phase[p]);
      }
    }
    prev_phase = phase;
    prev_pos = static_cast<double>(start);

    for (std::size_t k = 0; k < bins; ++k) {
      fft.freq()[k] = std::polar(magnitude[k], synth_phase[k]);
    }
    fft.inverse();
    const std::size_t out_start = i * synthesis_hop;
    for (std::size_t j = 0; j < n; ++j) {
      output[out_start + j] += fft.time()[j] / n * window[j];
      norm[out_start + j] += window[j] * window[j];
    }
  }

  std::vector<float> out(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    const std::size_t idx = i + pad;
    const double w = norm[idx];
    out[i] = static_cast<float>(w > 1e-6 ? output[idx] / w : 0.0);
  }
  return out;
}

std::vector<float> pitch_shift(std::span<const float> input, double semitones) {
  if (semitones == 0.0 || input.empty()) return {input.begin(), input.end()};
  const double ratio = std::exp2(semitones / 12.0);
  const auto stretched = time_stretch(input, ratio);
  auto out = resample(stretched, 1.0 / ratio);
  out.resize(input.size(), 0.0f);
  return out;
}

}  // namespace vocalf0::dsp
