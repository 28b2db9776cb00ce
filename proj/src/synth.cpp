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

#include "vocalf0/synth.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "vocalf0/dataset.hpp"
#include "vocalf0/error.hpp"

namespace vocalf0 {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kAttack = 0.04;
constexpr double kRelease = 0.06;

double envelope(double t, double duration) {
  if (t < 0.0 || t >= duration) return 0.0;
  const double a = std::min(kAttack, duration / 2);
  const double r = std::min(kRelease, duration / 2);
  if (t < a) return 0.5 - 0.5 * std::cos(std::numbers::pi * t / a);
  if (t > duration - r) return 0.5 - 0.5 * std::cos(std::numbers::pi * (duration - t) / r);
  return 1.0;
}

SynthVoice& voice_for(SynthSpec& spec, const std::string& part) {
  for (auto& v : spec.voices) {
    if (v.part == part) return v;
  }
  spec.voices.push_back(SynthVoice{part, "1", 0.25, {}});
  return spec.voices.back();
}

double parse_pitch(const std::string& token) {
  if (token.size() > 2 && (token.ends_with("Hz") || token.ends_with("hz"))) {
    return std::stod(token.substr(0, token.size() - 2));
  }
  return midi_to_hz(std::stod(token));
}

}  // namespace

double midi_to_hz(double midi) { return 440.0 * std::exp2((midi - 69.0) / 12.0); }

SynthSpec parse_synth_spec(std::istream& in, const std::string& name) {
  SynthSpec spec;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) continue;
    const auto fail = [&](const std::string& what) {
      throw FormatError(name + ":" + std::to_string(line_no) + ": " + what);
    };
    try {
      if (key == "duration") {
        if (!(ss >> spec.duration)) fail("duration needs a value");
      } else if (key == "vibrato") {
        if (!(ss >> spec.vibrato_cents >> spec.vibrato_rate)) fail("vibrato needs depth and rate");
      } else if (key == "partials") {
        if (!(ss >> spec.partials)) fail("partials needs a value");
      } else if (key == "seed") {
        if (!(ss >> spec.seed)) fail("seed needs a value");
      } else if (key == "voice") {
        std::string part, singer;
        double gain = 0.25;
        if (!(ss >> part >> singer)) fail("voice needs part and singer");
        ss >> gain;
        auto& v = voice_for(spec, part);
        v.singer = singer;
        v.gain = gain;
      } else if (key == "note") {
        std::string part, pitch;
        double onset = 0.0, duration = 0.0;
        if (!(ss >> part >> onset >> duration >> pitch)) {
          fail("note needs part, onset, duration, pitch");
        }
        voice_for(spec, part).notes.push_back({onset, duration, parse_pitch(pitch)});
      } else {
        fail("unknown directive `" + key + "`");
      }
    } catch (const std::invalid_argument&) {
      fail("bad number");
    }
  }
  return spec;
}

SynthSpec read_synth_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open synth spec " + path.string());
  return parse_synth_spec(in, path.string());
}

SynthResult synth_quartet(const SynthSpec& spec, const HcqtParams& params) {
  if (spec.vibrato_cents < 0.0 || spec.vibrato_cents > kMaxVibratoCents) {
    throw RangeError("vibrato depth must be within [0, 20] cents");
  }
  if (spec.partials < 5) throw RangeError("synth_quartet needs at least 5 partials");
  const double sr = params.sample_rate;
  const double f_lo = bin_to_freq(0, params);
  const double f_hi = bin_to_freq(params.n_bins() - 1, params);
  const double vib = std::exp2(spec.vibrato_cents / 1200.0);

  double duration = spec.duration;
  if (duration <= 0.0) {
    for (const auto& v : spec.voices) {
      for (const auto& n : v.notes) duration = std::max(duration, n.onset + n.duration + 0.25);
    }
  }
  const auto n_samples = static_cast<std::size_t>(std::llround(duration * sr));
  if (n_samples == 0) throw Error("synth_quartet: empty spec");
  const std::size_t n_frames = params.n_frames(n_samples);

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  SynthResult result;
  for (const SynthVoice& voice : spec.voices) {
    auto notes = voice.notes;
    std::sort(notes.begin(), notes.end(),
              [](const auto& a, const auto& b) { return a.onset < b.onset; });
    for (std::size_t i = 0; i < notes.size(); ++i) {
      const auto& n = notes[i];
      if (n.duration <= 0.0 || n.onset < 0.0) {
        throw RangeError("voice " + voice.part + ": note with invalid timing");
      }
      if (n.freq / vib < f_lo || n.freq * vib > f_hi) {
        throw RangeError("voice " + voice.part + ": pitch " + std::to_string(n.freq) +
                         " Hz is outside the analysed range");
      }
      if (i > 0 && notes[i - 1].onset + notes[i - 1].duration > n.onset + 1e-9) {
        throw Error("voice " + voice.part + ": overlapping notes at " +
                    std::to_string(n.onset) + " s");
      }
    }

    // Per-voice timbre: spectral tilt with jittered partial levels.
    const double tilt = 0.8 + 0.6 * uni(rng);
    std::vector<double> amps(static_cast<std::size_t>(spec.partials));
    double amp_sum = 0.0;
    for (int k = 0; k < spec.partials; ++k) {
      amps[k] = std::pow(k + 1.0, -tilt) * (0.6 + 0.4 * uni(rng));
      amp_sum += amps[k];
    }

    Audio stem;
    stem.sample_rate = sr;
    stem.samples.assign(n_samples, 0.0f);
    F0Track track;
    track.times = params.frame_times(n_frames);
    track.f0.assign(n_frames, 0.0);

    for (const auto& n : notes) {
      const double vib_phase = kTwoPi * uni(rng);
      const auto freq_at = [&](double t) {
        return n.freq * std::exp2(spec.vibrato_cents / 1200.0 *
                                  std::sin(kTwoPi * spec.vibrato_rate * t + vib_phase));
      };
      const auto start = static_cast<std::size_t>(std::ceil(n.onset * sr));
      const auto stop = std::min(n_samples, static_cast<std::size_t>(std::ceil((n.onset + n.duration) * sr)));
      double phase = kTwoPi * uni(rng);
      for (std::size_t s = start; s < stop; ++s) {
        const double t = static_cast<double>(s) / sr - n.onset;
        const double f = freq_at(t);
        const double env = envelope(t, n.duration);
        double acc = 0.0;
        for (int k = 0; k < spec.partials; ++k) {
          if ((k + 1) * f >= sr / 2) break;
          acc += amps[k] * std::sin((k + 1) * phase);
        }
        stem.samples[s] += static_cast<float>(voice.gain * env * acc / amp_sum);
        phase += kTwoPi * f / sr;
        if (phase > kTwoPi) phase -= kTwoPi;
      }
      for (std::size_t t = 0; t < n_frames; ++t) {
        const double ft = track.times[t];
        if (ft >= n.onset && ft < n.onset + n.duration && ft * sr < static_cast<double>(n_samples)) {
          track.f0[t] = freq_at(ft - n.onset);
        }
      }
    }
    result.stems.push_back(std::move(stem));
    result.tracks.push_back(std::move(track));
  }

  result.mixture = mix_stems(result.stems).audio;
  return result;
}

SynthSpec random_quartet_spec(std::uint64_t seed, double duration, const std::string& singer) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const auto pick = [&](int n) { return static_cast<int>(uni(rng) * n) % n; };

  // Voice ranges in MIDI.
  const std::array<std::string, 4> parts{"B", "T", "A", "S"};
  const std::array<std::pair<int, int>, 4> ranges{{{40, 60}, {48, 67}, {55, 74}, {60, 79}}};
  // Major-key triads on scale degrees I..vi.
  const std::array<int, 7> scale{0, 2, 4, 5, 7, 9, 11};
  const std::array<int, 6> degrees{0, 1, 2, 3, 4, 5};

  SynthSpec spec;
  spec.duration = duration;
  spec.seed = seed;
  spec.vibrato_cents = 5.0 + 13.0 * uni(rng);
  spec.vibrato_rate = 4.5 + 2.0 * uni(rng);
  for (const auto& p : parts) spec.voices.push_back(SynthVoice{p, singer, 0.25, {}});

  const int key = pick(12);
  double t = 0.1 * uni(rng);
  const double end = duration - 0.15;
  std::array<int, 4> prev{-1, -1, -1, -1};
  while (t < end - 0.3) {
    const double len = std::min(end - t, 0.5 + 0.8 * uni(rng));
    const int deg = degrees[pick(6)];
    std::vector<int> pcs;
    for (int k = 0; k < 3; ++k) pcs.push_back((key + scale[(deg + 2 * k) % 7]) % 12);

    int below = 0;
    for (int v = 0; v < 4; ++v) {
      const auto [lo, hi] = ranges[v];
      std::vector<int> options;
      for (int m = std::max(lo, below + 1); m <= hi; ++m) {
        if (std::find(pcs.begin(), pcs.end(), m % 12) != pcs.end()) options.push_back(m);
      }
      // Bass takes the root when possible; upper voices prefer small leaps.
      int chosen = -1;
      if (!options.empty()) {
        if (v == 0) {
          std::vector<int> roots;
          for (int m : options) {
            if (m % 12 == pcs[0]) roots.push_back(m);
          }
          if (!roots.empty()) options = roots;
        }
        if (prev[v] >= 0 && uni(rng) < 0.7) {
          std::stable_sort(options.begin(), options.end(), [&](int a, int b) {
            return std::abs(a - prev[v]) < std::abs(b - prev[v]);
          });
          chosen = options[pick(std::min<int>(2, static_cast<int>(options.size())))];
        } else {
          chosen = options[pick(static_cast<int>(options.size()))];
        }
      }
      if (chosen < 0) continue;
      below = chosen;
      prev[v] = chosen;
      // Occasional rests keep the polyphony level varying.
      if (uni(rng) < 0.08) continue;
      const double gap = 0.02 + 0.03 * uni(rng);
      spec.voices[v].notes.push_back({t, std::max(0.1, len - gap), midi_to_hz(chosen)});
    }
    t += len;
  }
  return spec;
}

void write_stem_files(const std::filesystem::path& dir, const SynthSpec& spec,
                      const SynthResult& result) {
  std::filesystem::create_directories(dir);
  for (std::size_t v = 0; v < spec.voices.size(); ++v) {
    const std::string base = spec.voices[v].part + "_" + spec.voices[v].singer;
    write_wav(dir / (base + ".wav"), result.stems[v]);
    write_f0_track(dir / (base + ".csv"), result.tracks[v]);
  }
}

std::vector<std::filesystem::path> synth_corpus(const std::filesystem::path& root,
                                                const std::string& dataset, int n_songs,
                                                double duration, int singers,
                                                std::uint64_t seed, const HcqtParams& params) {
  if (n_songs < 1 || singers < 1) throw RangeError("synth_corpus: need songs and singers");
  std::vector<std::filesystem::path> dirs;
  for (int k = 0; k < n_songs; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "song_%03d", k);
    const auto dir = root / dataset / name;
    const std::uint64_t song_seed = seed * 1000003ULL + static_cast<std::uint64_t>(k);
    for (int j = 1; j <= singers; ++j) {
      SynthSpec spec = random_quartet_spec(song_seed, duration, std::to_string(j));
      spec.seed = song_seed * 31 + static_cast<std::uint64_t>(j);
      write_stem_files(dir, spec, synth_quartet(spec, params));
    }
    dirs.push_back(dir);
  }
  return dirs;
}

}  // namespace vocalf0
