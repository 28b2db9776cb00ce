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

// Synthetic vocal quartets: harmonic tones with vibrato and envelopes, with
// exact ground-truth F0 tracks on the analysis hop grid.
//
// Spec file format (one directive per line, `#` starts a comment):
//
//   duration 10            total length in seconds
//   vibrato 15 5.5         depth in cents (<= 20), rate in Hz
//   partials 8             harmonics per voice (>= 5)
//   seed 3                 timbre / vibrato phase randomisation
//   voice S 1 0.25         part, singer id, gain (optional per part)
//   note S 0.0 2.0 69      part, onset s, duration s, MIDI pitch
//   note B 0.0 2.0 110Hz   ... or a frequency with an Hz suffix

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vocalf0/annotation.hpp"
#include "vocalf0/audio.hpp"
#include "vocalf0/hcqt.hpp"

namespace vocalf0 {

struct SynthNote {
  double onset = 0.0;
  double duration = 0.0;
  double freq = 0.0;  // Hz
};

struct SynthVoice {
  std::string part;
  std::string singer = "1";
  double gain = 0.25;
  std::vector<SynthNote> notes;
};

inline constexpr double kMaxVibratoCents = 20.0;

struct SynthSpec {
  double duration = 0.0;  // 0: end of the last note plus 0.25 s
  double vibrato_cents = 15.0;
  double vibrato_rate = 5.5;
  int partials = 8;
  std::uint64_t seed = 0;
  std::vector<SynthVoice> voices;
};

struct SynthResult {
  Audio mixture;
  std::vector<Audio> stems;     // one per voice, spec order
  std::vector<F0Track> tracks;  // one per voice, on the hop grid
};

double midi_to_hz(double midi);

SynthSpec parse_synth_spec(std::istream& in, const std::string& name = "<stream>");
SynthSpec read_synth_spec(const std::filesystem::path& path);

/// Renders every voice. Throws RangeError for pitches outside the analysed
/// range or vibrato deeper than 20 cents, and Error for overlapping notes
/// within one voice.
SynthResult synth_quartet(const SynthSpec& spec, const HcqtParams& params = {});

/// Random four-part (S, A, T, B) chord progression of `duration` seconds.
/// Concurrent voices are always on distinct pitches.
SynthSpec random_quartet_spec(std::uint64_t seed, double duration,
                              const std::string& singer = "1");

/// Writes `<dir>/<part>_<singer>.wav` and the sibling `.csv` track for each
/// voice, i.e. the stem layout consumed by scan_stem_directory.
void write_stem_files(const std::filesystem::path& dir, const SynthSpec& spec,
                      const SynthResult& result);

/// `n_songs` random songs under `<root>/<dataset>/song_NNN/`, each sung by
/// `singers` different synthetic voices per part (same notes, new timbre).
/// Returns the song directories.
std::vector<std::filesystem::path> synth_corpus(const std::filesystem::path& root,
                                                const std::string& dataset, int n_songs,
                                                double duration, int singers,
                                                std::uint64_t seed,
                                                const HcqtParams& params = {});

}  // namespace vocalf0
