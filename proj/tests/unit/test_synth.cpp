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

#include <gtest/gtest.h>

#include <sstream>

#include "test_util.hpp"
#include "vocalf0/dataset.hpp"
#include "vocalf0/error.hpp"

namespace vocalf0 {
namespace {

using testing::TempDir;

SynthSpec parse(const std::string& text) {
  std::istringstream in(text);
  return parse_synth_spec(in, "spec");
}

TEST(SynthSpec, Parse) {
  const auto s = parse(
      "# two voices\n"
      "duration 3\n"
      "vibrato 10 5\n"
      "partials 6\n"
      "seed 4\n"
      "voice S 2 0.3\n"
      "note S 0.0 1.0 69   # A4\n"
      "note B 0.5 1.0 110Hz\n");
  EXPECT_EQ(s.duration, 3.0);
  EXPECT_EQ(s.vibrato_cents, 10.0);
  EXPECT_EQ(s.vibrato_rate, 5.0);
  EXPECT_EQ(s.partials, 6);
  EXPECT_EQ(s.seed, 4u);
  ASSERT_EQ(s.voices.size(), 2u);
  EXPECT_EQ(s.voices[0].part, "S");
  EXPECT_EQ(s.voices[0].singer, "2");
  EXPECT_EQ(s.voices[0].gain, 0.3);
  EXPECT_DOUBLE_EQ(s.voices[0].notes[0].freq, 440.0);
  EXPECT_EQ(s.voices[1].notes[0].freq, 110.0);
  EXPECT_EQ(s.voices[1].notes[0].onset, 0.5);
}

TEST(SynthSpec, ErrorsNameTheLine) {
  for (const std::string bad : {"duration 1\nbogus 3\n", "duration 1\nnote S 0 1\n",
                                "duration 1\nnote S x 1 60\n"}) {
    try {
      parse(bad);
      FAIL() << bad;
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find("spec:2"), std::string::npos) << e.what();
    }
  }
}

TEST(SynthSpec, MidiToHz) {
  EXPECT_DOUBLE_EQ(midi_to_hz(69), 440.0);
  EXPECT_DOUBLE_EQ(midi_to_hz(57), 220.0);
  EXPECT_NEAR(midi_to_hz(60), 261.6256, 1e-4);
}

TEST(SynthQuartet, TracksFollowNotes) {
  const HcqtParams p;
  const auto spec = parse(
      "duration 2\nvibrato 15 5.5\nnote S 0.2 1.0 440Hz\nnote B 0.0 2.0 110Hz\n");
  const auto r = synth_quartet(spec, p);
  ASSERT_EQ(r.stems.size(), 2u);
  EXPECT_EQ(r.mixture.samples.size(), static_cast<std::size_t>(2.0 * p.sample_rate));
  for (std::size_t v = 0; v < 2; ++v) {
    const auto& tr = r.tracks[v];
    ASSERT_EQ(tr.size(), p.n_frames(r.mixture.samples.size()));
    const double f = spec.voices[v].notes[0].freq;
    for (std::size_t t = 0; t < tr.size(); ++t) {
      const auto& n = spec.voices[v].notes[0];
      const bool inside = tr.times[t] >= n.onset && tr.times[t] < n.onset + n.duration;
      if (!inside) {
        ASSERT_EQ(tr.f0[t], 0.0);
      } else {
        ASSERT_LE(std::abs(cents(tr.f0[t], f)), 15.0 + 1e-9);
      }
    }
  }
  // Identical spec, identical audio.
  EXPECT_EQ(synth_quartet(spec, p).mixture.samples, r.mixture.samples);
}

TEST(SynthQuartet, SpectralPeakAtNote) {
  const HcqtParams p;
  const auto spec = parse("duration 1\nvibrato 0 5\nnote A 0 1 " +
                          std::to_string(bin_to_freq(200, p)) + "Hz\n");
  const auto r = synth_quartet(spec, p);
  const auto f = compute_hcqt(r.mixture.samples, p, false);
  std::vector<double> mean(f.magnitude.rows(), 0.0);
  for (std::size_t b = 0; b < mean.size(); ++b) {
    for (std::size_t t = 20; t < 60; ++t) mean[b] += f.magnitude(0, b, t);
  }
  EXPECT_EQ(std::max_element(mean.begin(), mean.end()) - mean.begin(), 200);
}

TEST(SynthQuartet, Validation) {
  EXPECT_THROW(synth_quartet(parse("vibrato 25 5\nnote S 0 1 60\n")), RangeError);
  EXPECT_THROW(synth_quartet(parse("partials 4\nnote S 0 1 60\n")), RangeError);
  EXPECT_THROW(synth_quartet(parse("note S 0 1 10Hz\n")), RangeError);
  EXPECT_THROW(synth_quartet(parse("note S 0 1 2500Hz\n")), RangeError);
  EXPECT_THROW(synth_quartet(parse("note S 0 1 60\nnote S 0.5 1 62\n")), Error);
  EXPECT_THROW(synth_quartet(SynthSpec{}), Error);
}

TEST(RandomQuartet, VoicesAscendAndStayInRange) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto spec = random_quartet_spec(seed, 6.0);
    ASSERT_EQ(spec.voices.size(), 4u);
    EXPECT_LE(spec.vibrato_cents, kMaxVibratoCents);
    // Sample the score every 50 ms: sounding voices are strictly ascending
    // from bass to soprano.
    for (double t = 0.0; t < 6.0; t += 0.05) {
      double below = 0.0;
      for (const auto& v : spec.voices) {
        for (const auto& n : v.notes) {
          if (t >= n.onset && t < n.onset + n.duration) {
            ASSERT_GT(n.freq, below) << "seed " << seed << " t " << t;
            below = n.freq;
          }
        }
      }
    }
    EXPECT_NO_THROW(synth_quartet(spec));
  }
}

TEST(SynthCorpus, Layout) {
  TempDir dir;
  const auto songs = synth_corpus(dir.path(), "SYN", 2, 1.0, 2, 3);
  EXPECT_EQ(songs.size(), 2u);
  for (const std::string part : {"S", "A", "T", "B"}) {
    for (const std::string singer : {"1", "2"}) {
      EXPECT_TRUE(std::filesystem::exists(dir / ("SYN/song_001/" + part + "_" + singer + ".wav")));
      EXPECT_TRUE(std::filesystem::exists(dir / ("SYN/song_001/" + part + "_" + singer + ".csv")));
    }
  }
  // Singers share the score but not the timbre.
  const auto a = read_f0_track(dir / "SYN/song_000/S_1.csv");
  const auto b = read_f0_track(dir / "SYN/song_000/S_2.csv");
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t t = 0; t < a.size(); ++t) EXPECT_EQ(a.f0[t] > 0, b.f0[t] > 0);
  EXPECT_NE(read_wav(dir / "SYN/song_000/S_1.wav").samples,
            read_wav(dir / "SYN/song_000/S_2.wav").samples);
}

}  // namespace
}  // namespace vocalf0
