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

#include "vocalf0/dataset.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "test_util.hpp"
#include "vocalf0/error.hpp"
#include "vocalf0/synth.hpp"

namespace vocalf0 {
namespace {

using testing::sine;
using testing::TempDir;

StemSet counted_set(std::map<std::string, int> counts) {
  StemSet s;
  s.song_id = "DS/song";
  for (const auto& [part, n] : counts) {
    for (int i = 1; i <= n; ++i) {
      s.parts[part].push_back(Stem{part + std::to_string(i) + ".wav",
                                   part + std::to_string(i) + ".csv", std::to_string(i)});
    }
  }
  return s;
}

TEST(EnumerateMixtures, Counts) {
  EXPECT_EQ(enumerate_mixtures(counted_set({{"S", 4}, {"A", 4}, {"T", 4}, {"B", 4}})).size(),
            256u);
  EXPECT_EQ(enumerate_mixtures(counted_set({{"S", 2}, {"A", 2}, {"T", 4}, {"B", 5}})).size(),
            80u);
  EXPECT_EQ(enumerate_mixtures(counted_set({{"S", 1}, {"A", 1}, {"T", 1}, {"B", 1}})).size(),
            1u);
}

TEST(EnumerateMixtures, DistinctAndOrdered) {
  const auto recipes =
      enumerate_mixtures(counted_set({{"S", 2}, {"A", 3}, {"T", 1}, {"B", 2}}));
  std::set<std::string> seen;
  for (const auto& r : recipes) {
    ASSERT_EQ(r.stems.size(), 4u);
    std::string key;
    for (std::size_t p = 0; p < 4; ++p) {
      EXPECT_EQ(r.stems[p].first, default_parts()[p]);
      key += r.stems[p].second.singer;
    }
    seen.insert(key);
  }
  EXPECT_EQ(seen.size(), recipes.size());
}

TEST(EnumerateMixtures, MissingPartNamed) {
  try {
    enumerate_mixtures(counted_set({{"S", 1}, {"A", 1}, {"B", 1}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("`T`"), std::string::npos);
  }
}

Audio audio_of(std::vector<float> x, double sr = 22050.0) { return Audio{std::move(x), sr}; }

TEST(MixStems, SumsAndPads) {
  const std::vector<Audio> stems{audio_of({0.1f, 0.2f, 0.3f}), audio_of({0.1f})};
  const auto m = mix_stems(stems);
  EXPECT_EQ(m.gain, 1.0);
  ASSERT_EQ(m.audio.samples.size(), 3u);
  EXPECT_FLOAT_EQ(m.audio.samples[0], 0.2f);
  EXPECT_FLOAT_EQ(m.audio.samples[2], 0.3f);
}

TEST(MixStems, ClippingNormalisesToMinusOneDb) {
  const std::vector<Audio> stems{audio_of({0.9f, -0.5f}), audio_of({0.9f, 0.0f})};
  const auto m = mix_stems(stems);
  EXPECT_NEAR(peak_amplitude(m.audio.samples), kNormalisedPeak, 1e-6);
  EXPECT_NEAR(m.gain, kNormalisedPeak / 1.8, 1e-6);
  EXPECT_NEAR(20.0 * std::log10(kNormalisedPeak), -1.0, 1e-12);
}

TEST(MixStems, Errors) {
  EXPECT_THROW(mix_stems({}), Error);
  const std::vector<Audio> stems{audio_of({0.1f}), audio_of({0.1f}, 44100.0)};
  EXPECT_THROW(mix_stems(stems), Error);
}

std::size_t argmax_fundamental(const Audio& a) {
  const auto f = compute_hcqt(a.samples, HcqtParams{}, false);
  std::vector<double> mean(f.magnitude.rows(), 0.0);
  for (std::size_t r = 0; r < mean.size(); ++r) {
    for (std::size_t t = 10; t + 10 < f.n_frames(); ++t) mean[r] += f.magnitude(0, r, t);
  }
  return static_cast<std::size_t>(std::max_element(mean.begin(), mean.end()) - mean.begin());
}

TEST(PitchShift, AnnotationFactorAndSpectralPeak) {
  const HcqtParams p;
  const double f0 = bin_to_freq(150, p);
  const Audio tone = audio_of(sine(f0, 2.0));
  F0Track track{{0.0, 0.1, 0.2}, {f0, 0.0, 330.0}};
  ASSERT_EQ(argmax_fundamental(tone), 150u);
  for (int s : {-2, -1, 1, 2}) {
    const auto [a, t] = pitch_shift_stem(tone, track, s);
    EXPECT_EQ(a.samples.size(), tone.samples.size());
    EXPECT_EQ(t.times, track.times);
    EXPECT_EQ(t.f0[0], f0 * std::exp2(s / 12.0));
    EXPECT_EQ(t.f0[1], 0.0);
    EXPECT_EQ(t.f0[2], 330.0 * std::exp2(s / 12.0));
    EXPECT_EQ(argmax_fundamental(a), static_cast<std::size_t>(150 + 5 * s));
  }
}

TEST(PitchShift, ZeroIsBitExactAndRangeChecked) {
  const Audio tone = audio_of(sine(220.0, 0.5));
  const F0Track track{{0.0}, {220.0}};
  const auto [a, t] = pitch_shift_stem(tone, track, 0);
  EXPECT_EQ(a.samples, tone.samples);
  EXPECT_EQ(t.f0, track.f0);
  EXPECT_THROW(pitch_shift_stem(tone, track, 3), RangeError);
  EXPECT_THROW(pitch_shift_stem(tone, track, -3), RangeError);
}

TEST(Reverb, UnitImpulseIsIdentity) {
  const Audio x = audio_of(sine(300.0, 0.2));
  const auto wet = apply_reverb(x, audio_of({1.0f}));
  ASSERT_EQ(wet.audio.samples.size(), x.samples.size());
  for (std::size_t n = 0; n < x.samples.size(); ++n) {
    ASSERT_NEAR(wet.audio.samples[n], x.samples[n], 1e-5);
  }
}

TEST(Reverb, DelayedImpulseShiftsAndTruncates) {
  const Audio x = audio_of(sine(300.0, 0.2));
  const auto wet = apply_reverb(x, audio_of({0.0f, 0.0f, 0.0f, 0.5f}));
  ASSERT_EQ(wet.audio.samples.size(), x.samples.size());
  for (std::size_t n = 0; n < 3; ++n) EXPECT_NEAR(wet.audio.samples[n], 0.0f, 1e-5);
  for (std::size_t n = 3; n < x.samples.size(); ++n) {
    ASSERT_NEAR(wet.audio.samples[n], 0.5f * x.samples[n - 3], 1e-5);
  }
  EXPECT_THROW(apply_reverb(x, Audio{{}, 22050.0}), Error);
}

TEST(Reverb, SyntheticImpulseResponseDecays) {
  const Audio ir = synth_impulse_response(22050.0, 0.5, 1);
  EXPECT_EQ(ir.samples.front(), 1.0f);
  const std::size_t q = ir.samples.size() / 4;
  const double early = rms(std::span(ir.samples).subspan(q / 2, q));
  const double late = rms(std::span(ir.samples).subspan(3 * q, q));
  EXPECT_GT(early, 10.0 * late);
  EXPECT_EQ(ir.samples, synth_impulse_response(22050.0, 0.5, 1).samples);
}

std::vector<ManifestEntry> entries_for(int songs, int files_per_song) {
  std::vector<ManifestEntry> e;
  for (int s = 0; s < songs; ++s) {
    for (int f = 0; f < files_per_song; ++f) {
      ManifestEntry m;
      m.song_id = "DS/song" + std::to_string(s);
      m.audio_path = m.song_id + "/mix" + std::to_string(f) + ".wav";
      m.annotation_path = m.song_id + "/mix" + std::to_string(f) + ".tsv";
      e.push_back(m);
    }
  }
  return e;
}

TEST(SplitDataset, SongLevelNoLeakage) {
  const auto entries = entries_for(40, 6);
  const auto m = split_dataset(entries, {0.75, 0.10, 0.15}, 7);
  ASSERT_EQ(m.entries.size(), entries.size());
  std::map<std::string, Split> song_split;
  std::map<Split, std::size_t> counts;
  for (const auto& e : m.entries) {
    ASSERT_NE(e.split, Split::kUnassigned);
    const auto [it, fresh] = song_split.emplace(e.song_id, e.split);
    ASSERT_EQ(it->second, e.split) << e.song_id;
    ++counts[e.split];
  }
  EXPECT_EQ(counts[Split::kTrain], 180u);
  EXPECT_EQ(counts[Split::kValidation], 24u);
  EXPECT_EQ(counts[Split::kTest], 36u);
}

TEST(SplitDataset, DeterministicPerSeed) {
  const auto entries = entries_for(12, 3);
  const auto a = split_dataset(entries, {0.75, 0.10, 0.15}, 1);
  const auto b = split_dataset(entries, {0.75, 0.10, 0.15}, 1);
  bool differs = false;
  for (std::uint64_t seed = 2; seed < 6 && !differs; ++seed) {
    const auto c = split_dataset(entries, {0.75, 0.10, 0.15}, seed);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      differs = differs || c.entries[i].split != a.entries[i].split;
    }
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    EXPECT_EQ(a.entries[i].split, b.entries[i].split);
  }
  EXPECT_TRUE(differs);
}

TEST(SplitDataset, EdgeCases) {
  const auto one = split_dataset(entries_for(1, 4), {1.0, 0.0, 0.0});
  for (const auto& e : one.entries) EXPECT_EQ(e.split, Split::kTrain);
  EXPECT_THROW(split_dataset(entries_for(2, 1), {0.75, 0.10, 0.15}), Error);
  EXPECT_THROW(split_dataset(entries_for(5, 1), {0.5, 0.2, 0.2}), RangeError);
}

TEST(Manifest, RoundTrip) {
  TempDir dir;
  auto m = split_dataset(entries_for(4, 2), {0.5, 0.25, 0.25}, 3);
  m.entries[1].shift = -2;
  m.entries[1].reverb = "hall";
  m.entries[1].gain = 0.75;
  write_manifest(dir / "manifest.tsv", m);
  const auto back = read_manifest(dir / "manifest.tsv");
  ASSERT_EQ(back.entries.size(), m.entries.size());
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    EXPECT_EQ(back.entries[i].song_id, m.entries[i].song_id);
    EXPECT_EQ(back.entries[i].shift, m.entries[i].shift);
    EXPECT_EQ(back.entries[i].reverb, m.entries[i].reverb);
    EXPECT_EQ(back.entries[i].split, m.entries[i].split);
    EXPECT_DOUBLE_EQ(back.entries[i].gain, m.entries[i].gain);
  }
  EXPECT_TRUE(back.entries[1].has_reverb());
  EXPECT_EQ(back.entries[0].subcorpus(), "DS");
}

TEST(Manifest, MalformedLineNamed) {
  TempDir dir;
  {
    std::ofstream out(dir / "m.tsv");
    out << "audio_path\tannotation_path\tsong_id\tshift\treverb\tsplit\tgain\n"
        << "a.wav\ta.tsv\tsong\tx\tnone\ttrain\t1\n";
  }
  try {
    read_manifest(dir / "m.tsv");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos);
  }
}

TEST(Forge, SmallCorpusEndToEnd) {
  TempDir dir;
  HcqtParams p;
  synth_corpus(dir / "stems", "SYN", 3, 1.0, 2, 11, p);
  const auto sets = scan_stem_directory(dir / "stems");
  ASSERT_EQ(sets.size(), 3u);
  EXPECT_EQ(sets[0].song_id, "SYN/song_000");
  EXPECT_EQ(enumerate_mixtures(sets[0]).size(), 16u);

  // One song, shifts {0, 2}, one impulse response.
  const Audio ir = synth_impulse_response(p.sample_rate, 0.3, 5);
  write_wav(dir / "room.wav", ir);
  ForgeOptions opt;
  opt.shifts = {0, 2};
  opt.impulse_responses = {dir / "room.wav"};
  opt.ratios = {1.0, 0.0, 0.0};
  const auto m = forge_dataset(std::span(sets).first(1), dir / "out", opt);
  EXPECT_EQ(m.entries.size(), 16u * 2 * 2);
  const auto back = read_manifest(dir / "out" / "manifest.tsv");
  EXPECT_EQ(back.entries.size(), m.entries.size());
  std::size_t wet = 0;
  for (const auto& e : m.entries) {
    EXPECT_TRUE(std::filesystem::exists(e.audio_path));
    EXPECT_TRUE(std::filesystem::exists(e.annotation_path));
    wet += e.has_reverb();
  }
  EXPECT_EQ(wet, 32u);
  // Annotations of shifted copies scale by exactly 2^(2/12).
  const auto dry = read_multif0(dir / "out" / "SYN/song_000" / "S1-A1-T1-B1_s+0.tsv");
  const auto up = read_multif0(dir / "out" / "SYN/song_000" / "S1-A1-T1-B1_s+2.tsv");
  ASSERT_EQ(dry.n_frames(), up.n_frames());
  for (std::size_t t = 0; t < dry.n_frames(); ++t) {
    ASSERT_EQ(dry.f0_sets[t].size(), up.f0_sets[t].size());
    for (std::size_t i = 0; i < dry.f0_sets[t].size(); ++i) {
      ASSERT_NEAR(up.f0_sets[t][i], dry.f0_sets[t][i] * std::exp2(2.0 / 12.0), 2e-6);
    }
  }
}

TEST(Forge, RejectsLargeShift) {
  TempDir dir;
  ForgeOptions opt;
  opt.shifts = {3};
  EXPECT_THROW(forge_dataset({}, dir.path(), opt), RangeError);
}

TEST(ScanStems, MissingTrackIsAnError) {
  TempDir dir;
  std::filesystem::create_directories(dir / "DS" / "s1");
  write_wav(dir / "DS" / "s1" / "S_1.wav", audio_of(sine(220.0, 0.1)));
  EXPECT_THROW(scan_stem_directory(dir.path()), Error);
  EXPECT_THROW(scan_stem_directory(dir / "nope"), Error);
}

}  // namespace
}  // namespace vocalf0
