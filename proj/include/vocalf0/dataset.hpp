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

// Corpus construction from per-singer stems: one-singer-per-part mixtures,
// pitch-shift and reverb augmentation, manifests and song-level splits.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vocalf0/annotation.hpp"
#include "vocalf0/audio.hpp"
#include "vocalf0/hcqt.hpp"

namespace vocalf0 {

/// One singer's recording and its F0 track.
struct Stem {
  std::filesystem::path audio;
  std::filesystem::path track;
  std::string singer;
};

struct StemSet {
  std::string song_id;
  std::map<std::string, std::vector<Stem>> parts;  // part name -> singers
  std::optional<std::string> take_id;
};

inline const std::vector<std::string>& default_parts() {
  static const std::vector<std::string> parts{"S", "A", "T", "B"};
  return parts;
}

inline constexpr int kMaxPitchShift = 2;

struct MixtureRecipe {
  std::string song_id;
  std::vector<std::pair<std::string, Stem>> stems;  // one per part, in part order
  int pitch_shift = 0;
  std::string reverb = "none";  // IR identifier or "none"
};

enum class Split { kTrain, kValidation, kTest, kUnassigned };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct ManifestEntry {
  std::string audio_path;
  std::string annotation_path;
  std::string song_id;
  int shift = 0;
  std::string reverb = "none";
  Split split = Split::kUnassigned;
  /// Peak-normalisation factor applied when the mixture clipped (1 if not).
  double gain = 1.0;

  bool has_reverb() const { return reverb != "none"; }
  /// Sub-corpus: the part of song_id before the first '/', or empty.
  std::string subcorpus() const;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> in_split(Split s) const;
};

/// Every one-singer-per-part combination (Cartesian product over `part_names`).
/// Throws Error naming the first part that is missing or empty.
std::vector<MixtureRecipe> enumerate_mixtures(
    const StemSet& stems, std::span<const std::string> part_names = default_parts());

struct MixResult {
  Audio audio;
  double gain = 1.0;
};

/// Peak level used when a mix or reverb output clips: -1 dBFS.
inline constexpr double kNormalisedPeak = 0.8912509381337456;

/// Sample-wise sum (zero-padded to the longest stem) with optional per-stem
/// gains; if the result clips (|peak| > 1) it is scaled to -1 dBFS and the
/// factor returned. Throws on sample-rate mismatch.
MixResult mix_stems(std::span<const Audio> stems,
                    std::span<const double> gains = {});

/// Pitch-shifts audio by `semitones` preserving duration; voiced F0 values
/// are multiplied by 2^(semitones/12). Zero is a bit-exact passthrough.
std::pair<Audio, F0Track> pitch_shift_stem(const Audio& audio, const F0Track& track,
                                           int semitones);

/// Linear convolution with `ir` truncated to the dry length, then the same
/// clipping rule as mix_stems. The IR is resampled if its rate differs.
MixResult apply_reverb(const Audio& audio, const Audio& ir);

/// Exponentially decaying noise with a few early reflections; stands in for
/// a measured room response in synthetic corpora.
Audio synth_impulse_response(double sample_rate, double rt60_seconds,
                             std::uint64_t seed, double pre_delay = 0.01);

/// Song-level split. Entries sharing a song_id always land together. Songs
/// are shuffled by `seed`, visited largest first, and each goes to the split
/// with the largest remaining file deficit. Throws when there are fewer
/// songs than splits with a non-zero ratio, or ratios do not sum to 1.
DatasetManifest split_dataset(std::span<const ManifestEntry> entries,
                              std::array<double, 3> ratios = {0.75, 0.10, 0.15},
                              std::uint64_t seed = 0);

/// Manifest file: tab-separated with header
/// `audio_path annotation_path song_id shift reverb split gain`.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Scans `<root>/<dataset>/<song_id>/<part>_<singer>.wav` (+ sibling `.csv`),
/// also accepting `<root>/<song_id>/...` where the dataset is root's name.
/// song_id in the result is `<dataset>/<song>`.
std::vector<StemSet> scan_stem_directory(const std::filesystem::path& root,
                                         std::span<const std::string> part_names = default_parts());

struct ForgeOptions {
  std::vector<int> shifts{0};
  /// Impulse response files; empty means no reverb copies.
  std::vector<std::filesystem::path> impulse_responses;
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{0.75, 0.10, 0.15};
  HcqtParams params;
};

/// Renders every recipe x shift (x reverb) into `out_dir` and writes
/// `out_dir/manifest.tsv`. Returns the split manifest.
DatasetManifest forge_dataset(std::span<const StemSet> stem_sets,
                              const std::filesystem::path& out_dir,
                              const ForgeOptions& options);

}  // namespace vocalf0
