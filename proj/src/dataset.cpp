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

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "vocalf0/dsp.hpp"
#include "vocalf0/error.hpp"

namespace vocalf0 {

namespace fs = std::filesystem;

namespace {

MixResult normalise_if_clipping(Audio audio) {
  MixResult r;
  const float peak = peak_amplitude(audio.samples);
  if (peak > 1.0f) {
    r.gain = kNormalisedPeak / peak;
    for (float& s : audio.samples) s = static_cast<float>(s * r.gain);
  }
  r.audio = std::move(audio);
  return r;
}

std::string shift_tag(int shift) {
  std::ostringstream os;
  os << "s" << (shift >= 0 ? "+" : "") << shift;
  return os.str();
}

// Paths in a manifest are stored relative to its directory when possible.
std::string relative_to(const fs::path& p, const fs::path& base) {
  std::error_code ec;
  const auto rel = fs::relative(p, base, ec);
  if (ec || rel.empty() || rel.native().starts_with("..")) return p.string();
  return rel.generic_string();
}

fs::path resolve_manifest_path(const std::string& stored, const fs::path& manifest_dir) {
  fs::path p(stored);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("VOCALF0_DATA_ROOT"); root && *root) {
    return fs::path(root) / p;
  }
  return manifest_dir / p;
}

}  // namespace

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
    case Split::kUnassigned: return "unassigned";
  }
  return "unassigned";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "validation" || s == "val") return Split::kValidation;
  if (s == "test") return Split::kTest;
  if (s == "unassigned" || s.empty()) return Split::kUnassigned;
  throw FormatError("unknown split `" + s + "`");
}

std::string ManifestEntry::subcorpus() const {
  const auto slash = song_id.find('/');
  return slash == std::string::npos ? std::string() : song_id.substr(0, slash);
}

std::vector<ManifestEntry> DatasetManifest::in_split(Split s) const {
  std::vector<ManifestEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [s](const ManifestEntry& e) { return e.split == s; });
  return out;
}

std::vector<MixtureRecipe> enumerate_mixtures(const StemSet& stems,
                                              std::span<const std::string> part_names) {
  std::vector<const std::vector<Stem>*> choices;
  for (const auto& part : part_names) {
    const auto it = stems.parts.find(part);
    if (it == stems.parts.end() || it->second.empty()) {
      throw Error("song `" + stems.song_id + "` has no stems for part `" + part + "`");
    }
    choices.push_back(&it->second);
  }

  std::vector<MixtureRecipe> recipes;
  std::vector<std::size_t> idx(choices.size(), 0);
  while (true) {
    MixtureRecipe r;
    r.song_id = stems.song_id;
    for (std::size_t p = 0; p < choices.size(); ++p) {
      r.stems.emplace_back(part_names[p], (*choices[p])[idx[p]]);
    }
    recipes.push_back(std::move(r));
    // Odometer increment, last part fastest.
    std::size_t p = choices.size();
    while (p > 0) {
      --p;
      if (++idx[p] < choices[p]->size()) break;
      idx[p] = 0;
      if (p == 0) return recipes;
    }
    if (choices.empty()) return recipes;
  }
}

MixResult mix_stems(std::span<const Audio> stems, std::span<const double> gains) {
  if (stems.empty()) throw Error("mix_stems: no stems");
  if (!gains.empty() && gains.size() != stems.size()) {
    throw Error("mix_stems: gains and stems differ in count");
  }
  const double rate = stems.front().sample_rate;
  std::size_t len = 0;
  for (const auto& s : stems) {
    if (s.sample_rate != rate) {
      throw Error("mix_stems: sample rate mismatch (" + std::to_string(s.sample_rate) +
                  " vs " + std::to_string(rate) + ")");
    }
    len = std::max(len, s.samples.size());
  }
  std::vector<double> acc(len, 0.0);
  for (std::size_t i = 0; i < stems.size(); ++i) {
    const double g = gains.empty() ? 1.0 : gains[i];
    const auto& x = stems[i].samples;
    for (std::size_t n = 0; n < x.size(); ++n) acc[n] += g * x[n];
  }
  Audio mix;
  mix.sample_rate = rate;
  mix.samples.assign(acc.begin(), acc.end());
  return normalise_if_clipping(std::move(mix));
}

std::pair<Audio, F0Track> pitch_shift_stem(const Audio& audio, const F0Track& track,
                                           int semitones) {
  if (std::abs(semitones) > kMaxPitchShift) {
    throw RangeError("pitch shift of " + std::to_string(semitones) +
                     " semitones is outside [-2, 2]");
  }
  if (semitones == 0) return {audio, track};
  Audio shifted;
  shifted.sample_rate = audio.sample_rate;
  shifted.samples = dsp::pitch_shift(audio.samples, semitones);
  F0Track t = track;
  const double factor = std::exp2(semitones / 12.0);
  for (double& f : t.f0) {
    if (f > 0.0) f *= factor;
  }
  return {std::move(shifted), std::move(t)};
}

MixResult apply_reverb(const Audio& audio, const Audio& ir) {
  if (ir.empty()) throw Error("apply_reverb: empty impulse response");
  const Audio matched =
      ir.sample_rate == audio.sample_rate ? ir : resample_to(ir, audio.sample_rate);
  Audio wet;
  wet.sample_rate = audio.sample_rate;
  wet.samples = dsp::fft_convolve(audio.samples, matched.samples);
  wet.samples.resize(audio.samples.size());
  return normalise_if_clipping(std::move(wet));
}

Audio synth_impulse_response(double sample_rate, double rt60_seconds,
                             std::uint64_t seed, double pre_delay) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const auto len = static_cast<std::size_t>(std::ceil(rt60_seconds * sample_rate)) + 1;
  Audio ir;
  ir.sample_rate = sample_rate;
  ir.samples.assign(len, 0.0f);
  ir.samples[0] = 1.0f;
  const auto start = static_cast<std::size_t>(pre_delay * sample_rate);
  // -60 dB at rt60: amplitude decays as 10^(-3 t / rt60).
  const double decay = std::log(1000.0) / (rt60_seconds * sample_rate);
  const double tail_level = 0.08;
  for (std::size_t n = std::max<std::size_t>(start, 1); n < len; ++n) {
    ir.samples[n] = static_cast<float>(tail_level * noise(rng) *
                                       std::exp(-decay * static_cast<double>(n - start)));
  }
  for (int k = 0; k < 6; ++k) {
    const auto at = start + static_cast<std::size_t>((0.003 + 0.04 * uni(rng)) * sample_rate);
    if (at < len) ir.samples[at] += static_cast<float>((uni(rng) < 0.5 ? -1 : 1) * (0.2 + 0.3 * uni(rng)));
  }
  return ir;
}

DatasetManifest split_dataset(std::span<const ManifestEntry> entries,
                              std::array<double, 3> ratios, std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-6 ||
      std::any_of(ratios.begin(), ratios.end(), [](double r) { return r < 0.0; })) {
    throw RangeError("split ratios must be non-negative and sum to 1");
  }

  std::map<std::string, std::vector<std::size_t>> by_song;
  for (std::size_t i = 0; i < entries.size(); ++i) by_song[entries[i].song_id].push_back(i);

  const auto active = static_cast<std::size_t>(
      std::count_if(ratios.begin(), ratios.end(), [](double r) { return r > 0.0; }));
  if (by_song.size() < active) {
    throw Error("split_dataset: " + std::to_string(by_song.size()) +
                " distinct song(s) cannot fill " + std::to_string(active) + " splits");
  }

  std::vector<const std::string*> songs;
  for (const auto& [song, idx] : by_song) songs.push_back(&song);
  std::mt19937_64 rng(seed);
  std::shuffle(songs.begin(), songs.end(), rng);
  std::stable_sort(songs.begin(), songs.end(), [&](const auto* a, const auto* b) {
    return by_song[*a].size() > by_song[*b].size();
  });

  const auto n = static_cast<double>(entries.size());
  std::array<double, 3> assigned{0.0, 0.0, 0.0};
  std::array<bool, 3> used{false, false, false};
  DatasetManifest out;
  out.entries.assign(entries.begin(), entries.end());

  for (std::size_t k = 0; k < songs.size(); ++k) {
    const auto& idx = by_song[*songs[k]];
    std::size_t empty_active = 0;
    for (int s = 0; s < 3; ++s) empty_active += ratios[s] > 0.0 && !used[s];
    const std::size_t remaining = songs.size() - k;

    int best = -1;
    double best_deficit = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < 3; ++s) {
      if (ratios[s] <= 0.0) continue;
      // Once remaining songs are just enough to populate empty splits, only
      // those splits are eligible.
      if (remaining <= empty_active && used[s]) continue;
      const double deficit = ratios[s] * n - assigned[s];
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = s;
      }
    }
    used[best] = true;
    assigned[best] += static_cast<double>(idx.size());
    for (std::size_t i : idx) out.entries[i].split = static_cast<Split>(best);
  }
  return out;
}

void write_manifest(const fs::path& path, const DatasetManifest& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path base = fs::absolute(path).parent_path();
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write manifest " + path.string());
  out << "audio_path\tannotation_path\tsong_id\tshift\treverb\tsplit\tgain\n";
  for (const auto& e : m.entries) {
    out << relative_to(fs::absolute(e.audio_path), base) << '\t'
        << relative_to(fs::absolute(e.annotation_path), base) << '\t' << e.song_id << '\t'
        << e.shift << '\t' << e.reverb << '\t' << to_string(e.split) << '\t' << e.gain
        << '\n';
  }
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest " + path.string());
  const fs::path base = fs::absolute(path).parent_path();
  DatasetManifest m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (line_no == 1 && line.starts_with("audio_path")) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) f.push_back(field);
    if (f.size() < 6) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected at least 6 tab-separated fields");
    }
    ManifestEntry e;
    e.audio_path = resolve_manifest_path(f[0], base).string();
    e.annotation_path = resolve_manifest_path(f[1], base).string();
    e.song_id = f[2];
    try {
      e.shift = std::stoi(f[3]);
      e.gain = f.size() > 6 ? std::stod(f[6]) : 1.0;
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
    e.reverb = f[4];
    e.split = split_from_string(f[5]);
    m.entries.push_back(std::move(e));
  }
  return m;
}

std::vector<StemSet> scan_stem_directory(const fs::path& root,
                                         std::span<const std::string> part_names) {
  if (!fs::is_directory(root)) throw Error("stem directory " + root.string() + " not found");

  const auto has_wav = [](const fs::path& dir) {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".wav") return true;
    }
    return false;
  };

  // (dataset name, song directory)
  std::vector<std::pair<std::string, fs::path>> song_dirs;
  for (const auto& d : fs::directory_iterator(root)) {
    if (!d.is_directory()) continue;
    if (has_wav(d.path())) {
      song_dirs.emplace_back(fs::absolute(root).filename().string(), d.path());
      continue;
    }
    for (const auto& s : fs::directory_iterator(d.path())) {
      if (s.is_directory() && has_wav(s.path())) {
        song_dirs.emplace_back(d.path().filename().string(), s.path());
      }
    }
  }
  std::sort(song_dirs.begin(), song_dirs.end());

  std::vector<StemSet> sets;
  for (const auto& [dataset, dir] : song_dirs) {
    StemSet set;
    set.song_id = dataset + "/" + dir.filename().string();
    std::vector<fs::path> wavs;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".wav") wavs.push_back(e.path());
    }
    std::sort(wavs.begin(), wavs.end());
    for (const auto& wav : wavs) {
      const std::string stem = wav.stem().string();
      const auto us = stem.find('_');
      if (us == std::string::npos) {
        spdlog::warn("ignoring {}: expected <part>_<singer>.wav", wav.string());
        continue;
      }
      const std::string part = stem.substr(0, us);
      if (std::find(part_names.begin(), part_names.end(), part) == part_names.end()) {
        spdlog::warn("ignoring {}: unknown part `{}`", wav.string(), part);
        continue;
      }
      fs::path csv = wav;
      csv.replace_extension(".csv");
      if (!fs::exists(csv)) {
        throw Error("stem " + wav.string() + " has no matching F0 track " + csv.string());
      }
      set.parts[part].push_back(Stem{wav, csv, stem.substr(us + 1)});
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

DatasetManifest forge_dataset(std::span<const StemSet> stem_sets, const fs::path& out_dir,
                              const ForgeOptions& options) {
  for (int s : options.shifts) {
    if (std::abs(s) > kMaxPitchShift) {
      throw RangeError("shift " + std::to_string(s) + " is outside [-2, 2]");
    }
  }
  const HcqtParams& params = options.params;
  std::vector<std::pair<std::string, Audio>> irs;
  for (const auto& p : options.impulse_responses) {
    irs.emplace_back(p.stem().string(), load_audio(p, params.sample_rate));
  }

  std::vector<ManifestEntry> entries;
  for (const StemSet& set : stem_sets) {
    const auto recipes = enumerate_mixtures(set);
    const fs::path song_dir = out_dir / set.song_id;

    // Stems recur across recipes; load each once.
    std::map<fs::path, std::pair<Audio, F0Track>> loaded;
    for (const auto& [part, stems] : set.parts) {
      for (const auto& st : stems) {
        loaded.emplace(st.audio, std::make_pair(load_audio(st.audio, params.sample_rate),
                                                read_f0_track(st.track)));
      }
    }

    for (const auto& recipe : recipes) {
      std::string mix_id;
      for (const auto& [part, stem] : recipe.stems) {
        mix_id += (mix_id.empty() ? "" : "-") + part + stem.singer;
      }
      for (int shift : options.shifts) {
        std::vector<Audio> audios;
        std::vector<F0Track> tracks;
        for (const auto& [part, stem] : recipe.stems) {
          const auto& [audio, track] = loaded.at(stem.audio);
          auto [a, t] = pitch_shift_stem(audio, track, shift);
          audios.push_back(std::move(a));
          tracks.push_back(std::move(t));
        }
        const MixResult mix = mix_stems(audios);
        const auto frame_times = params.frame_times(params.n_frames(mix.audio.samples.size()));
        const MultiF0Annotation ann = merge_tracks(tracks, frame_times);

        const std::string base = mix_id + "_" + shift_tag(shift);
        const fs::path wav = song_dir / (base + ".wav");
        const fs::path tsv = song_dir / (base + ".tsv");
        write_wav(wav, mix.audio);
        write_multif0(tsv, ann);
        entries.push_back({wav.string(), tsv.string(), set.song_id, shift, "none",
                           Split::kUnassigned, mix.gain});

        for (const auto& [ir_id, ir] : irs) {
          const MixResult wet = apply_reverb(mix.audio, ir);
          const fs::path wet_wav = song_dir / (base + "_" + ir_id + ".wav");
          write_wav(wet_wav, wet.audio);
          entries.push_back({wet_wav.string(), tsv.string(), set.song_id, shift, ir_id,
                             Split::kUnassigned, mix.gain * wet.gain});
        }
      }
    }
    spdlog::info("forged {} ({} recipes)", set.song_id, recipes.size());
  }

  DatasetManifest manifest = split_dataset(entries, options.ratios, options.seed);
  write_manifest(out_dir / "manifest.tsv", manifest);
  return manifest;
}

}  // namespace vocalf0
