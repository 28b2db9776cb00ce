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

#include "vocalf0/feature_cache.hpp"

#include <spdlog/spdlog.h>

#include <cstring>
#include <fstream>

#include "vocalf0/audio.hpp"
#include "vocalf0/hash.hpp"

namespace vocalf0 {

namespace {

constexpr char kMagic[8] = {'V', 'F', '0', 'F', 'E', 'A', 'T', '\0'};

template <typename T>
void write_raw(std::ostream& os, const T* data, std::size_t n) {
  os.write(reinterpret_cast<const char*>(data),
           static_cast<std::streamsize>(n * sizeof(T)));
}

template <typename T>
void read_raw(std::istream& is, T* data, std::size_t n,
              const std::filesystem::path& path) {
  is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
  if (!is) throw FormatError(path.string() + ": truncated feature cache");
}

}  // namespace

nlohmann::json params_to_json(const HcqtParams& p) {
  return {{"sample_rate", p.sample_rate},         {"hop_length", p.hop_length},
          {"f_min", p.f_min},                     {"bins_per_octave", p.bins_per_octave},
          {"n_octaves", p.n_octaves},             {"harmonics", p.harmonics}};
}

HcqtParams params_from_json(const nlohmann::json& j) {
  HcqtParams p;
  p.sample_rate = j.at("sample_rate").get<double>();
  p.hop_length = j.at("hop_length").get<int>();
  p.f_min = j.at("f_min").get<double>();
  p.bins_per_octave = j.at("bins_per_octave").get<int>();
  p.n_octaves = j.at("n_octaves").get<int>();
  p.harmonics = j.at("harmonics").get<std::vector<int>>();
  return p;
}

void save_features(const std::filesystem::path& path, const HcqtFeatures& feats,
                   const std::string& source) {
  if (feats.has_phase() && !feats.phase_diff.same_shape(feats.magnitude)) {
    throw ShapeError("save_features: magnitude and phase_diff shapes differ");
  }
  nlohmann::json header = {
      {"version", kFeatureCacheVersion},
      {"params", params_to_json(feats.params)},
      {"params_hash", feats.params.hash()},
      {"n_harmonics", feats.magnitude.channels()},
      {"n_bins", feats.magnitude.rows()},
      {"n_frames", feats.magnitude.cols()},
      {"has_phase", feats.has_phase()},
      {"source", source},
  };
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write to a sibling temp file and rename so readers never see partial data.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw FormatError("cannot write " + tmp.string());
    os.write(kMagic, sizeof kMagic);
    const std::uint32_t version = kFeatureCacheVersion;
    const std::uint64_t len = text.size();
    write_raw(os, &version, 1);
    write_raw(os, &len, 1);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    write_raw(os, feats.magnitude.data(), feats.magnitude.size());
    if (feats.has_phase()) write_raw(os, feats.phase_diff.data(), feats.phase_diff.size());
    write_raw(os, feats.frame_times.data(), feats.frame_times.size());
    if (!os) throw FormatError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

HcqtFeatures load_features(const std::filesystem::path& path,
                           const std::optional<HcqtParams>& expected) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open feature cache " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw FormatError(path.string() + ": not a feature cache file");
  }
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  read_raw(is, &version, 1, path);
  read_raw(is, &len, 1, path);
  if (version != kFeatureCacheVersion) {
    throw FormatError(path.string() + ": unsupported feature cache version " +
                      std::to_string(version));
  }
  std::string text(len, '\0');
  read_raw(is, text.data(), len, path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad header: " + e.what());
  }

  HcqtFeatures feats;
  feats.params = params_from_json(header.at("params"));
  const auto stored_hash = header.at("params_hash").get<std::string>();
  if (stored_hash != feats.params.hash()) {
    throw FormatError(path.string() + ": params_hash does not match stored params");
  }
  if (expected && expected->hash() != stored_hash) {
    throw StaleCacheError(path.string() + ": cache built with params " + stored_hash +
                          ", expected " + expected->hash());
  }
  const auto h = header.at("n_harmonics").get<std::size_t>();
  const auto f = header.at("n_bins").get<std::size_t>();
  const auto t = header.at("n_frames").get<std::size_t>();
  feats.magnitude = Tensor3<float>(h, f, t);
  read_raw(is, feats.magnitude.data(), feats.magnitude.size(), path);
  if (header.at("has_phase").get<bool>()) {
    feats.phase_diff = Tensor3<float>(h, f, t);
    read_raw(is, feats.phase_diff.data(), feats.phase_diff.size(), path);
  }
  feats.frame_times.resize(t);
  read_raw(is, feats.frame_times.data(), t, path);
  return feats;
}

std::filesystem::path feature_cache_path(const std::filesystem::path& cache_dir,
                                         const std::filesystem::path& audio,
                                         const HcqtParams& params) {
  std::error_code ec;
  auto abs = std::filesystem::weakly_canonical(audio, ec);
  if (ec) abs = std::filesystem::absolute(audio);
  Fnv1a h;
  h.update(abs.string()).update("|").update(params.canonical());
  // File identity: size and modification time, so rewritten audio misses.
  const auto size = std::filesystem::file_size(audio, ec);
  if (!ec) h.update("|").update(std::to_string(size));
  const auto mtime = std::filesystem::last_write_time(audio, ec);
  if (!ec) h.update("|").update(std::to_string(mtime.time_since_epoch().count()));
  return cache_dir / (audio.stem().string() + "-" + h.hex() + ".vf0f");
}

HcqtFeatures cached_features(const std::filesystem::path& cache_dir,
                             const std::filesystem::path& audio,
                             const HcqtParams& params, bool with_phase) {
  const auto path = feature_cache_path(cache_dir, audio, params);
  if (std::filesystem::exists(path)) {
    try {
      auto feats = load_features(path, params);
      if (!with_phase || feats.has_phase()) return feats;
    } catch (const FormatError& e) {
      spdlog::warn("recomputing features: {}", e.what());
    }
  }
  const Audio a = load_audio(audio, params.sample_rate);
  auto feats = compute_hcqt(a.samples, params, with_phase);
  save_features(path, feats, audio.string());
  return feats;
}

}  // namespace vocalf0
