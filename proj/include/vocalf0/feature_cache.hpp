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

// Feature cache container (".vf0f"), version 1. Layout, little endian:
//
//   bytes 0..7    magic "VF0FEAT\0"
//   u32           container version
//   u64           header length N
//   N bytes       UTF-8 JSON header: version, params (HcqtParams),
//                 params_hash, n_harmonics, n_bins, n_frames, has_phase,
//                 source
//   f32[H*F*T]    magnitude, [harmonic][bin][frame]
//   f32[H*F*T]    phase_diff (present iff has_phase)
//   f64[T]        frame_times
//
// A reader compares params_hash against the params it expects and reports a
// stale cache instead of silently reusing it.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "vocalf0/error.hpp"
#include "vocalf0/hcqt.hpp"

namespace vocalf0 {

inline constexpr std::uint32_t kFeatureCacheVersion = 1;

class StaleCacheError : public FormatError {
 public:
  using FormatError::FormatError;
};

nlohmann::json params_to_json(const HcqtParams& params);
HcqtParams params_from_json(const nlohmann::json& j);

void save_features(const std::filesystem::path& path, const HcqtFeatures& feats,
                   const std::string& source = {});

/// Throws FormatError on a malformed file, or StaleCacheError when `expected`
/// is given and its hash differs from the stored params_hash.
HcqtFeatures load_features(const std::filesystem::path& path,
                           const std::optional<HcqtParams>& expected = std::nullopt);

/// Cache path for an audio file: <cache_dir>/<stem>-<hash of path+params>.vf0f
std::filesystem::path feature_cache_path(const std::filesystem::path& cache_dir,
                                         const std::filesystem::path& audio,
                                         const HcqtParams& params);

/// Loads cached features for `audio` or computes and stores them.
/// A stale or unreadable cache entry is recomputed.
HcqtFeatures cached_features(const std::filesystem::path& cache_dir,
                             const std::filesystem::path& audio,
                             const HcqtParams& params, bool with_phase = true);

}  // namespace vocalf0
