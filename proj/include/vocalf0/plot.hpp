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

#pragma once

#include <filesystem>

#include "vocalf0/annotation.hpp"
#include "vocalf0/hcqt.hpp"

namespace vocalf0 {

/// Salience heat map (frequency upwards, one pixel per bin and frame) with
/// the decoded F0s drawn on top, written as an 8-bit RGB PNG.
void write_salience_png(const std::filesystem::path& path, const SalienceMap& salience,
                        const MultiF0Annotation& f0, const HcqtParams& params = {});

}  // namespace vocalf0
