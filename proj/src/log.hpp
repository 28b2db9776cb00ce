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

// Plain-string logging for translation units that cannot include spdlog:
// the tensor backend bundles its own, incompatible fmt headers.

#pragma once

#include <string>

namespace vocalf0::detail {

void log_info(const std::string& msg);
void log_warn(const std::string& msg);

}  // namespace vocalf0::detail
