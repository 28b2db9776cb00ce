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

#include <stdexcept>
#include <string>

namespace vocalf0 {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value fell outside the domain an operation accepts (frequency outside
/// the analysed range, shift outside [-2, 2], ...).
class RangeError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read or parsed.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Shapes or grids of two operands disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace vocalf0
