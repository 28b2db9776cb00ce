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

#include "vocalf0/plot.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <memory>

#include "vocalf0/error.hpp"

namespace vocalf0 {

namespace {

using Rgb = std::array<std::uint8_t, 3>;

// Dark purple -> red -> yellow, roughly perceptually ordered.
Rgb heat(float v) {
  static constexpr std::array<std::array<float, 3>, 5> anchors{{
      {0.0f, 0.0f, 0.02f},
      {0.34f, 0.06f, 0.43f},
      {0.73f, 0.21f, 0.33f},
      {0.98f, 0.55f, 0.04f},
      {0.99f, 1.0f, 0.64f},
  }};
  const float x = std::clamp(v, 0.0f, 1.0f) * (anchors.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(x), anchors.size() - 2);
  const float a = x - static_cast<float>(i);
  Rgb out;
  for (int c = 0; c < 3; ++c) {
    const float y = anchors[i][c] * (1 - a) + anchors[i + 1][c] * a;
    out[c] = static_cast<std::uint8_t>(y * 255.0f + 0.5f);
  }
  return out;
}

}  // namespace

void write_salience_png(const std::filesystem::path& path, const SalienceMap& salience,
                        const MultiF0Annotation& f0, const HcqtParams& params) {
  const std::size_t height = salience.rows();
  const std::size_t width = salience.cols();
  if (height == 0 || width == 0) throw ShapeError("write_salience_png: empty salience map");
  std::vector<std::uint8_t> pixels(height * width * 3);
  const auto put = [&](std::size_t bin, std::size_t t, Rgb c) {
    const std::size_t row = height - 1 - bin;
    std::copy(c.begin(), c.end(), &pixels[(row * width + t) * 3]);
  };
  for (std::size_t b = 0; b < height; ++b) {
    for (std::size_t t = 0; t < width; ++t) put(b, t, heat(salience(b, t)));
  }
  const std::size_t n = std::min(width, f0.f0_sets.size());
  for (std::size_t t = 0; t < n; ++t) {
    for (double hz : f0.f0_sets[t]) {
      try {
        put(static_cast<std::size_t>(freq_to_bin(hz, params)), t, {0, 255, 255});
      } catch (const RangeError&) {
      }
    }
  }

  std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw Error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < height; ++r) png_write_row(png, &pixels[r * width * 3]);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace vocalf0
