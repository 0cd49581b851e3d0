// Copyright 2026 The rm3d Authors
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

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace rm3d {

struct GrayImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, height rows of width bytes
};

/// 8-bit grayscale PNG, no alpha, no ancillary chunks, zlib level 6 with the
/// "none" filter on every row so identical pixels give identical bytes.
void write_png_gray8(const std::filesystem::path& path, std::uint32_t width, std::uint32_t height,
                     std::span<const std::uint8_t> pixels);

/// 8-bit RGB PNG with the same pinned encoder settings.
void write_png_rgb8(const std::filesystem::path& path, std::uint32_t width, std::uint32_t height,
                    std::span<const std::uint8_t> rgb);

/// Reads an 8-bit grayscale PNG. Other colour types and depths are rejected.
GrayImage read_png_gray8(const std::filesystem::path& path);

/// Binary PGM (P5, maxval 255).
void write_pgm(const std::filesystem::path& path, std::uint32_t width, std::uint32_t height,
               std::span<const std::uint8_t> pixels);

}  // namespace rm3d
