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

// Slice renderings. Every image is a pure function of the 8-bit codes:
// grayscale PGM stores the code itself, the colour PNG maps it through the
// fixed "rm3d-heat" colormap, piecewise linear between
//
//   code   0 -> (  0,   0,   0)
//   code  85 -> (128,   0, 160)
//   code 170 -> (255, 128,   0)
//   code 255 -> (255, 255, 224)
//
// with channel = (a * (85 - r) + b * r + 42) / 85 in integer arithmetic for
// offset r into the segment. Image columns run along x and rows along y.

#include <array>
#include <cstdint>
#include <filesystem>

#include "rm3d/core/tensor.hpp"

namespace rm3d::dataset {

std::array<std::uint8_t, 3> heat_color(std::uint8_t code);

/// Clamps [nx, ny] values to [0, 1] (non-finite to 0) and quantizes them.
Tensor<std::uint8_t> quantize_slice(const Tensor<double>& values);

void write_heatmap_png(const std::filesystem::path& path, const Tensor<std::uint8_t>& codes);
void write_heatmap_pgm(const std::filesystem::path& path, const Tensor<std::uint8_t>& codes);

}  // namespace rm3d::dataset
