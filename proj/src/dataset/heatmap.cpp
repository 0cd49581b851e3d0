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

#include "rm3d/dataset/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "rm3d/core/error.hpp"
#include "rm3d/core/png_io.hpp"
#include "rm3d/dataset/dataset.hpp"

namespace rm3d::dataset {

namespace {

constexpr std::array<std::array<int, 3>, 4> kStops = {{{0, 0, 0}, {128, 0, 160}, {255, 128, 0}, {255, 255, 224}}};

void check_slice(const Tensor<std::uint8_t>& codes) {
  if (codes.rank() != 2 || codes.empty()) throw ValidationError("heatmap slice must be a non-empty [nx, ny] tensor");
}

// Row-major image bytes (rows along y) from an [nx, ny] slice.
std::vector<std::uint8_t> image_order(const Tensor<std::uint8_t>& codes) {
  const std::size_t nx = codes.dim(0), ny = codes.dim(1);
  std::vector<std::uint8_t> px(nx * ny);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) px[j * nx + i] = codes(i, j);
  return px;
}

}  // namespace

std::array<std::uint8_t, 3> heat_color(std::uint8_t code) {
  const int seg = std::min(code / 85, 2);
  const int r = code - 85 * seg;
  std::array<std::uint8_t, 3> rgb{};
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<std::uint8_t>((kStops[seg][c] * (85 - r) + kStops[seg + 1][c] * r + 42) / 85);
  }
  return rgb;
}

Tensor<std::uint8_t> quantize_slice(const Tensor<double>& values) {
  Tensor<std::uint8_t> out(values.shape());
  for (std::size_t n = 0; n < values.size(); ++n) {
    const double v = std::isfinite(values[n]) ? std::clamp(values[n], 0.0, 1.0) : 0.0;
    out[n] = quantize_value(v);
  }
  return out;
}

void write_heatmap_png(const std::filesystem::path& path, const Tensor<std::uint8_t>& codes) {
  check_slice(codes);
  const std::vector<std::uint8_t> px = image_order(codes);
  std::vector<std::uint8_t> rgb(px.size() * 3);
  for (std::size_t n = 0; n < px.size(); ++n) {
    const auto c = heat_color(px[n]);
    std::copy(c.begin(), c.end(), rgb.begin() + 3 * n);
  }
  write_png_rgb8(path, static_cast<std::uint32_t>(codes.dim(0)), static_cast<std::uint32_t>(codes.dim(1)), rgb);
}

void write_heatmap_pgm(const std::filesystem::path& path, const Tensor<std::uint8_t>& codes) {
  check_slice(codes);
  write_pgm(path, static_cast<std::uint32_t>(codes.dim(0)), static_cast<std::uint32_t>(codes.dim(1)),
            image_order(codes));
}

}  // namespace rm3d::dataset
