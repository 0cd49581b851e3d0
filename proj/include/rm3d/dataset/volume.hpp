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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>

#include "rm3d/core/tensor.hpp"

namespace rm3d::dataset {

/// Channel order of every RadioMapVolume.
enum class Channel : std::size_t { Pathgain = 0, DoaAzi = 1, DoaEle = 2, ToA = 3 };

inline constexpr std::size_t kChannelCount = 4;
inline constexpr std::array<Channel, kChannelCount> kChannels = {Channel::Pathgain, Channel::DoaAzi,
                                                                Channel::DoaEle, Channel::ToA};

constexpr std::size_t index(Channel c) { return static_cast<std::size_t>(c); }

/// Short name used in reports ("pathgain", "doa_azi", "doa_ele", "toa").
std::string_view channel_name(Channel c);

/// Per-voxel channel tensor of shape [nx, ny, nz, 4].
///
/// Raw volumes hold native units (dB, rad, rad, ns) and NaN at building and
/// unreachable voxels. Normalized volumes hold values in [0, 1] with 0 at
/// building and unreachable voxels.
struct RadioMapVolume {
  Tensor<double> data;
  Tensor<std::uint8_t> building_mask;  // [nx, ny, nz], 1 inside buildings
  bool normalized = false;

  RadioMapVolume() = default;
  RadioMapVolume(std::size_t nx, std::size_t ny, std::size_t nz, double fill = 0.0)
      : data({nx, ny, nz, kChannelCount}, fill), building_mask({nx, ny, nz}, 0) {}

  std::size_t nx() const { return data.dim(0); }
  std::size_t ny() const { return data.dim(1); }
  std::size_t nz() const { return data.dim(2); }

  double& at(std::size_t i, std::size_t j, std::size_t k, Channel c) { return data(i, j, k, index(c)); }
  double at(std::size_t i, std::size_t j, std::size_t k, Channel c) const { return data(i, j, k, index(c)); }

  bool operator==(const RadioMapVolume&) const = default;
};

/// Volume file: three RM3D records, f64 data [nx, ny, nz, 4], u8 building
/// mask [nx, ny, nz] and u8 [1] holding 1 for normalized volumes.
void save_volume(const std::filesystem::path& path, const RadioMapVolume& volume);
RadioMapVolume load_volume(const std::filesystem::path& path);

}  // namespace rm3d::dataset
