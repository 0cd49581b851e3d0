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

// Voxelized urban scenes: procedural generation, transmitter placement and the
// 2D condition maps (segmentation, height, transmitter location) fed to the
// generative model.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rm3d/core/geometry.hpp"
#include "rm3d/core/tensor.hpp"

namespace rm3d::scene {

inline constexpr double kDefaultMinBuildingHeight = 6.6;
inline constexpr double kDefaultMaxBuildingHeight = 19.8;
inline constexpr double kDefaultTxHeight = 1.5;

struct VoxelIndex {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;
  friend bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
};

/// Extruded-footprint occupancy grid. A voxel (i, j, k) is occupied iff
/// k * resolution < height_map(i, j), so every column is solid from the ground
/// up to ceil(height / resolution) voxels.
class VoxelScene {
 public:
  VoxelScene() = default;

  /// Builds a scene from a building-height field of shape [nx, ny] (meters).
  VoxelScene(std::size_t nz, double resolution, Tensor<double> height_map);

  /// All-free scene.
  static VoxelScene empty(std::size_t nx, std::size_t ny, std::size_t nz, double resolution = 1.0);

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t nz() const { return nz_; }
  double resolution() const { return resolution_; }
  std::size_t voxel_count() const { return nx_ * ny_ * nz_; }

  const Tensor<double>& height_map() const { return height_map_; }
  const Tensor<std::uint8_t>& occupancy() const { return occupancy_; }

  bool occupied(std::size_t i, std::size_t j, std::size_t k) const { return occupancy_(i, j, k) != 0; }
  bool occupied(VoxelIndex v) const { return occupied(v.i, v.j, v.k); }

  /// Row-major linear index (i * ny + j) * nz + k.
  std::size_t linear(VoxelIndex v) const { return (v.i * ny_ + v.j) * nz_ + v.k; }
  VoxelIndex unlinear(std::size_t idx) const {
    return {idx / (ny_ * nz_), (idx / nz_) % ny_, idx % nz_};
  }

  Vec3 extent() const { return {nx_ * resolution_, ny_ * resolution_, nz_ * resolution_}; }
  bool contains(Vec3 p) const;
  /// Voxel holding p; points on the upper boundary map to the last voxel.
  VoxelIndex voxel_of(Vec3 p) const;
  Vec3 center(VoxelIndex v) const {
    return {(v.i + 0.5) * resolution_, (v.j + 0.5) * resolution_, (v.k + 0.5) * resolution_};
  }

  bool operator==(const VoxelScene&) const = default;

 private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::size_t nz_ = 0;
  double resolution_ = 1.0;
  Tensor<double> height_map_;
  Tensor<std::uint8_t> occupancy_;
};

struct SceneParams {
  std::uint64_t seed = 0;
  std::size_t nx = 256;
  std::size_t ny = 256;
  std::size_t nz = 20;
  double resolution = 1.0;
  std::size_t min_buildings = 40;
  std::size_t max_buildings = 80;
  double min_footprint = 8.0;   // meters, per side
  double max_footprint = 30.0;  // meters, per side
  double street_margin = 4.0;   // minimum gap between buildings and to the map edge (m)
  double min_height = kDefaultMinBuildingHeight;
  double max_height = kDefaultMaxBuildingHeight;
};

void validate(const SceneParams& params);

/// Axis-aligned rectangular buildings placed by rejection sampling so that
/// footprints keep street_margin from each other and from the map edge. When
/// the drawn building count cannot be reached within the attempt budget
/// (200 attempts per building) the scene keeps the buildings placed so far.
VoxelScene generate_scene(const SceneParams& params);

struct TxConfig {
  Vec3 position;
  double power_dbm = 23.0;     // dBm/Hz
  double frequency_hz = 5.9e9;
  std::string antenna = "isotropic";
};

void validate(const VoxelScene& scene, const TxConfig& tx);

/// Picks n distinct free cells in the layer containing tx_height and places a
/// transmitter at each cell's (x, y) center at height tx_height.
std::vector<TxConfig> place_transmitters(const VoxelScene& scene, std::size_t n, std::uint64_t seed,
                                         double tx_height = kDefaultTxHeight);

/// Horizontal cell (i, j) holding the transmitter.
std::pair<std::size_t, std::size_t> tx_cell(const VoxelScene& scene, const TxConfig& tx);

struct ConditionMaps {
  Tensor<double> segmentation;  // [nx, ny], 1 where a building stands
  Tensor<double> height;        // [nx, ny], height_map / max_height, clamped to [0, 1]
  Tensor<double> transmitter;   // [nx, ny], one-hot at the transmitter cell
};

ConditionMaps rasterize_condition_maps(const VoxelScene& scene, const TxConfig& tx,
                                       double max_height = kDefaultMaxBuildingHeight);

/// Scene file: three RM3D records (f64 [2] = {resolution, nz}, f64 height map
/// [nx, ny], u8 occupancy [nx, ny, nz]).
void save_scene(const std::filesystem::path& path, const VoxelScene& scene);
VoxelScene load_scene(const std::filesystem::path& path);

/// 8-bit grayscale height map, round(255 * h / max_height), x along image columns.
void export_height_png(const std::filesystem::path& path, const VoxelScene& scene,
                       double max_height = kDefaultMaxBuildingHeight);

/// Transmitter list as text, one `x,y,z,power_dbm,frequency_hz` line per entry.
void save_transmitters(const std::filesystem::path& path, const std::vector<TxConfig>& txs);
std::vector<TxConfig> load_transmitters(const std::filesystem::path& path);

}  // namespace rm3d::scene
