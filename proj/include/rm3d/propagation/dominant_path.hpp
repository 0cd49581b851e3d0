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

#include <cstddef>
#include <utility>
#include <vector>

#include "rm3d/core/geometry.hpp"
#include "rm3d/scene/scene.hpp"

namespace rm3d::propagation {

inline constexpr double kSpeedOfLightMPerNs = 0.299792458;

/// Interaction losses. Only diffraction enters the default solver; reflection
/// and transmission are carried for alternative path models.
struct MaterialParams {
  double diffraction_loss_per_bend = 8.0;  // dB
  double transmission_loss = 20.0;         // dB
  double reflection_loss = 9.0;            // dB
};

void validate(const MaterialParams& mat);

/// Free-space path loss 20 log10(d) + 20 log10(f) - 147.552 dB, d in meters, f in Hz.
double fspl(double distance_m, double frequency_hz);

/// Polyline from transmitter (front) to receiver (back).
struct DominantPath {
  std::vector<Vec3> waypoints;
  double length = 0.0;    // meters, sum of segment lengths accumulated from the transmitter
  std::size_t bends = 0;  // interior waypoints
  bool reachable = false;
};

/// Dominant path between two points in free voxels.
///
/// A line-of-sight pair gives the straight segment. Otherwise the canonical
/// shortest voxel path (see grid_search.hpp) is string-pulled from the
/// receiver end: from the current anchor, jump straight to the transmitter if
/// it is visible, else advance along the voxel path while the next waypoint
/// stays visible and make the last visible one the new anchor.
///
/// An enclosed receiver yields reachable == false and no waypoints.
DominantPath dominant_path(const scene::VoxelScene& scene, Vec3 tx, Vec3 rx);

/// String-pulls a raw waypoint list ordered receiver first, transmitter last.
/// Exposed so alternative path searches can share the smoothing rule.
std::vector<Vec3> pull_string(const scene::VoxelScene& scene, const std::vector<Vec3>& raw);

/// Builds a DominantPath (transmitter first) from a pulled receiver-first list.
DominantPath make_path(std::vector<Vec3> receiver_first);

struct VoxelChannel {
  double pathgain_db = 0.0;
  double toa_ns = 0.0;
  double doa_azi = 0.0;  // [0, 2pi), atan2 of the arrival direction
  double doa_ele = 0.0;  // [0, pi], polar angle from +z
  bool reachable = false;
};

/// Arrival direction angles for the unit vector pointing from the receiver
/// toward the previous waypoint. A zero vector gives (0, pi/2).
std::pair<double, double> arrival_angles(Vec3 toward_previous);

/// pathgain = -(fspl(max(length, distance_floor), f) + bends * diffraction loss),
/// toa = length / c, DoA from the last segment.
VoxelChannel channel_from_path(const DominantPath& path, const scene::TxConfig& tx, const MaterialParams& mat,
                               double distance_floor_m);

/// Same as channel_from_path, given the path summary directly.
VoxelChannel channel_from_parts(double length, std::size_t bends, Vec3 rx, Vec3 previous, const scene::TxConfig& tx,
                                const MaterialParams& mat, double distance_floor_m);

}  // namespace rm3d::propagation
