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

#include "rm3d/propagation/dominant_path.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "rm3d/core/error.hpp"
#include "rm3d/propagation/grid_search.hpp"
#include "rm3d/propagation/los.hpp"

namespace rm3d::propagation {

void validate(const MaterialParams& mat) {
  if (!(mat.diffraction_loss_per_bend >= 0.0) || !(mat.transmission_loss >= 0.0) || !(mat.reflection_loss >= 0.0)) {
    throw ValidationError("material losses must be non-negative");
  }
}

double fspl(double distance_m, double frequency_hz) {
  if (!(distance_m > 0.0)) throw ValidationError("fspl distance must be positive");
  if (!(frequency_hz > 0.0)) throw ValidationError("fspl frequency must be positive");
  return 20.0 * std::log10(distance_m) + 20.0 * std::log10(frequency_hz) - 147.552;
}

std::vector<Vec3> pull_string(const scene::VoxelScene& scene, const std::vector<Vec3>& raw) {
  if (raw.size() < 2) return raw;
  const std::size_t last = raw.size() - 1;
  std::vector<Vec3> out{raw.front()};
  std::size_t anchor = 0;
  while (anchor != last) {
    if (los_visible(scene, raw[anchor], raw[last])) {
      out.push_back(raw[last]);
      break;
    }
    std::size_t k = anchor + 1;
    while (k + 1 < last && los_visible(scene, raw[anchor], raw[k + 1])) ++k;
    anchor = k;
    out.push_back(raw[anchor]);
  }
  return out;
}

DominantPath make_path(std::vector<Vec3> receiver_first) {
  DominantPath path;
  path.waypoints.assign(receiver_first.rbegin(), receiver_first.rend());
  path.reachable = true;
  for (std::size_t i = 0; i + 1 < path.waypoints.size(); ++i) {
    path.length += distance(path.waypoints[i], path.waypoints[i + 1]);
  }
  path.bends = path.waypoints.size() >= 2 ? path.waypoints.size() - 2 : 0;
  return path;
}

DominantPath dominant_path(const scene::VoxelScene& scene, Vec3 tx, Vec3 rx) {
  if (!scene.contains(tx) || !scene.contains(rx)) throw ValidationError("path endpoint outside the scene");
  const scene::VoxelIndex vt = scene.voxel_of(tx);
  const scene::VoxelIndex vr = scene.voxel_of(rx);
  if (scene.occupied(vt)) throw ValidationError("transmitter lies inside a building");
  if (scene.occupied(vr)) throw ValidationError("receiver lies inside a building");

  if (los_visible(scene, tx, rx)) return make_path({rx, tx});

  const ShortestPathField field = ShortestPathField::toward(scene, vt, vr);
  const std::vector<std::size_t> voxels = field.path_to_source(scene.linear(vr));
  if (voxels.empty()) return DominantPath{};

  std::vector<Vec3> raw{rx};
  for (std::size_t n = 0; n < voxels.size(); ++n) {
    const Vec3 c = scene.center(scene.unlinear(voxels[n]));
    if ((n == 0 && c == rx) || (n + 1 == voxels.size() && c == tx)) continue;
    raw.push_back(c);
  }
  raw.push_back(tx);
  return make_path(pull_string(scene, raw));
}

std::pair<double, double> arrival_angles(Vec3 u) {
  const double len = norm(u);
  if (len == 0.0) return {0.0, std::numbers::pi / 2.0};
  double azi = std::atan2(u.y, u.x);
  if (azi < 0.0) azi += 2.0 * std::numbers::pi;
  if (azi >= 2.0 * std::numbers::pi) azi = 0.0;
  const double ele = std::acos(std::clamp(u.z / len, -1.0, 1.0));
  return {azi, ele};
}

VoxelChannel channel_from_parts(double length, std::size_t bends, Vec3 rx, Vec3 previous, const scene::TxConfig& tx,
                                const MaterialParams& mat, double distance_floor_m) {
  VoxelChannel ch;
  ch.reachable = true;
  ch.pathgain_db = -(fspl(std::max(length, distance_floor_m), tx.frequency_hz) +
                     static_cast<double>(bends) * mat.diffraction_loss_per_bend);
  // Dividing by the integer value of c in m/s keeps exact lengths such as
  // 299.792458 m at exactly 1000 ns.
  ch.toa_ns = length * 1e9 / 299792458.0;
  std::tie(ch.doa_azi, ch.doa_ele) = arrival_angles(previous - rx);
  return ch;
}

VoxelChannel channel_from_path(const DominantPath& path, const scene::TxConfig& tx, const MaterialParams& mat,
                               double distance_floor_m) {
  if (!path.reachable || path.waypoints.size() < 2) return VoxelChannel{};
  const std::size_t n = path.waypoints.size();
  return channel_from_parts(path.length, path.bends, path.waypoints[n - 1], path.waypoints[n - 2], tx, mat,
                            distance_floor_m);
}

}  // namespace rm3d::propagation
