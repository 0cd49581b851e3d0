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

// Shortest paths on the 26-connected free-voxel graph.
//
// Edge weights are the center-to-center distances 1, sqrt(2) and sqrt(3)
// (times the resolution). Distances are carried as the exact integer triple
// (a, b, c) meaning a + b*sqrt(2) + c*sqrt(3); since 1, sqrt(2) and sqrt(3)
// are linearly independent over the rationals, two paths have equal length
// iff their triples are equal, so ties are detected without tolerance and do
// not depend on summation order.
//
// Among all shortest paths the canonical one is read from the far end toward
// the source: each voxel steps to the neighbor with the smallest linear index
// that lies on a shortest path to the source. That rule depends only on the
// exact distances, so a full Dijkstra tree and a single-target A* yield the
// same path.

#include <cstdint>
#include <optional>
#include <vector>

#include "rm3d/scene/scene.hpp"

namespace rm3d::propagation {

struct GridDistance {
  std::int32_t unit = -1;   // count of axis steps
  std::int32_t diag2 = 0;   // count of face-diagonal steps
  std::int32_t diag3 = 0;   // count of body-diagonal steps

  bool reached() const { return unit >= 0; }
  /// Length in voxel units.
  double value() const;
  friend bool operator==(const GridDistance&, const GridDistance&) = default;
};

class ShortestPathField {
 public:
  /// Full Dijkstra from source over every free voxel. Records the settle
  /// order, which lists each reached voxel after all voxels closer to source.
  static ShortestPathField all_from(const scene::VoxelScene& scene, scene::VoxelIndex source);

  /// A* from source toward target with the Euclidean heuristic. Every voxel on
  /// some shortest source-target path ends up with its exact distance; search
  /// continues past the target until no queued node can still lie on one.
  static ShortestPathField toward(const scene::VoxelScene& scene, scene::VoxelIndex source,
                                  scene::VoxelIndex target);

  const scene::VoxelScene& scene() const { return *scene_; }
  std::size_t source() const { return source_; }
  const GridDistance& distance(std::size_t linear) const { return dist_[linear]; }
  bool reached(std::size_t linear) const { return dist_[linear].reached(); }

  /// Canonical predecessor toward source, or nullopt for source/unreached voxels.
  std::optional<std::size_t> parent(std::size_t linear) const;

  /// Canonical voxel path from `from` back to source (inclusive), empty if
  /// unreachable.
  std::vector<std::size_t> path_to_source(std::size_t from) const;

  /// Voxels in non-decreasing distance order (only filled by all_from).
  const std::vector<std::size_t>& settle_order() const { return order_; }

 private:
  const scene::VoxelScene* scene_ = nullptr;
  std::size_t source_ = 0;
  std::vector<GridDistance> dist_;
  std::vector<std::size_t> order_;
};

/// Center-to-center shortest path length in meters, nullopt when disconnected
/// or when either voxel is occupied.
std::optional<double> grid_shortest_distance(const scene::VoxelScene& scene, scene::VoxelIndex from,
                                             scene::VoxelIndex to);

}  // namespace rm3d::propagation
