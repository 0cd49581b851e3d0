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
#include <iosfwd>
#include <optional>
#include <vector>

#include "rm3d/dataset/volume.hpp"
#include "rm3d/propagation/dominant_path.hpp"
#include "rm3d/scene/scene.hpp"

namespace rm3d::propagation {

struct SolveOptions {
  std::size_t threads = 1;
  bool keep_paths = false;  // retain enough state to rebuild every polyline
};

/// Raw channels for every voxel center plus, on request, the path structure.
///
/// One Dijkstra tree from the transmitter voxel serves every receiver. Each
/// receiver's first pull anchor is found independently (in parallel); path
/// length, bend count and arrival direction then follow by memoization along
/// the anchors in settle order. The result equals calling dominant_path and
/// channel_from_path on each voxel center.
struct SolveResult {
  dataset::RadioMapVolume volume;

  /// Polyline (transmitter first) for the receiver at voxel v, available
  /// when keep_paths was set. Unreachable and building voxels give an
  /// unreachable path.
  DominantPath path(scene::VoxelIndex v) const;

  std::vector<std::int64_t> anchor;  // per voxel: next anchor, kTx, or kNone
  Vec3 tx_position;
  const scene::VoxelScene* scene = nullptr;
  static constexpr std::int64_t kTx = -1;
  static constexpr std::int64_t kNone = -2;
};

SolveResult solve_volume(const scene::VoxelScene& scene, const scene::TxConfig& tx, const MaterialParams& mat,
                         const SolveOptions& options = {});

/// One `i,j,k,length,bends,x y z;x y z;...` line per receiver voxel of layer
/// k (transmitter first). Unreachable receivers are written with length -1
/// and no points.
void write_path_records(std::ostream& out, const SolveResult& result, std::size_t layer);

}  // namespace rm3d::propagation
