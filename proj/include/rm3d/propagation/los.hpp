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

#include "rm3d/core/geometry.hpp"
#include "rm3d/scene/scene.hpp"

namespace rm3d::propagation {

/// True iff the closed segment a-b passes through the interior of no occupied
/// voxel.
///
/// The segment is walked cell by cell (Amanatides & Woo) in voxel units.
/// Touching a voxel only on its boundary (a face, an edge or a corner) does
/// not block, so the segment between the centers of any two 26-adjacent free
/// voxels is always visible. Plane crossings closer than 1e-9 voxel along the
/// segment are treated as simultaneous. The walk always starts from the
/// lexicographically smaller endpoint, which makes the result symmetric.
///
/// Throws ValidationError when an endpoint lies outside the scene.
bool los_visible(const scene::VoxelScene& scene, Vec3 a, Vec3 b);

}  // namespace rm3d::propagation
