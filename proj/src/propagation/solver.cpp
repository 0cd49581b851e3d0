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

#include "rm3d/propagation/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "rm3d/core/error.hpp"
#include "rm3d/core/parallel.hpp"
#include "rm3d/core/text.hpp"
#include "rm3d/propagation/grid_search.hpp"
#include "rm3d/propagation/los.hpp"

namespace rm3d::propagation {

namespace {

// First string-pulling anchor of the receiver at voxel v: the last waypoint of
// the canonical voxel chain that stays visible from v's center.
std::int64_t first_anchor(const scene::VoxelScene& s, const ShortestPathField& field, std::size_t v, Vec3 tx) {
  const Vec3 from = s.center(s.unlinear(v));
  std::size_t anchor = v;
  std::size_t u = v;
  while (u != field.source()) {
    u = *field.parent(u);
    const Vec3 c = s.center(s.unlinear(u));
    // The neighbor is always visible; later waypoints must be checked. A
    // transmitter voxel center coinciding with tx is not a separate waypoint.
    if (anchor != v && ((u == field.source() && c == tx) || !los_visible(s, from, c))) break;
    anchor = u;
  }
  return static_cast<std::int64_t>(anchor);
}

}  // namespace

SolveResult solve_volume(const scene::VoxelScene& s, const scene::TxConfig& tx, const MaterialParams& mat,
                         const SolveOptions& options) {
  scene::validate(s, tx);
  validate(mat);
  const std::size_t count = s.voxel_count();
  const ShortestPathField field = ShortestPathField::all_from(s, s.voxel_of(tx.position));

  SolveResult result;
  result.scene = &s;
  result.tx_position = tx.position;
  result.anchor.assign(count, SolveResult::kNone);
  parallel_for(count, options.threads, [&](std::size_t v) {
    if (s.occupancy()[v] != 0) return;
    const Vec3 c = s.center(s.unlinear(v));
    if (los_visible(s, tx.position, c)) {
      result.anchor[v] = SolveResult::kTx;
    } else if (field.reached(v)) {
      result.anchor[v] = first_anchor(s, field, v, tx.position);
    }
  });

  const double nan = std::numeric_limits<double>::quiet_NaN();
  dataset::RadioMapVolume& vol = result.volume;
  vol = dataset::RadioMapVolume(s.nx(), s.ny(), s.nz(), nan);
  vol.building_mask = s.occupancy();
  std::vector<double> length(count, 0.0);
  std::vector<std::size_t> bends(count, 0);
  const double floor_m = s.resolution() / 2.0;

  // Anchors always precede their receivers in settle order.
  for (std::size_t v : field.settle_order()) {
    const std::int64_t a = result.anchor[v];
    if (a == SolveResult::kNone) continue;
    const Vec3 c = s.center(s.unlinear(v));
    Vec3 previous;
    if (a == SolveResult::kTx) {
      previous = tx.position;
      length[v] = 0.0 + distance(tx.position, c);
      bends[v] = 0;
    } else {
      const auto au = static_cast<std::size_t>(a);
      previous = s.center(s.unlinear(au));
      length[v] = length[au] + distance(previous, c);
      bends[v] = bends[au] + 1;
    }
    const VoxelChannel ch = channel_from_parts(length[v], bends[v], c, previous, tx, mat, floor_m);
    double* out = &vol.data[v * dataset::kChannelCount];
    out[dataset::index(dataset::Channel::Pathgain)] = ch.pathgain_db;
    out[dataset::index(dataset::Channel::DoaAzi)] = ch.doa_azi;
    out[dataset::index(dataset::Channel::DoaEle)] = ch.doa_ele;
    out[dataset::index(dataset::Channel::ToA)] = ch.toa_ns;
  }
  if (!options.keep_paths) result.anchor.clear();
  return result;
}

DominantPath SolveResult::path(scene::VoxelIndex v) const {
  if (scene == nullptr || anchor.empty()) throw ValidationError("solve result was computed without keep_paths");
  std::size_t at = scene->linear(v);
  if (anchor[at] == kNone) return DominantPath{};
  std::vector<Vec3> receiver_first{scene->center(v)};
  while (anchor[at] != kTx) {
    at = static_cast<std::size_t>(anchor[at]);
    receiver_first.push_back(scene->center(scene->unlinear(at)));
  }
  receiver_first.push_back(tx_position);
  return make_path(std::move(receiver_first));
}

void write_path_records(std::ostream& out, const SolveResult& result, std::size_t layer) {
  const scene::VoxelScene& s = *result.scene;
  if (layer >= s.nz()) throw ValidationError("path export layer outside the scene");
  for (std::size_t i = 0; i < s.nx(); ++i) {
    for (std::size_t j = 0; j < s.ny(); ++j) {
      if (s.occupied(i, j, layer)) continue;
      const DominantPath p = result.path({i, j, layer});
      out << i << ',' << j << ',' << layer << ',' << (p.reachable ? format_double(p.length) : "-1") << ','
          << p.bends << ',';
      for (std::size_t n = 0; n < p.waypoints.size(); ++n) {
        const Vec3& w = p.waypoints[n];
        if (n) out << ';';
        out << format_double(w.x) << ' ' << format_double(w.y) << ' ' << format_double(w.z);
      }
      out << '\n';
    }
  }
}

}  // namespace rm3d::propagation
