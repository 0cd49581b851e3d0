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

// Independent reference implementations used as test oracles for the
// propagation module. They favour obviousness over speed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "rm3d/core/geometry.hpp"
#include "rm3d/core/rng.hpp"
#include "rm3d/core/tensor.hpp"
#include "rm3d/propagation/los.hpp"
#include "rm3d/scene/scene.hpp"

namespace rm3d::testing {

/// Visibility by sorting every plane crossing and probing each open interval
/// at its midpoint.
inline bool reference_visible(const scene::VoxelScene& s, Vec3 a, Vec3 b) {
  const double r = s.resolution();
  const double p[3] = {a.x / r, a.y / r, a.z / r};
  const double q[3] = {b.x / r, b.y / r, b.z / r};
  const std::size_t n[3] = {s.nx(), s.ny(), s.nz()};
  std::vector<double> ts = {0.0, 1.0};
  for (int ax = 0; ax < 3; ++ax) {
    const double d = q[ax] - p[ax];
    if (d == 0.0) continue;
    const double lo = std::min(p[ax], q[ax]);
    const double hi = std::max(p[ax], q[ax]);
    for (double m = std::ceil(lo); m <= hi; m += 1.0) ts.push_back((m - p[ax]) / d);
  }
  std::sort(ts.begin(), ts.end());
  auto interior_occupied = [&](double t) {
    long long cell[3];
    for (int ax = 0; ax < 3; ++ax) {
      const double c = p[ax] + t * (q[ax] - p[ax]);
      if (c == std::floor(c)) return false;
      cell[ax] = static_cast<long long>(std::floor(c));
      if (cell[ax] < 0 || cell[ax] >= static_cast<long long>(n[ax])) return false;
    }
    return s.occupied(static_cast<std::size_t>(cell[0]), static_cast<std::size_t>(cell[1]),
                      static_cast<std::size_t>(cell[2]));
  };
  if (a == b) return !interior_occupied(0.0);
  for (std::size_t m = 0; m + 1 < ts.size(); ++m) {
    if (ts[m + 1] - ts[m] > 1e-12 && interior_occupied(0.5 * (ts[m] + ts[m + 1]))) return false;
  }
  return true;
}

struct OraclePath {
  bool reachable = false;
  double raw_length = 0.0;           // voxel units, center to center
  std::vector<std::size_t> voxels;   // receiver voxel first
};

/// Branch-and-bound enumeration of simple 26-connected voxel paths from `from`
/// to `to`. Returns the minimum length and, among paths within 1e-9 of it, the
/// lexicographically smallest voxel sequence.
inline OraclePath enumerate_shortest(const scene::VoxelScene& s, scene::VoxelIndex from, scene::VoxelIndex to) {
  OraclePath best;
  double best_len = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> path{s.linear(from)};
  std::vector<char> used(s.voxel_count(), 0);
  used[path[0]] = 1;
  const std::size_t goal = s.linear(to);
  auto euclid = [&](std::size_t x, std::size_t y) {
    const auto u = s.unlinear(x);
    const auto v = s.unlinear(y);
    const double di = double(u.i) - double(v.i), dj = double(u.j) - double(v.j), dk = double(u.k) - double(v.k);
    return std::sqrt(di * di + dj * dj + dk * dk);
  };
  auto dfs = [&](auto&& self, double len) -> void {
    const std::size_t at = path.back();
    if (len + euclid(at, goal) > best_len + 1e-9) return;
    if (at == goal) {
      if (len < best_len - 1e-9 || (len <= best_len + 1e-9 && path < best.voxels)) {
        best_len = std::min(best_len, len);
        best.voxels = path;
      }
      return;
    }
    const auto v = s.unlinear(at);
    std::vector<std::size_t> next;
    for (long long i = (long long)v.i - 1; i <= (long long)v.i + 1; ++i)
      for (long long j = (long long)v.j - 1; j <= (long long)v.j + 1; ++j)
        for (long long k = (long long)v.k - 1; k <= (long long)v.k + 1; ++k) {
          if (i < 0 || j < 0 || k < 0 || i >= (long long)s.nx() || j >= (long long)s.ny() || k >= (long long)s.nz())
            continue;
          const scene::VoxelIndex u{std::size_t(i), std::size_t(j), std::size_t(k)};
          const std::size_t lu = s.linear(u);
          if (lu == at || used[lu] || s.occupied(u)) continue;
          next.push_back(lu);
        }
    std::sort(next.begin(), next.end());
    for (std::size_t u : next) {
      used[u] = 1;
      path.push_back(u);
      self(self, len + euclid(at, u));
      path.pop_back();
      used[u] = 0;
    }
  };
  if (!s.occupied(from) && !s.occupied(to)) dfs(dfs, 0.0);
  if (!best.voxels.empty()) {
    best.reachable = true;
    best.raw_length = 0.0;
    for (std::size_t m = 0; m + 1 < best.voxels.size(); ++m) best.raw_length += euclid(best.voxels[m], best.voxels[m + 1]);
  }
  return best;
}

/// Greedy string pulling over a receiver-first waypoint list; returns the
/// pulled polyline, receiver first.
inline std::vector<Vec3> reference_pull(const scene::VoxelScene& s, const std::vector<Vec3>& w) {
  std::vector<Vec3> out{w.front()};
  std::size_t anchor = 0;
  const std::size_t last = w.size() - 1;
  while (anchor < last) {
    if (propagation::los_visible(s, w[anchor], w[last])) {
      out.push_back(w[last]);
      return out;
    }
    std::size_t k = anchor + 1;
    while (k + 1 < last && propagation::los_visible(s, w[anchor], w[k + 1])) ++k;
    out.push_back(w[k]);
    anchor = k;
  }
  return out;
}

/// Dominant-path length from the brute-force oracle: straight line when
/// visible, else the pulled enumeration optimum. nullopt when unreachable.
inline std::optional<double> oracle_path_length(const scene::VoxelScene& s, Vec3 tx, Vec3 rx) {
  if (reference_visible(s, tx, rx)) return distance(tx, rx);
  const OraclePath best = enumerate_shortest(s, s.voxel_of(rx), s.voxel_of(tx));
  if (!best.reachable) return std::nullopt;
  std::vector<Vec3> w{rx};
  for (std::size_t m = 0; m < best.voxels.size(); ++m) {
    const Vec3 c = s.center(s.unlinear(best.voxels[m]));
    if ((m == 0 && c == rx) || (m + 1 == best.voxels.size() && c == tx)) continue;
    w.push_back(c);
  }
  w.push_back(tx);
  const std::vector<Vec3> pulled = reference_pull(s, w);
  double len = 0.0;
  for (std::size_t m = pulled.size() - 1; m > 0; --m) len += distance(pulled[m], pulled[m - 1]);
  return len;
}

/// Random extruded scene on at most 5x5x2 with up to three obstacle columns.
inline scene::VoxelScene random_small_scene(Rng& rng) {
  const std::size_t nx = 2 + rng.below(4);
  const std::size_t ny = 2 + rng.below(4);
  const std::size_t nz = 1 + rng.below(2);
  Tensor<double> h({nx, ny}, 0.0);
  const std::size_t obstacles = rng.below(4);
  for (std::size_t o = 0; o < obstacles; ++o) {
    h(rng.below(nx), rng.below(ny)) = static_cast<double>(1 + rng.below(nz));
  }
  return scene::VoxelScene(nz, 1.0, std::move(h));
}

}  // namespace rm3d::testing
