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

#include "rm3d/propagation/los.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <tuple>

#include "rm3d/core/error.hpp"

namespace rm3d::propagation {

namespace {

bool on_plane(double v) { return v == std::floor(v); }

}  // namespace

bool los_visible(const scene::VoxelScene& scene, Vec3 a, Vec3 b) {
  if (!scene.contains(a) || !scene.contains(b)) throw ValidationError("line-of-sight endpoint outside the scene");
  if (std::tie(b.x, b.y, b.z) < std::tie(a.x, a.y, a.z)) std::swap(a, b);

  const double res = scene.resolution();
  const std::array<double, 3> p = {a.x / res, a.y / res, a.z / res};
  const std::array<double, 3> q = {b.x / res, b.y / res, b.z / res};
  const std::array<std::size_t, 3> n = {scene.nx(), scene.ny(), scene.nz()};

  std::array<double, 3> d{};
  std::array<long long, 3> cell{};
  std::array<int, 3> step{};
  std::array<double, 3> t_next{};
  std::array<double, 3> t_delta{};
  double max_d = 0.0;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  for (int ax = 0; ax < 3; ++ax) {
    d[ax] = q[ax] - p[ax];
    max_d = std::max(max_d, std::abs(d[ax]));
    if (d[ax] > 0.0) {
      step[ax] = 1;
      cell[ax] = static_cast<long long>(std::floor(p[ax]));
      t_next[ax] = (static_cast<double>(cell[ax] + 1) - p[ax]) / d[ax];
      t_delta[ax] = 1.0 / d[ax];
    } else if (d[ax] < 0.0) {
      step[ax] = -1;
      cell[ax] = static_cast<long long>(std::ceil(p[ax])) - 1;
      t_next[ax] = (p[ax] - static_cast<double>(cell[ax])) / -d[ax];
      t_delta[ax] = 1.0 / -d[ax];
    } else {
      // A segment lying in a voxel face plane touches cells only on their boundary.
      if (on_plane(p[ax])) return true;
      step[ax] = 0;
      cell[ax] = static_cast<long long>(std::floor(p[ax]));
      t_next[ax] = kInf;
      t_delta[ax] = kInf;
    }
  }

  auto blocked = [&]() {
    for (int ax = 0; ax < 3; ++ax) {
      if (cell[ax] < 0 || cell[ax] >= static_cast<long long>(n[ax])) return false;
    }
    return scene.occupied(static_cast<std::size_t>(cell[0]), static_cast<std::size_t>(cell[1]),
                          static_cast<std::size_t>(cell[2]));
  };

  if (max_d == 0.0) return !blocked();

  const double eps = 1e-9 / max_d;
  double t = 0.0;
  while (true) {
    const double tn = std::min({t_next[0], t_next[1], t_next[2]});
    if (std::min(tn, 1.0) - t > eps && blocked()) return false;
    if (tn >= 1.0 - eps) return true;
    for (int ax = 0; ax < 3; ++ax) {
      if (t_next[ax] <= tn + eps) {
        cell[ax] += step[ax];
        t_next[ax] += t_delta[ax];
      }
    }
    t = tn;
  }
}

}  // namespace rm3d::propagation
