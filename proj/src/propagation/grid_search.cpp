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

#include "rm3d/propagation/grid_search.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <string>
#include <utility>

#include "rm3d/core/error.hpp"

namespace rm3d::propagation {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kSqrt3 = 1.7320508075688772935;

struct Offset {
  int di, dj, dk;
  int order;  // 1, 2 or 3 nonzero components
};

constexpr std::array<Offset, 26> make_offsets() {
  std::array<Offset, 26> out{};
  std::size_t n = 0;
  for (int di = -1; di <= 1; ++di) {
    for (int dj = -1; dj <= 1; ++dj) {
      for (int dk = -1; dk <= 1; ++dk) {
        if (di == 0 && dj == 0 && dk == 0) continue;
        out[n++] = {di, dj, dk, (di != 0) + (dj != 0) + (dk != 0)};
      }
    }
  }
  return out;
}

// Sorted so that neighbor linear indices come out in increasing order.
constexpr std::array<Offset, 26> kOffsets = make_offsets();

GridDistance extend(GridDistance d, int order) {
  if (order == 1) ++d.unit;
  if (order == 2) ++d.diag2;
  if (order == 3) ++d.diag3;
  return d;
}

template <typename Fn>
void for_each_free_neighbor(const scene::VoxelScene& s, std::size_t linear, Fn&& fn) {
  const scene::VoxelIndex v = s.unlinear(linear);
  for (const Offset& o : kOffsets) {
    const long long i = static_cast<long long>(v.i) + o.di;
    const long long j = static_cast<long long>(v.j) + o.dj;
    const long long k = static_cast<long long>(v.k) + o.dk;
    if (i < 0 || j < 0 || k < 0 || i >= static_cast<long long>(s.nx()) || j >= static_cast<long long>(s.ny()) ||
        k >= static_cast<long long>(s.nz())) {
      continue;
    }
    const scene::VoxelIndex u{static_cast<std::size_t>(i), static_cast<std::size_t>(j), static_cast<std::size_t>(k)};
    if (s.occupied(u)) continue;
    fn(s.linear(u), o.order);
  }
}

void require_free(const scene::VoxelScene& s, scene::VoxelIndex v, const char* what) {
  if (v.i >= s.nx() || v.j >= s.ny() || v.k >= s.nz()) {
    throw ValidationError(std::string(what) + " voxel outside the scene");
  }
  if (s.occupied(v)) throw ValidationError(std::string(what) + " voxel is occupied");
}

using QueueEntry = std::pair<double, std::size_t>;
using MinQueue = std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>>;

}  // namespace

double GridDistance::value() const {
  return static_cast<double>(unit) + static_cast<double>(diag2) * kSqrt2 + static_cast<double>(diag3) * kSqrt3;
}

ShortestPathField ShortestPathField::all_from(const scene::VoxelScene& s, scene::VoxelIndex source) {
  require_free(s, source, "source");
  ShortestPathField f;
  f.scene_ = &s;
  f.source_ = s.linear(source);
  f.dist_.assign(s.voxel_count(), GridDistance{});
  f.dist_[f.source_] = GridDistance{0, 0, 0};

  std::vector<std::uint8_t> settled(s.voxel_count(), 0);
  MinQueue queue;
  queue.emplace(0.0, f.source_);
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (settled[u]) continue;
    settled[u] = 1;
    f.order_.push_back(u);
    const GridDistance du = f.dist_[u];
    for_each_free_neighbor(s, u, [&](std::size_t v, int order) {
      if (settled[v]) return;
      const GridDistance cand = extend(du, order);
      const double cv = cand.value();
      if (!f.dist_[v].reached() || cv < f.dist_[v].value()) {
        f.dist_[v] = cand;
        queue.emplace(cv, v);
      }
    });
  }
  return f;
}

ShortestPathField ShortestPathField::toward(const scene::VoxelScene& s, scene::VoxelIndex source,
                                            scene::VoxelIndex target) {
  require_free(s, source, "source");
  require_free(s, target, "target");
  ShortestPathField f;
  f.scene_ = &s;
  f.source_ = s.linear(source);
  f.dist_.assign(s.voxel_count(), GridDistance{});
  f.dist_[f.source_] = GridDistance{0, 0, 0};

  const auto h = [&](std::size_t linear) {
    const scene::VoxelIndex v = s.unlinear(linear);
    const double di = static_cast<double>(v.i) - static_cast<double>(target.i);
    const double dj = static_cast<double>(v.j) - static_cast<double>(target.j);
    const double dk = static_cast<double>(v.k) - static_cast<double>(target.k);
    return std::sqrt(di * di + dj * dj + dk * dk);
  };

  const std::size_t goal = s.linear(target);
  MinQueue queue;
  queue.emplace(h(f.source_), f.source_);
  // Once the target is settled, nodes keep expanding while their f could still
  // lie on a shortest path, so every such node ends up with its exact distance.
  double bound = std::numeric_limits<double>::infinity();
  while (!queue.empty()) {
    const auto [fu, u] = queue.top();
    if (fu > bound) break;
    queue.pop();
    const GridDistance du = f.dist_[u];
    const double gu = du.value();
    if (fu > gu + h(u)) continue;  // superseded by a shorter distance
    if (u == goal) bound = gu + 1e-9 * (1.0 + gu);
    for_each_free_neighbor(s, u, [&](std::size_t v, int order) {
      const GridDistance cand = extend(du, order);
      const double cv = cand.value();
      if (!f.dist_[v].reached() || cv < f.dist_[v].value()) {
        f.dist_[v] = cand;
        queue.emplace(cv + h(v), v);
      }
    });
  }
  return f;
}

std::optional<std::size_t> ShortestPathField::parent(std::size_t linear) const {
  if (linear == source_ || !dist_[linear].reached()) return std::nullopt;
  const GridDistance dv = dist_[linear];
  std::optional<std::size_t> best;
  for_each_free_neighbor(*scene_, linear, [&](std::size_t u, int order) {
    if (best || !dist_[u].reached()) return;
    if (extend(dist_[u], order) == dv) best = u;
  });
  return best;
}

std::vector<std::size_t> ShortestPathField::path_to_source(std::size_t from) const {
  std::vector<std::size_t> path;
  if (!dist_[from].reached()) return path;
  path.push_back(from);
  while (path.back() != source_) {
    const auto p = parent(path.back());
    if (!p) throw Error("shortest-path field lost its parent chain");
    path.push_back(*p);
  }
  return path;
}

std::optional<double> grid_shortest_distance(const scene::VoxelScene& s, scene::VoxelIndex from,
                                             scene::VoxelIndex to) {
  if (from.i >= s.nx() || from.j >= s.ny() || from.k >= s.nz() || to.i >= s.nx() || to.j >= s.ny() ||
      to.k >= s.nz()) {
    throw ValidationError("voxel outside the scene");
  }
  if (s.occupied(from) || s.occupied(to)) return std::nullopt;
  const ShortestPathField f = ShortestPathField::toward(s, from, to);
  const GridDistance& d = f.distance(s.linear(to));
  if (!d.reached()) return std::nullopt;
  return d.value() * s.resolution();
}

}  // namespace rm3d::propagation
