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

#include "rm3d/sampling/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <tuple>

#include "rm3d/core/error.hpp"
#include "rm3d/core/rm3d_format.hpp"
#include "rm3d/core/rng.hpp"
#include "rm3d/core/text.hpp"

namespace rm3d::sampling {

namespace {

void check_rate(double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) throw ValidationError("sampling rate must lie in (0, 1]");
}

void check_dims(std::size_t nx, std::size_t ny, std::size_t nz) {
  if (nx == 0 || ny == 0 || nz == 0) throw ValidationError("mask extents must be positive");
}

std::string_view kind_name(MaskKind k) { return k == MaskKind::Uniform ? "uniform" : "random"; }

}  // namespace

bool SampleMask::contains(std::size_t i, std::size_t j, std::size_t k) const {
  const auto& layer = layers.at(k);
  return std::binary_search(layer.begin(), layer.end(), i * ny + j);
}

std::size_t mask_count(std::size_t nx, std::size_t ny, double rate) {
  check_rate(rate);
  const double cells = static_cast<double>(nx) * static_cast<double>(ny);
  const auto m = static_cast<std::size_t>(std::floor(rate * cells * (1.0 + 1e-12)));
  return std::clamp<std::size_t>(m, 1, nx * ny);
}

SampleMask uniform_mask(std::size_t nx, std::size_t ny, std::size_t nz, double rate) {
  check_dims(nx, ny, nz);
  const std::size_t n = nx * ny;
  const std::size_t m = mask_count(nx, ny, rate);
  std::size_t stride = static_cast<std::size_t>(std::floor((1.0 / rate) * (1.0 + 1e-12)));
  stride = std::clamp<std::size_t>(stride, 1, n / m);
  std::vector<std::size_t> layer(m);
  for (std::size_t c = 0; c < m; ++c) layer[c] = c * stride;
  return {nx, ny, nz, rate, MaskKind::Uniform, 0, std::vector<std::vector<std::size_t>>(nz, layer)};
}

SampleMask random_mask(std::size_t nx, std::size_t ny, std::size_t nz, double rate, std::uint64_t seed) {
  check_dims(nx, ny, nz);
  const std::size_t n = nx * ny;
  const std::size_t m = mask_count(nx, ny, rate);
  SampleMask mask{nx, ny, nz, rate, MaskKind::Random, seed, {}};
  Rng rng(seed);
  std::vector<std::size_t> cells(n);
  for (std::size_t k = 0; k < nz; ++k) {
    for (std::size_t c = 0; c < n; ++c) cells[c] = c;
    for (std::size_t c = 0; c < m; ++c) std::swap(cells[c], cells[c + rng.below(n - c)]);
    std::vector<std::size_t> layer(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(layer.begin(), layer.end());
    mask.layers.push_back(std::move(layer));
  }
  return mask;
}

MaskedVolume apply_mask(const dataset::RadioMapVolume& volume, const SampleMask& mask) {
  if (volume.nx() != mask.nx || volume.ny() != mask.ny || volume.nz() != mask.nz || mask.layers.size() != mask.nz) {
    throw ValidationError("mask shape does not match the volume");
  }
  const std::size_t channels = volume.data.dim(3);
  MaskedVolume out;
  out.masked = dataset::RadioMapVolume(mask.nx, mask.ny, mask.nz, 0.0);
  out.masked.building_mask = volume.building_mask;
  out.masked.normalized = volume.normalized;
  out.observations = {mask.nx, mask.ny, mask.nz, channels, {}};
  for (std::size_t k = 0; k < mask.nz; ++k) {
    for (std::size_t flat : mask.layers[k]) {
      if (flat >= mask.nx * mask.ny) throw ValidationError("mask index out of range");
      const std::size_t i = flat / mask.ny;
      const std::size_t j = flat % mask.ny;
      Observation o{i, j, k, std::vector<double>(channels)};
      for (std::size_t c = 0; c < channels; ++c) {
        o.values[c] = volume.data(i, j, k, c);
        out.masked.data(i, j, k, c) = o.values[c];
      }
      out.observations.points.push_back(std::move(o));
    }
  }
  return out;
}

Tensor<double> interp_nearest(const SparseObservations& obs) {
  if (obs.points.empty()) throw ValidationError("interp_nearest needs at least one observation");
  const std::size_t nx = obs.nx, ny = obs.ny, nz = obs.nz, nc = obs.channels;
  Tensor<double> out({nx, ny, nz, nc}, 0.0);

  // Square buckets of side b holding observation indices, one grid per layer.
  const std::size_t b = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::sqrt(static_cast<double>(nx * ny * nz) / static_cast<double>(obs.points.size()))));
  const std::size_t bx = (nx + b - 1) / b, by = (ny + b - 1) / b;
  std::vector<std::vector<std::vector<std::size_t>>> buckets(nz, std::vector<std::vector<std::size_t>>(bx * by));
  for (std::size_t n = 0; n < obs.points.size(); ++n) {
    const Observation& o = obs.points[n];
    if (o.i >= nx || o.j >= ny || o.k >= nz) throw ValidationError("observation outside the grid");
    if (o.values.size() != nc) throw ValidationError("observation channel count mismatch");
    buckets[o.k][(o.i / b) * by + o.j / b].push_back(n);
  }

  for (std::size_t k = 0; k < nz; ++k) {
    const bool any = std::any_of(buckets[k].begin(), buckets[k].end(), [](const auto& v) { return !v.empty(); });
    if (!any) throw ValidationError("layer " + std::to_string(k) + " has no observations");
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t j = 0; j < ny; ++j) {
        const long long ci = static_cast<long long>(i / b), cj = static_cast<long long>(j / b);
        std::size_t best = std::numeric_limits<std::size_t>::max();
        long long best_d = std::numeric_limits<long long>::max();
        auto consider = [&](std::size_t n) {
          const Observation& o = obs.points[n];
          const long long di = static_cast<long long>(o.i) - static_cast<long long>(i);
          const long long dj = static_cast<long long>(o.j) - static_cast<long long>(j);
          const long long d = di * di + dj * dj;
          if (d < best_d || (d == best_d && std::tie(o.i, o.j) < std::tie(obs.points[best].i, obs.points[best].j))) {
            best_d = d;
            best = n;
          }
        };
        const long long max_r = static_cast<long long>(std::max(bx, by));
        for (long long r = 0; r <= max_r; ++r) {
          if (r >= 1 && best != std::numeric_limits<std::size_t>::max()) {
            // Cells in bucket ring r lie at least (r - 1) * b + 1 away along one axis.
            const long long lower = (r - 1) * static_cast<long long>(b) + 1;
            if (lower * lower > best_d) break;
          }
          for (long long qi = ci - r; qi <= ci + r; ++qi) {
            if (qi < 0 || qi >= static_cast<long long>(bx)) continue;
            for (long long qj = cj - r; qj <= cj + r; ++qj) {
              if (qj < 0 || qj >= static_cast<long long>(by)) continue;
              if (std::max(std::abs(qi - ci), std::abs(qj - cj)) != r) continue;
              for (std::size_t n : buckets[k][static_cast<std::size_t>(qi) * by + static_cast<std::size_t>(qj)]) {
                consider(n);
              }
            }
          }
        }
        for (std::size_t c = 0; c < nc; ++c) out(i, j, k, c) = obs.points[best].values[c];
      }
    }
  }
  return out;
}

void write_mask(const std::filesystem::path& path, const SampleMask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# nx=" << mask.nx << " ny=" << mask.ny << " nz=" << mask.nz << " rate=" << format_double(mask.rate)
      << " kind=" << kind_name(mask.kind) << " seed=" << mask.seed << '\n';
  for (std::size_t k = 0; k < mask.layers.size(); ++k) {
    for (std::size_t flat : mask.layers[k]) out << (k + 1) << ',' << flat / mask.ny << ',' << flat % mask.ny << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

SampleMask read_mask(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || !line.starts_with("# ")) throw ParseError(path.string() + ": missing mask header");
  SampleMask mask;
  bool have[6] = {};
  for (std::string_view field : split(std::string_view(line).substr(2), ' ')) {
    field = trim(field);
    if (field.empty()) continue;
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) throw ParseError(path.string() + ": bad header field '" + std::string(field) + "'");
    const std::string_view key = field.substr(0, eq), value = field.substr(eq + 1);
    if (key == "nx") mask.nx = static_cast<std::size_t>(parse_int(value)), have[0] = true;
    else if (key == "ny") mask.ny = static_cast<std::size_t>(parse_int(value)), have[1] = true;
    else if (key == "nz") mask.nz = static_cast<std::size_t>(parse_int(value)), have[2] = true;
    else if (key == "rate") mask.rate = parse_double(value), have[3] = true;
    else if (key == "kind") {
      if (value != "uniform" && value != "random") throw ParseError(path.string() + ": unknown mask kind");
      mask.kind = value == "uniform" ? MaskKind::Uniform : MaskKind::Random;
      have[4] = true;
    } else if (key == "seed") mask.seed = static_cast<std::uint64_t>(parse_int(value)), have[5] = true;
    else throw ParseError(path.string() + ": unknown header key '" + std::string(key) + "'");
  }
  if (!std::all_of(std::begin(have), std::end(have), [](bool b) { return b; })) {
    throw ParseError(path.string() + ": incomplete mask header");
  }
  check_dims(mask.nx, mask.ny, mask.nz);
  mask.layers.assign(mask.nz, {});
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view t = trim(line);
    if (t.empty()) continue;
    const auto f = split(t, ',');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (f.size() != 3) throw ParseError(where + ": expected h,i,j");
    const long long h = parse_int(f[0]), i = parse_int(f[1]), j = parse_int(f[2]);
    if (h < 1 || h > static_cast<long long>(mask.nz) || i < 0 || i >= static_cast<long long>(mask.nx) || j < 0 ||
        j >= static_cast<long long>(mask.ny)) {
      throw ParseError(where + ": cell out of range");
    }
    mask.layers[static_cast<std::size_t>(h - 1)].push_back(static_cast<std::size_t>(i) * mask.ny +
                                                           static_cast<std::size_t>(j));
  }
  for (auto& layer : mask.layers) {
    std::sort(layer.begin(), layer.end());
    if (std::adjacent_find(layer.begin(), layer.end()) != layer.end()) {
      throw ParseError(path.string() + ": duplicate mask cell");
    }
  }
  return mask;
}

void write_observations(const std::filesystem::path& path, const SparseObservations& obs) {
  const std::size_t cols = 3 + obs.channels;
  Tensor<double> t({obs.points.size(), cols});
  for (std::size_t n = 0; n < obs.points.size(); ++n) {
    const Observation& o = obs.points[n];
    if (o.values.size() != obs.channels) throw ValidationError("observation channel count mismatch");
    t(n, 0) = static_cast<double>(o.i);
    t(n, 1) = static_cast<double>(o.j);
    t(n, 2) = static_cast<double>(o.k);
    for (std::size_t c = 0; c < obs.channels; ++c) t(n, 3 + c) = o.values[c];
  }
  save_tensor(path, t);
}

SparseObservations read_observations(const std::filesystem::path& path, std::size_t nx, std::size_t ny,
                                     std::size_t nz) {
  const Tensor<double> t = load_tensor<double>(path);
  if (t.rank() != 2 || t.dim(1) < 3) throw ParseError(path.string() + ": expected an [N, 3 + C] record");
  SparseObservations obs{nx, ny, nz, t.dim(1) - 3, {}};
  for (std::size_t n = 0; n < t.dim(0); ++n) {
    auto coord = [&](std::size_t col, std::size_t limit) {
      const double v = t(n, col);
      if (!(v >= 0.0) || v != std::floor(v) || v >= static_cast<double>(limit)) {
        throw ParseError(path.string() + ": row " + std::to_string(n) + " has an invalid coordinate");
      }
      return static_cast<std::size_t>(v);
    };
    Observation o{coord(0, nx), coord(1, ny), coord(2, nz), {}};
    for (std::size_t c = 0; c < obs.channels; ++c) o.values.push_back(t(n, 3 + c));
    obs.points.push_back(std::move(o));
  }
  return obs;
}

}  // namespace rm3d::sampling
