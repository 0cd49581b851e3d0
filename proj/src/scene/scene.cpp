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

#include "rm3d/scene/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "rm3d/core/png_io.hpp"
#include "rm3d/core/rm3d_format.hpp"
#include "rm3d/core/rng.hpp"
#include "rm3d/core/text.hpp"

namespace rm3d::scene {

VoxelScene::VoxelScene(std::size_t nz, double resolution, Tensor<double> height_map)
    : nz_(nz), resolution_(resolution), height_map_(std::move(height_map)) {
  if (height_map_.rank() != 2) throw ValidationError("height map must have shape [nx, ny]");
  nx_ = height_map_.dim(0);
  ny_ = height_map_.dim(1);
  if (nx_ == 0 || ny_ == 0 || nz_ == 0) throw ValidationError("scene extents must be positive");
  if (!(resolution_ > 0.0)) throw ValidationError("scene resolution must be positive");
  occupancy_ = Tensor<std::uint8_t>({nx_, ny_, nz_}, 0);
  for (std::size_t i = 0; i < nx_; ++i) {
    for (std::size_t j = 0; j < ny_; ++j) {
      const double h = height_map_(i, j);
      if (!(h >= 0.0) || !std::isfinite(h)) throw ValidationError("building heights must be finite and >= 0");
      for (std::size_t k = 0; k < nz_ && static_cast<double>(k) * resolution_ < h; ++k) occupancy_(i, j, k) = 1;
    }
  }
}

VoxelScene VoxelScene::empty(std::size_t nx, std::size_t ny, std::size_t nz, double resolution) {
  return VoxelScene(nz, resolution, Tensor<double>({nx, ny}, 0.0));
}

bool VoxelScene::contains(Vec3 p) const {
  const Vec3 e = extent();
  return p.x >= 0.0 && p.y >= 0.0 && p.z >= 0.0 && p.x <= e.x && p.y <= e.y && p.z <= e.z;
}

VoxelIndex VoxelScene::voxel_of(Vec3 p) const {
  auto cell = [this](double v, std::size_t n) {
    const double c = std::floor(v / resolution_);
    if (c < 0.0) return std::size_t{0};
    return std::min(static_cast<std::size_t>(c), n - 1);
  };
  return {cell(p.x, nx_), cell(p.y, ny_), cell(p.z, nz_)};
}

void validate(const SceneParams& p) {
  if (p.nx == 0 || p.ny == 0 || p.nz == 0) throw ValidationError("scene extents must be positive");
  if (!(p.resolution > 0.0)) throw ValidationError("resolution must be positive");
  if (p.min_buildings > p.max_buildings) throw ValidationError("building count range is inverted");
  if (!(p.min_footprint > 0.0) || p.min_footprint > p.max_footprint) {
    throw ValidationError("footprint range must satisfy 0 < min <= max");
  }
  if (!(p.min_height > 0.0) || p.min_height > p.max_height) {
    throw ValidationError("height range must satisfy 0 < min <= max");
  }
  if (!(p.street_margin > 0.0)) throw ValidationError("street margin must be positive");
  const double span = static_cast<double>(std::min(p.nx, p.ny)) * p.resolution;
  if (p.max_buildings > 0 && p.min_footprint + 2.0 * p.street_margin > span) {
    throw ValidationError("footprint range cannot fit inside the scene extents");
  }
}

namespace {

struct Rect {
  std::int64_t x0, y0, x1, y1;  // half-open cell ranges
};

bool too_close(const Rect& a, const Rect& b, std::int64_t gap) {
  return a.x0 < b.x1 + gap && b.x0 < a.x1 + gap && a.y0 < b.y1 + gap && b.y0 < a.y1 + gap;
}

}  // namespace

VoxelScene generate_scene(const SceneParams& p) {
  validate(p);
  Rng rng(p.seed);
  Tensor<double> heights({p.nx, p.ny}, 0.0);
  const auto count = static_cast<std::size_t>(
      rng.between(static_cast<std::int64_t>(p.min_buildings), static_cast<std::int64_t>(p.max_buildings)));
  const auto margin = static_cast<std::int64_t>(std::ceil(p.street_margin / p.resolution));
  const auto nx = static_cast<std::int64_t>(p.nx);
  const auto ny = static_cast<std::int64_t>(p.ny);

  std::vector<Rect> placed;
  const std::size_t budget = 200 * count;
  for (std::size_t attempt = 0; attempt < budget && placed.size() < count; ++attempt) {
    const double w_m = rng.uniform(p.min_footprint, p.max_footprint);
    const double d_m = rng.uniform(p.min_footprint, p.max_footprint);
    const double h = rng.uniform(p.min_height, p.max_height);
    const auto w = std::max<std::int64_t>(1, std::llround(w_m / p.resolution));
    const auto d = std::max<std::int64_t>(1, std::llround(d_m / p.resolution));
    if (w > nx - 2 * margin || d > ny - 2 * margin) continue;
    const std::int64_t x0 = rng.between(margin, nx - margin - w);
    const std::int64_t y0 = rng.between(margin, ny - margin - d);
    const Rect r{x0, y0, x0 + w, y0 + d};
    if (std::any_of(placed.begin(), placed.end(), [&](const Rect& o) { return too_close(r, o, margin); })) {
      continue;
    }
    placed.push_back(r);
    for (auto x = r.x0; x < r.x1; ++x) {
      for (auto y = r.y0; y < r.y1; ++y) heights(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = h;
    }
  }
  return VoxelScene(p.nz, p.resolution, std::move(heights));
}

void validate(const VoxelScene& scene, const TxConfig& tx) {
  if (!(tx.frequency_hz > 0.0)) throw ValidationError("transmitter frequency must be positive");
  if (tx.antenna != "isotropic") throw ValidationError("only isotropic antennas are supported");
  if (!scene.contains(tx.position)) throw ValidationError("transmitter lies outside the scene");
  if (scene.occupied(scene.voxel_of(tx.position))) throw ValidationError("transmitter lies inside a building");
}

std::vector<TxConfig> place_transmitters(const VoxelScene& scene, std::size_t n, std::uint64_t seed,
                                         double tx_height) {
  if (!(tx_height >= 0.0) || tx_height >= static_cast<double>(scene.nz()) * scene.resolution()) {
    throw ValidationError("transmitter height outside the scene");
  }
  const auto k = static_cast<std::size_t>(std::floor(tx_height / scene.resolution()));
  std::vector<std::size_t> free_cells;
  for (std::size_t i = 0; i < scene.nx(); ++i) {
    for (std::size_t j = 0; j < scene.ny(); ++j) {
      if (!scene.occupied(i, j, k)) free_cells.push_back(i * scene.ny() + j);
    }
  }
  if (free_cells.size() < n) {
    throw ValidationError("only " + std::to_string(free_cells.size()) + " free cells at height " +
                          format_double(tx_height) + " m, " + std::to_string(n) + " transmitters requested");
  }
  // Partial Fisher-Yates: the first n slots become a uniform n-subset.
  Rng rng(seed);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t pick = s + rng.below(free_cells.size() - s);
    std::swap(free_cells[s], free_cells[pick]);
  }
  std::vector<TxConfig> txs(n);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t i = free_cells[s] / scene.ny();
    const std::size_t j = free_cells[s] % scene.ny();
    txs[s].position = {(i + 0.5) * scene.resolution(), (j + 0.5) * scene.resolution(), tx_height};
  }
  return txs;
}

std::pair<std::size_t, std::size_t> tx_cell(const VoxelScene& scene, const TxConfig& tx) {
  const VoxelIndex v = scene.voxel_of(tx.position);
  return {v.i, v.j};
}

ConditionMaps rasterize_condition_maps(const VoxelScene& scene, const TxConfig& tx, double max_height) {
  if (!scene.contains(tx.position)) throw ValidationError("transmitter lies outside the scene");
  if (!(max_height > 0.0)) throw ValidationError("max_height must be positive");
  const Shape plane{scene.nx(), scene.ny()};
  ConditionMaps maps{Tensor<double>(plane, 0.0), Tensor<double>(plane, 0.0), Tensor<double>(plane, 0.0)};
  for (std::size_t i = 0; i < scene.nx(); ++i) {
    for (std::size_t j = 0; j < scene.ny(); ++j) {
      const double h = scene.height_map()(i, j);
      maps.segmentation(i, j) = h > 0.0 ? 1.0 : 0.0;
      maps.height(i, j) = std::clamp(h / max_height, 0.0, 1.0);
    }
  }
  const auto [ti, tj] = tx_cell(scene, tx);
  maps.transmitter(ti, tj) = 1.0;
  return maps;
}

void save_scene(const std::filesystem::path& path, const VoxelScene& scene) {
  save_records(path, {Tensor<double>({2}, {scene.resolution(), static_cast<double>(scene.nz())}),
                      scene.height_map(), scene.occupancy()});
}

VoxelScene load_scene(const std::filesystem::path& path) {
  const auto records = load_records(path);
  if (records.size() != 3) throw ParseError(path.string() + ": expected 3 scene records");
  const auto* meta = std::get_if<Tensor<double>>(&records[0]);
  const auto* heights = std::get_if<Tensor<double>>(&records[1]);
  const auto* occ = std::get_if<Tensor<std::uint8_t>>(&records[2]);
  if (!meta || meta->size() != 2 || !heights || !occ) {
    throw ParseError(path.string() + ": scene records have unexpected types");
  }
  const double nz = (*meta)[1];
  if (!(nz >= 1.0) || nz != std::floor(nz)) throw ParseError(path.string() + ": bad layer count");
  VoxelScene scene(static_cast<std::size_t>(nz), (*meta)[0], *heights);
  if (scene.occupancy() != *occ) {
    throw ParseError(path.string() + ": occupancy is inconsistent with the height map");
  }
  return scene;
}

void export_height_png(const std::filesystem::path& path, const VoxelScene& scene, double max_height) {
  const auto w = static_cast<std::uint32_t>(scene.nx());
  const auto h = static_cast<std::uint32_t>(scene.ny());
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < scene.nx(); ++i) {
    for (std::size_t j = 0; j < scene.ny(); ++j) {
      const double v = std::clamp(scene.height_map()(i, j) / max_height, 0.0, 1.0);
      pixels[j * w + i] = static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
    }
  }
  write_png_gray8(path, w, h, pixels);
}

void save_transmitters(const std::filesystem::path& path, const std::vector<TxConfig>& txs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& tx : txs) {
    out << format_double(tx.position.x) << ',' << format_double(tx.position.y) << ','
        << format_double(tx.position.z) << ',' << format_double(tx.power_dbm) << ','
        << format_double(tx.frequency_hz) << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<TxConfig> load_transmitters(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<TxConfig> txs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 5) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected x,y,z,power_dbm,frequency_hz");
    }
    try {
      TxConfig tx;
      tx.position = {parse_double(fields[0]), parse_double(fields[1]), parse_double(fields[2])};
      tx.power_dbm = parse_double(fields[3]);
      tx.frequency_hz = parse_double(fields[4]);
      txs.push_back(tx);
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return txs;
}

}  // namespace rm3d::scene
