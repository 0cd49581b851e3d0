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

// Sparse observations for the transmitter-agnostic setting: per-layer sample
// masks, masking of a normalized volume and nearest-neighbor densification.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "rm3d/dataset/volume.hpp"

namespace rm3d::sampling {

enum class MaskKind { Uniform, Random };

/// Per-layer sets of flat cell indices i * ny + j, sorted ascending.
struct SampleMask {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;
  double rate = 0.0;
  MaskKind kind = MaskKind::Uniform;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> layers;

  bool contains(std::size_t i, std::size_t j, std::size_t k) const;
  friend bool operator==(const SampleMask&, const SampleMask&) = default;
};

/// max(1, floor(rate * nx * ny)), with a relative 1e-12 guard so products that
/// are integers in exact arithmetic do not round down.
std::size_t mask_count(std::size_t nx, std::size_t ny, double rate);

/// Cells 0, s, 2s, ... in row-major order, s = floor(1 / rate) shrunk if
/// needed so that exactly mask_count cells fit.
SampleMask uniform_mask(std::size_t nx, std::size_t ny, std::size_t nz, double rate);

/// Independent uniformly random subsets per layer (partial Fisher-Yates).
SampleMask random_mask(std::size_t nx, std::size_t ny, std::size_t nz, double rate, std::uint64_t seed);

struct Observation {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;
  std::vector<double> values;  // one per observed channel
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct SparseObservations {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;
  std::size_t channels = 0;
  std::vector<Observation> points;  // layer-major, then flat cell index
  friend bool operator==(const SparseObservations&, const SparseObservations&) = default;
};

struct MaskedVolume {
  SparseObservations observations;
  dataset::RadioMapVolume masked;  // original values on the mask, 0 elsewhere
};

MaskedVolume apply_mask(const dataset::RadioMapVolume& volume, const SampleMask& mask);

/// Dense [nx, ny, nz, channels] field where every cell takes the values of
/// its nearest observation in the same layer (squared Euclidean distance in
/// cell units, ties to the smallest (i, j)). Every layer needs an observation.
Tensor<double> interp_nearest(const SparseObservations& obs);

/// Mask as text: a `# nx=.. ny=.. nz=.. rate=.. kind=.. seed=..` header then
/// one `h,i,j` line per cell with 1-based layer h.
void write_mask(const std::filesystem::path& path, const SampleMask& mask);
SampleMask read_mask(const std::filesystem::path& path);

/// Observations as one f64 RM3D record [N, 3 + C] with rows (i, j, k, values...).
/// Grid dimensions are not stored; read_observations takes them.
void write_observations(const std::filesystem::path& path, const SparseObservations& obs);
SparseObservations read_observations(const std::filesystem::path& path, std::size_t nx, std::size_t ny,
                                     std::size_t nz);

}  // namespace rm3d::sampling
