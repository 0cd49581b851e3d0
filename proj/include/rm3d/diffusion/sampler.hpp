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

// Full sampling loops: DDPM / DDIM trajectories with optional reconstruction
// guidance, and slab-by-slab autoregressive generation along z.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "rm3d/core/tensor.hpp"
#include "rm3d/diffusion/denoiser.hpp"
#include "rm3d/diffusion/schedule.hpp"

namespace rm3d::diffusion {

enum class SamplerKind { Ddpm, Ddim };

struct SamplerConfig {
  SamplerKind kind = SamplerKind::Ddim;
  std::size_t steps = 50;  // DDIM only; DDPM always walks T, ..., 1
  double eta = 0.0;        // DDIM only
  DdpmVariance variance = DdpmVariance::Beta;
};

/// Reconstruction guidance. lambda holds one weight per sampler step in
/// execution order; mask and target share the latent shape.
struct GuidanceConfig {
  std::vector<double> lambda;
  Tensor<double> mask;
  Tensor<double> target;
};

/// `weight` on the last ceil(fraction * steps) steps, 0 before.
std::vector<double> tail_guidance_schedule(std::size_t steps, double weight = 0.1, double fraction = 0.25);

struct GuidedStep {
  std::size_t step = 0;
  std::size_t t = 0;
  double before = 0.0;  // masked squared discrepancy of x0_hat
  double after = 0.0;   // same after the correction
};

struct GenerationReport {
  Tensor<double> sample;            // [latent_channels, X, Y, Z]
  std::vector<std::size_t> timesteps;
  std::vector<double> step_ms;
  double total_ms = 0.0;
  std::vector<GuidedStep> guided;
  /// High-water mark of live working tensors in elements (latent, noise
  /// estimate, x0 estimate, noise draw, condition and denoiser scratch).
  std::size_t peak_working_elements = 0;
};

/// Starts from seeded standard normal noise and runs the sampler to t = 0.
/// cond is [condition_channels, X, Y, Z] and fixes the spatial shape; use a
/// zero-channel tensor for unconditional denoisers.
GenerationReport generate(const Denoiser& denoiser, const Tensor<double>& cond, const NoiseSchedule& sched,
                          const SamplerConfig& sampler, const GuidanceConfig* guidance, std::uint64_t seed);

/// Generates `slabs` slabs of `slab_depth` layers each. Slab d is conditioned
/// on base_cond's layers [d * slab_depth, (d + 1) * slab_depth) followed by the
/// previously generated slab (zeros for the first). Slab d uses seed + d.
/// The denoiser's condition channels must equal base channels + latent channels.
/// Guidance, when given, covers the full [C, X, Y, slabs * slab_depth] volume.
GenerationReport autoregressive_generate(const Denoiser& denoiser, const Tensor<double>& base_cond,
                                         std::size_t slabs, std::size_t slab_depth, const NoiseSchedule& sched,
                                         const SamplerConfig& sampler, const GuidanceConfig* guidance,
                                         std::uint64_t seed);

/// Layers [z0, z1) of a [C, X, Y, Z] tensor.
Tensor<double> slice_z(const Tensor<double>& t, std::size_t z0, std::size_t z1);
/// Channel-wise concatenation of equally sized [C, X, Y, Z] tensors.
Tensor<double> concat_channels(const Tensor<double>& a, const Tensor<double>& b);

}  // namespace rm3d::diffusion
