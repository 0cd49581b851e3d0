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

#include "rm3d/diffusion/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "rm3d/core/error.hpp"
#include "rm3d/core/rng.hpp"

namespace rm3d::diffusion {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Tensor<double> normal_tensor(const Shape& shape, Rng& rng) {
  Tensor<double> t(shape);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

void check_volume(const Tensor<double>& t, const char* what) {
  if (t.rank() != 4) throw ValidationError(std::string(what) + " must have shape [C, X, Y, Z]");
}

}  // namespace

std::vector<double> tail_guidance_schedule(std::size_t steps, double weight, double fraction) {
  if (!(weight >= 0.0)) throw ValidationError("guidance weight must be non-negative");
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ValidationError("guidance fraction must lie in [0, 1]");
  const auto guided = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(steps) - 1e-9));
  std::vector<double> lambda(steps, 0.0);
  for (std::size_t i = steps - std::min(guided, steps); i < steps; ++i) lambda[i] = weight;
  return lambda;
}

GenerationReport generate(const Denoiser& denoiser, const Tensor<double>& cond, const NoiseSchedule& sched,
                          const SamplerConfig& sampler, const GuidanceConfig* guidance, std::uint64_t seed) {
  check_volume(cond, "condition");
  if (cond.dim(0) != denoiser.condition_channels()) {
    throw ValidationError("condition has " + std::to_string(cond.dim(0)) + " channels, denoiser expects " +
                          std::to_string(denoiser.condition_channels()));
  }
  const Shape shape = {denoiser.latent_channels(), cond.dim(1), cond.dim(2), cond.dim(3)};
  const std::size_t voxels = cond.dim(1) * cond.dim(2) * cond.dim(3);

  GenerationReport report;
  if (sampler.kind == SamplerKind::Ddpm) {
    for (std::size_t t = sched.steps(); t >= 1; --t) report.timesteps.push_back(t);
  } else {
    report.timesteps = sampler_timesteps(sched, sampler.steps);
  }
  const std::size_t n_steps = report.timesteps.size();
  if (guidance) {
    if (guidance->lambda.size() != n_steps) {
      throw ValidationError("guidance needs " + std::to_string(n_steps) + " weights, got " +
                            std::to_string(guidance->lambda.size()));
    }
    if (guidance->mask.shape() != shape || guidance->target.shape() != shape) {
      throw ValidationError("guidance mask and target must have shape " + shape_to_string(shape));
    }
  }

  Rng rng(seed);
  const auto start = Clock::now();
  Tensor<double> x = normal_tensor(shape, rng);
  const std::size_t latent = x.size();
  // x, eps_hat, x0_hat and the noise draw are live together during a step.
  report.peak_working_elements = 4 * latent + cond.size() + denoiser.workspace_elements(voxels);

  for (std::size_t i = 0; i < n_steps; ++i) {
    const auto step_start = Clock::now();
    const std::size_t t = report.timesteps[i];
    const std::size_t t_prev = i + 1 < n_steps ? report.timesteps[i + 1] : 0;
    const Tensor<double> eps = denoiser.predict_noise(x, t, cond, sched);
    if (eps.shape() != shape) throw ValidationError("denoiser output shape " + shape_to_string(eps.shape()));
    Tensor<double> x0 = predict_x0(x, t, eps, sched);
    const bool guided = guidance && guidance->lambda[i] > 0.0;
    if (guided) {
      GuidedStep g{i, t, masked_discrepancy(x0, guidance->mask, guidance->target), 0.0};
      x0 = guided_correction(x0, guidance->mask, guidance->target, guidance->lambda[i]);
      g.after = masked_discrepancy(x0, guidance->mask, guidance->target);
      report.guided.push_back(g);
    }
    if (sampler.kind == SamplerKind::Ddpm) {
      const Tensor<double> noise = t > 1 ? normal_tensor(shape, rng) : Tensor<double>(shape, 0.0);
      x = guided ? ddpm_step_from_x0(x, t, x0, noise, sched, sampler.variance)
                 : ddpm_step(x, t, eps, noise, sched, sampler.variance);
    } else {
      const double sigma = ddim_sigma(t, t_prev, sampler.eta, sched);
      const Tensor<double> noise = sigma > 0.0 ? normal_tensor(shape, rng) : Tensor<double>(shape, 0.0);
      x = ddim_step_from_x0(x0, t, t_prev, eps, sampler.eta, noise, sched);
    }
    report.step_ms.push_back(ms_since(step_start));
  }
  report.total_ms = ms_since(start);
  report.sample = std::move(x);
  return report;
}

Tensor<double> slice_z(const Tensor<double>& t, std::size_t z0, std::size_t z1) {
  check_volume(t, "tensor");
  if (z0 > z1 || z1 > t.dim(3)) throw ValidationError("z slice out of range");
  const std::size_t c = t.dim(0), nx = t.dim(1), ny = t.dim(2), nz = t.dim(3), d = z1 - z0;
  Tensor<double> out({c, nx, ny, d});
  for (std::size_t a = 0; a < c * nx * ny; ++a) {
    std::copy_n(t.data() + a * nz + z0, d, out.data() + a * d);
  }
  return out;
}

Tensor<double> concat_channels(const Tensor<double>& a, const Tensor<double>& b) {
  check_volume(a, "tensor");
  check_volume(b, "tensor");
  if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ValidationError("concat_channels spatial shape mismatch");
  }
  Tensor<double> out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2), a.dim(3)});
  std::copy(a.values().begin(), a.values().end(), out.data());
  std::copy(b.values().begin(), b.values().end(), out.data() + a.size());
  return out;
}

GenerationReport autoregressive_generate(const Denoiser& denoiser, const Tensor<double>& base_cond,
                                         std::size_t slabs, std::size_t slab_depth, const NoiseSchedule& sched,
                                         const SamplerConfig& sampler, const GuidanceConfig* guidance,
                                         std::uint64_t seed) {
  check_volume(base_cond, "base condition");
  if (slabs == 0 || slab_depth == 0) throw ValidationError("need at least one slab of positive depth");
  if (base_cond.dim(3) != slabs * slab_depth) {
    throw ValidationError("base condition depth must equal slabs * slab_depth");
  }
  const std::size_t c = denoiser.latent_channels();
  if (denoiser.condition_channels() != base_cond.dim(0) + c) {
    throw ValidationError("denoiser must take the base condition plus the previous slab as condition channels");
  }
  const std::size_t nx = base_cond.dim(1), ny = base_cond.dim(2), nz = slabs * slab_depth;

  GenerationReport out;
  out.sample = Tensor<double>({c, nx, ny, nz});
  Tensor<double> previous({c, nx, ny, slab_depth}, 0.0);
  for (std::size_t d = 0; d < slabs; ++d) {
    const std::size_t z0 = d * slab_depth, z1 = z0 + slab_depth;
    const Tensor<double> cond = concat_channels(slice_z(base_cond, z0, z1), previous);
    GuidanceConfig slab_guidance;
    if (guidance) {
      slab_guidance = {guidance->lambda, slice_z(guidance->mask, z0, z1), slice_z(guidance->target, z0, z1)};
    }
    GenerationReport r = generate(denoiser, cond, sched, sampler, guidance ? &slab_guidance : nullptr, seed + d);
    for (std::size_t a = 0; a < c * nx * ny; ++a) {
      std::copy_n(r.sample.data() + a * slab_depth, slab_depth, out.sample.data() + a * nz + z0);
    }
    // The previous slab is the only state carried between slabs.
    out.peak_working_elements = std::max(out.peak_working_elements, r.peak_working_elements + previous.size());
    out.timesteps = r.timesteps;
    out.step_ms.insert(out.step_ms.end(), r.step_ms.begin(), r.step_ms.end());
    out.guided.insert(out.guided.end(), r.guided.begin(), r.guided.end());
    out.total_ms += r.total_ms;
    previous = std::move(r.sample);
  }
  return out;
}

}  // namespace rm3d::diffusion
