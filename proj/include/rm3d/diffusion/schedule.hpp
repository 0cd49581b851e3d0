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

// Variance schedule and the per-step diffusion operators. All tensors are
// element-wise compatible; timesteps are 1-based with the convention
// alpha_bar(0) = 1.

#include <cstddef>
#include <vector>

#include "rm3d/core/tensor.hpp"

namespace rm3d::diffusion {

struct NoiseSchedule {
  std::vector<double> beta;       // [T + 1], beta[0] = 0
  std::vector<double> alpha;      // [T + 1], alpha[0] = 1
  std::vector<double> alpha_bar;  // [T + 1], alpha_bar[0] = 1

  std::size_t steps() const { return beta.empty() ? 0 : beta.size() - 1; }
};

/// beta_t linear from beta_start (t = 1) to beta_end (t = T), alpha_bar by
/// running product.
NoiseSchedule linear_schedule(std::size_t T = 1000, double beta_start = 1e-4, double beta_end = 0.02);

/// sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, 0 <= t <= T.
Tensor<double> forward_sample(const Tensor<double>& x0, std::size_t t, const Tensor<double>& eps,
                              const NoiseSchedule& s);

/// (x_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t).
Tensor<double> predict_x0(const Tensor<double>& x_t, std::size_t t, const Tensor<double>& eps_hat,
                          const NoiseSchedule& s);

enum class DdpmVariance {
  Beta,       // sigma_t^2 = beta_t
  Posterior,  // sigma_t^2 = (1 - abar_{t-1}) / (1 - abar_t) * beta_t
};

double ddpm_sigma(std::size_t t, const NoiseSchedule& s, DdpmVariance variance = DdpmVariance::Beta);

/// (x_t - beta_t / sqrt(1 - abar_t) eps_hat) / sqrt(alpha_t).
Tensor<double> ddpm_mean(const Tensor<double>& x_t, std::size_t t, const Tensor<double>& eps_hat,
                         const NoiseSchedule& s);

/// ddpm_mean + sigma_t noise; the noise term is dropped at t = 1.
Tensor<double> ddpm_step(const Tensor<double>& x_t, std::size_t t, const Tensor<double>& eps_hat,
                         const Tensor<double>& noise, const NoiseSchedule& s,
                         DdpmVariance variance = DdpmVariance::Beta);

/// The same step written through an x0 estimate: the posterior mean
/// sqrt(abar_{t-1}) beta_t / (1 - abar_t) x0 + sqrt(alpha_t) (1 - abar_{t-1}) / (1 - abar_t) x_t,
/// which equals ddpm_mean when x0_hat = predict_x0(x_t, eps_hat).
Tensor<double> ddpm_step_from_x0(const Tensor<double>& x_t, std::size_t t, const Tensor<double>& x0_hat,
                                 const Tensor<double>& noise, const NoiseSchedule& s,
                                 DdpmVariance variance = DdpmVariance::Beta);

/// eta * sqrt((1 - abar_prev) / (1 - abar_t)) * sqrt(1 - abar_t / abar_prev).
double ddim_sigma(std::size_t t, std::size_t t_prev, double eta, const NoiseSchedule& s);

/// sqrt(abar_prev) x0_hat + sqrt(1 - abar_prev - sigma^2) eps_hat + sigma noise.
Tensor<double> ddim_step(const Tensor<double>& x_t, std::size_t t, std::size_t t_prev, const Tensor<double>& eps_hat,
                         double eta, const Tensor<double>& noise, const NoiseSchedule& s);

/// ddim_step with an externally supplied (possibly guided) x0 estimate.
Tensor<double> ddim_step_from_x0(const Tensor<double>& x0_hat, std::size_t t, std::size_t t_prev,
                                 const Tensor<double>& eps_hat, double eta, const Tensor<double>& noise,
                                 const NoiseSchedule& s);

/// x0_hat - 2 lambda mask * (x0_hat - target): one gradient step on the masked
/// squared discrepancy.
Tensor<double> guided_correction(const Tensor<double>& x0_hat, const Tensor<double>& mask,
                                 const Tensor<double>& target, double lambda);

/// sum(mask * (x - target)^2).
double masked_discrepancy(const Tensor<double>& x, const Tensor<double>& mask, const Tensor<double>& target);

enum class LossKind { L2, L1 };

/// Mean squared (or absolute) difference.
double simple_loss(const Tensor<double>& eps_hat, const Tensor<double>& eps, LossKind kind = LossKind::L2);

/// Descending sampler timesteps: i * floor(T / S) + 1 for i = S - 1, ..., 0.
/// With S = T this is T, T - 1, ..., 1.
std::vector<std::size_t> sampler_timesteps(const NoiseSchedule& s, std::size_t sampler_steps);

}  // namespace rm3d::diffusion
