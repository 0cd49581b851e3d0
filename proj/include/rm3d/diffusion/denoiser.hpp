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

#include <cstddef>
#include <memory>

#include "rm3d/core/tensor.hpp"
#include "rm3d/diffusion/schedule.hpp"

namespace rm3d::diffusion {

/// Noise predictor eps_hat(x_t, t, cond).
///
/// x_t has shape [latent_channels, X, Y, Z] and cond [condition_channels, X, Y, Z].
/// Implementations must be pure: the same inputs give bit-identical outputs.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual std::size_t latent_channels() const = 0;
  virtual std::size_t condition_channels() const = 0;

  virtual Tensor<double> predict_noise(const Tensor<double>& x_t, std::size_t t, const Tensor<double>& cond,
                                       const NoiseSchedule& sched) const = 0;

  /// Largest number of scratch elements one predict_noise call holds for an
  /// input of the given spatial size (0 when negligible).
  virtual std::size_t workspace_elements(std::size_t /*voxels*/) const { return 0; }
};

/// Exact noise predictor for data distributed as N(mu0, sigma0^2) per voxel:
/// eps_hat = (x_t - sqrt(abar) E[x0 | x_t]) / sqrt(1 - abar) with
/// E[x0 | x_t] = (sqrt(abar) sigma0^2 x_t + (1 - abar) mu0) / (abar sigma0^2 + 1 - abar).
class AnalyticGaussianDenoiser final : public Denoiser {
 public:
  AnalyticGaussianDenoiser(double mu0, double sigma0, std::size_t latent_channels = 1,
                           std::size_t condition_channels = 0);

  std::size_t latent_channels() const override { return latent_channels_; }
  std::size_t condition_channels() const override { return condition_channels_; }

  double posterior_mean(double x_t, std::size_t t, const NoiseSchedule& sched) const;

  Tensor<double> predict_noise(const Tensor<double>& x_t, std::size_t t, const Tensor<double>& cond,
                               const NoiseSchedule& sched) const override;

 private:
  double mu0_;
  double sigma0_;
  std::size_t latent_channels_;
  std::size_t condition_channels_;
};

std::unique_ptr<Denoiser> analytic_gaussian_denoiser(double mu0, double sigma0, std::size_t latent_channels = 1,
                                                     std::size_t condition_channels = 0);

}  // namespace rm3d::diffusion
