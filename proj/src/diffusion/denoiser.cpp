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

#include "rm3d/diffusion/denoiser.hpp"

#include <cmath>

#include "rm3d/core/error.hpp"

namespace rm3d::diffusion {

AnalyticGaussianDenoiser::AnalyticGaussianDenoiser(double mu0, double sigma0, std::size_t latent_channels,
                                                   std::size_t condition_channels)
    : mu0_(mu0), sigma0_(sigma0), latent_channels_(latent_channels), condition_channels_(condition_channels) {
  if (!(sigma0 >= 0.0)) throw ValidationError("sigma0 must be non-negative");
  if (latent_channels == 0) throw ValidationError("latent channel count must be positive");
}

double AnalyticGaussianDenoiser::posterior_mean(double x_t, std::size_t t, const NoiseSchedule& sched) const {
  const double ab = sched.alpha_bar.at(t);
  const double v = sigma0_ * sigma0_;
  return (std::sqrt(ab) * v * x_t + (1.0 - ab) * mu0_) / (ab * v + 1.0 - ab);
}

Tensor<double> AnalyticGaussianDenoiser::predict_noise(const Tensor<double>& x_t, std::size_t t,
                                                       const Tensor<double>& /*cond*/,
                                                       const NoiseSchedule& sched) const {
  if (t == 0 || t > sched.steps()) throw ValidationError("timestep outside the schedule");
  if (x_t.rank() == 0 || x_t.dim(0) != latent_channels_) throw ValidationError("latent channel count mismatch");
  const double ab = sched.alpha_bar[t];
  const double a = std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  Tensor<double> eps(x_t.shape());
  for (std::size_t n = 0; n < x_t.size(); ++n) eps[n] = (x_t[n] - a * posterior_mean(x_t[n], t, sched)) / b;
  return eps;
}

std::unique_ptr<Denoiser> analytic_gaussian_denoiser(double mu0, double sigma0, std::size_t latent_channels,
                                                     std::size_t condition_channels) {
  return std::make_unique<AnalyticGaussianDenoiser>(mu0, sigma0, latent_channels, condition_channels);
}

}  // namespace rm3d::diffusion
