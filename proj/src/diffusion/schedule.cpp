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

#include "rm3d/diffusion/schedule.hpp"

#include <cmath>
#include <string>

#include "rm3d/core/error.hpp"
#include "rm3d/core/text.hpp"

namespace rm3d::diffusion {

namespace {

void same_shape(const Tensor<double>& a, const Tensor<double>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ValidationError(std::string(what) + ": shape " + shape_to_string(a.shape()) + " vs " +
                          shape_to_string(b.shape()));
  }
}

void check_t(std::size_t t, const NoiseSchedule& s, std::size_t lo) {
  if (t < lo || t > s.steps()) {
    throw ValidationError("timestep " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
                          std::to_string(s.steps()) + "]");
  }
}

template <typename Fn>
Tensor<double> zip(const Tensor<double>& a, const Tensor<double>& b, Fn&& fn) {
  Tensor<double> out(a.shape());
  for (std::size_t n = 0; n < a.size(); ++n) out[n] = fn(a[n], b[n]);
  return out;
}

}  // namespace

NoiseSchedule linear_schedule(std::size_t T, double beta_start, double beta_end) {
  if (T == 0) throw ValidationError("schedule needs at least one step");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ValidationError("schedule requires 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.beta.assign(T + 1, 0.0);
  s.alpha.assign(T + 1, 1.0);
  s.alpha_bar.assign(T + 1, 1.0);
  for (std::size_t t = 1; t <= T; ++t) {
    if (T == 1) {
      s.beta[t] = beta_start;
    } else {
      const double frac = static_cast<double>(t - 1) / static_cast<double>(T - 1);
      s.beta[t] = t == T ? beta_end : beta_start + (beta_end - beta_start) * frac;
    }
    s.alpha[t] = 1.0 - s.beta[t];
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
  }
  return s;
}

Tensor<double> forward_sample(const Tensor<double>& x0, std::size_t t, const Tensor<double>& eps,
                              const NoiseSchedule& s) {
  same_shape(x0, eps, "forward_sample");
  check_t(t, s, 0);
  const double a = std::sqrt(s.alpha_bar[t]);
  const double b = std::sqrt(1.0 - s.alpha_bar[t]);
  return zip(x0, eps, [&](double x, double e) { return a * x + b * e; });
}

Tensor<double> predict_x0(const Tensor<double>& x_t, std::size_t t, const Tensor<double>& eps_hat,
                          const NoiseSchedule& s) {
  same_shape(x_t, eps_hat, "predict_x0");
  check_t(t, s, 0);
  const double a = std::sqrt(s.alpha_bar[t]);
  const double b = std::sqrt(1.0 - s.alpha_bar[t]);
  return zip(x_t, eps_hat, [&](double x, double e) { return (x - b * e) / a; });
}

double ddpm_sigma(std::size_t t, const NoiseSchedule& s, DdpmVariance variance) {
  check_t(t, s, 1);
  if (variance == DdpmVariance::Beta) return std::sqrt(s.beta[t]);
  return std::sqrt((1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]) * s.beta[t]);
}

Tensor<double> ddpm_mean(const Tensor<double>& x_t, std::size_t t, const Tensor<double>& eps_hat,
                         const NoiseSchedule& s) {
  same_shape(x_t, eps_hat, "ddpm_mean");
  check_t(t, s, 1);
  const double c = (1.0 - s.alpha[t]) / std::sqrt(1.0 - s.alpha_bar[t]);
  const double d = std::sqrt(s.alpha[t]);
  return zip(x_t, eps_hat, [&](double x, double e) { return (x - c * e) / d; });
}

Tensor<double> ddpm_step(const Tensor<double>& x_t, std::size_t t, const Tensor<double>& eps_hat,
                         const Tensor<double>& noise, const NoiseSchedule& s, DdpmVariance variance) {
  same_shape(x_t, noise, "ddpm_step");
  Tensor<double> out = ddpm_mean(x_t, t, eps_hat, s);
  if (t > 1) {
    const double sigma = ddpm_sigma(t, s, variance);
    for (std::size_t n = 0; n < out.size(); ++n) out[n] += sigma * noise[n];
  }
  return out;
}

Tensor<double> ddpm_step_from_x0(const Tensor<double>& x_t, std::size_t t, const Tensor<double>& x0_hat,
                                 const Tensor<double>& noise, const NoiseSchedule& s, DdpmVariance variance) {
  same_shape(x_t, x0_hat, "ddpm_step_from_x0");
  same_shape(x_t, noise, "ddpm_step_from_x0");
  check_t(t, s, 1);
  const double denom = 1.0 - s.alpha_bar[t];
  const double cx0 = std::sqrt(s.alpha_bar[t - 1]) * s.beta[t] / denom;
  const double cxt = std::sqrt(s.alpha[t]) * (1.0 - s.alpha_bar[t - 1]) / denom;
  const double sigma = t > 1 ? ddpm_sigma(t, s, variance) : 0.0;
  Tensor<double> out(x_t.shape());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = cx0 * x0_hat[n] + cxt * x_t[n] + sigma * noise[n];
  return out;
}

double ddim_sigma(std::size_t t, std::size_t t_prev, double eta, const NoiseSchedule& s) {
  check_t(t, s, 1);
  if (t_prev >= t) throw ValidationError("ddim requires t_prev < t");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ValidationError("ddim eta must lie in [0, 1]");
  const double ab = s.alpha_bar[t];
  const double ap = s.alpha_bar[t_prev];
  return eta * std::sqrt((1.0 - ap) / (1.0 - ab)) * std::sqrt(1.0 - ab / ap);
}

Tensor<double> ddim_step_from_x0(const Tensor<double>& x0_hat, std::size_t t, std::size_t t_prev,
                                 const Tensor<double>& eps_hat, double eta, const Tensor<double>& noise,
                                 const NoiseSchedule& s) {
  same_shape(x0_hat, eps_hat, "ddim_step");
  same_shape(x0_hat, noise, "ddim_step");
  const double sigma = ddim_sigma(t, t_prev, eta, s);
  const double ap = s.alpha_bar[t_prev];
  const double a = std::sqrt(ap);
  const double b = std::sqrt(std::max(0.0, 1.0 - ap - sigma * sigma));
  Tensor<double> out(x0_hat.shape());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = a * x0_hat[n] + b * eps_hat[n] + sigma * noise[n];
  return out;
}

Tensor<double> ddim_step(const Tensor<double>& x_t, std::size_t t, std::size_t t_prev, const Tensor<double>& eps_hat,
                         double eta, const Tensor<double>& noise, const NoiseSchedule& s) {
  return ddim_step_from_x0(predict_x0(x_t, t, eps_hat, s), t, t_prev, eps_hat, eta, noise, s);
}

Tensor<double> guided_correction(const Tensor<double>& x0_hat, const Tensor<double>& mask,
                                 const Tensor<double>& target, double lambda) {
  same_shape(x0_hat, mask, "guided_correction mask");
  same_shape(x0_hat, target, "guided_correction target");
  if (!(lambda >= 0.0)) throw ValidationError("guidance weight must be non-negative");
  Tensor<double> out(x0_hat.shape());
  // Written as a blend so lambda = 1/2 on a unit mask lands exactly on target.
  for (std::size_t n = 0; n < out.size(); ++n) {
    const double w = 2.0 * lambda * mask[n];
    out[n] = (1.0 - w) * x0_hat[n] + w * target[n];
  }
  return out;
}

double masked_discrepancy(const Tensor<double>& x, const Tensor<double>& mask, const Tensor<double>& target) {
  same_shape(x, mask, "masked_discrepancy mask");
  same_shape(x, target, "masked_discrepancy target");
  double sum = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double d = x[n] - target[n];
    sum += mask[n] * d * d;
  }
  return sum;
}

double simple_loss(const Tensor<double>& eps_hat, const Tensor<double>& eps, LossKind kind) {
  same_shape(eps_hat, eps, "simple_loss");
  if (eps.empty()) throw ValidationError("simple_loss of empty tensors");
  double sum = 0.0;
  for (std::size_t n = 0; n < eps.size(); ++n) {
    const double d = eps_hat[n] - eps[n];
    sum += kind == LossKind::L2 ? d * d : std::abs(d);
  }
  return sum / static_cast<double>(eps.size());
}

std::vector<std::size_t> sampler_timesteps(const NoiseSchedule& s, std::size_t sampler_steps) {
  const std::size_t T = s.steps();
  if (sampler_steps == 0 || sampler_steps > T) {
    throw ValidationError("sampler steps must lie in [1, " + std::to_string(T) + "]");
  }
  const std::size_t stride = T / sampler_steps;
  std::vector<std::size_t> ts;
  for (std::size_t i = sampler_steps; i-- > 0;) ts.push_back(i * stride + 1);
  return ts;
}

}  // namespace rm3d::diffusion
