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

// Forward-only 3D convolutional U-Net loaded from a text descriptor and an
// RM3D weight archive.
//
// Descriptor: one statement per line, `#` starts a comment.
//
//   denoiser v1
//   latent_channels <C>
//   condition_channels <Cc>
//   time_embedding <D>              even, 0 disables the time path
//   conv3d <name> <in> <out> <k>    odd k, zero "same" padding
//   act silu|relu
//   resblock <name> <in> <out> <k>  skip(x) + conv2(silu(conv1(silu(x)) + temb))
//   film <name> <channels>          x * (1 + gamma) + beta from the pooled condition
//   xattn <name> <channels> <dim>   single-head attention over condition voxels
//   down                            2x2 average pool in x and y
//   up                              2x nearest upsampling in x and y
//   save <slot>                     remember the current activation
//   concat <slot>                   append a saved activation's channels
//
// The network input is concat(x_t, cond) along channels and the output must
// have C channels. The weight archive holds one record per parameter in the
// order listed by parameter_list(); f32 and f64 records are accepted.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "rm3d/diffusion/denoiser.hpp"

namespace rm3d::diffusion {

enum class LayerKind { Conv3d, Act, ResBlock, Film, CrossAttn, Down, Up, Save, Concat };
enum class Activation { Silu, Relu };

struct LayerSpec {
  LayerKind kind = LayerKind::Conv3d;
  std::string name;  // parameter prefix, or slot for save/concat
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 1;
  std::size_t dim = 0;  // attention width
  Activation act = Activation::Silu;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct DenoiserSpec {
  std::size_t latent_channels = 0;
  std::size_t condition_channels = 0;
  std::size_t time_embedding = 0;
  std::vector<LayerSpec> layers;
  friend bool operator==(const DenoiserSpec&, const DenoiserSpec&) = default;
};

/// Parses and checks a descriptor; errors name the offending line.
DenoiserSpec parse_descriptor(std::string_view text);
std::string to_text(const DenoiserSpec& spec);

/// Verifies channel flow, pooling levels and save/concat slots. Errors name
/// the offending layer.
void check_spec(const DenoiserSpec& spec);

struct ParamSpec {
  std::string name;
  Shape shape;
  std::string layer;  // owning layer, "time" for the time embedding MLP
};

std::vector<ParamSpec> parameter_list(const DenoiserSpec& spec);

/// Deterministic He-style initialization, one tensor per parameter_list entry.
std::vector<Tensor<double>> random_parameters(const DenoiserSpec& spec, std::uint64_t seed, double gain = 1.0);

class ConvDenoiser final : public Denoiser {
 public:
  ConvDenoiser(DenoiserSpec spec, std::vector<Tensor<double>> params);

  std::size_t latent_channels() const override { return spec_.latent_channels; }
  std::size_t condition_channels() const override { return spec_.condition_channels; }
  const DenoiserSpec& spec() const { return spec_; }

  Tensor<double> predict_noise(const Tensor<double>& x_t, std::size_t t, const Tensor<double>& cond,
                               const NoiseSchedule& sched) const override;

  /// Runs the network on x_t and cond at a (possibly fractional) time value.
  Tensor<double> forward(const Tensor<double>& x_t, double t, const Tensor<double>& cond) const;

  std::size_t workspace_elements(std::size_t voxels) const override;

 private:
  DenoiserSpec spec_;
  std::vector<Tensor<double>> params_;
  std::vector<std::size_t> first_param_;  // per layer index into params_
};

std::unique_ptr<ConvDenoiser> load_denoiser(const std::filesystem::path& spec_file,
                                            const std::filesystem::path& weights_file);

/// Fixed input and reference output exported next to trained weights. The
/// file holds four records: x_t [C,X,Y,Z], t [1], cond [Cc,X,Y,Z] and the
/// expected noise prediction [C,X,Y,Z].
struct ParityVector {
  Tensor<double> x_t;
  double t = 0.0;
  Tensor<double> cond;
  Tensor<double> expected;
};

ParityVector load_parity(const std::filesystem::path& path);
void save_parity(const std::filesystem::path& path, const ParityVector& parity);

/// Largest absolute difference between the network output and the reference.
double parity_error(const ConvDenoiser& net, const ParityVector& parity);

/// Sinusoidal embedding: sin(t f_i) for i < D/2, then cos(t f_i), with
/// f_i = exp(-ln(10000) i / (D/2)).
std::vector<double> timestep_embedding(double t, std::size_t dim);

}  // namespace rm3d::diffusion
