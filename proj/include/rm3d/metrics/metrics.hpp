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

// Error and similarity metrics between predicted and reference volumes.
//
// Sums use pairwise summation (blocks of 8 summed sequentially, halves
// combined recursively), so results do not depend on worker count.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rm3d/core/tensor.hpp"
#include "rm3d/dataset/volume.hpp"

namespace rm3d::metrics {

double pairwise_sum(std::span<const double> values);

/// PSNR is +infinity when MSE is zero; reports write it as "inf".
struct ErrorMetrics {
  double mse = 0.0;
  double rmse = 0.0;
  double nmse = 0.0;
  double psnr = 0.0;
};

/// 10 log10(L^2 / mse), +infinity for mse == 0.
double psnr_from_mse(double mse, double dynamic_range = 1.0);

/// MSE, RMSE, NMSE = sum (t - p)^2 / sum t^2 and PSNR = 10 log10(L^2 / MSE).
/// Voxels with exclude[n] != 0 are skipped when a mask is given. Throws
/// ValidationError when the included truth values are all zero.
ErrorMetrics error_metrics(std::span<const double> pred, std::span<const double> truth, double dynamic_range = 1.0,
                           std::span<const std::uint8_t> exclude = {});
ErrorMetrics error_metrics(const Tensor<double>& pred, const Tensor<double>& truth, double dynamic_range = 1.0);

struct SsimConfig {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

void validate(const SsimConfig& cfg);

/// Normalized 1D Gaussian window; the 2D window is its outer product.
std::vector<double> gaussian_window(const SsimConfig& cfg);

/// Local SSIM at every valid window position of two [nx, ny] slices, shape
/// [nx - w + 1, ny - w + 1]. Entry (p, q) covers the window whose top-left
/// corner is (p, q).
Tensor<double> ssim_map(const Tensor<double>& pred, const Tensor<double>& truth, const SsimConfig& cfg = {});

/// Mean local SSIM over valid window positions.
double ssim(const Tensor<double>& pred, const Tensor<double>& truth, const SsimConfig& cfg = {});

struct EvalConfig {
  SsimConfig ssim;
  /// Skip voxels inside buildings (truth mask). For SSIM a window counts when
  /// its center voxel is outside buildings.
  bool exclude_buildings = false;
  std::size_t threads = 1;
};

struct ChannelMetrics {
  double mse = 0.0;
  double rmse = 0.0;
  double nmse = 0.0;
  double ssim = 0.0;
  double psnr = 0.0;
};

struct MetricReport {
  std::array<ChannelMetrics, dataset::kChannelCount> channels{};
  /// Unweighted mean of the channel values, field by field.
  ChannelMetrics aggregate;
  std::size_t voxels = 0;  // voxels scored per channel
  std::string mask_note = "all";  // "all" or "buildings_excluded"

  const ChannelMetrics& operator[](dataset::Channel c) const { return channels[dataset::index(c)]; }
};

/// Per-channel error metrics over the whole volume, SSIM per height slice
/// averaged over slices.
MetricReport evaluate_volume(const dataset::RadioMapVolume& pred, const dataset::RadioMapVolume& truth,
                             const EvalConfig& cfg = {});

/// `channel,metric,value` lines, channels in volume order then "aggregate",
/// preceded by `# voxels=<n> mask=<note>`.
void write_report(std::ostream& out, const MetricReport& report);
void write_report(const std::filesystem::path& path, const MetricReport& report);
MetricReport read_report(std::istream& in);
MetricReport read_report(const std::filesystem::path& path);

/// Value of a metric field by name ("mse", "rmse", "nmse", "ssim", "psnr").
double metric_value(const ChannelMetrics& m, const std::string& name);

}  // namespace rm3d::metrics
