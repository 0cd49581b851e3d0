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

#include <cmath>
#include <cstddef>
#include <vector>

#include "rm3d/core/tensor.hpp"
#include "rm3d/metrics/metrics.hpp"

namespace rm3d::testing {

// Direct evaluation of one window: Gaussian weights built from scratch,
// moments summed in a plain loop.
inline double naive_window_ssim(const Tensor<double>& x, const Tensor<double>& y, std::size_t p, std::size_t q,
                                const metrics::SsimConfig& cfg) {
  const std::size_t w = cfg.window;
  const double r = static_cast<double>(w / 2);
  double total = 0.0;
  std::vector<double> g(w * w);
  for (std::size_t a = 0; a < w; ++a)
    for (std::size_t b = 0; b < w; ++b) {
      const double da = static_cast<double>(a) - r, db = static_cast<double>(b) - r;
      g[a * w + b] = std::exp(-(da * da + db * db) / (2.0 * cfg.sigma * cfg.sigma));
      total += g[a * w + b];
    }
  double mx = 0, my = 0;
  for (std::size_t a = 0; a < w; ++a)
    for (std::size_t b = 0; b < w; ++b) {
      mx += g[a * w + b] / total * x(p + a, q + b);
      my += g[a * w + b] / total * y(p + a, q + b);
    }
  double vx = 0, vy = 0, cxy = 0;
  for (std::size_t a = 0; a < w; ++a)
    for (std::size_t b = 0; b < w; ++b) {
      const double wt = g[a * w + b] / total;
      const double dx = x(p + a, q + b) - mx, dy = y(p + a, q + b) - my;
      vx += wt * dx * dx;
      vy += wt * dy * dy;
      cxy += wt * dx * dy;
    }
  const double c1 = cfg.c1(), c2 = cfg.c2();
  // Luminance, contrast and structure terms with C3 = C2 / 2.
  const double c3 = c2 / 2.0;
  const double l = (2 * mx * my + c1) / (mx * mx + my * my + c1);
  const double c = (2 * std::sqrt(vx) * std::sqrt(vy) + c2) / (vx + vy + c2);
  const double s = (cxy + c3) / (std::sqrt(vx) * std::sqrt(vy) + c3);
  return l * c * s;
}

}  // namespace rm3d::testing
