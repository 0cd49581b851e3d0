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

#include "rm3d/metrics/metrics.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "rm3d/core/error.hpp"
#include "rm3d/core/parallel.hpp"
#include "rm3d/core/text.hpp"

namespace rm3d::metrics {

namespace {

using dataset::Channel;
using dataset::kChannelCount;

constexpr std::array<const char*, 5> kMetricNames = {"mse", "rmse", "nmse", "ssim", "psnr"};

template <typename M>
auto& metric_ref(M& m, std::string_view name) {
  if (name == "mse") return m.mse;
  if (name == "rmse") return m.rmse;
  if (name == "nmse") return m.nmse;
  if (name == "ssim") return m.ssim;
  if (name == "psnr") return m.psnr;
  throw ParseError("unknown metric '" + std::string(name) + "'");
}

// Valid correlation of an [nx, ny] field with the separable window g.
std::vector<double> filter_valid(const std::vector<double>& f, std::size_t nx, std::size_t ny,
                                 const std::vector<double>& g) {
  const std::size_t w = g.size(), mx = nx - w + 1, my = ny - w + 1;
  std::vector<double> tmp(mx * ny, 0.0), out(mx * my, 0.0);
  for (std::size_t p = 0; p < mx; ++p) {
    for (std::size_t a = 0; a < w; ++a) {
      const double ga = g[a];
      const double* src = f.data() + (p + a) * ny;
      double* dst = tmp.data() + p * ny;
      for (std::size_t j = 0; j < ny; ++j) dst[j] += ga * src[j];
    }
  }
  for (std::size_t p = 0; p < mx; ++p) {
    for (std::size_t q = 0; q < my; ++q) {
      double s = 0.0;
      for (std::size_t b = 0; b < w; ++b) s += g[b] * tmp[p * ny + q + b];
      out[p * my + q] = s;
    }
  }
  return out;
}

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw ValidationError(std::string(what) + " contains non-finite values");
  }
}

}  // namespace

double psnr_from_mse(double mse, double range) {
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(range * range / mse);
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

ErrorMetrics error_metrics(std::span<const double> pred, std::span<const double> truth, double dynamic_range,
                           std::span<const std::uint8_t> exclude) {
  if (pred.size() != truth.size()) throw ValidationError("prediction and truth differ in size");
  if (!exclude.empty() && exclude.size() != truth.size()) throw ValidationError("exclusion mask differs in size");
  if (!(dynamic_range > 0.0) || !std::isfinite(dynamic_range)) {
    throw ValidationError("dynamic range must be positive");
  }
  check_finite(pred, "prediction");
  check_finite(truth, "truth");
  std::vector<double> sq, energy;
  sq.reserve(truth.size());
  energy.reserve(truth.size());
  for (std::size_t n = 0; n < truth.size(); ++n) {
    if (!exclude.empty() && exclude[n] != 0) continue;
    const double d = truth[n] - pred[n];
    sq.push_back(d * d);
    energy.push_back(truth[n] * truth[n]);
  }
  if (sq.empty()) throw ValidationError("no voxels to score");
  const double total = pairwise_sum(sq);
  const double norm = pairwise_sum(energy);
  if (norm == 0.0) throw ValidationError("NMSE is undefined for an all-zero truth");
  ErrorMetrics m;
  m.mse = total / static_cast<double>(sq.size());
  m.rmse = std::sqrt(m.mse);
  m.nmse = total / norm;
  m.psnr = psnr_from_mse(m.mse, dynamic_range);
  return m;
}

ErrorMetrics error_metrics(const Tensor<double>& pred, const Tensor<double>& truth, double dynamic_range) {
  if (pred.shape() != truth.shape()) {
    throw ValidationError("shape mismatch: " + shape_to_string(pred.shape()) + " vs " +
                          shape_to_string(truth.shape()));
  }
  return error_metrics(pred.values(), truth.values(), dynamic_range);
}

void validate(const SsimConfig& cfg) {
  if (cfg.window == 0 || cfg.window % 2 == 0) throw ValidationError("SSIM window must be odd");
  if (!(cfg.sigma > 0.0)) throw ValidationError("SSIM sigma must be positive");
  if (!(cfg.k1 > 0.0) || !(cfg.k2 > 0.0)) throw ValidationError("SSIM K1 and K2 must be positive");
  if (!(cfg.dynamic_range > 0.0)) throw ValidationError("SSIM dynamic range must be positive");
}

std::vector<double> gaussian_window(const SsimConfig& cfg) {
  validate(cfg);
  const double r = static_cast<double>(cfg.window / 2);
  std::vector<double> g(cfg.window);
  for (std::size_t a = 0; a < cfg.window; ++a) {
    const double d = static_cast<double>(a) - r;
    g[a] = std::exp(-d * d / (2.0 * cfg.sigma * cfg.sigma));
  }
  const double s = pairwise_sum(g);
  for (double& v : g) v /= s;
  return g;
}

Tensor<double> ssim_map(const Tensor<double>& pred, const Tensor<double>& truth, const SsimConfig& cfg) {
  validate(cfg);
  if (pred.rank() != 2 || pred.shape() != truth.shape()) {
    throw ValidationError("SSIM needs two 2D slices of equal shape");
  }
  const std::size_t nx = pred.dim(0), ny = pred.dim(1), w = cfg.window;
  if (nx < w || ny < w) {
    throw ValidationError("slice " + shape_to_string(pred.shape()) + " is smaller than the " + std::to_string(w) +
                          "x" + std::to_string(w) + " SSIM window");
  }
  check_finite(pred.values(), "prediction");
  check_finite(truth.values(), "truth");
  const std::vector<double> g = gaussian_window(cfg);
  const std::size_t n = nx * ny;
  std::vector<double> x(pred.values().begin(), pred.values().end());
  std::vector<double> y(truth.values().begin(), truth.values().end());
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t v = 0; v < n; ++v) {
    xx[v] = x[v] * x[v];
    yy[v] = y[v] * y[v];
    xy[v] = x[v] * y[v];
  }
  const std::vector<double> mx = filter_valid(x, nx, ny, g);
  const std::vector<double> my = filter_valid(y, nx, ny, g);
  const std::vector<double> mxx = filter_valid(xx, nx, ny, g);
  const std::vector<double> myy = filter_valid(yy, nx, ny, g);
  const std::vector<double> mxy = filter_valid(xy, nx, ny, g);
  const double c1 = cfg.c1(), c2 = cfg.c2();
  Tensor<double> out({nx - w + 1, ny - w + 1});
  for (std::size_t v = 0; v < out.size(); ++v) {
    const double vx = mxx[v] - mx[v] * mx[v];
    const double vy = myy[v] - my[v] * my[v];
    const double cov = mxy[v] - mx[v] * my[v];
    out[v] = ((2.0 * mx[v] * my[v] + c1) * (2.0 * cov + c2)) /
             ((mx[v] * mx[v] + my[v] * my[v] + c1) * (vx + vy + c2));
  }
  return out;
}

double ssim(const Tensor<double>& pred, const Tensor<double>& truth, const SsimConfig& cfg) {
  const Tensor<double> map = ssim_map(pred, truth, cfg);
  return pairwise_sum(map.values()) / static_cast<double>(map.size());
}

MetricReport evaluate_volume(const dataset::RadioMapVolume& pred, const dataset::RadioMapVolume& truth,
                             const EvalConfig& cfg) {
  if (pred.normalized != truth.normalized) {
    throw ValidationError("cannot compare a normalized volume with a raw one");
  }
  if (pred.data.shape() != truth.data.shape()) {
    throw ValidationError("volume shapes differ: " + shape_to_string(pred.data.shape()) + " vs " +
                          shape_to_string(truth.data.shape()));
  }
  validate(cfg.ssim);
  const std::size_t nx = truth.nx(), ny = truth.ny(), nz = truth.nz(), nv = nx * ny * nz;
  const std::size_t w = cfg.ssim.window, half = w / 2;
  if (cfg.exclude_buildings && truth.building_mask.shape() != Shape{nx, ny, nz}) {
    throw ValidationError("truth volume has no building mask of matching shape");
  }
  const std::span<const std::uint8_t> exclude =
      cfg.exclude_buildings ? truth.building_mask.values() : std::span<const std::uint8_t>{};

  MetricReport report;
  report.mask_note = cfg.exclude_buildings ? "buildings_excluded" : "all";
  report.voxels = nv;
  if (cfg.exclude_buildings) {
    report.voxels = 0;
    for (std::uint8_t b : exclude) report.voxels += b == 0;
  }

  std::array<std::vector<double>, kChannelCount> p_ch, t_ch;
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    p_ch[c].resize(nv);
    t_ch[c].resize(nv);
    for (std::size_t v = 0; v < nv; ++v) {
      p_ch[c][v] = pred.data[v * kChannelCount + c];
      t_ch[c][v] = truth.data[v * kChannelCount + c];
    }
  }

  // SSIM per (channel, slice); NaN marks a slice without scored windows.
  std::vector<double> slice_ssim(kChannelCount * nz, std::numeric_limits<double>::quiet_NaN());
  parallel_for(kChannelCount * nz, cfg.threads, [&](std::size_t task) {
    const std::size_t c = task / nz, k = task % nz;
    Tensor<double> ps({nx, ny}), ts({nx, ny});
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t j = 0; j < ny; ++j) {
        ps(i, j) = p_ch[c][(i * ny + j) * nz + k];
        ts(i, j) = t_ch[c][(i * ny + j) * nz + k];
      }
    }
    const Tensor<double> map = ssim_map(ps, ts, cfg.ssim);
    if (!cfg.exclude_buildings) {
      slice_ssim[task] = pairwise_sum(map.values()) / static_cast<double>(map.size());
      return;
    }
    std::vector<double> kept;
    for (std::size_t p = 0; p < map.dim(0); ++p) {
      for (std::size_t q = 0; q < map.dim(1); ++q) {
        if (exclude[((p + half) * ny + (q + half)) * nz + k] == 0) kept.push_back(map(p, q));
      }
    }
    if (!kept.empty()) slice_ssim[task] = pairwise_sum(kept) / static_cast<double>(kept.size());
  });

  for (std::size_t c = 0; c < kChannelCount; ++c) {
    const ErrorMetrics e = error_metrics(p_ch[c], t_ch[c], cfg.ssim.dynamic_range, exclude);
    std::vector<double> slices;
    for (std::size_t k = 0; k < nz; ++k) {
      if (!std::isnan(slice_ssim[c * nz + k])) slices.push_back(slice_ssim[c * nz + k]);
    }
    if (slices.empty()) throw ValidationError("no SSIM window is centered outside buildings");
    ChannelMetrics& m = report.channels[c];
    m.mse = e.mse;
    m.rmse = e.rmse;
    m.nmse = e.nmse;
    m.psnr = e.psnr;
    m.ssim = pairwise_sum(slices) / static_cast<double>(slices.size());
  }
  for (const char* name : kMetricNames) {
    std::array<double, kChannelCount> v{};
    for (std::size_t c = 0; c < kChannelCount; ++c) v[c] = metric_ref(report.channels[c], name);
    metric_ref(report.aggregate, name) = pairwise_sum(v) / static_cast<double>(kChannelCount);
  }
  return report;
}

double metric_value(const ChannelMetrics& m, const std::string& name) {
  return metric_ref(m, name);
}

void write_report(std::ostream& out, const MetricReport& report) {
  out << "# voxels=" << report.voxels << " mask=" << report.mask_note << "\n";
  auto emit = [&](std::string_view label, const ChannelMetrics& m) {
    for (const char* name : kMetricNames) {
      out << label << ',' << name << ',' << format_double(metric_value(m, name)) << '\n';
    }
  };
  for (Channel c : dataset::kChannels) emit(dataset::channel_name(c), report[c]);
  emit("aggregate", report.aggregate);
}

void write_report(const std::filesystem::path& path, const MetricReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_report(out, report);
  if (!out) throw IoError("failed writing " + path.string());
}

MetricReport read_report(std::istream& in) {
  MetricReport report;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = "report line " + std::to_string(line_no) + ": ";
    std::string_view l = trim(line);
    if (l.empty()) continue;
    try {
      if (l.front() == '#') {
        for (std::string_view tok : split(trim(l.substr(1)), ' ')) {
          if (tok.starts_with("voxels=")) report.voxels = static_cast<std::size_t>(parse_int(tok.substr(7)));
          if (tok.starts_with("mask=")) report.mask_note = std::string(tok.substr(5));
        }
        continue;
      }
      const std::vector<std::string_view> f = split(l, ',');
      if (f.size() != 3) throw ParseError("expected channel,metric,value");
      ChannelMetrics* target = nullptr;
      if (f[0] == "aggregate") target = &report.aggregate;
      for (Channel c : dataset::kChannels) {
        if (f[0] == dataset::channel_name(c)) target = &report.channels[dataset::index(c)];
      }
      if (target == nullptr) throw ParseError("unknown channel '" + std::string(f[0]) + "'");
      metric_ref(*target, f[1]) = parse_double(f[2]);
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    }
  }
  return report;
}

MetricReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_report(in);
}

}  // namespace rm3d::metrics
