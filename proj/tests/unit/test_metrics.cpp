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

#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "rm3d/core/error.hpp"
#include "rm3d/core/rng.hpp"
#include "metrics_oracle.hpp"
#include "rm3d/metrics/metrics.hpp"

using namespace rm3d;
using namespace rm3d::metrics;
using rm3d::dataset::Channel;
using rm3d::dataset::RadioMapVolume;

namespace {

Tensor<double> random_slice(std::size_t nx, std::size_t ny, Rng& rng) {
  Tensor<double> t({nx, ny});
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

RadioMapVolume random_volume(std::size_t nx, std::size_t ny, std::size_t nz, Rng& rng) {
  RadioMapVolume v(nx, ny, nz);
  v.normalized = true;
  for (double& x : v.data.values()) x = rng.uniform();
  return v;
}

}  // namespace

TEST_CASE("pairwise summation") {
  std::vector<double> v(1000);
  for (std::size_t n = 0; n < v.size(); ++n) v[n] = static_cast<double>(n);
  CHECK(pairwise_sum(v) == 499500.0);
  CHECK(pairwise_sum(std::span<const double>{}) == 0.0);
  Rng rng(1);
  std::vector<double> r(777);
  double naive = 0.0;
  for (double& x : r) naive += (x = rng.uniform());
  CHECK(pairwise_sum(r) == doctest::Approx(naive).epsilon(1e-13));
}

TEST_CASE("identical inputs give zero error and infinite PSNR") {
  Rng rng(2);
  const Tensor<double> t = random_slice(5, 4, rng);
  const ErrorMetrics m = error_metrics(t, t);
  CHECK(m.mse == 0.0);
  CHECK(m.rmse == 0.0);
  CHECK(m.nmse == 0.0);
  CHECK(std::isinf(m.psnr));
  CHECK(m.psnr > 0);
}

TEST_CASE("scalar example and PSNR from MSE") {
  const ErrorMetrics m = error_metrics(Tensor<double>({1}, 0.9), Tensor<double>({1}, 1.0));
  CHECK(m.mse == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(m.psnr == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr_from_mse(0.01, 1.0) == 20.0);
  CHECK(psnr_from_mse(0.04, 2.0) == 20.0);
  CHECK(std::isinf(psnr_from_mse(0.0)));
}

TEST_CASE("error metrics match a naive loop") {
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> p(8), t(8);
    for (std::size_t n = 0; n < 8; ++n) p[n] = rng.uniform(), t[n] = rng.uniform();
    double se = 0, te = 0;
    for (std::size_t n = 0; n < 8; ++n) se += (t[n] - p[n]) * (t[n] - p[n]), te += t[n] * t[n];
    const ErrorMetrics m = error_metrics(p, t, 1.0);
    CHECK(std::abs(m.mse - se / 8) <= 1e-12);
    CHECK(std::abs(m.rmse - std::sqrt(se / 8)) <= 1e-12);
    CHECK(std::abs(m.nmse - se / te) <= 1e-12);
    CHECK(std::abs(m.psnr - 10 * std::log10(1.0 / (se / 8))) <= 1e-12);
    CHECK(std::abs(m.rmse - std::sqrt(m.mse)) <= 1e-12);
  }
}

TEST_CASE("NMSE is scale invariant and MSE scales quadratically") {
  Rng rng(4);
  const Tensor<double> p = random_slice(6, 6, rng), t = random_slice(6, 6, rng);
  const ErrorMetrics base = error_metrics(p, t);
  for (double k : {-3.0, 0.5, 7.25}) {
    Tensor<double> ps = p, ts = t;
    for (double& v : ps.values()) v *= k;
    for (double& v : ts.values()) v *= k;
    const ErrorMetrics m = error_metrics(ps, ts);
    CHECK(m.nmse == doctest::Approx(base.nmse).epsilon(1e-12));
    CHECK(m.mse == doctest::Approx(k * k * base.mse).epsilon(1e-12));
  }
}

TEST_CASE("error metric failures") {
  CHECK_THROWS_AS(error_metrics(Tensor<double>({3}, 1.0), Tensor<double>({3}, 0.0)), ValidationError);
  CHECK_THROWS_AS(error_metrics(Tensor<double>({3}), Tensor<double>({4})), ValidationError);
  CHECK_THROWS_AS(error_metrics(Tensor<double>({1}, std::nan("")), Tensor<double>({1}, 1.0)), ValidationError);
  CHECK_THROWS_AS(error_metrics(Tensor<double>({1}), Tensor<double>({1}, 1.0), 0.0), ValidationError);
}

TEST_CASE("exclusion mask skips voxels") {
  const std::vector<double> p = {0.0, 0.5, 1.0}, t = {1.0, 0.5, 0.0};
  const std::vector<std::uint8_t> ex = {0, 0, 1};
  const ErrorMetrics m = error_metrics(p, t, 1.0, ex);
  CHECK(m.mse == 0.5);
  CHECK(m.nmse == doctest::Approx(1.0 / 1.25));
}

TEST_CASE("SSIM of a slice with itself is one") {
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const Tensor<double> t = random_slice(11 + rep, 20 - rep, rng);
    CHECK(std::abs(ssim(t, t) - 1.0) <= 1e-12);
  }
}

TEST_CASE("SSIM of constant slices is the luminance term") {
  SsimConfig cfg;
  REQUIRE(cfg.c1() == doctest::Approx(1e-4).epsilon(1e-12));
  const double expected = (2 * 0.25 * 0.75 + 1e-4) / (0.25 * 0.25 + 0.75 * 0.75 + 1e-4);
  CHECK(expected == doctest::Approx(0.6001).epsilon(1e-4));
  CHECK(std::abs(ssim(Tensor<double>({16, 16}, 0.25), Tensor<double>({16, 16}, 0.75), cfg) - expected) <= 1e-12);
}

TEST_CASE("SSIM of an inverted checkerboard is low") {
  Tensor<double> t({11, 11}), p({11, 11});
  for (std::size_t i = 0; i < 11; ++i)
    for (std::size_t j = 0; j < 11; ++j) {
      t(i, j) = (i + j) % 2 ? 1.0 : 0.0;
      p(i, j) = 1.0 - t(i, j);
    }
  const double s = ssim(p, t);
  CHECK(s < 0.2);
  CHECK(std::abs(s - testing::naive_window_ssim(p, t, 0, 0, {})) <= 1e-12);
}

TEST_CASE("SSIM map matches a direct window oracle") {
  Rng rng(6);
  SsimConfig cfg;
  for (std::size_t w : {3, 7, 11}) {
    cfg.window = w;
    const Tensor<double> x = random_slice(14, 13, rng), y = random_slice(14, 13, rng);
    const Tensor<double> map = ssim_map(x, y, cfg);
    REQUIRE(map.shape() == Shape{14 - w + 1, 13 - w + 1});
    double sum = 0.0;
    for (std::size_t p = 0; p < map.dim(0); ++p)
      for (std::size_t q = 0; q < map.dim(1); ++q) {
        const double ref = testing::naive_window_ssim(x, y, p, q, cfg);
        CHECK(std::abs(map(p, q) - ref) <= 1e-12);
        CHECK(map(p, q) >= -1.0);
        CHECK(map(p, q) <= 1.0);
        sum += ref;
      }
    CHECK(std::abs(ssim(x, y, cfg) - sum / static_cast<double>(map.size())) <= 1e-12);
  }
}

TEST_CASE("SSIM is symmetric") {
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const Tensor<double> x = random_slice(12, 15, rng), y = random_slice(12, 15, rng);
    CHECK(std::abs(ssim(x, y) - ssim(y, x)) <= 1e-12);
  }
}

TEST_CASE("SSIM configuration errors") {
  CHECK_THROWS_AS(ssim(Tensor<double>({10, 20}), Tensor<double>({10, 20})), ValidationError);
  SsimConfig even;
  even.window = 10;
  CHECK_THROWS_AS(ssim(Tensor<double>({20, 20}), Tensor<double>({20, 20}), even), ValidationError);
  SsimConfig zero_k;
  zero_k.k2 = 0.0;
  CHECK_THROWS_AS(validate(zero_k), ValidationError);
  CHECK_THROWS_AS(ssim(Tensor<double>({12, 12}), Tensor<double>({12, 13})), ValidationError);
}

TEST_CASE("evaluate_volume of a volume with itself") {
  Rng rng(8);
  const RadioMapVolume v = random_volume(12, 13, 3, rng);
  const MetricReport r = evaluate_volume(v, v);
  for (Channel c : dataset::kChannels) {
    CHECK(r[c].mse == 0.0);
    CHECK(r[c].rmse == 0.0);
    CHECK(r[c].nmse == 0.0);
    CHECK(std::abs(r[c].ssim - 1.0) <= 1e-12);
    CHECK(std::isinf(r[c].psnr));
  }
  CHECK(r.voxels == 12 * 13 * 3);
}

TEST_CASE("evaluate_volume decomposes into channel and slice calls") {
  Rng rng(9);
  const RadioMapVolume p = random_volume(12, 12, 3, rng), t = random_volume(12, 12, 3, rng);
  const MetricReport r = evaluate_volume(p, t);
  for (Channel c : dataset::kChannels) {
    Tensor<double> pc({12, 12, 3}), tc({12, 12, 3});
    for (std::size_t v = 0; v < pc.size(); ++v) {
      pc[v] = p.data[v * 4 + dataset::index(c)];
      tc[v] = t.data[v * 4 + dataset::index(c)];
    }
    const ErrorMetrics e = error_metrics(pc, tc);
    CHECK(r[c].mse == e.mse);
    CHECK(r[c].rmse == e.rmse);
    CHECK(r[c].nmse == e.nmse);
    CHECK(r[c].psnr == e.psnr);
    std::vector<double> s(3);
    for (std::size_t k = 0; k < 3; ++k) {
      Tensor<double> ps({12, 12}), ts({12, 12});
      for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t j = 0; j < 12; ++j) ps(i, j) = pc(i, j, k), ts(i, j) = tc(i, j, k);
      s[k] = ssim(ps, ts);
    }
    CHECK(r[c].ssim == pairwise_sum(s) / 3.0);
  }
  for (const char* name : {"mse", "rmse", "nmse", "ssim", "psnr"}) {
    double mean = 0.0;
    for (Channel c : dataset::kChannels) mean += metric_value(r[c], name) / 4.0;
    CHECK(std::abs(metric_value(r.aggregate, name) - mean) <= 1e-12);
  }
  EvalConfig threaded;
  threaded.threads = 4;
  const MetricReport r4 = evaluate_volume(p, t, threaded);
  for (Channel c : dataset::kChannels) CHECK(r4[c].ssim == r[c].ssim);
}

TEST_CASE("evaluate_volume with buildings excluded") {
  Rng rng(10);
  RadioMapVolume p = random_volume(12, 12, 2, rng), t = random_volume(12, 12, 2, rng);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 2; ++k) t.building_mask(i, 0, k) = 1;
  EvalConfig cfg;
  cfg.exclude_buildings = true;
  const MetricReport r = evaluate_volume(p, t, cfg);
  CHECK(r.voxels == 12 * 12 * 2 - 8);
  CHECK(r.mask_note == "buildings_excluded");
  std::vector<double> pv, tv;
  for (std::size_t v = 0; v < 12 * 12 * 2; ++v) {
    if (t.building_mask[v]) continue;
    pv.push_back(p.data[v * 4]);
    tv.push_back(t.data[v * 4]);
  }
  CHECK(r[Channel::Pathgain].mse == doctest::Approx(error_metrics(pv, tv).mse).epsilon(1e-14));

  // Window centers (5..6, 5..6) are the only scored ones; blanket them.
  for (std::size_t i = 5; i < 7; ++i)
    for (std::size_t j = 5; j < 7; ++j) t.building_mask(i, j, 0) = t.building_mask(i, j, 1) = 1;
  CHECK_THROWS_AS(evaluate_volume(p, t, cfg), ValidationError);
}

TEST_CASE("evaluate_volume rejects mixed normalization and shapes") {
  Rng rng(11);
  RadioMapVolume p = random_volume(12, 12, 1, rng), t = random_volume(12, 12, 1, rng);
  t.normalized = false;
  CHECK_THROWS_AS(evaluate_volume(p, t), ValidationError);
  CHECK_THROWS_AS(evaluate_volume(p, random_volume(12, 11, 1, rng)), ValidationError);
}

TEST_CASE("report round-trips through text") {
  Rng rng(12);
  const RadioMapVolume p = random_volume(11, 11, 2, rng);
  const MetricReport same = evaluate_volume(p, p);
  const MetricReport diff = evaluate_volume(p, random_volume(11, 11, 2, rng));
  for (const MetricReport* r : {&same, &diff}) {
    std::stringstream s;
    write_report(s, *r);
    const MetricReport back = read_report(s);
    CHECK(back.voxels == r->voxels);
    CHECK(back.mask_note == r->mask_note);
    for (const char* name : {"mse", "rmse", "nmse", "ssim", "psnr"}) {
      CHECK(metric_value(back.aggregate, name) == metric_value(r->aggregate, name));
      for (Channel c : dataset::kChannels) CHECK(metric_value(back[c], name) == metric_value((*r)[c], name));
    }
  }
  std::stringstream s;
  write_report(s, same);
  CHECK(s.str().find("pathgain,psnr,inf\n") != std::string::npos);
  std::stringstream bad("toa,mse,0.1\nfoo,mse,1\n");
  CHECK_THROWS_WITH_AS(read_report(bad), doctest::Contains("line 2"), ParseError);
}
