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

#include <png.h>

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "doctest.h"
#include "rm3d/core/error.hpp"
#include "rm3d/core/png_io.hpp"
#include "rm3d/core/rm3d_format.hpp"
#include "rm3d/core/rng.hpp"
#include "rm3d/dataset/dataset.hpp"
#include "rm3d/dataset/heatmap.hpp"
#include "rm3d/dataset/volume.hpp"
#include "temp_dir.hpp"

using namespace rm3d;
using namespace rm3d::dataset;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RadioMapVolume random_normalized(std::size_t nx, std::size_t ny, std::size_t nz, Rng& rng) {
  RadioMapVolume v(nx, ny, nz);
  v.normalized = true;
  for (std::size_t n = 0; n < nx * ny * nz; ++n) {
    if (rng.uniform() < 0.2) {
      v.building_mask[n] = 1;
      continue;
    }
    for (std::size_t c = 0; c < kChannelCount; ++c) v.data[n * kChannelCount + c] = rng.uniform();
  }
  return v;
}

DatasetManifest manifest_of(std::size_t n) {
  DatasetManifest m;
  for (std::size_t r = 0; r < n; ++r) m.records.push_back({{r, r % 7, r % 11}, Split::None});
  return m;
}

}  // namespace

TEST_CASE("default thresholds are the published table") {
  const ChannelThresholds t = ChannelThresholds::defaults();
  CHECK(t[Channel::Pathgain] == ChannelRange{-169.0, -92.0});
  CHECK(t[Channel::ToA] == ChannelRange{0.0, 1180.0});
  CHECK(t[Channel::DoaAzi] == ChannelRange{0.0, 6.3});
  CHECK(t[Channel::DoaEle] == ChannelRange{0.5, 2.25});
  CHECK(thresholds_text(t) ==
        "PL Min threshold,-169.0,dB\n"
        "PL Max threshold,-92.0,dB\n"
        "ToA Min threshold,0.0,ns\n"
        "ToA Max threshold,1180.0,ns\n"
        "DoA Azi Min threshold,0.0,Rad\n"
        "DoA Azi Max threshold,6.3,Rad\n"
        "DoA Ele Min threshold,0.5,Rad\n"
        "DoA Ele Max threshold,2.25,Rad\n");
}

TEST_CASE("thresholds file round trip and validation") {
  testing::TempDir dir("ds");
  ChannelThresholds t = ChannelThresholds::defaults();
  t[Channel::ToA].max = 2000.5;
  write_thresholds(dir / "thr.csv", t);
  CHECK(read_thresholds(dir / "thr.csv") == t);
  std::ofstream(dir / "bad.csv") << "PL Min threshold,-169.0,dB\n";
  CHECK_THROWS_AS(read_thresholds(dir / "bad.csv"), ParseError);
  t[Channel::DoaEle] = {2.0, 1.0};
  CHECK_THROWS_AS(validate(t), ValidationError);
}

TEST_CASE("normalization endpoints, midpoint and clamps") {
  const ChannelThresholds t = ChannelThresholds::defaults();
  for (Channel c : kChannels) {
    CHECK(normalize_value(t[c].min, t[c]) == 0.0);
    CHECK(normalize_value(t[c].max, t[c]) == 1.0);
  }
  CHECK(normalize_value(-130.5, t[Channel::Pathgain]) == 0.5);
  CHECK(normalize_value(1180.0, t[Channel::ToA]) == 1.0);
  CHECK(normalize_value(2000.0, t[Channel::ToA]) == 1.0);
  CHECK(normalize_value(-200.0, t[Channel::Pathgain]) == 0.0);
  CHECK(normalize_value(kNaN, t[Channel::ToA]) == 0.0);
}

TEST_CASE("normalization is monotone and idempotent on clamped data") {
  const ChannelThresholds t = ChannelThresholds::defaults();
  const ChannelRange unit{0.0, 1.0};
  for (Channel c : kChannels) {
    const ChannelRange r = t[c];
    double prev = -1.0;
    for (int n = 0; n <= 10000; ++n) {
      const double x = r.min - 0.2 * (r.max - r.min) + 1.4 * (r.max - r.min) * n / 10000.0;
      const double v = normalize_value(x, r);
      CHECK(v >= prev);
      CHECK(normalize_value(v, unit) == v);
      prev = v;
    }
  }
}

TEST_CASE("normalize zeroes buildings and unreachable voxels") {
  RadioMapVolume raw(2, 1, 1, kNaN);
  raw.building_mask(1, 0, 0) = 1;
  raw.at(0, 0, 0, Channel::Pathgain) = -130.5;
  raw.at(0, 0, 0, Channel::ToA) = 590.0;
  raw.at(0, 0, 0, Channel::DoaAzi) = 3.15;
  raw.at(0, 0, 0, Channel::DoaEle) = kNaN;
  const RadioMapVolume n = normalize(raw, ChannelThresholds::defaults());
  CHECK(n.normalized);
  CHECK(n.at(0, 0, 0, Channel::Pathgain) == 0.5);
  CHECK(n.at(0, 0, 0, Channel::ToA) == 0.5);
  CHECK(n.at(0, 0, 0, Channel::DoaAzi) == doctest::Approx(0.5));
  CHECK(n.at(0, 0, 0, Channel::DoaEle) == 0.0);
  for (Channel c : kChannels) CHECK(n.at(1, 0, 0, c) == 0.0);
  CHECK(n.building_mask == raw.building_mask);
  CHECK_THROWS_AS(normalize(n, ChannelThresholds::defaults()), ValidationError);
}

TEST_CASE("quantization rule and round trip over all codes") {
  CHECK(quantize_value(0.0) == 0);
  CHECK(quantize_value(1.0) == 255);
  CHECK(quantize_value(0.5) == 128);
  for (int code = 0; code < 256; ++code) {
    const double v = dequantize_value(static_cast<std::uint8_t>(code));
    CHECK(quantize_value(v) == code);
  }
  for (int n = 0; n <= 5100; ++n) {
    const double v = n / 5100.0;
    CHECK(std::abs(dequantize_value(quantize_value(v)) - v) <= 1.0 / 510.0 + 1e-15);
  }
  RadioMapVolume raw(1, 1, 1, 0.3);
  CHECK_THROWS_AS(quantize_u8(raw), ValidationError);
  raw.normalized = true;
  CHECK(quantize_u8(raw).shape() == Shape{1, 1, 1, 4});
  CHECK(quantize_u8(raw)[0] == 77);
}

TEST_CASE("sample filename grammar") {
  CHECK(parse_sample_filename("103_62X_125Y.png") == SampleName{103, 62, 125});
  CHECK(sample_filename({103, 62, 125}) == "103_62X_125Y.png");
  for (const char* bad : {"abc.png", "103_62Y_125X.png", "103_62X_125Y.PNG", "103_62X_125Y.png.bak",
                          "-1_2X_3Y.png", "103_62X_125Y", "103__62X_125Y.png", " 103_62X_125Y.png"}) {
    CHECK_THROWS_AS(parse_sample_filename(bad), ParseError);
  }
  Rng rng(1);
  for (int n = 0; n < 200; ++n) {
    const SampleName s{rng.below(100000), rng.below(1000), rng.below(1000)};
    CHECK(parse_sample_filename(sample_filename(s)) == s);
  }
  CHECK(sample_path("root", Modality::DoaEle, 3, {1, 2, 3}) == fs::path("root/Doa_Ele/h3/1_2X_3Y.png"));
}

TEST_CASE("modality directories") {
  std::vector<std::string> names;
  for (Modality m : kModalities) names.emplace_back(modality_dir(m));
  CHECK(names == std::vector<std::string>{"pathLoss", "Doa_Azi", "Doa_Ele", "ToA", "propagation_ray"});
  CHECK(modality_channel(Modality::PathLoss) == Channel::Pathgain);
  CHECK(modality_channel(Modality::ToA) == Channel::ToA);
}

TEST_CASE("export writes the full tree and imports bit-exactly") {
  testing::TempDir dir("ds");
  Rng rng(2);
  const RadioMapVolume v = random_normalized(9, 7, 20, rng);
  std::vector<std::string> rays(20);
  for (std::size_t k = 0; k < 20; ++k) rays[k] = "0,0," + std::to_string(k) + ",-1,0,\n";
  ExportOptions opts;
  opts.ray_records = &rays;
  const ManifestRecord rec = export_sample(dir.path(), {103, 62, 125}, v, opts);
  CHECK(rec.name == SampleName{103, 62, 125});

  for (Modality m : kModalities) {
    std::set<std::string> sub;
    for (const auto& e : fs::directory_iterator(dir / std::string(modality_dir(m)))) {
      sub.insert(e.path().filename().string());
    }
    CHECK(sub.size() == 20);
    for (int h = 1; h <= 20; ++h) CHECK(sub.count("h" + std::to_string(h)) == 1);
  }
  CHECK(fs::exists(dir / "pathLoss/h1/103_62X_125Y.png"));
  CHECK(fs::exists(dir / "ToA/h20/103_62X_125Y.rm3d"));
  CHECK(read_text(dir / "propagation_ray/h5/103_62X_125Y.txt") == rays[4]);

  const Tensor<std::uint8_t> codes = import_sample(dir.path(), {103, 62, 125});
  CHECK(codes == quantize_u8(v));

  // Image columns run along x, rows along y.
  const GrayImage img = read_png_gray8(dir / "Doa_Azi/h4/103_62X_125Y.png");
  CHECK(img.width == 9);
  CHECK(img.height == 7);
  CHECK(img.pixels[5 * 9 + 2] == quantize_value(v.at(2, 5, 3, Channel::DoaAzi)));

  const RadioMapVolume back = import_sample_values(dir.path(), {103, 62, 125});
  for (std::size_t n = 0; n < v.data.size(); ++n) {
    CHECK(back.data[n] == static_cast<double>(static_cast<float>(v.data[n])));
  }
}

TEST_CASE("export refuses to overwrite unless forced") {
  testing::TempDir dir("ds");
  Rng rng(3);
  const RadioMapVolume v = random_normalized(4, 4, 2, rng);
  export_sample(dir.path(), {1, 2, 3}, v);
  const std::string before = read_text(dir / "ToA/h2/1_2X_3Y.png");
  RadioMapVolume w = random_normalized(4, 4, 2, rng);
  CHECK_THROWS_AS(export_sample(dir.path(), {1, 2, 3}, w), IoError);
  CHECK(read_text(dir / "ToA/h2/1_2X_3Y.png") == before);
  ExportOptions force;
  force.force = true;
  export_sample(dir.path(), {1, 2, 3}, w, force);
  CHECK(import_sample(dir.path(), {1, 2, 3}) == quantize_u8(w));
  RadioMapVolume raw = w;
  raw.normalized = false;
  CHECK_THROWS_AS(export_sample(dir.path(), {9, 9, 9}, raw), ValidationError);
}

TEST_CASE("export is byte-identical across runs") {
  testing::TempDir a("ds"), b("ds");
  Rng r1(4), r2(4);
  export_sample(a.path(), {5, 1, 1}, random_normalized(6, 5, 3, r1));
  export_sample(b.path(), {5, 1, 1}, random_normalized(6, 5, 3, r2));
  for (Modality m : kModalities) {
    if (m == Modality::PropagationRay) continue;
    for (int h = 1; h <= 3; ++h) {
      const auto rel = fs::path(std::string(modality_dir(m))) / ("h" + std::to_string(h));
      CHECK(read_text(a.path() / rel / "5_1X_1Y.png") == read_text(b.path() / rel / "5_1X_1Y.png"));
      CHECK(read_text(a.path() / rel / "5_1X_1Y.rm3d") == read_text(b.path() / rel / "5_1X_1Y.rm3d"));
    }
  }
}

TEST_CASE("import failures name the path") {
  testing::TempDir dir("ds");
  Rng rng(5);
  export_sample(dir.path(), {1, 1, 1}, random_normalized(4, 4, 2, rng));
  CHECK_THROWS_WITH_AS(import_sample(dir.path(), {2, 2, 2}), doctest::Contains("2_2X_2Y"), Error);
  write_png_gray8(dir / "ToA/h2/1_1X_1Y.png", 3, 4, std::vector<std::uint8_t>(12, 0));
  CHECK_THROWS_WITH_AS(import_sample(dir.path(), {1, 1, 1}), doctest::Contains("ToA"), ParseError);
}

TEST_CASE("manifest round trip") {
  testing::TempDir dir("ds");
  DatasetManifest m = split_dataset(manifest_of(12), 0.75, 9);
  write_manifest(dir / "manifest.csv", m);
  CHECK(read_manifest(dir / "manifest.csv") == m);
  CHECK(read_text(dir / "manifest.csv").rfind("# split_seed=9\n", 0) == 0);
  std::ofstream(dir / "bad.csv") << "1,2,3,validation\n";
  CHECK_THROWS_AS(read_manifest(dir / "bad.csv"), ParseError);
}

TEST_CASE("split sizes, partition and determinism") {
  const DatasetManifest s100 = split_dataset(manifest_of(100), 0.9, 1);
  CHECK(s100.count(Split::Train) == 90);
  CHECK(s100.count(Split::Test) == 10);
  const DatasetManifest s7 = split_dataset(manifest_of(7), 0.9, 1);
  CHECK(s7.count(Split::Train) == 6);
  CHECK(s7.count(Split::Test) == 1);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const DatasetManifest s = split_dataset(manifest_of(30), 0.9, seed);
    CHECK(s.count(Split::Train) + s.count(Split::Test) == 30);
    CHECK(s.count(Split::None) == 0);
    CHECK(s.split_seed == seed);
    CHECK(s == split_dataset(manifest_of(30), 0.9, seed));
    for (std::size_t r = 0; r < 30; ++r) CHECK(s.records[r].name == manifest_of(30).records[r].name);
  }
  CHECK_FALSE(split_dataset(manifest_of(30), 0.9, 1) == split_dataset(manifest_of(30), 0.9, 2));
  CHECK_THROWS_AS(split_dataset(manifest_of(1), 0.9, 1), ValidationError);
  CHECK_THROWS_AS(split_dataset(manifest_of(10), 1.5, 1), ValidationError);
}

namespace {

// Decodes any PNG to 8-bit RGB through libpng's simplified API.
std::vector<std::uint8_t> read_rgb(const fs::path& p, std::uint32_t& w, std::uint32_t& h) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  REQUIRE(png_image_begin_read_from_file(&img, p.string().c_str()) != 0);
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(img));
  REQUIRE(png_image_finish_read(&img, nullptr, px.data(), 0, nullptr) != 0);
  w = img.width;
  h = img.height;
  return px;
}

}  // namespace

TEST_CASE("heat colormap hits its stops and interpolates between them") {
  CHECK(heat_color(0) == std::array<std::uint8_t, 3>{0, 0, 0});
  CHECK(heat_color(85) == std::array<std::uint8_t, 3>{128, 0, 160});
  CHECK(heat_color(170) == std::array<std::uint8_t, 3>{255, 128, 0});
  CHECK(heat_color(255) == std::array<std::uint8_t, 3>{255, 255, 224});
  const double stops[4][3] = {{0, 0, 0}, {128, 0, 160}, {255, 128, 0}, {255, 255, 224}};
  for (int code = 0; code < 256; ++code) {
    const int seg = std::min(code / 85, 2);
    const double f = (code - 85.0 * seg) / 85.0;
    const auto rgb = heat_color(static_cast<std::uint8_t>(code));
    for (int c = 0; c < 3; ++c) {
      const double exact = stops[seg][c] + f * (stops[seg + 1][c] - stops[seg][c]);
      CHECK(std::abs(rgb[c] - exact) <= 0.5 + 1e-9);
    }
  }
  // Red never decreases, so brighter codes never look colder.
  for (int code = 1; code < 256; ++code) {
    CHECK(heat_color(static_cast<std::uint8_t>(code))[0] >= heat_color(static_cast<std::uint8_t>(code - 1))[0]);
  }
}

TEST_CASE("heatmap images are pure functions of the codes") {
  rm3d::testing::TempDir dir("heat");
  Tensor<double> values({5, 3});
  for (std::size_t n = 0; n < values.size(); ++n) values[n] = n / 14.0;
  values(0, 0) = -2.0;
  values(1, 0) = 7.0;
  values(2, 0) = kNaN;
  const auto codes = quantize_slice(values);
  CHECK(codes(0, 0) == 0);
  CHECK(codes(1, 0) == 255);
  CHECK(codes(2, 0) == 0);
  CHECK(codes(4, 2) == 255);
  CHECK(codes(3, 1) == quantize_value(values(3, 1)));

  write_heatmap_pgm(dir / "a.pgm", codes);
  const std::string pgm = read_text(dir / "a.pgm");
  const std::string header = "P5\n5 3\n255\n";
  REQUIRE(pgm.size() == header.size() + 15);
  CHECK(pgm.substr(0, header.size()) == header);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t i = 0; i < 5; ++i)
      CHECK(static_cast<std::uint8_t>(pgm[header.size() + j * 5 + i]) == codes(i, j));

  write_heatmap_png(dir / "a.png", codes);
  write_heatmap_png(dir / "b.png", codes);
  CHECK(read_text(dir / "a.png") == read_text(dir / "b.png"));
  std::uint32_t w = 0, h = 0;
  const auto rgb = read_rgb(dir / "a.png", w, h);
  REQUIRE(w == 5);
  REQUIRE(h == 3);
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t i = 0; i < 5; ++i) {
      const auto want = heat_color(codes(i, j));
      for (std::size_t c = 0; c < 3; ++c) CHECK(rgb[(j * 5 + i) * 3 + c] == want[c]);
    }
  }
  CHECK_THROWS_AS(write_heatmap_pgm(dir / "c.pgm", Tensor<std::uint8_t>({2, 2, 2})), ValidationError);
}

TEST_CASE("volume files round trip raw and normalized volumes") {
  rm3d::testing::TempDir dir("vol");
  Rng rng(4);
  RadioMapVolume norm = random_normalized(6, 5, 3, rng);
  save_volume(dir / "n.rm3d", norm);
  CHECK(load_volume(dir / "n.rm3d") == norm);

  RadioMapVolume raw(2, 2, 2, -120.0);
  raw.at(1, 1, 1, Channel::ToA) = kNaN;
  raw.building_mask(0, 1, 0) = 1;
  save_volume(dir / "r.rm3d", raw);
  const RadioMapVolume back = load_volume(dir / "r.rm3d");
  CHECK_FALSE(back.normalized);
  CHECK(back.building_mask == raw.building_mask);
  CHECK(std::isnan(back.at(1, 1, 1, Channel::ToA)));
  CHECK(back.at(0, 0, 0, Channel::Pathgain) == -120.0);

  save_tensor(dir / "bad.rm3d", Tensor<double>({2, 2, 2, 4}));
  CHECK_THROWS_AS(load_volume(dir / "bad.rm3d"), ParseError);
  CHECK_THROWS_AS(load_volume(dir / "missing.rm3d"), Error);
}
