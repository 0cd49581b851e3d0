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

#include "rm3d/dataset/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "rm3d/core/error.hpp"
#include "rm3d/core/png_io.hpp"
#include "rm3d/core/rm3d_format.hpp"
#include "rm3d/core/rng.hpp"
#include "rm3d/core/text.hpp"

namespace rm3d::dataset {

namespace fs = std::filesystem;

namespace {

struct ThresholdRow {
  const char* label;
  Channel channel;
  bool is_max;
  const char* unit;
};

constexpr std::array<ThresholdRow, 8> kThresholdRows = {{
    {"PL Min threshold", Channel::Pathgain, false, "dB"},
    {"PL Max threshold", Channel::Pathgain, true, "dB"},
    {"ToA Min threshold", Channel::ToA, false, "ns"},
    {"ToA Max threshold", Channel::ToA, true, "ns"},
    {"DoA Azi Min threshold", Channel::DoaAzi, false, "Rad"},
    {"DoA Azi Max threshold", Channel::DoaAzi, true, "Rad"},
    {"DoA Ele Min threshold", Channel::DoaEle, false, "Rad"},
    {"DoA Ele Max threshold", Channel::DoaEle, true, "Rad"},
}};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  for (std::string_view line : split(text, '\n')) {
    line = trim(line);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::size_t count_layers(const fs::path& root, const SampleName& name) {
  std::size_t h = 0;
  while (fs::exists(sample_path(root, Modality::PathLoss, h + 1, name))) ++h;
  if (h == 0) throw IoError("no pathLoss slices for sample " + sample_stem(name) + " under " + root.string());
  return h;
}

}  // namespace

ChannelThresholds ChannelThresholds::defaults() {
  ChannelThresholds t;
  t[Channel::Pathgain] = {-169.0, -92.0};
  t[Channel::DoaAzi] = {0.0, 6.3};
  t[Channel::DoaEle] = {0.5, 2.25};
  t[Channel::ToA] = {0.0, 1180.0};
  return t;
}

void validate(const ChannelThresholds& thr) {
  for (Channel c : kChannels) {
    const ChannelRange r = thr[c];
    if (!std::isfinite(r.min) || !std::isfinite(r.max) || !(r.min < r.max)) {
      throw ValidationError("threshold range for " + std::string(channel_name(c)) + " must satisfy min < max");
    }
  }
}

std::string thresholds_text(const ChannelThresholds& thr) {
  std::string out;
  for (const ThresholdRow& row : kThresholdRows) {
    const ChannelRange r = thr[row.channel];
    out += row.label;
    out += ',';
    out += format_decimal(row.is_max ? r.max : r.min);
    out += ',';
    out += row.unit;
    out += '\n';
  }
  return out;
}

void write_thresholds(const fs::path& path, const ChannelThresholds& thr) {
  validate(thr);
  write_text(path, thresholds_text(thr));
}

ChannelThresholds read_thresholds(const fs::path& path) {
  const std::string text = read_text(path);
  ChannelThresholds thr = ChannelThresholds::defaults();
  std::array<bool, kThresholdRows.size()> seen{};
  for (std::string_view line : lines_of(text)) {
    const auto fields = split(line, ',');
    if (fields.size() != 3) throw ParseError(path.string() + ": expected label,value,unit in '" + std::string(line) + "'");
    const auto it = std::find_if(kThresholdRows.begin(), kThresholdRows.end(),
                                 [&](const ThresholdRow& r) { return trim(fields[0]) == r.label; });
    if (it == kThresholdRows.end()) throw ParseError(path.string() + ": unknown threshold '" + std::string(fields[0]) + "'");
    const double v = parse_double(trim(fields[1]));
    ChannelRange& r = thr[it->channel];
    (it->is_max ? r.max : r.min) = v;
    seen[static_cast<std::size_t>(it - kThresholdRows.begin())] = true;
  }
  if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
    throw ParseError(path.string() + ": missing threshold rows");
  }
  validate(thr);
  return thr;
}

double normalize_value(double x, ChannelRange r) {
  if (!std::isfinite(x)) return 0.0;
  return std::clamp((x - r.min) / (r.max - r.min), 0.0, 1.0);
}

RadioMapVolume normalize(const RadioMapVolume& raw, const ChannelThresholds& thr) {
  if (raw.normalized) throw ValidationError("volume is already normalized");
  validate(thr);
  RadioMapVolume out = raw;
  out.normalized = true;
  const std::size_t voxels = raw.building_mask.size();
  for (std::size_t v = 0; v < voxels; ++v) {
    for (Channel c : kChannels) {
      double& x = out.data[v * kChannelCount + index(c)];
      x = raw.building_mask[v] ? 0.0 : normalize_value(x, thr[c]);
    }
  }
  return out;
}

std::uint8_t quantize_value(double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("quantize expects values in [0, 1], got " + format_double(v));
  return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

double dequantize_value(std::uint8_t code) { return static_cast<double>(code) / 255.0; }

Tensor<std::uint8_t> quantize_u8(const RadioMapVolume& volume) {
  if (!volume.normalized) throw ValidationError("quantize_u8 requires a normalized volume");
  Tensor<std::uint8_t> out(volume.data.shape());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = quantize_value(volume.data[n]);
  return out;
}

std::string_view modality_dir(Modality m) {
  switch (m) {
    case Modality::PathLoss:
      return "pathLoss";
    case Modality::DoaAzi:
      return "Doa_Azi";
    case Modality::DoaEle:
      return "Doa_Ele";
    case Modality::ToA:
      return "ToA";
    case Modality::PropagationRay:
      return "propagation_ray";
  }
  return "";
}

Channel modality_channel(Modality m) {
  switch (m) {
    case Modality::PathLoss:
      return Channel::Pathgain;
    case Modality::DoaAzi:
      return Channel::DoaAzi;
    case Modality::DoaEle:
      return Channel::DoaEle;
    case Modality::ToA:
      return Channel::ToA;
    case Modality::PropagationRay:
      break;
  }
  throw ValidationError("propagation_ray holds no image channel");
}

std::string sample_stem(const SampleName& n) {
  return std::to_string(n.bid) + "_" + std::to_string(n.x) + "X_" + std::to_string(n.y) + "Y";
}

std::string sample_filename(const SampleName& n) { return sample_stem(n) + ".png"; }

SampleName parse_sample_filename(std::string_view filename) {
  static const std::regex pattern("^([0-9]+)_([0-9]+)X_([0-9]+)Y\\.png$");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_match(filename.begin(), filename.end(), m, pattern)) {
    throw ParseError("malformed sample file name '" + std::string(filename) + "'");
  }
  auto field = [&](int g) {
    const long long v = parse_int(std::string_view(&*m[g].first, static_cast<std::size_t>(m[g].length())));
    return static_cast<std::uint64_t>(v);
  };
  return {field(1), field(2), field(3)};
}

fs::path sample_path(const fs::path& root, Modality m, std::size_t height, const SampleName& name,
                     std::string_view extension) {
  return root / std::string(modality_dir(m)) / ("h" + std::to_string(height)) /
         (sample_stem(name) + std::string(extension));
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::None:
      return "none";
    case Split::Train:
      return "train";
    case Split::Test:
      return "test";
  }
  return "none";
}

Split parse_split(std::string_view text) {
  if (text == "none") return Split::None;
  if (text == "train") return Split::Train;
  if (text == "test") return Split::Test;
  throw ParseError("unknown split tag '" + std::string(text) + "'");
}

std::size_t DatasetManifest::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [s](const ManifestRecord& r) { return r.split == s; }));
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  std::string out;
  if (manifest.split_seed) out += "# split_seed=" + std::to_string(*manifest.split_seed) + "\n";
  for (const ManifestRecord& r : manifest.records) {
    out += std::to_string(r.name.bid) + "," + std::to_string(r.name.x) + "," + std::to_string(r.name.y) + "," +
           std::string(split_name(r.split)) + "\n";
  }
  write_text(path, out);
}

DatasetManifest read_manifest(const fs::path& path) {
  DatasetManifest manifest;
  const std::string text = read_text(path);
  std::size_t line_no = 0;
  for (std::string_view line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (line.front() == '#') {
      constexpr std::string_view key = "# split_seed=";
      if (line.starts_with(key)) {
        manifest.split_seed = static_cast<std::uint64_t>(parse_int(line.substr(key.size())));
      }
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 4) throw ParseError(where + ": expected BID,x,y,split");
    try {
      const auto num = [](std::string_view s) {
        const long long v = parse_int(trim(s));
        if (v < 0) throw ParseError("negative field");
        return static_cast<std::uint64_t>(v);
      };
      manifest.records.push_back({{num(f[0]), num(f[1]), num(f[2])}, parse_split(trim(f[3]))});
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return manifest;
}

DatasetManifest split_dataset(const DatasetManifest& manifest, double ratio, std::uint64_t seed) {
  const std::size_t n = manifest.records.size();
  if (n < 2) throw ValidationError("split needs at least two records");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("split ratio must lie in (0, 1)");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  // The relative epsilon keeps products like 0.9 * 100 from rounding below 90.
  const auto train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) * (1.0 + 1e-12)));
  DatasetManifest out = manifest;
  out.split_seed = seed;
  for (std::size_t p = 0; p < n; ++p) out.records[order[p]].split = p < train ? Split::Train : Split::Test;
  return out;
}

ManifestRecord export_sample(const fs::path& root, const SampleName& name, const RadioMapVolume& volume,
                             const ExportOptions& options) {
  if (!volume.normalized) throw ValidationError("export_sample requires a normalized volume");
  const std::size_t nx = volume.nx(), ny = volume.ny(), nz = volume.nz();
  if (nx > 0xFFFFFFFFu || ny > 0xFFFFFFFFu) throw ValidationError("slice too large for PNG");
  if (options.ray_records && options.ray_records->size() != nz) {
    throw ValidationError("ray records must hold one entry per height layer");
  }
  const Tensor<std::uint8_t> codes = quantize_u8(volume);

  std::vector<fs::path> targets;
  for (Modality m : kModalities) {
    for (std::size_t h = 1; h <= nz; ++h) {
      if (m == Modality::PropagationRay) {
        if (options.ray_records) targets.push_back(sample_path(root, m, h, name, ".txt"));
      } else {
        targets.push_back(sample_path(root, m, h, name, ".png"));
        targets.push_back(sample_path(root, m, h, name, ".rm3d"));
      }
    }
  }
  if (!options.force) {
    for (const fs::path& p : targets) {
      if (fs::exists(p)) throw IoError("refusing to overwrite " + p.string() + " (use force)");
    }
  }

  std::vector<std::uint8_t> pixels(nx * ny);
  Tensor<float> slice({nx, ny});
  for (Modality m : kModalities) {
    for (std::size_t h = 1; h <= nz; ++h) {
      const fs::path dir = root / std::string(modality_dir(m)) / ("h" + std::to_string(h));
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
      if (m == Modality::PropagationRay) {
        if (options.ray_records) write_text(sample_path(root, m, h, name, ".txt"), (*options.ray_records)[h - 1]);
        continue;
      }
      const std::size_t c = index(modality_channel(m));
      for (std::size_t i = 0; i < nx; ++i) {
        for (std::size_t j = 0; j < ny; ++j) {
          pixels[j * nx + i] = codes(i, j, h - 1, c);
          slice(i, j) = static_cast<float>(volume.data(i, j, h - 1, c));
        }
      }
      write_png_gray8(sample_path(root, m, h, name, ".png"), static_cast<std::uint32_t>(nx),
                      static_cast<std::uint32_t>(ny), pixels);
      save_tensor(sample_path(root, m, h, name, ".rm3d"), slice);
    }
  }
  return {name, Split::None};
}

Tensor<std::uint8_t> import_sample(const fs::path& root, const SampleName& name) {
  const std::size_t nz = count_layers(root, name);
  Tensor<std::uint8_t> codes;
  std::size_t nx = 0, ny = 0;
  for (Modality m : kModalities) {
    if (m == Modality::PropagationRay) continue;
    const std::size_t c = index(modality_channel(m));
    for (std::size_t h = 1; h <= nz; ++h) {
      const fs::path p = sample_path(root, m, h, name);
      const SampleName parsed = parse_sample_filename(p.filename().string());
      if (!(parsed == name)) throw ParseError("file name " + p.string() + " does not match the requested sample");
      GrayImage img;
      try {
        img = read_png_gray8(p);
      } catch (const Error& e) {
        throw ParseError(p.string() + ": " + e.what());
      }
      if (codes.empty()) {
        nx = img.width;
        ny = img.height;
        codes = Tensor<std::uint8_t>({nx, ny, nz, kChannelCount});
      } else if (img.width != nx || img.height != ny) {
        throw ParseError(p.string() + ": slice is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                         ", expected " + std::to_string(nx) + "x" + std::to_string(ny));
      }
      for (std::size_t i = 0; i < nx; ++i) {
        for (std::size_t j = 0; j < ny; ++j) codes(i, j, h - 1, c) = img.pixels[j * nx + i];
      }
    }
  }
  return codes;
}

RadioMapVolume import_sample_values(const fs::path& root, const SampleName& name) {
  const std::size_t nz = count_layers(root, name);
  RadioMapVolume out;
  for (Modality m : kModalities) {
    if (m == Modality::PropagationRay) continue;
    const std::size_t c = index(modality_channel(m));
    for (std::size_t h = 1; h <= nz; ++h) {
      const fs::path p = sample_path(root, m, h, name, ".rm3d");
      Tensor<float> slice;
      try {
        slice = load_tensor<float>(p);
      } catch (const Error& e) {
        throw ParseError(p.string() + ": " + e.what());
      }
      if (slice.rank() != 2) throw ParseError(p.string() + ": expected a 2D slice");
      if (out.data.empty()) out = RadioMapVolume(slice.dim(0), slice.dim(1), nz);
      if (slice.dim(0) != out.nx() || slice.dim(1) != out.ny()) throw ParseError(p.string() + ": slice shape mismatch");
      for (std::size_t i = 0; i < out.nx(); ++i) {
        for (std::size_t j = 0; j < out.ny(); ++j) out.data(i, j, h - 1, c) = slice(i, j);
      }
    }
  }
  out.normalized = true;
  return out;
}

}  // namespace rm3d::dataset
