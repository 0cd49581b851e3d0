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

// Normalization, quantization and the on-disk dataset layout:
//
//   <root>/<modality>/h<h>/<BID>_<x>X_<y>Y.png    8-bit quantized slice
//   <root>/<modality>/h<h>/<BID>_<x>X_<y>Y.rm3d   f32 normalized slice [nx, ny]
//   <root>/propagation_ray/h<h>/<BID>_<x>X_<y>Y.txt  path records
//
// Image columns run along x and rows along y.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rm3d/dataset/volume.hpp"

namespace rm3d::dataset {

struct ChannelRange {
  double min = 0.0;
  double max = 1.0;
  friend bool operator==(const ChannelRange&, const ChannelRange&) = default;
};

/// Global per-channel (min, max) in native units.
struct ChannelThresholds {
  std::array<ChannelRange, kChannelCount> range;

  /// Pathgain (-169, -92) dB, DoA azimuth (0, 6.3) rad, DoA elevation
  /// (0.5, 2.25) rad, ToA (0, 1180) ns.
  static ChannelThresholds defaults();

  ChannelRange& operator[](Channel c) { return range[index(c)]; }
  const ChannelRange& operator[](Channel c) const { return range[index(c)]; }
  friend bool operator==(const ChannelThresholds&, const ChannelThresholds&) = default;
};

void validate(const ChannelThresholds& thr);

/// Eight `label,value,unit` lines in the order PL, ToA, DoA Azi, DoA Ele
/// (min then max), e.g. `PL Min threshold,-169.0,dB`.
std::string thresholds_text(const ChannelThresholds& thr);
void write_thresholds(const std::filesystem::path& path, const ChannelThresholds& thr);
ChannelThresholds read_thresholds(const std::filesystem::path& path);

/// clamp((x - min) / (max - min), 0, 1); non-finite input maps to 0.
double normalize_value(double x, ChannelRange r);

/// Normalizes every channel; building and unreachable voxels become 0.
RadioMapVolume normalize(const RadioMapVolume& raw, const ChannelThresholds& thr);

/// Round half up: floor(v * 255 + 0.5).
std::uint8_t quantize_value(double v);
double dequantize_value(std::uint8_t code);

/// Codes of shape [nx, ny, nz, 4]. Rejects un-normalized volumes.
Tensor<std::uint8_t> quantize_u8(const RadioMapVolume& volume);

enum class Modality { PathLoss, DoaAzi, DoaEle, ToA, PropagationRay };

inline constexpr std::array<Modality, 5> kModalities = {Modality::PathLoss, Modality::DoaAzi, Modality::DoaEle,
                                                        Modality::ToA, Modality::PropagationRay};

/// Directory name: pathLoss, Doa_Azi, Doa_Ele, ToA, propagation_ray.
std::string_view modality_dir(Modality m);
/// Channel stored by an image modality.
Channel modality_channel(Modality m);

struct SampleName {
  std::uint64_t bid = 0;
  std::uint64_t x = 0;
  std::uint64_t y = 0;
  friend bool operator==(const SampleName&, const SampleName&) = default;
};

/// "<bid>_<x>X_<y>Y" without extension.
std::string sample_stem(const SampleName& name);
std::string sample_filename(const SampleName& name);

/// Accepts exactly `^[0-9]+_[0-9]+X_[0-9]+Y\.png$`; throws ParseError otherwise.
SampleName parse_sample_filename(std::string_view filename);

std::filesystem::path sample_path(const std::filesystem::path& root, Modality m, std::size_t height,
                                  const SampleName& name, std::string_view extension = ".png");

enum class Split { None, Train, Test };
std::string_view split_name(Split s);
Split parse_split(std::string_view text);

struct ManifestRecord {
  SampleName name;
  Split split = Split::None;
  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::optional<std::uint64_t> split_seed;

  std::size_t count(Split s) const;
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// One `BID,x,y,split` line per record, preceded by `# split_seed=<s>` when set.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Seeded Fisher-Yates shuffle of record positions; the first
/// floor(ratio * N) go to train and the rest to test.
DatasetManifest split_dataset(const DatasetManifest& manifest, double ratio, std::uint64_t seed);

struct ExportOptions {
  bool force = false;
  /// Optional per-layer propagation_ray text (index k holds layer h = k + 1).
  const std::vector<std::string>* ray_records = nullptr;
};

/// Writes every modality and height layer of a normalized volume. Nothing is
/// written when any target already exists and force is not set.
ManifestRecord export_sample(const std::filesystem::path& root, const SampleName& name, const RadioMapVolume& volume,
                             const ExportOptions& options = {});

/// Reads the PNG slices back into codes of shape [nx, ny, nz, 4]. The layer
/// count is the number of consecutive h1, h2, ... folders holding the sample.
Tensor<std::uint8_t> import_sample(const std::filesystem::path& root, const SampleName& name);

/// Reads the f32 sibling records back as a normalized volume (building mask
/// left empty).
RadioMapVolume import_sample_values(const std::filesystem::path& root, const SampleName& name);

}  // namespace rm3d::dataset
