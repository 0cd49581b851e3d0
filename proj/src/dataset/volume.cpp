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

#include "rm3d/dataset/volume.hpp"

#include <string>

#include "rm3d/core/error.hpp"
#include "rm3d/core/rm3d_format.hpp"

namespace rm3d::dataset {

std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::Pathgain:
      return "pathgain";
    case Channel::DoaAzi:
      return "doa_azi";
    case Channel::DoaEle:
      return "doa_ele";
    case Channel::ToA:
      return "toa";
  }
  return "unknown";
}

void save_volume(const std::filesystem::path& path, const RadioMapVolume& volume) {
  if (volume.data.rank() != 4 || volume.data.dim(3) != kChannelCount) {
    throw ValidationError("volume data must have shape [nx, ny, nz, 4]");
  }
  if (volume.building_mask.shape() != Shape{volume.nx(), volume.ny(), volume.nz()}) {
    throw ValidationError("building mask does not match the volume");
  }
  save_records(path, {volume.data, volume.building_mask,
                      Tensor<std::uint8_t>({1}, static_cast<std::uint8_t>(volume.normalized ? 1 : 0))});
}

RadioMapVolume load_volume(const std::filesystem::path& path) {
  const std::vector<AnyTensor> records = load_records(path);
  const std::string where = path.string() + ": ";
  if (records.size() != 3) throw ParseError(where + "volume file needs 3 records, found " + std::to_string(records.size()));
  const auto* data = std::get_if<Tensor<double>>(&records[0]);
  const auto* mask = std::get_if<Tensor<std::uint8_t>>(&records[1]);
  const auto* flag = std::get_if<Tensor<std::uint8_t>>(&records[2]);
  if (data == nullptr || mask == nullptr || flag == nullptr || flag->size() != 1) {
    throw ParseError(where + "unexpected record types in volume file");
  }
  if (data->rank() != 4 || data->dim(3) != kChannelCount ||
      mask->shape() != Shape{data->dim(0), data->dim(1), data->dim(2)}) {
    throw ParseError(where + "volume data " + shape_to_string(data->shape()) + " and mask " +
                     shape_to_string(mask->shape()) + " disagree");
  }
  RadioMapVolume v;
  v.data = *data;
  v.building_mask = *mask;
  v.normalized = (*flag)[0] != 0;
  return v;
}

}  // namespace rm3d::dataset
