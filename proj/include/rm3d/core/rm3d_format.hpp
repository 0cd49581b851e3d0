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

// RM3D binary tensor records.
//
// One record is laid out as
//
//   offset  size        field
//   0       4           magic "RM3D"
//   4       1           format version (currently 1)
//   5       4           rank r, u32 little-endian
//   9       4*r         dims, u32 little-endian each, outermost first
//   9+4r    1           element type code (see ElementType)
//   10+4r   n*sizeof    payload, row-major, little-endian elements
//
// A file may hold several records back to back (weight archives, scene files).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "rm3d/core/tensor.hpp"

namespace rm3d {

inline constexpr char kRm3dMagic[4] = {'R', 'M', '3', 'D'};
inline constexpr std::uint8_t kRm3dVersion = 1;

enum class ElementType : std::uint8_t { U8 = 0, I32 = 1, F32 = 2, F64 = 3 };

std::size_t element_size(ElementType type);
const char* element_type_name(ElementType type);

using AnyTensor = std::variant<Tensor<std::uint8_t>, Tensor<std::int32_t>, Tensor<float>, Tensor<double>>;

void write_record(std::ostream& out, const Tensor<std::uint8_t>& t);
void write_record(std::ostream& out, const Tensor<std::int32_t>& t);
void write_record(std::ostream& out, const Tensor<float>& t);
void write_record(std::ostream& out, const Tensor<double>& t);

/// Reads one record. Throws ParseError on a bad header or truncated payload.
AnyTensor read_record(std::istream& in);

/// True when at least one more byte is available.
bool has_more_records(std::istream& in);

ElementType record_type(const AnyTensor& t);
const Shape& record_shape(const AnyTensor& t);

/// Widens any element type to double.
Tensor<double> to_f64(const AnyTensor& t);

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& t);

/// Loads a single-record file. The element type must match T exactly.
template <typename T>
Tensor<T> load_tensor(const std::filesystem::path& path);

std::vector<AnyTensor> load_records(const std::filesystem::path& path);
void save_records(const std::filesystem::path& path, const std::vector<AnyTensor>& records);

}  // namespace rm3d
