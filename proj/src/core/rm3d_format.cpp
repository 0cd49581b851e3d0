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

#include "rm3d/core/rm3d_format.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace rm3d {
namespace {

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(const unsigned char* p) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
  return value;
}

template <typename T>
struct TypeCode;
template <>
struct TypeCode<std::uint8_t> {
  static constexpr ElementType value = ElementType::U8;
  using Bits = std::uint8_t;
};
template <>
struct TypeCode<std::int32_t> {
  static constexpr ElementType value = ElementType::I32;
  using Bits = std::uint32_t;
};
template <>
struct TypeCode<float> {
  static constexpr ElementType value = ElementType::F32;
  using Bits = std::uint32_t;
};
template <>
struct TypeCode<double> {
  static constexpr ElementType value = ElementType::F64;
  using Bits = std::uint64_t;
};

template <typename T>
void write_typed(std::ostream& out, const Tensor<T>& t) {
  using Bits = typename TypeCode<T>::Bits;
  out.write(kRm3dMagic, 4);
  out.put(static_cast<char>(kRm3dVersion));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) {
    if (d > std::numeric_limits<std::uint32_t>::max()) throw ValidationError("tensor dim exceeds u32");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  out.put(static_cast<char>(TypeCode<T>::value));
  std::vector<char> payload(t.size() * sizeof(T));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Bits bits = std::bit_cast<Bits>(t[i]);
    for (std::size_t b = 0; b < sizeof(T); ++b) {
      payload[i * sizeof(T) + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    }
  }
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("failed writing RM3D record");
}

template <typename T>
Tensor<T> decode_payload(Shape shape, const std::vector<unsigned char>& raw) {
  using Bits = typename TypeCode<T>::Bits;
  std::vector<T> data(shape_size(shape));
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<T>(get_le<Bits>(raw.data() + i * sizeof(T)));
  }
  return Tensor<T>(std::move(shape), std::move(data));
}

void read_exact(std::istream& in, void* dst, std::size_t n, const char* what) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw ParseError(std::string("truncated RM3D record while reading ") + what);
  }
}

}  // namespace

std::size_t element_size(ElementType type) {
  switch (type) {
    case ElementType::U8: return 1;
    case ElementType::I32: return 4;
    case ElementType::F32: return 4;
    case ElementType::F64: return 8;
  }
  throw ParseError("unknown RM3D element type");
}

const char* element_type_name(ElementType type) {
  switch (type) {
    case ElementType::U8: return "u8";
    case ElementType::I32: return "i32";
    case ElementType::F32: return "f32";
    case ElementType::F64: return "f64";
  }
  return "?";
}

void write_record(std::ostream& out, const Tensor<std::uint8_t>& t) { write_typed(out, t); }
void write_record(std::ostream& out, const Tensor<std::int32_t>& t) { write_typed(out, t); }
void write_record(std::ostream& out, const Tensor<float>& t) { write_typed(out, t); }
void write_record(std::ostream& out, const Tensor<double>& t) { write_typed(out, t); }

AnyTensor read_record(std::istream& in) {
  char magic[4];
  read_exact(in, magic, 4, "magic");
  if (std::memcmp(magic, kRm3dMagic, 4) != 0) throw ParseError("bad RM3D magic");
  unsigned char version = 0;
  read_exact(in, &version, 1, "version");
  if (version != kRm3dVersion) throw ParseError("unsupported RM3D version " + std::to_string(version));
  unsigned char word[4];
  read_exact(in, word, 4, "rank");
  const std::uint32_t rank = get_le<std::uint32_t>(word);
  if (rank > 16) throw ParseError("implausible RM3D rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& d : shape) {
    read_exact(in, word, 4, "dims");
    d = get_le<std::uint32_t>(word);
  }
  unsigned char code = 0;
  read_exact(in, &code, 1, "element type");
  if (code > static_cast<unsigned char>(ElementType::F64)) {
    throw ParseError("unknown RM3D element type code " + std::to_string(code));
  }
  const auto type = static_cast<ElementType>(code);
  std::vector<unsigned char> raw(shape_size(shape) * element_size(type));
  read_exact(in, raw.data(), raw.size(), "payload");
  switch (type) {
    case ElementType::U8: return decode_payload<std::uint8_t>(std::move(shape), raw);
    case ElementType::I32: return decode_payload<std::int32_t>(std::move(shape), raw);
    case ElementType::F32: return decode_payload<float>(std::move(shape), raw);
    case ElementType::F64: return decode_payload<double>(std::move(shape), raw);
  }
  throw ParseError("unreachable element type");
}

bool has_more_records(std::istream& in) {
  return in.peek() != std::char_traits<char>::eof();
}

ElementType record_type(const AnyTensor& t) {
  return std::visit([](const auto& x) { return TypeCode<typename std::decay_t<decltype(x)>::value_type>::value; }, t);
}

const Shape& record_shape(const AnyTensor& t) {
  return std::visit([](const auto& x) -> const Shape& { return x.shape(); }, t);
}

Tensor<double> to_f64(const AnyTensor& t) {
  return std::visit(
      [](const auto& x) {
        std::vector<double> data(x.values().begin(), x.values().end());
        return Tensor<double>(x.shape(), std::move(data));
      },
      t);
}

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_record(out, t);
}

template <typename T>
Tensor<T> load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  AnyTensor any;
  try {
    any = read_record(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (record_type(any) != TypeCode<T>::value) {
    throw ParseError(path.string() + ": expected element type " + element_type_name(TypeCode<T>::value) +
                     ", found " + element_type_name(record_type(any)));
  }
  return std::get<Tensor<T>>(std::move(any));
}

std::vector<AnyTensor> load_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<AnyTensor> out;
  try {
    while (has_more_records(in)) out.push_back(read_record(in));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": record " + std::to_string(out.size()) + ": " + e.what());
  }
  return out;
}

void save_records(const std::filesystem::path& path, const std::vector<AnyTensor>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& r : records) std::visit([&](const auto& t) { write_record(out, t); }, r);
}

template void save_tensor(const std::filesystem::path&, const Tensor<std::uint8_t>&);
template void save_tensor(const std::filesystem::path&, const Tensor<std::int32_t>&);
template void save_tensor(const std::filesystem::path&, const Tensor<float>&);
template void save_tensor(const std::filesystem::path&, const Tensor<double>&);
template Tensor<std::uint8_t> load_tensor(const std::filesystem::path&);
template Tensor<std::int32_t> load_tensor(const std::filesystem::path&);
template Tensor<float> load_tensor(const std::filesystem::path&);
template Tensor<double> load_tensor(const std::filesystem::path&);

}  // namespace rm3d
