// Copyright 2026 The stvqa Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// "STGF" binary container: a text metadata block plus named numeric arrays.
//
//   bytes  "STGF"
//   u16    version (1)
//   u32    metadata length, then that many UTF-8 bytes
//   u32    array count, then per array:
//            u16 name length, name bytes
//            u8  dtype (0 = float32, 1 = float64)
//            u32 rank, u32 dims[rank]
//            payload, row-major
//   u64    FNV-1a hash of every preceding byte
//
// All integers and floats are little-endian.

#ifndef STVQA_PACKED_FILE_HPP_
#define STVQA_PACKED_FILE_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "stvqa/autodiff.hpp"

namespace stvqa {

inline constexpr uint16_t kPackedVersion = 1;

enum class DType : uint8_t { kFloat32 = 0, kFloat64 = 1 };

struct NamedArray {
  std::string name;
  DType dtype = DType::kFloat64;
  std::vector<uint32_t> dims;
  std::vector<double> data;  // float32 arrays are widened on read

  static NamedArray from_matrix(std::string name, const Matrix& m, DType dtype);
  // Rank-2 arrays only; rank 1 is read as a single row.
  Matrix to_matrix() const;
};

struct PackedFile {
  std::string metadata;
  std::vector<NamedArray> arrays;

  const NamedArray* find(std::string_view name) const;
};

std::string encode_packed(const PackedFile& file);
// Throws CorruptFileError on bad magic, version, truncation or checksum.
PackedFile decode_packed(std::string_view bytes);

void write_packed_file(const std::string& path, const PackedFile& file);
PackedFile read_packed_file(const std::string& path);

}  // namespace stvqa

#endif  // STVQA_PACKED_FILE_HPP_
