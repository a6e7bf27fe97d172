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

#include "stvqa/packed_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "stvqa/errors.hpp"

namespace stvqa {

namespace {

constexpr char kMagic[4] = {'S', 'T', 'G', 'F'};

uint64_t fnv1a(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void put(std::string& out, T v) {
  for (size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string_view take(size_t n) {
    need(n);
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  size_t pos() const { return pos_; }

 private:
  void need(size_t n) const {
    if (pos_ + n > bytes_.size()) throw CorruptFileError("packed file truncated");
  }
  std::string_view bytes_;
  size_t pos_ = 0;
};

}  // namespace

NamedArray NamedArray::from_matrix(std::string name, const Matrix& m, DType dtype) {
  NamedArray a;
  a.name = std::move(name);
  a.dtype = dtype;
  a.dims = {static_cast<uint32_t>(m.rows()), static_cast<uint32_t>(m.cols())};
  a.data.assign(m.data(), m.data() + m.size());
  if (dtype == DType::kFloat32) {
    for (double& v : a.data) v = static_cast<double>(static_cast<float>(v));
  }
  return a;
}

Matrix NamedArray::to_matrix() const {
  Eigen::Index rows = 1, cols = 1;
  if (dims.size() == 1) {
    cols = dims[0];
  } else if (dims.size() == 2) {
    rows = dims[0];
    cols = dims[1];
  } else {
    throw CorruptFileError("array '" + name + "' is not rank 1 or 2");
  }
  Matrix m(rows, cols);
  if (static_cast<size_t>(m.size()) != data.size()) throw CorruptFileError("array '" + name + "' size mismatch");
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

const NamedArray* PackedFile::find(std::string_view name) const {
  for (const NamedArray& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

std::string encode_packed(const PackedFile& file) {
  std::string out(kMagic, sizeof(kMagic));
  put<uint16_t>(out, kPackedVersion);
  put<uint32_t>(out, static_cast<uint32_t>(file.metadata.size()));
  out += file.metadata;
  put<uint32_t>(out, static_cast<uint32_t>(file.arrays.size()));
  for (const NamedArray& a : file.arrays) {
    size_t count = 1;
    for (uint32_t d : a.dims) count *= d;
    if (count != a.data.size()) throw ContractViolation("encode_packed: '" + a.name + "' dims do not match data");
    put<uint16_t>(out, static_cast<uint16_t>(a.name.size()));
    out += a.name;
    put<uint8_t>(out, static_cast<uint8_t>(a.dtype));
    put<uint32_t>(out, static_cast<uint32_t>(a.dims.size()));
    for (uint32_t d : a.dims) put<uint32_t>(out, d);
    for (double v : a.data) {
      if (a.dtype == DType::kFloat32) {
        put<uint32_t>(out, std::bit_cast<uint32_t>(static_cast<float>(v)));
      } else {
        put<uint64_t>(out, std::bit_cast<uint64_t>(v));
      }
    }
  }
  put<uint64_t>(out, fnv1a(out));
  return out;
}

PackedFile decode_packed(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(4) != std::string_view(kMagic, 4)) throw CorruptFileError("packed file: bad magic");
  const auto version = r.get<uint16_t>();
  if (version != kPackedVersion) {
    throw CorruptFileError("packed file: unsupported version " + std::to_string(version));
  }
  PackedFile f;
  f.metadata = std::string(r.take(r.get<uint32_t>()));
  const auto n = r.get<uint32_t>();
  for (uint32_t i = 0; i < n; ++i) {
    NamedArray a;
    a.name = std::string(r.take(r.get<uint16_t>()));
    const auto dtype = r.get<uint8_t>();
    if (dtype > 1) throw CorruptFileError("packed file: unknown dtype in '" + a.name + "'");
    a.dtype = static_cast<DType>(dtype);
    const auto rank = r.get<uint32_t>();
    if (rank > 8) throw CorruptFileError("packed file: implausible rank in '" + a.name + "'");
    uint64_t count = 1;
    for (uint32_t k = 0; k < rank; ++k) {
      a.dims.push_back(r.get<uint32_t>());
      count *= a.dims.back();
    }
    const size_t width = a.dtype == DType::kFloat32 ? 4 : 8;
    if (count * width > bytes.size()) throw CorruptFileError("packed file truncated");
    a.data.reserve(static_cast<size_t>(count));
    for (uint64_t k = 0; k < count; ++k) {
      if (a.dtype == DType::kFloat32) {
        a.data.push_back(static_cast<double>(std::bit_cast<float>(r.get<uint32_t>())));
      } else {
        a.data.push_back(std::bit_cast<double>(r.get<uint64_t>()));
      }
    }
    f.arrays.push_back(std::move(a));
  }
  const size_t body = r.pos();
  const auto stored = r.get<uint64_t>();
  if (r.pos() != bytes.size()) throw CorruptFileError("packed file: trailing bytes");
  if (stored != fnv1a(bytes.substr(0, body))) throw CorruptFileError("packed file: checksum mismatch");
  return f;
}

void write_packed_file(const std::string& path, const PackedFile& file) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  const std::string bytes = encode_packed(file);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

PackedFile read_packed_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_packed(ss.str());
}

}  // namespace stvqa
