// Copyright 2026 The FaceGCN Authors
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

#ifndef FACEGCN_BINIO_H_
#define FACEGCN_BINIO_H_

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "facegcn/errors.h"

namespace facegcn::binio {

// Little-endian primitives for the binary containers.

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    return std::bit_cast<T>(bytes);
  }
  return v;
}

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  void magic(std::string_view m) { os_.write(m.data(), static_cast<std::streamsize>(m.size())); }
  void u32(std::uint32_t v) { raw(to_little(v)); }
  void u64(std::uint64_t v) { raw(to_little(v)); }
  void f64(double v) { raw(to_little(std::bit_cast<std::uint64_t>(v))); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    magic(s);
  }
  template <typename Range>
  void f64s(const Range& values) {
    for (double v : values) f64(v);
  }

 private:
  template <typename T>
  void raw(T v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  std::size_t offset() const { return offset_; }

  void expect_magic(std::string_view m) {
    const std::size_t at = offset_;
    std::string got(m.size(), '\0');
    read_bytes(got.data(), got.size(), "magic");
    if (got != m) throw ParseError("bad magic, expected \"" + std::string(m) + "\"", at);
  }
  std::uint32_t u32(const char* what) { return to_little(raw<std::uint32_t>(what)); }
  std::uint64_t u64(const char* what) { return to_little(raw<std::uint64_t>(what)); }
  double f64(const char* what) {
    return std::bit_cast<double>(to_little(raw<std::uint64_t>(what)));
  }
  std::string str(const char* what, std::uint32_t max_length = 4096) {
    const std::size_t at = offset_;
    const std::uint32_t n = u32(what);
    if (n > max_length) throw ParseError(std::string(what) + ": implausible length", at);
    std::string s(n, '\0');
    read_bytes(s.data(), n, what);
    return s;
  }
  template <typename Range>
  void f64s(Range& out, const char* what) {
    for (double& v : out) v = f64(what);
  }
  void expect_end() {
    if (is_.peek() != std::char_traits<char>::eof()) {
      throw ParseError("trailing bytes after container", offset_);
    }
  }

 private:
  template <typename T>
  T raw(const char* what) {
    T v;
    read_bytes(reinterpret_cast<char*>(&v), sizeof(T), what);
    return v;
  }
  void read_bytes(char* dst, std::size_t n, const char* what) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      throw ParseError(std::string("truncated input while reading ") + what,
                       offset_ + static_cast<std::size_t>(is_.gcount()));
    }
    offset_ += n;
  }
  std::istream& is_;
  std::size_t offset_ = 0;
};

}  // namespace facegcn::binio

#endif  // FACEGCN_BINIO_H_
