// Copyright 2026 The petrecon Authors. All Rights Reserved.
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

#include "petrecon/binary_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "petrecon/errors.hpp"

namespace petrecon {

namespace binio {

namespace {

template <typename U>
void write_le(std::ostream& out, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U read_le(std::istream& in) {
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) throw IoError("unexpected end of binary stream");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void write_magic(std::ostream& out, std::string_view magic) { out.write(magic.data(), static_cast<std::streamsize>(magic.size())); }

void expect_magic(std::istream& in, std::string_view magic, const std::string& what) {
  std::string got(magic.size(), '\0');
  if (!in.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic) {
    throw IoError(what + ": bad magic, expected " + std::string(magic));
  }
}

void write_u32(std::ostream& out, std::uint32_t v) { write_le(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { write_le(out, v); }
void write_f64(std::ostream& out, double v) { write_le(out, std::bit_cast<std::uint64_t>(v)); }

void write_string(std::ostream& out, std::string_view s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) { return read_le<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return read_le<std::uint64_t>(in); }
double read_f64(std::istream& in) { return std::bit_cast<double>(read_le<std::uint64_t>(in)); }

std::string read_string(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  if (n > (1u << 20)) throw IoError("string length out of range");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw IoError("unexpected end of binary stream");
  return s;
}

}  // namespace binio

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open " + path);
  return in;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace

void write_img1(const Image2D& image, const std::string& path) {
  auto out = open_out(path);
  binio::write_magic(out, "IMG1");
  binio::write_u32(out, static_cast<std::uint32_t>(image.size));
  binio::write_u32(out, static_cast<std::uint32_t>(image.size));
  for (double v : image.values) binio::write_f64(out, v);
  finish(out, path);
}

Image2D read_img1(const std::string& path, double pixel_size) {
  auto in = open_in(path);
  binio::expect_magic(in, "IMG1", path);
  const std::uint32_t h = binio::read_u32(in);
  const std::uint32_t w = binio::read_u32(in);
  if (h != w || h == 0) throw IoError(path + ": only non-empty square images are supported");
  Image2D img(h, pixel_size);
  for (auto& v : img.values) v = binio::read_f64(in);
  return img;
}

void write_sin1(const Sinogram& sino, const std::string& path) {
  auto out = open_out(path);
  binio::write_magic(out, "SIN1");
  binio::write_u32(out, static_cast<std::uint32_t>(sino.n_angles));
  binio::write_u32(out, static_cast<std::uint32_t>(sino.n_bins));
  for (double v : sino.values) binio::write_f64(out, v);
  finish(out, path);
}

Sinogram read_sin1(const std::string& path) {
  auto in = open_in(path);
  binio::expect_magic(in, "SIN1", path);
  const std::uint32_t a = binio::read_u32(in);
  const std::uint32_t b = binio::read_u32(in);
  Sinogram s(a, b);
  for (auto& v : s.values) v = binio::read_f64(in);
  return s;
}

void write_pgm(const Image2D& image, const std::string& path) {
  auto out = open_out(path);
  const double mx = image.max();
  out << "P5\n" << image.size << ' ' << image.size << "\n255\n";
  for (double v : image.values) {
    const double t = mx > 0.0 ? std::clamp(v / mx, 0.0, 1.0) : 0.0;
    const auto byte = static_cast<unsigned char>(std::lround(t * 255.0));
    out.put(static_cast<char>(byte));
  }
  finish(out, path);
}

void write_param_records(std::ostream& out, const std::vector<NamedArray>& records) {
  binio::write_magic(out, "RSTR");
  binio::write_u32(out, kParamContainerVersion);
  binio::write_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    binio::write_string(out, r.name);
    binio::write_u32(out, static_cast<std::uint32_t>(r.shape.size()));
    for (auto d : r.shape) binio::write_u64(out, d);
    for (double v : r.data) binio::write_f64(out, v);
  }
}

std::vector<NamedArray> read_param_records(std::istream& in) {
  binio::expect_magic(in, "RSTR", "parameter container");
  const std::uint32_t version = binio::read_u32(in);
  if (version != kParamContainerVersion) throw IoError("unsupported parameter container version " + std::to_string(version));
  const std::uint32_t count = binio::read_u32(in);
  std::vector<NamedArray> records(count);
  for (auto& r : records) {
    r.name = binio::read_string(in);
    const std::uint32_t rank = binio::read_u32(in);
    if (rank > 8) throw IoError("parameter rank out of range in record " + r.name);
    r.shape.resize(rank);
    std::uint64_t n = 1;
    for (auto& d : r.shape) {
      d = binio::read_u64(in);
      n *= d;
    }
    if (n > (1ull << 32)) throw IoError("parameter record too large: " + r.name);
    r.data.resize(n);
    for (auto& v : r.data) v = binio::read_f64(in);
  }
  return records;
}

}  // namespace petrecon
