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

#ifndef PETRECON_BINARY_IO_HPP
#define PETRECON_BINARY_IO_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "petrecon/image.hpp"

namespace petrecon {

// Little-endian primitive encoding over iostreams. Readers throw IoError on
// truncation.
namespace binio {

void write_magic(std::ostream& out, std::string_view magic);
void expect_magic(std::istream& in, std::string_view magic, const std::string& what);
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
void write_string(std::ostream& out, std::string_view s);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);
std::string read_string(std::istream& in);

}  // namespace binio

// IMG1: "IMG1", u32 height, u32 width, f64 row-major values.
void write_img1(const Image2D& image, const std::string& path);
// pixel_size is not stored in the container; callers supply it.
Image2D read_img1(const std::string& path, double pixel_size = 1.0);

// SIN1: "SIN1", u32 n_angles, u32 n_bins, f64 values.
void write_sin1(const Sinogram& sino, const std::string& path);
Sinogram read_sin1(const std::string& path);

/// 8-bit binary PGM of the image scaled so its maximum maps to 255.
void write_pgm(const Image2D& image, const std::string& path);

struct NamedArray {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> data;
};

inline constexpr std::uint32_t kParamContainerVersion = 1;

// Parameter container: "RSTR", u32 version, u32 record count, then per record
// u32-length-prefixed name, u32 rank, u64 dims, f64 data.
void write_param_records(std::ostream& out, const std::vector<NamedArray>& records);
std::vector<NamedArray> read_param_records(std::istream& in);

}  // namespace petrecon

#endif  // PETRECON_BINARY_IO_HPP
