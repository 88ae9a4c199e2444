#pragma once

#include <filesystem>
#include <iosfwd>

#include "nodemr/tensor/params.hpp"

// Tensor record, little-endian throughout:
//   "NODT" | version 0x01 | dtype (0x00 f32, 0x01 f64) | rank u8 |
//   rank x u32 extents | row-major payload
// Parameter archive:
//   u32 entry count | per entry: u16 name length, UTF-8 name, tensor record

namespace nodemr {

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

void write_archive(std::ostream& os, const ParamSet& params);
ParamSet read_archive(std::istream& is);

void save_archive(const std::filesystem::path& path, const ParamSet& params);
ParamSet load_archive(const std::filesystem::path& path);

}  // namespace nodemr
