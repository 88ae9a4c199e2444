#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nodemr/mri/types.hpp"

// On-disk layout of a phantom dataset directory:
//   img_<id>.nodt   [2,H,W] ground-truth image
//   mask_<id>.nodt  [W] 0/1 column pattern
//   ksp_<id>.nodt   [2,H,W] measured k-space (zero at unsampled columns)
//   manifest.txt    "<id>\t<af>\t<seed>\t<noise_std>" per line

namespace nodemr::mri {

struct ManifestEntry {
  std::string id;
  int af = 4;
  std::uint64_t seed = 0;
  double noise_std = 0.0;
};

struct Sample {
  ManifestEntry entry;
  ComplexImage image;
  Mask mask;
  KSpace kspace;
};

struct GenerateOptions {
  int count = 10;
  std::int64_t size = 64;
  int af = 4;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
};

/// Sample `index` of a dataset generated from `seed`: phantom, mask and noise
/// each draw from their own derived stream.
Sample synthesize_sample(const GenerateOptions& opts, int index);

void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples);
/// Generates and writes `opts.count` samples.
void generate_dataset(const std::filesystem::path& dir, const GenerateOptions& opts);

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir);
Sample load_sample(const std::filesystem::path& dir, const ManifestEntry& entry);
std::vector<Sample> load_dataset(const std::filesystem::path& dir);

}  // namespace nodemr::mri
