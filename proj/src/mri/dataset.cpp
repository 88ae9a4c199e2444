#include "nodemr/mri/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "nodemr/mri/operators.hpp"
#include "nodemr/mri/phantom.hpp"
#include "nodemr/tensor/io.hpp"
#include "nodemr/tensor/random.hpp"

namespace nodemr::mri {
namespace {

std::string format_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05d", index);
  return buf;
}

std::filesystem::path file_for(const std::filesystem::path& dir, const char* prefix, const std::string& id) {
  return dir / (std::string(prefix) + id + ".nodt");
}

}  // namespace

Sample synthesize_sample(const GenerateOptions& opts, int index) {
  Sample s;
  s.entry.id = format_id(index);
  s.entry.af = opts.af;
  s.entry.seed = derive_seed(opts.seed, "sample", std::uint64_t(index));
  s.entry.noise_std = opts.noise_std;
  s.image = make_phantom(opts.size, s.entry.seed);
  s.mask = make_mask(opts.size, opts.af, default_center_fraction(opts.af), s.entry.seed);
  s.kspace = forward_E(s.image, s.mask);
  if (opts.noise_std > 0.0) {
    Rng rng(derive_seed(s.entry.seed, "noise"));
    auto k = s.kspace.planes.mutable_data<float>();
    const std::int64_t W = opts.size, plane = opts.size * opts.size;
    for (std::int64_t i = 0; i < 2 * plane; ++i) {
      const double z = rng.normal();  // drawn everywhere so the stream is position-stable
      if (s.mask.columns[std::size_t(i % W)] != 0) k[std::size_t(i)] += float(opts.noise_std * z);
    }
  }
  return s;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory '" + dir.string() + "': " + ec.message());
  std::ostringstream manifest;
  for (const Sample& s : samples) {
    save_tensor(file_for(dir, "img_", s.entry.id), s.image.planes);
    save_tensor(file_for(dir, "mask_", s.entry.id), s.mask.to_tensor());
    save_tensor(file_for(dir, "ksp_", s.entry.id), s.kspace.planes);
    char noise[32];
    std::snprintf(noise, sizeof noise, "%.17g", s.entry.noise_std);
    manifest << s.entry.id << '\t' << s.entry.af << '\t' << s.entry.seed << '\t' << noise << '\n';
  }
  const auto path = dir / "manifest.txt";
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << manifest.str();
  if (!os) throw IoError("write failed: " + path.string());
}

void generate_dataset(const std::filesystem::path& dir, const GenerateOptions& opts) {
  if (opts.count < 1) throw ConfigError("gen-data: count must be positive");
  std::vector<Sample> samples;
  samples.reserve(std::size_t(opts.count));
  for (int i = 0; i < opts.count; ++i) samples.push_back(synthesize_sample(opts, i));
  write_dataset(dir, samples);
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.txt";
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest '" + path.string() + "'");
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    ManifestEntry e;
    if (!(fields >> e.id >> e.af >> e.seed >> e.noise_std)) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected id, af, seed, noise_std");
    }
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw IoError("manifest '" + path.string() + "' lists no samples");
  return entries;
}

Sample load_sample(const std::filesystem::path& dir, const ManifestEntry& entry) {
  Sample s;
  s.entry = entry;
  s.image = ComplexImage(load_tensor(file_for(dir, "img_", entry.id)));
  s.mask = Mask::from_tensor(load_tensor(file_for(dir, "mask_", entry.id)), entry.af);
  s.mask.seed = entry.seed;
  s.kspace = KSpace(load_tensor(file_for(dir, "ksp_", entry.id)));
  if (s.kspace.planes.shape() != s.image.planes.shape() || s.mask.width() != s.image.width()) {
    throw DimensionError("sample " + entry.id + ": image, mask and k-space shapes disagree");
  }
  return s;
}

std::vector<Sample> load_dataset(const std::filesystem::path& dir) {
  std::vector<Sample> samples;
  for (const ManifestEntry& e : read_manifest(dir)) samples.push_back(load_sample(dir, e));
  return samples;
}

}  // namespace nodemr::mri
