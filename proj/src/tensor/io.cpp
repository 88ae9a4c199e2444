#include "nodemr/tensor/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace nodemr {
namespace {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

constexpr std::array<char, 4> kMagic = {'N', 'O', 'D', 'T'};
constexpr std::uint8_t kVersion = 0x01;

void put_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), std::streamsize(n));
  if (!os) throw IoError("write failed");
}

void get_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
  is.read(static_cast<char*>(p), std::streamsize(n));
  if (std::size_t(is.gcount()) != n) throw IoError(std::string("truncated tensor data while reading ") + what);
}

template <class T>
void put(std::ostream& os, T v) {
  put_bytes(os, &v, sizeof v);
}

template <class T>
T get(std::istream& is, const char* what) {
  T v{};
  get_bytes(is, &v, sizeof v, what);
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "' for reading");
  return is;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  if (t.rank() > 255) throw IoError("tensor rank exceeds 255");
  put_bytes(os, kMagic.data(), kMagic.size());
  put<std::uint8_t>(os, kVersion);
  put<std::uint8_t>(os, std::uint8_t(t.dtype()));
  put<std::uint8_t>(os, std::uint8_t(t.rank()));
  for (std::int64_t e : t.shape()) {
    if (e < 0 || e > std::int64_t(std::numeric_limits<std::uint32_t>::max())) {
      throw IoError("tensor extent " + std::to_string(e) + " does not fit u32");
    }
    put<std::uint32_t>(os, std::uint32_t(e));
  }
  if (t.dtype() == DType::f32) {
    put_bytes(os, t.data<float>().data(), t.nbytes());
  } else {
    put_bytes(os, t.data<double>().data(), t.nbytes());
  }
}

Tensor read_tensor(std::istream& is) {
  std::array<char, 4> magic{};
  get_bytes(is, magic.data(), magic.size(), "magic");
  if (magic != kMagic) throw IoError("bad magic: not a NODT tensor record");
  const auto version = get<std::uint8_t>(is, "version");
  if (version != kVersion) throw IoError("unsupported tensor version " + std::to_string(version));
  const auto dtype = get<std::uint8_t>(is, "dtype");
  if (dtype > 1) throw IoError("unsupported dtype byte " + std::to_string(dtype));
  const auto rank = get<std::uint8_t>(is, "rank");
  Shape shape(rank);
  for (auto& e : shape) e = get<std::uint32_t>(is, "extent");
  Tensor t(shape, DType(dtype));
  if (t.dtype() == DType::f32) {
    get_bytes(is, t.mutable_data<float>().data(), t.nbytes(), "payload");
  } else {
    get_bytes(is, t.mutable_data<double>().data(), t.nbytes(), "payload");
  }
  return t;
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  auto os = open_out(path);
  write_tensor(os, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  auto is = open_in(path);
  try {
    return read_tensor(is);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_archive(std::ostream& os, const ParamSet& params) {
  put<std::uint32_t>(os, std::uint32_t(params.size()));
  for (const NamedTensor& e : params.entries()) {
    if (e.name.size() > std::numeric_limits<std::uint16_t>::max()) throw IoError("parameter name too long");
    put<std::uint16_t>(os, std::uint16_t(e.name.size()));
    put_bytes(os, e.name.data(), e.name.size());
    write_tensor(os, e.tensor);
  }
}

ParamSet read_archive(std::istream& is) {
  const auto count = get<std::uint32_t>(is, "entry count");
  ParamSet params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint16_t>(is, "name length");
    std::string name(len, '\0');
    get_bytes(is, name.data(), len, "name");
    params.add(std::move(name), read_tensor(is));
  }
  return params;
}

void save_archive(const std::filesystem::path& path, const ParamSet& params) {
  auto os = open_out(path);
  write_archive(os, params);
}

ParamSet load_archive(const std::filesystem::path& path) {
  auto is = open_in(path);
  try {
    return read_archive(is);
  } catch (const Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace nodemr
