#pragma once

// Binary MPS snapshot, little-endian:
//
//   char[4]   "SMPS"
//   uint32    format version (1)
//   uint64    L
//   int64     canonical center, -1 if none
//   float64   log-norm offset
//   L times:  uint64 d, uint64 Dl, uint64 Dr, then d*Dl*Dr (re, im) float64 pairs
//             in the site tensor's row-major (phys, left, right) order.
//
// Reading back a written file reproduces every entry bit for bit.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "smps/errors.hpp"
#include "smps/mps.hpp"

namespace smps {

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

inline constexpr std::uint32_t kSnapshotVersion = 1;

namespace detail {

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw ArgumentError("snapshot: truncated input");
  return v;
}

}  // namespace detail

inline void write_snapshot(std::ostream& os, const MatrixProductState& psi) {
  os.write("SMPS", 4);
  detail::put<std::uint32_t>(os, kSnapshotVersion);
  detail::put<std::uint64_t>(os, psi.length());
  const auto c = psi.canonical_center();
  detail::put<std::int64_t>(os, c ? static_cast<std::int64_t>(*c) : -1);
  detail::put<double>(os, psi.log_norm_offset());
  for (const auto& t : psi.sites()) {
    for (std::size_t ax = 0; ax < 3; ++ax) detail::put<std::uint64_t>(os, t.extent(ax));
    for (const cplx& z : t.data()) {
      detail::put<double>(os, z.real());
      detail::put<double>(os, z.imag());
    }
  }
  if (!os) throw ArgumentError("snapshot: write failed");
}

inline MatrixProductState read_snapshot(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "SMPS", 4) != 0) throw ArgumentError("snapshot: bad magic");
  const auto version = detail::get<std::uint32_t>(is);
  if (version != kSnapshotVersion) throw ArgumentError("snapshot: unsupported version " + std::to_string(version));
  const auto length = detail::get<std::uint64_t>(is);
  const auto center = detail::get<std::int64_t>(is);
  const auto offset = detail::get<double>(is);
  if (length == 0 || length > 100000) throw ArgumentError("snapshot: implausible chain length");
  std::vector<Tensor> sites;
  for (std::uint64_t i = 0; i < length; ++i) {
    Tensor::Shape shape(3);
    for (auto& e : shape) {
      e = detail::get<std::uint64_t>(is);
      if (e == 0 || e > 65536) throw ArgumentError("snapshot: implausible extent");
    }
    Tensor t(shape);
    for (cplx& z : t.data()) {
      const double re = detail::get<double>(is);
      const double im = detail::get<double>(is);
      z = {re, im};
    }
    sites.push_back(std::move(t));
  }
  std::optional<std::size_t> c;
  if (center >= 0) c = static_cast<std::size_t>(center);
  return MatrixProductState(std::move(sites), c, offset);
}

inline void save_snapshot(const std::string& path, const MatrixProductState& psi) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("snapshot: cannot open " + path + " for writing");
  write_snapshot(os, psi);
}

inline MatrixProductState load_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("snapshot: cannot open " + path);
  return read_snapshot(is);
}

}  // namespace smps
