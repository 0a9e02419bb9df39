#pragma once

// Spin-1/2 single-site operators. Basis state 0 is spin up (sigma_z = +1).

#include <optional>
#include <string>
#include <string_view>

#include "smps/errors.hpp"
#include "smps/linalg.hpp"

namespace smps::ops {

inline Matrix identity(std::size_t d = 2) {
  return Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
}

inline Matrix sigma_x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

inline Matrix sigma_y() {
  Matrix m(2, 2);
  m << 0, -I_unit, I_unit, 0;
  return m;
}

inline Matrix sigma_z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

/// |up><down|
inline Matrix sigma_plus() {
  Matrix m(2, 2);
  m << 0, 1, 0, 0;
  return m;
}

inline Matrix sigma_minus() { return sigma_plus().adjoint(); }

/// Projector onto sigma_z = +1 (up) or -1 (down).
inline Matrix projector_z(int sign) {
  Matrix m = Matrix::Zero(2, 2);
  m(sign > 0 ? 0 : 1, sign > 0 ? 0 : 1) = 1.0;
  return m;
}

/// Looks up "x", "y", "z", "p" (sigma+), "m" (sigma-), "id", also accepting
/// an "s" prefix ("sz", "sx", ...).
inline std::optional<Matrix> by_name(std::string_view name) {
  if (name.size() == 2 && name[0] == 's') name.remove_prefix(1);
  if (name == "x") return sigma_x();
  if (name == "y") return sigma_y();
  if (name == "z") return sigma_z();
  if (name == "p") return sigma_plus();
  if (name == "m") return sigma_minus();
  if (name == "id" || name == "i") return identity();
  return std::nullopt;
}

inline Matrix require(std::string_view name) {
  auto m = by_name(name);
  if (!m) throw ArgumentError("unknown single-site operator '" + std::string(name) + "'");
  return *m;
}

}  // namespace smps::ops
