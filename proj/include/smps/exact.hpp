#pragma once

// Exact diagonalization of the open Heisenberg chain, block by block in the
// conserved number of down spins. Intended as a reference for small chains.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include "smps/errors.hpp"
#include "smps/linalg.hpp"

namespace smps {

struct ExactSpectrum {
  /// Sorted eigenvalues: the whole spectrum for L <= 10, otherwise the
  /// spectrum of the sector(s) holding the ground state.
  std::vector<double> energies;
  /// Normalized ground vector in the site-0-slowest basis (bit 1 = spin down).
  Vector ground;
  bool full_spectrum = false;
};

namespace detail {

/// Real symmetric block of (J/2) sum sigma_i . sigma_{i+1} among basis states
/// with `downs` down spins.
inline Eigen::MatrixXd heisenberg_sector(std::size_t length, std::size_t downs, double coupling,
                                         std::vector<std::uint32_t>& states) {
  states.clear();
  const std::uint32_t n = std::uint32_t{1} << length;
  for (std::uint32_t x = 0; x < n; ++x)
    if (static_cast<std::size_t>(std::popcount(x)) == downs) states.push_back(x);
  std::unordered_map<std::uint32_t, Eigen::Index> index;
  for (std::size_t k = 0; k < states.size(); ++k) index[states[k]] = static_cast<Eigen::Index>(k);

  const auto dim = static_cast<Eigen::Index>(states.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    const std::uint32_t x = states[static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i + 1 < length; ++i) {
      const std::uint32_t mi = std::uint32_t{1} << (length - 1 - i);
      const std::uint32_t mj = mi >> 1;
      const bool same = ((x & mi) != 0) == ((x & mj) != 0);
      h(k, k) += 0.5 * coupling * (same ? 1.0 : -1.0);
      if (!same) h(index.at(x ^ mi ^ mj), k) += coupling;  // (J/2)(XX + YY) swaps antiparallel pairs
    }
  }
  return h;
}

}  // namespace detail

inline ExactSpectrum exact_diag(std::size_t length, double coupling) {
  if (length == 0) throw ArgumentError("exact_diag: need at least one site");
  if (length > 14) throw SizeError("exact_diag: chain longer than 14 sites");
  ExactSpectrum out;
  out.full_spectrum = length <= 10;
  std::vector<std::size_t> sectors;
  if (out.full_spectrum) {
    for (std::size_t k = 0; k <= length; ++k) sectors.push_back(k);
  } else {
    sectors.push_back(length / 2);
    if (length % 2 == 1) sectors.push_back(length / 2 + 1);
  }
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::uint32_t> states;
  for (std::size_t downs : sectors) {
    const Eigen::MatrixXd h = detail::heisenberg_sector(length, downs, coupling, states);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) out.energies.push_back(es.eigenvalues()(k));
    // Strict comparison keeps the first sector on ties, so the choice is deterministic.
    if (es.eigenvalues()(0) < best - 1e-12) {
      best = es.eigenvalues()(0);
      out.ground = Vector::Zero(Eigen::Index{1} << length);
      for (std::size_t k = 0; k < states.size(); ++k)
        out.ground(static_cast<Eigen::Index>(states[k])) = es.eigenvectors()(static_cast<Eigen::Index>(k), 0);
    }
  }
  std::sort(out.energies.begin(), out.energies.end());
  return out;
}

}  // namespace smps
