#pragma once

// Real-time evolution under nearest-neighbour Hamiltonians by second-order
// Trotter splitting: half step on even bonds, full step on odd bonds, half
// step on even bonds. Each two-site gate is followed by an SVD truncation.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "smps/errors.hpp"
#include "smps/linalg.hpp"
#include "smps/mpo.hpp"
#include "smps/mps.hpp"
#include "smps/operators.hpp"

namespace smps {

/// Two-site term h acting on (site, site + 1); basis index s_site * d + s_{site+1}.
struct BondTerm {
  std::size_t site = 0;
  Matrix h;
};

/// (J/2) sigma_i . sigma_{i+1} on every bond of an open chain.
inline std::vector<BondTerm> heisenberg_bonds(std::size_t length, double coupling) {
  const auto kr = [](const Matrix& a, const Matrix& b) {
    Matrix out(4, 4);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) out.block(2 * i, 2 * j, 2, 2) = a(i, j) * b;
    return out;
  };
  const Matrix h = 0.5 * coupling *
                   (kr(ops::sigma_x(), ops::sigma_x()) + kr(ops::sigma_y(), ops::sigma_y()) +
                    kr(ops::sigma_z(), ops::sigma_z()));
  std::vector<BondTerm> terms;
  for (std::size_t i = 0; i + 1 < length; ++i) terms.push_back({i, h});
  return terms;
}

struct Gate {
  std::size_t site = 0;
  Matrix u;
};

/// Precomputed gate layers for one symmetric step of length dt.
struct TrotterGates {
  std::vector<Gate> first;   // even bonds, dt / 2
  std::vector<Gate> middle;  // odd bonds, dt
  std::vector<Gate> last;    // even bonds, dt / 2
  double dt = 0.0;
};

inline TrotterGates make_trotter_gates(const std::vector<BondTerm>& terms, double dt) {
  if (!std::isfinite(dt)) throw ArgumentError("trotter: dt must be finite");
  TrotterGates g;
  g.dt = dt;
  std::vector<bool> seen;
  for (const auto& t : terms) {
    if (t.h.rows() != t.h.cols() || !linalg::is_hermitian(t.h, 1e-12))
      throw ArgumentError("trotter: bond terms must be Hermitian");
    if (seen.size() <= t.site) seen.resize(t.site + 1, false);
    if (seen[t.site]) throw ArgumentError("trotter: at most one term per bond");
    seen[t.site] = true;
    if (t.site % 2 == 0) {
      const Matrix half = linalg::exp_i_hermitian(t.h, -0.5 * dt);
      g.first.push_back({t.site, half});
      g.last.push_back({t.site, half});
    } else {
      g.middle.push_back({t.site, linalg::exp_i_hermitian(t.h, -dt)});
    }
  }
  auto by_site = [](const Gate& a, const Gate& b) { return a.site < b.site; };
  std::sort(g.first.begin(), g.first.end(), by_site);
  std::sort(g.middle.begin(), g.middle.end(), by_site);
  std::sort(g.last.begin(), g.last.end(), by_site);
  return g;
}

namespace detail {

/// Applies u to sites (i, i+1) whose center sits on one of them; the center ends
/// on i+1 when `center_right`, else on i. The kept weight is rescaled to the
/// pre-truncation norm.
inline TruncationReport apply_two_site_gate(std::vector<Tensor>& sites, std::size_t i, const Matrix& u,
                                            bool center_right, std::size_t max_bond, double tol) {
  const Tensor& a = sites[i];
  const Tensor& b = sites[i + 1];
  const std::size_t d1 = a.extent(0), d2 = b.extent(0), dl = a.extent(1), dr = b.extent(2);
  if (static_cast<std::size_t>(u.rows()) != d1 * d2) throw DimensionError("trotter: gate size does not match sites");

  std::vector<Matrix> theta(d1 * d2);
  for (std::size_t s1 = 0; s1 < d1; ++s1)
    for (std::size_t s2 = 0; s2 < d2; ++s2) theta[s1 * d2 + s2] = block(a, s1) * block(b, s2);

  Matrix m(static_cast<Eigen::Index>(d1 * dl), static_cast<Eigen::Index>(d2 * dr));
  for (std::size_t t1 = 0; t1 < d1; ++t1)
    for (std::size_t t2 = 0; t2 < d2; ++t2) {
      Matrix acc = Matrix::Zero(static_cast<Eigen::Index>(dl), static_cast<Eigen::Index>(dr));
      for (std::size_t s = 0; s < d1 * d2; ++s) {
        const cplx c = u(static_cast<Eigen::Index>(t1 * d2 + t2), static_cast<Eigen::Index>(s));
        if (c != cplx{}) acc += c * theta[s];
      }
      m.block(static_cast<Eigen::Index>(t1 * dl), static_cast<Eigen::Index>(t2 * dr), static_cast<Eigen::Index>(dl),
              static_cast<Eigen::Index>(dr)) = acc;
    }

  const Svd f = linalg::svd(m);
  TruncationReport rep = linalg::choose_rank(f.s, max_bond, tol);
  if (rep.degenerate) {
    rep.kept = 1;
    rep.spectrum = {0.0};
    sites[i] = Tensor({d1, dl, 1});
    sites[i + 1] = Tensor({d2, 1, dr});
    return rep;
  }
  const auto k = static_cast<Eigen::Index>(rep.kept);
  const double full = f.s.norm();
  const double kept = f.s.head(k).norm();
  const RealVector s = f.s.head(k) * (full / kept);
  Matrix left = f.u.leftCols(k);
  Matrix right = f.vh.topRows(k);
  if (center_right)
    right = s.cast<cplx>().asDiagonal() * right;
  else
    left = left * s.cast<cplx>().asDiagonal();
  sites[i] = Tensor::from_matrix(left).reshape({d1, dl, rep.kept});
  sites[i + 1] = permute(Tensor::from_matrix(right).reshape({rep.kept, d2, dr}), {1, 0, 2});
  return rep;
}

}  // namespace detail

struct TrotterResult {
  MatrixProductState state;
  double discarded_weight = 0.0;
};

/// One symmetric second-order step with precomputed gates.
inline TrotterResult trotter_step(const MatrixProductState& psi, const TrotterGates& gates, std::size_t max_bond,
                                  double tol) {
  if (max_bond == 0) throw ArgumentError("trotter: max_bond must be positive");
  const std::size_t n = psi.length();
  for (const auto* layer : {&gates.first, &gates.middle})
    for (const auto& g : *layer)
      if (g.site + 1 >= n) throw ArgumentError("trotter: bond term outside the chain");

  std::vector<Tensor> sites = psi.sites();
  std::optional<std::size_t> center = psi.canonical_center();
  double discarded = 0.0;

  // Left-to-right layers keep the center on the right of each gate, right-to-left
  // layers on the left, so consecutive gates only need short center moves.
  auto sweep = [&](const std::vector<Gate>& layer, bool rightward) {
    if (layer.empty()) return;
    const std::size_t count = layer.size();
    for (std::size_t k = 0; k < count; ++k) {
      const Gate& g = layer[rightward ? k : count - 1 - k];
      const std::size_t target = rightward ? g.site : g.site + 1;
      detail::move_center(sites, center, target);
      discarded += detail::apply_two_site_gate(sites, g.site, g.u, rightward, max_bond, tol).discarded_weight;
      center = rightward ? g.site + 1 : g.site;
    }
  };
  sweep(gates.first, true);
  sweep(gates.middle, false);
  sweep(gates.last, true);
  if (!center) {
    detail::move_center(sites, std::nullopt, 0);
    center = 0;
  }
  return {MatrixProductState(std::move(sites), center, psi.log_norm_offset()), discarded};
}

inline TrotterResult trotter_step(const MatrixProductState& psi, const std::vector<BondTerm>& terms, double dt,
                                  std::size_t max_bond, double tol) {
  return trotter_step(psi, make_trotter_gates(terms, dt), max_bond, tol);
}

/// Sum of bond terms as an MPO. Each term is split by an operator Schmidt
/// decomposition h = sum_k a_k (x) b_k; channel R + 1 means "nothing placed yet",
/// channel 0 "term completed", channels 1..R carry an open term.
inline MatrixProductOperator bond_terms_mpo(const std::vector<BondTerm>& terms, std::size_t length) {
  if (length < 2) throw ArgumentError("bond_terms_mpo: need at least two sites");
  const std::size_t d = 2;
  std::vector<Matrix> summed(length - 1, Matrix::Zero(4, 4));
  for (const auto& t : terms) {
    if (t.site + 1 >= length) throw ArgumentError("bond_terms_mpo: bond term outside the chain");
    if (t.h.rows() != 4 || t.h.cols() != 4) throw DimensionError("bond_terms_mpo: bond terms must be 4 x 4");
    summed[t.site] += t.h;
  }
  std::vector<std::vector<std::pair<Matrix, Matrix>>> split(length - 1);
  std::size_t rank = 1;
  for (std::size_t b = 0; b + 1 < length; ++b) {
    Matrix m(4, 4);  // rows (s1 t1), cols (s2 t2)
    for (int s1 = 0; s1 < 2; ++s1)
      for (int s2 = 0; s2 < 2; ++s2)
        for (int t1 = 0; t1 < 2; ++t1)
          for (int t2 = 0; t2 < 2; ++t2) m(s1 * 2 + t1, s2 * 2 + t2) = summed[b](s1 * 2 + s2, t1 * 2 + t2);
    const Svd f = linalg::svd(m);
    for (Eigen::Index k = 0; k < f.s.size(); ++k) {
      if (!(f.s(k) > 1e-14 * f.s(0))) break;
      Matrix a(2, 2), c(2, 2);
      for (int s = 0; s < 2; ++s)
        for (int t = 0; t < 2; ++t) {
          a(s, t) = f.u(s * 2 + t, k) * f.s(k);
          c(s, t) = f.vh(k, s * 2 + t);
        }
      split[b].emplace_back(a, c);
    }
    rank = std::max(rank, split[b].size());
  }
  const std::size_t w = rank + 2, start = rank + 1;
  const Matrix id = ops::identity(d);
  std::vector<Tensor> sites;
  for (std::size_t i = 0; i < length; ++i) {
    const bool first = i == 0, last = i + 1 == length;
    Tensor t = detail::mpo_site(first ? 1 : w, last ? 1 : w, d);
    auto put = [&](std::size_t wl, std::size_t wr, const Matrix& m) {
      if (first && wl != start) return;
      if (last && wr != 0) return;
      detail::set_block(t, first ? 0 : wl, last ? 0 : wr, m);
    };
    put(start, start, id);
    put(0, 0, id);
    if (!last)
      for (std::size_t k = 0; k < split[i].size(); ++k) put(start, 1 + k, split[i][k].first);
    if (!first)
      for (std::size_t k = 0; k < split[i - 1].size(); ++k) put(1 + k, 0, split[i - 1][k].second);
    sites.push_back(std::move(t));
  }
  return MatrixProductOperator(std::move(sites));
}

}  // namespace smps
