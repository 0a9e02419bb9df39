#pragma once

// Open-boundary matrix product operators. Site tensors are ordered
// (left-virtual, right-virtual, physical-out, physical-in).

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "smps/errors.hpp"
#include "smps/linalg.hpp"
#include "smps/mps.hpp"
#include "smps/operators.hpp"
#include "smps/tensor.hpp"

namespace smps {

class MatrixProductOperator {
 public:
  explicit MatrixProductOperator(std::vector<Tensor> sites) : sites_(std::move(sites)) { validate(); }

  std::size_t length() const noexcept { return sites_.size(); }
  std::size_t phys_dim(std::size_t i) const { return sites_.at(i).extent(2); }
  std::size_t bond_dim(std::size_t b) const { return sites_.at(b).extent(1); }
  std::size_t max_bond_dim() const {
    std::size_t m = 1;
    for (const auto& t : sites_) m = std::max(m, t.extent(1));
    return m;
  }
  const Tensor& site(std::size_t i) const { return sites_.at(i); }
  const std::vector<Tensor>& sites() const noexcept { return sites_; }

  /// Operator block (d_out x d_in) at virtual position (wl, wr) of site i.
  Eigen::Map<const RowMajorMatrix> block(std::size_t i, std::size_t wl, std::size_t wr) const {
    const Tensor& t = sites_[i];
    const std::size_t d = t.extent(2);
    return {t.data().data() + (wl * t.extent(1) + wr) * d * d, static_cast<Eigen::Index>(d),
            static_cast<Eigen::Index>(d)};
  }

  /// True when site i is a 1 x 1 identity block.
  bool is_trivial(std::size_t i) const {
    const Tensor& t = sites_[i];
    if (t.extent(0) != 1 || t.extent(1) != 1) return false;
    const auto d = static_cast<Eigen::Index>(t.extent(2));
    return block(i, 0, 0) == Matrix::Identity(d, d);
  }

 private:
  void validate() const {
    if (sites_.empty()) throw ArgumentError("mpo: chain must have at least one site");
    for (std::size_t i = 0; i < sites_.size(); ++i) {
      const Tensor& t = sites_[i];
      if (t.rank() != 4) throw DimensionError("mpo: site tensors must have rank 4");
      if (t.extent(2) != t.extent(3)) throw DimensionError("mpo: physical in/out extents differ");
      if (i > 0 && sites_[i - 1].extent(1) != t.extent(0))
        throw DimensionError("mpo: virtual extents of adjacent sites differ");
    }
    if (sites_.front().extent(0) != 1 || sites_.back().extent(1) != 1)
      throw DimensionError("mpo: open boundary requires outer virtual extents of 1");
  }

  std::vector<Tensor> sites_;
};

/// One summand g * O at `site` of a measured observable A = sum_j g_j O_j.
struct MeasurementTerm {
  std::size_t site = 0;
  Matrix op;
  double coupling = 1.0;
};

/// Observable A plus interaction angle phi (radians) and measurement rate kappa
/// (units of J).
struct MeasurementSpec {
  std::vector<MeasurementTerm> terms;
  double phi = 0.0;
  double kappa = 1.0;

  /// Sites touched by the spec, [first, last]; nullopt for an empty spec.
  std::optional<std::pair<std::size_t, std::size_t>> support() const {
    if (terms.empty()) return std::nullopt;
    auto [lo, hi] = std::minmax_element(terms.begin(), terms.end(),
                                        [](const auto& a, const auto& b) { return a.site < b.site; });
    return std::pair{lo->site, hi->site};
  }

  void validate(std::size_t length) const {
    if (!std::isfinite(phi)) throw ArgumentError("measurement: phi must be finite");
    std::vector<bool> seen(length, false);
    for (const auto& t : terms) {
      if (t.site >= length) throw ArgumentError("measurement: term site out of range");
      if (seen[t.site]) throw ArgumentError("measurement: term sites must be distinct");
      seen[t.site] = true;
      if (!linalg::is_hermitian(t.op, 1e-12)) throw ArgumentError("measurement: term operator must be Hermitian");
      if (!std::isfinite(t.coupling)) throw ArgumentError("measurement: coupling must be finite");
    }
  }

  /// g_j O_j at `site`, or nullopt if the site carries no term.
  std::optional<Matrix> local_term(std::size_t site) const {
    for (const auto& t : terms)
      if (t.site == site) return Matrix(t.coupling * t.op);
    return std::nullopt;
  }
};

namespace detail {

inline Tensor mpo_site(std::size_t dl, std::size_t dr, std::size_t d) { return Tensor({dl, dr, d, d}); }

inline void set_block(Tensor& t, std::size_t wl, std::size_t wr, const Matrix& m) {
  const std::size_t d = t.extent(2);
  Eigen::Map<RowMajorMatrix>(t.data().data() + (wl * t.extent(1) + wr) * d * d, static_cast<Eigen::Index>(d),
                             static_cast<Eigen::Index>(d)) = m;
}

/// MPO of sum_k coeff[k] * prod_j factor(k, j) where factor(k, j) is a d x d
/// operator at site j; sites outside [lo, hi] carry identities.
template <class Factor>
MatrixProductOperator product_sum_mpo(std::size_t length, std::size_t d, std::size_t lo, std::size_t hi,
                                      const std::vector<cplx>& coeff, Factor&& factor) {
  const std::size_t k = coeff.size();
  const Matrix id = ops::identity(d);
  std::vector<Tensor> sites;
  for (std::size_t j = 0; j < length; ++j) {
    if (j < lo || j > hi) {
      Tensor t = mpo_site(1, 1, d);
      set_block(t, 0, 0, id);
      sites.push_back(std::move(t));
      continue;
    }
    if (lo == hi) {
      Matrix sum = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
      for (std::size_t a = 0; a < k; ++a) sum += coeff[a] * factor(a, j);
      Tensor t = mpo_site(1, 1, d);
      set_block(t, 0, 0, sum);
      sites.push_back(std::move(t));
    } else if (j == lo) {
      Tensor t = mpo_site(1, k, d);
      for (std::size_t a = 0; a < k; ++a) set_block(t, 0, a, coeff[a] * factor(a, j));
      sites.push_back(std::move(t));
    } else if (j == hi) {
      Tensor t = mpo_site(k, 1, d);
      for (std::size_t a = 0; a < k; ++a) set_block(t, a, 0, factor(a, j));
      sites.push_back(std::move(t));
    } else {
      Tensor t = mpo_site(k, k, d);
      for (std::size_t a = 0; a < k; ++a) set_block(t, a, a, factor(a, j));
      sites.push_back(std::move(t));
    }
  }
  return MatrixProductOperator(std::move(sites));
}

/// exp(i * theta * g_j O_j) at `site`, identity where the spec has no term.
inline Matrix local_exponential(const MeasurementSpec& spec, std::size_t site, double theta, std::size_t d) {
  if (auto term = spec.local_term(site)) return linalg::exp_i_hermitian(*term, theta);
  return ops::identity(d);
}

}  // namespace detail

inline MatrixProductOperator identity_mpo(std::size_t length, std::size_t d = 2) {
  return detail::product_sum_mpo(length, d, 0, length - 1, {cplx{1.0}},
                                 [d](std::size_t, std::size_t) { return ops::identity(d); });
}

/// H = (J/2) sum_i sigma_i . sigma_{i+1} on an open chain, virtual dimension 5.
inline MatrixProductOperator heisenberg_mpo(std::size_t length, double coupling) {
  if (length < 2) throw ArgumentError("heisenberg_mpo: need at least two sites");
  const Matrix id = ops::identity(), sp = ops::sigma_plus(), sm = ops::sigma_minus(), sz = ops::sigma_z();
  Tensor bulk = detail::mpo_site(5, 5, 2);
  detail::set_block(bulk, 0, 0, id);
  detail::set_block(bulk, 1, 0, sp);
  detail::set_block(bulk, 2, 0, sm);
  detail::set_block(bulk, 3, 0, sz);
  detail::set_block(bulk, 4, 1, coupling * sm);
  detail::set_block(bulk, 4, 2, coupling * sp);
  detail::set_block(bulk, 4, 3, 0.5 * coupling * sz);
  detail::set_block(bulk, 4, 4, id);

  std::vector<Tensor> sites;
  for (std::size_t i = 0; i < length; ++i) {
    const bool first = i == 0, last = i + 1 == length;
    Tensor t = detail::mpo_site(first ? 1 : 5, last ? 1 : 5, 2);
    for (std::size_t wl = 0; wl < t.extent(0); ++wl)
      for (std::size_t wr = 0; wr < t.extent(1); ++wr) {
        const std::size_t bl = first ? 4 : wl;
        const std::size_t br = last ? 0 : wr;
        const auto src = bulk.data().subspan((bl * 5 + br) * 4, 4);
        std::copy(src.begin(), src.end(), t.data().begin() + static_cast<std::ptrdiff_t>((wl * t.extent(1) + wr) * 4));
      }
    sites.push_back(std::move(t));
  }
  return MatrixProductOperator(std::move(sites));
}

/// A = sum_j g_j O_j as an MPO of virtual dimension 2 across the spec's support.
inline MatrixProductOperator observable_mpo(const MeasurementSpec& spec, std::size_t length, std::size_t d = 2) {
  spec.validate(length);
  const auto support = spec.support();
  if (!support) {
    std::vector<Tensor> sites(length, detail::mpo_site(1, 1, d));  // zero operator
    return MatrixProductOperator(std::move(sites));
  }
  const auto [lo, hi] = *support;
  const Matrix id = ops::identity(d);
  const Matrix zero = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  auto term = [&](std::size_t j) { return spec.local_term(j).value_or(zero); };
  std::vector<Tensor> sites;
  for (std::size_t j = 0; j < length; ++j) {
    if (j < lo || j > hi) {
      Tensor t = detail::mpo_site(1, 1, d);
      detail::set_block(t, 0, 0, id);
      sites.push_back(std::move(t));
    } else if (lo == hi) {
      Tensor t = detail::mpo_site(1, 1, d);
      detail::set_block(t, 0, 0, term(j));
      sites.push_back(std::move(t));
    } else if (j == lo) {  // (term, id)
      Tensor t = detail::mpo_site(1, 2, d);
      detail::set_block(t, 0, 0, term(j));
      detail::set_block(t, 0, 1, id);
      sites.push_back(std::move(t));
    } else if (j == hi) {  // (id, term)^T
      Tensor t = detail::mpo_site(2, 1, d);
      detail::set_block(t, 0, 0, id);
      detail::set_block(t, 1, 0, term(j));
      sites.push_back(std::move(t));
    } else {  // [[id, 0], [term, id]]
      Tensor t = detail::mpo_site(2, 2, d);
      detail::set_block(t, 0, 0, id);
      detail::set_block(t, 1, 0, term(j));
      detail::set_block(t, 1, 1, id);
      sites.push_back(std::move(t));
    }
  }
  return MatrixProductOperator(std::move(sites));
}

/// Kraus operator Omega_mu = (exp(-i phi A) + i mu exp(i phi A)) / 2 as a product
/// of two tensor-product strings; virtual dimension 2 on the spec's support and
/// 1 outside it.
inline MatrixProductOperator measurement_mpo(const MeasurementSpec& spec, int mu, std::size_t length,
                                             std::size_t d = 2) {
  if (mu != 1 && mu != -1) throw ArgumentError("measurement_mpo: mu must be +1 or -1");
  spec.validate(length);
  const std::vector<cplx> coeff{0.5, 0.5 * I_unit * static_cast<double>(mu)};
  const auto support = spec.support();
  if (!support) {
    return detail::product_sum_mpo(length, d, 0, 0, {coeff[0] + coeff[1]},
                                   [d](std::size_t, std::size_t) { return ops::identity(d); });
  }
  std::vector<std::vector<Matrix>> factors(2);
  for (std::size_t j = support->first; j <= support->second; ++j) {
    factors[0].push_back(detail::local_exponential(spec, j, -spec.phi, d));
    factors[1].push_back(detail::local_exponential(spec, j, +spec.phi, d));
  }
  const std::size_t lo = support->first;
  return detail::product_sum_mpo(length, d, lo, support->second, coeff,
                                 [&](std::size_t a, std::size_t j) { return factors[a][j - lo]; });
}

/// POVM effect Omega_mu^dag Omega_mu = 1/2 + (i mu / 4)(exp(2 i phi A) - exp(-2 i phi A))
/// built directly as three product strings; virtual dimension 3 on the support.
inline MatrixProductOperator povm_effect_mpo(const MeasurementSpec& spec, int mu, std::size_t length,
                                             std::size_t d = 2) {
  if (mu != 1 && mu != -1) throw ArgumentError("povm_effect_mpo: mu must be +1 or -1");
  spec.validate(length);
  const cplx q = 0.25 * I_unit * static_cast<double>(mu);
  const std::vector<cplx> coeff{0.5, q, -q};
  const auto support = spec.support();
  if (!support) {
    return detail::product_sum_mpo(length, d, 0, 0, {cplx{0.5}},
                                   [d](std::size_t, std::size_t) { return ops::identity(d); });
  }
  std::vector<std::vector<Matrix>> factors(3);
  for (std::size_t j = support->first; j <= support->second; ++j) {
    factors[0].push_back(ops::identity(d));
    factors[1].push_back(detail::local_exponential(spec, j, 2.0 * spec.phi, d));
    factors[2].push_back(detail::local_exponential(spec, j, -2.0 * spec.phi, d));
  }
  const std::size_t lo = support->first;
  return detail::product_sum_mpo(length, d, lo, support->second, coeff,
                                 [&](std::size_t a, std::size_t j) { return factors[a][j - lo]; });
}

/// Dense d^L x d^L matrix of an MPO (site 0 slowest); for small chains.
inline Matrix to_dense(const MatrixProductOperator& op) {
  if (op.length() > 10) throw SizeError("to_dense(mpo): chain longer than 10 sites");
  // acc[w] is the partial operator string ending in virtual index w.
  std::vector<Matrix> acc{Matrix::Ones(1, 1)};
  for (std::size_t i = 0; i < op.length(); ++i) {
    const Tensor& t = op.site(i);
    const auto d = static_cast<Eigen::Index>(t.extent(2));
    std::vector<Matrix> next(t.extent(1), Matrix::Zero(acc[0].rows() * d, acc[0].cols() * d));
    for (std::size_t wl = 0; wl < t.extent(0); ++wl)
      for (std::size_t wr = 0; wr < t.extent(1); ++wr) {
        const Matrix w = op.block(i, wl, wr);
        if (w.cwiseAbs().maxCoeff() == 0.0) continue;
        const Matrix& a = acc[wl];
        for (Eigen::Index r = 0; r < a.rows(); ++r)
          for (Eigen::Index c = 0; c < a.cols(); ++c)
            if (a(r, c) != cplx{}) next[wr].block(r * d, c * d, d, d) += a(r, c) * w;
      }
    acc = std::move(next);
  }
  return acc[0];
}

namespace detail {

/// Exact MPO-MPS product on sites [lo, hi]; the MPO bond extents at lo and hi + 1
/// must be 1.
inline void apply_mpo_sites(const MatrixProductOperator& op, std::vector<Tensor>& sites, std::size_t lo,
                            std::size_t hi) {
  for (std::size_t i = lo; i <= hi; ++i) {
    const Tensor& a = sites[i];
    const Tensor& w = op.site(i);
    const std::size_t d = a.extent(0), dl = a.extent(1), dr = a.extent(2);
    const std::size_t wl = w.extent(0), wr = w.extent(1);
    Tensor out({d, dl * wl, dr * wr});
    for (std::size_t x = 0; x < wl; ++x)
      for (std::size_t y = 0; y < wr; ++y) {
        const auto blk = op.block(i, x, y);
        if (blk.cwiseAbs().maxCoeff() == 0.0) continue;
        for (std::size_t t = 0; t < d; ++t)
          for (std::size_t s = 0; s < d; ++s) {
            const cplx c = blk(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s));
            if (c == cplx{}) continue;
            const auto src = block(a, s);
            auto dst = block(out, t);
            for (std::size_t p = 0; p < dl; ++p)
              for (std::size_t q = 0; q < dr; ++q)
                dst(static_cast<Eigen::Index>(p * wl + x), static_cast<Eigen::Index>(q * wr + y)) +=
                    c * src(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
          }
      }
    sites[i] = std::move(out);
  }
}

inline void check_compatible(const MatrixProductOperator& op, const MatrixProductState& psi, const char* what) {
  if (op.length() != psi.length()) throw DimensionError(std::string(what) + ": length mismatch");
  for (std::size_t i = 0; i < psi.length(); ++i)
    if (op.phys_dim(i) != psi.phys_dim(i)) throw DimensionError(std::string(what) + ": physical dimension mismatch");
}

}  // namespace detail

/// A|psi> with no truncation: bond extents multiply.
inline MatrixProductState apply_mpo_exact(const MatrixProductOperator& op, const MatrixProductState& psi) {
  detail::check_compatible(op, psi, "apply_mpo");
  std::vector<Tensor> sites = psi.sites();
  detail::apply_mpo_sites(op, sites, 0, sites.size() - 1);
  return MatrixProductState(std::move(sites), std::nullopt, psi.log_norm_offset());
}

/// A|psi> compressed to max_bond. Only the window where the MPO differs from a
/// 1 x 1 identity is touched; the result keeps the exact norm of A|psi> and is
/// canonical at the window's right end.
inline Compressed apply_mpo(const MatrixProductOperator& op, const MatrixProductState& psi, std::size_t max_bond,
                            double tol) {
  detail::check_compatible(op, psi, "apply_mpo");
  const std::size_t n = psi.length();
  std::size_t lo = 0;
  while (lo < n && op.is_trivial(lo)) ++lo;
  std::vector<TruncationReport> reports(n > 0 ? n - 1 : 0);
  for (std::size_t b = 0; b + 1 < n; ++b) {
    reports[b].kept = psi.bond_dim(b);
    reports[b].spectrum.clear();
  }
  if (lo == n) return {psi, std::move(reports)};
  std::size_t hi = n - 1;
  while (op.is_trivial(hi)) --hi;

  std::vector<Tensor> sites = psi.sites();
  std::optional<std::size_t> center = psi.canonical_center();
  std::size_t target = center ? std::clamp(*center, lo, hi) : lo;
  detail::move_center(sites, center, target);
  detail::apply_mpo_sites(op, sites, lo, hi);
  // After the exact product the window is no longer orthonormal, but sites outside
  // it still are, which is what truncate_window needs.
  double exact_norm = 0.0;
  auto window = detail::truncate_window(sites, lo, hi, max_bond, tol, &exact_norm);
  for (std::size_t b = lo; b < hi; ++b) reports[b] = std::move(window[b - lo]);
  const double current = sites[hi].norm();
  if (current > 0.0) sites[hi] *= exact_norm / current;
  return {MatrixProductState(std::move(sites), hi, psi.log_norm_offset()), std::move(reports)};
}

/// <bra| A |ket> via left-to-right environment contraction.
inline cplx matrix_element(const MatrixProductState& bra, const MatrixProductOperator& op,
                           const MatrixProductState& ket) {
  detail::check_compatible(op, ket, "matrix_element");
  detail::check_compatible(op, bra, "matrix_element");
  std::vector<Matrix> env{Matrix::Ones(1, 1)};
  for (std::size_t i = 0; i < ket.length(); ++i) {
    const Tensor& x = bra.site(i);
    const Tensor& y = ket.site(i);
    const Tensor& w = op.site(i);
    const std::size_t d = y.extent(0);
    std::vector<Matrix> next(w.extent(1), Matrix::Zero(static_cast<Eigen::Index>(x.extent(2)),
                                                       static_cast<Eigen::Index>(y.extent(2))));
    for (std::size_t wl = 0; wl < w.extent(0); ++wl) {
      std::vector<Matrix> p(d);
      for (std::size_t s = 0; s < d; ++s) p[s] = env[wl] * detail::block(y, s);
      for (std::size_t wr = 0; wr < w.extent(1); ++wr) {
        const auto blk = op.block(i, wl, wr);
        if (blk.cwiseAbs().maxCoeff() == 0.0) continue;
        for (std::size_t t = 0; t < d; ++t) {
          Matrix acc = Matrix::Zero(p[0].rows(), p[0].cols());
          bool any = false;
          for (std::size_t s = 0; s < d; ++s) {
            const cplx c = blk(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s));
            if (c == cplx{}) continue;
            acc += c * p[s];
            any = true;
          }
          if (any) next[wr].noalias() += detail::block(x, t).adjoint() * acc;
        }
      }
    }
    env = std::move(next);
  }
  return env[0](0, 0);
}

/// <psi|A|psi> / <psi|psi>.
inline cplx expectation_mpo(const MatrixProductState& psi, const MatrixProductOperator& op) {
  return matrix_element(psi, op, psi) / norm_squared(psi);
}

}  // namespace smps
