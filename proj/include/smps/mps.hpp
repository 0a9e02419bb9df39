#pragma once

// Open-boundary matrix product states.
//
// Site tensors are ordered (physical, left-virtual, right-virtual); the
// first and last virtual extents are 1. Bond b joins site b and site b + 1,
// so a chain of length L has bonds 0 .. L-2.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "smps/errors.hpp"
#include "smps/linalg.hpp"
#include "smps/tensor.hpp"

namespace smps {

class MatrixProductState {
 public:
  /// `center`, when given, asserts that sites left of it are left-orthonormal and
  /// sites right of it right-orthonormal. `log_norm_offset` accumulates log(norm)
  /// factors removed by renormalization; it is bookkeeping only and never enters
  /// a vector-valued operation.
  explicit MatrixProductState(std::vector<Tensor> sites, std::optional<std::size_t> center = std::nullopt,
                              double log_norm_offset = 0.0)
      : sites_(std::move(sites)), center_(center), log_norm_offset_(log_norm_offset) {
    validate();
  }

  std::size_t length() const noexcept { return sites_.size(); }
  std::size_t phys_dim(std::size_t i) const { return sites_.at(i).extent(0); }
  std::size_t left_dim(std::size_t i) const { return sites_.at(i).extent(1); }
  std::size_t right_dim(std::size_t i) const { return sites_.at(i).extent(2); }
  /// Extent of bond b (between site b and b + 1).
  std::size_t bond_dim(std::size_t b) const { return right_dim(b); }
  std::size_t max_bond_dim() const {
    std::size_t m = 1;
    for (const auto& t : sites_) m = std::max(m, t.extent(2));
    return m;
  }

  const Tensor& site(std::size_t i) const { return sites_.at(i); }
  const std::vector<Tensor>& sites() const noexcept { return sites_; }
  std::optional<std::size_t> canonical_center() const noexcept { return center_; }
  double log_norm_offset() const noexcept { return log_norm_offset_; }

  std::vector<Tensor> release_sites() && { return std::move(sites_); }

 private:
  void validate() const {
    if (sites_.empty()) throw ArgumentError("mps: chain must have at least one site");
    for (std::size_t i = 0; i < sites_.size(); ++i) {
      if (sites_[i].rank() != 3) throw DimensionError("mps: site tensors must have rank 3");
      if (i > 0 && sites_[i - 1].extent(2) != sites_[i].extent(1))
        throw DimensionError("mps: virtual extents of adjacent sites differ at bond " +
                             std::to_string(i - 1));
    }
    if (sites_.front().extent(1) != 1 || sites_.back().extent(2) != 1)
      throw DimensionError("mps: open boundary requires outer virtual extents of 1");
    if (center_ && *center_ >= sites_.size()) throw ArgumentError("mps: canonical center out of range");
  }

  std::vector<Tensor> sites_;
  std::optional<std::size_t> center_;
  double log_norm_offset_ = 0.0;
};

struct SchmidtSpectrum {
  std::size_t bond = 0;
  std::vector<double> values;
};

namespace detail {

inline Eigen::Map<const RowMajorMatrix> block(const Tensor& t, std::size_t s) {
  const auto dl = static_cast<Eigen::Index>(t.extent(1));
  const auto dr = static_cast<Eigen::Index>(t.extent(2));
  return {t.data().data() + s * t.extent(1) * t.extent(2), dl, dr};
}

inline Eigen::Map<RowMajorMatrix> block(Tensor& t, std::size_t s) {
  const auto dl = static_cast<Eigen::Index>(t.extent(1));
  const auto dr = static_cast<Eigen::Index>(t.extent(2));
  return {t.data().data() + s * t.extent(1) * t.extent(2), dl, dr};
}

/// Replaces each physical block A_s by left * A_s.
inline Tensor multiply_left(const Matrix& left, const Tensor& t) {
  Tensor out({t.extent(0), static_cast<std::size_t>(left.rows()), t.extent(2)});
  for (std::size_t s = 0; s < t.extent(0); ++s) block(out, s).noalias() = left * block(t, s);
  return out;
}

/// Replaces each physical block A_s by A_s * right.
inline Tensor multiply_right(const Tensor& t, const Matrix& right) {
  Tensor out({t.extent(0), t.extent(1), static_cast<std::size_t>(right.cols())});
  for (std::size_t s = 0; s < t.extent(0); ++s) block(out, s).noalias() = block(t, s) * right;
  return out;
}

/// A'_t = sum_s op(t, s) A_s.
inline Tensor apply_physical(const Matrix& op, const Tensor& t) {
  const std::size_t d = t.extent(0);
  Tensor out({static_cast<std::size_t>(op.rows()), t.extent(1), t.extent(2)});
  for (std::size_t u = 0; u < static_cast<std::size_t>(op.rows()); ++u) {
    auto dst = block(out, u);
    for (std::size_t s = 0; s < d; ++s) {
      const cplx c = op(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(s));
      if (c != cplx{}) dst += c * block(t, s);
    }
  }
  return out;
}

/// Makes site i left-orthonormal, pushing the remainder into site i + 1.
inline void shift_center_right(std::vector<Tensor>& sites, std::size_t i) {
  const Tensor& a = sites[i];
  auto [q, r] = linalg::thin_qr(a.to_matrix(2));
  const std::size_t k = static_cast<std::size_t>(q.cols());
  sites[i] = Tensor::from_matrix(q).reshape({a.extent(0), a.extent(1), k});
  sites[i + 1] = multiply_left(r, sites[i + 1]);
}

/// Makes site i right-orthonormal, pushing the remainder into site i - 1.
inline void shift_center_left(std::vector<Tensor>& sites, std::size_t i) {
  const Tensor& a = sites[i];
  const std::size_t d = a.extent(0), dr = a.extent(2);
  const Matrix m = permute(a, {1, 0, 2}).to_matrix(1);  // Dl x (d Dr)
  auto [q, r] = linalg::thin_qr(m.adjoint());
  const std::size_t k = static_cast<std::size_t>(q.cols());
  const Matrix qh = q.adjoint();
  sites[i] = permute(Tensor::from_matrix(qh).reshape({k, d, dr}), {1, 0, 2});
  sites[i - 1] = multiply_right(sites[i - 1], r.adjoint());
}

inline void move_center(std::vector<Tensor>& sites, std::optional<std::size_t> from, std::size_t to) {
  const std::size_t n = sites.size();
  if (from) {
    for (std::size_t i = *from; i < to; ++i) shift_center_right(sites, i);
    for (std::size_t i = *from; i > to; --i) shift_center_left(sites, i);
    return;
  }
  for (std::size_t i = 0; i < to; ++i) shift_center_right(sites, i);
  for (std::size_t i = n - 1; i > to; --i) shift_center_left(sites, i);
}

/// SVD-truncates bonds lo .. hi-1. Sites left of lo must be left-orthonormal and
/// sites right of hi right-orthonormal; on return the center sits at hi.
/// `norm_before`, if given, receives the state norm prior to truncation.
inline std::vector<TruncationReport> truncate_window(std::vector<Tensor>& sites, std::size_t lo,
                                                     std::size_t hi, std::size_t max_bond, double tol,
                                                     double* norm_before = nullptr) {
  for (std::size_t i = hi; i > lo; --i) shift_center_left(sites, i);
  if (norm_before) *norm_before = sites[lo].norm();
  std::vector<TruncationReport> reports;
  for (std::size_t i = lo; i < hi; ++i) {
    const Tensor& a = sites[i];
    Svd f = linalg::svd(a.to_matrix(2));
    TruncationReport rep = linalg::choose_rank(f.s, max_bond, tol);
    if (rep.degenerate) {
      // Zero state: keep a single zero channel so shapes stay valid.
      rep.kept = 1;
      rep.spectrum = {0.0};
      sites[i] = Tensor({a.extent(0), a.extent(1), 1});
      sites[i + 1] = Tensor({sites[i + 1].extent(0), 1, sites[i + 1].extent(2)});
      reports.push_back(std::move(rep));
      continue;
    }
    const auto k = static_cast<Eigen::Index>(rep.kept);
    sites[i] = Tensor::from_matrix(f.u.leftCols(k)).reshape({a.extent(0), a.extent(1), rep.kept});
    const Matrix sv = f.s.head(k).cast<cplx>().asDiagonal() * f.vh.topRows(k);
    sites[i + 1] = multiply_left(sv, sites[i + 1]);
    reports.push_back(std::move(rep));
  }
  return reports;
}

/// Transfer-matrix contraction of <bra| ops |ket>; `ops[i]` may be null (identity).
inline cplx sandwich(const std::vector<Tensor>& bra, const std::vector<Tensor>& ket,
                     const std::vector<const Matrix*>& ops) {
  Matrix env = Matrix::Ones(1, 1);
  for (std::size_t i = 0; i < ket.size(); ++i) {
    const Tensor k = ops[i] ? apply_physical(*ops[i], ket[i]) : ket[i];
    Matrix next = Matrix::Zero(static_cast<Eigen::Index>(bra[i].extent(2)),
                               static_cast<Eigen::Index>(k.extent(2)));
    for (std::size_t s = 0; s < k.extent(0); ++s) next.noalias() += block(bra[i], s).adjoint() * (env * block(k, s));
    env = std::move(next);
  }
  return env(0, 0);
}

/// Left environments: envs[i] is the contraction of sites < i (bra conjugated).
inline std::vector<Matrix> left_environments(const std::vector<Tensor>& sites) {
  std::vector<Matrix> envs(sites.size() + 1);
  envs[0] = Matrix::Ones(1, 1);
  for (std::size_t i = 0; i < sites.size(); ++i) {
    Matrix next = Matrix::Zero(static_cast<Eigen::Index>(sites[i].extent(2)),
                               static_cast<Eigen::Index>(sites[i].extent(2)));
    for (std::size_t s = 0; s < sites[i].extent(0); ++s)
      next.noalias() += block(sites[i], s).adjoint() * (envs[i] * block(sites[i], s));
    envs[i + 1] = std::move(next);
  }
  return envs;
}

/// Right environments: envs[i] is the contraction of sites >= i, indexed (bra, ket).
inline std::vector<Matrix> right_environments(const std::vector<Tensor>& sites) {
  const std::size_t n = sites.size();
  std::vector<Matrix> envs(n + 1);
  envs[n] = Matrix::Ones(1, 1);
  for (std::size_t i = n; i-- > 0;) {
    Matrix next = Matrix::Zero(static_cast<Eigen::Index>(sites[i].extent(1)),
                               static_cast<Eigen::Index>(sites[i].extent(1)));
    for (std::size_t s = 0; s < sites[i].extent(0); ++s)
      next.noalias() += block(sites[i], s).conjugate() * (envs[i + 1] * block(sites[i], s).transpose());
    envs[i] = std::move(next);
  }
  return envs;
}

inline void check_site(const MatrixProductState& psi, std::size_t i, const char* what) {
  if (i >= psi.length()) throw ArgumentError(std::string(what) + ": site index out of range");
}

inline void check_op(const MatrixProductState& psi, const Matrix& op, std::size_t i, const char* what) {
  const auto d = static_cast<Eigen::Index>(psi.phys_dim(i));
  if (op.rows() != d || op.cols() != d) throw DimensionError(std::string(what) + ": operator must be d x d");
}

}  // namespace detail

/// Product state from normalized local vectors.
inline MatrixProductState product_state(const std::vector<Vector>& local_states) {
  if (local_states.empty()) throw ArgumentError("product_state: need at least one site");
  std::vector<Tensor> sites;
  sites.reserve(local_states.size());
  for (const auto& v : local_states) {
    if (v.size() == 0 || std::abs(v.norm() - 1.0) > 1e-12)
      throw ArgumentError("product_state: local states must be normalized");
    Tensor t({static_cast<std::size_t>(v.size()), 1, 1});
    for (Eigen::Index s = 0; s < v.size(); ++s) t[static_cast<std::size_t>(s)] = v(s);
    sites.push_back(std::move(t));
  }
  return MatrixProductState(std::move(sites), std::size_t{0});
}

inline MatrixProductState product_state(std::size_t length, const Vector& local) {
  return product_state(std::vector<Vector>(length, local));
}

/// Random normalized state with bond extents min(D, d^b, d^(L-b)); for tests and
/// benchmarks.
inline MatrixProductState random_mps(std::size_t length, std::size_t max_bond, std::uint64_t seed,
                                     std::size_t d = 2) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  auto bond = [&](std::size_t b) {  // extent left of site b
    std::size_t left = 1, right = 1;
    for (std::size_t i = 0; i < b && left < max_bond; ++i) left *= d;
    for (std::size_t i = b; i < length && right < max_bond; ++i) right *= d;
    return std::min({max_bond, left, right});
  };
  std::vector<Tensor> sites;
  for (std::size_t i = 0; i < length; ++i) {
    Tensor t({d, bond(i), bond(i + 1)});
    for (auto& x : t.data()) x = cplx(normal(gen), normal(gen));
    sites.push_back(std::move(t));
  }
  detail::move_center(sites, std::nullopt, 0);
  const double n = sites[0].norm();
  sites[0] *= 1.0 / n;
  return MatrixProductState(std::move(sites), std::size_t{0});
}

/// <a|b>.
inline cplx overlap(const MatrixProductState& a, const MatrixProductState& b) {
  if (a.length() != b.length()) throw DimensionError("overlap: length mismatch");
  return detail::sandwich(a.sites(), b.sites(), std::vector<const Matrix*>(a.length(), nullptr));
}

inline double norm_squared(const MatrixProductState& psi) {
  if (auto c = psi.canonical_center()) {
    const double n = psi.site(*c).norm();
    return n * n;
  }
  return overlap(psi, psi).real();
}

inline double norm(const MatrixProductState& psi) { return std::sqrt(norm_squared(psi)); }

/// Dense coefficient vector of length d^L, site 0 slowest.
inline Tensor to_dense(const MatrixProductState& psi) {
  if (psi.length() > 14) throw SizeError("to_dense: chain longer than 14 sites");
  Matrix cur = Matrix::Ones(1, 1);
  for (const auto& a : psi.sites()) {
    const auto d = static_cast<Eigen::Index>(a.extent(0));
    Matrix next(cur.rows() * d, static_cast<Eigen::Index>(a.extent(2)));
    for (Eigen::Index r = 0; r < cur.rows(); ++r)
      for (Eigen::Index s = 0; s < d; ++s)
        next.row(r * d + s).noalias() = cur.row(r) * detail::block(a, static_cast<std::size_t>(s));
    cur = std::move(next);
  }
  Tensor out({static_cast<std::size_t>(cur.rows())});
  for (Eigen::Index r = 0; r < cur.rows(); ++r) out[static_cast<std::size_t>(r)] = cur(r, 0);
  return out;
}

inline Vector to_vector(const MatrixProductState& psi) {
  const Tensor t = to_dense(psi);
  return Eigen::Map<const Vector>(t.data().data(), static_cast<Eigen::Index>(t.size()));
}

/// Mixed-canonical form centered at `center`; the represented vector is unchanged.
inline MatrixProductState canonicalize(const MatrixProductState& psi, std::size_t center) {
  detail::check_site(psi, center, "canonicalize");
  if (psi.canonical_center() == center) return psi;
  std::vector<Tensor> sites = psi.sites();
  detail::move_center(sites, psi.canonical_center(), center);
  return MatrixProductState(std::move(sites), center, psi.log_norm_offset());
}

/// Rescales to unit norm, adding log(norm) to the log-norm offset.
inline MatrixProductState normalize(const MatrixProductState& psi) {
  const double n = norm(psi);
  if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("normalize: state has zero or non-finite norm");
  std::vector<Tensor> sites = psi.sites();
  const std::size_t target = psi.canonical_center().value_or(0);
  sites[target] *= 1.0 / n;
  return MatrixProductState(std::move(sites), psi.canonical_center(), psi.log_norm_offset() + std::log(n));
}

/// Checks left/right orthonormality around the recorded center.
inline bool is_canonical(const MatrixProductState& psi, double tol = 1e-10) {
  const auto c = psi.canonical_center();
  if (!c) return false;
  for (std::size_t i = 0; i < psi.length(); ++i) {
    if (i == *c) continue;
    const Tensor& a = psi.site(i);
    const auto dim = static_cast<Eigen::Index>(i < *c ? a.extent(2) : a.extent(1));
    Matrix g = Matrix::Zero(dim, dim);
    for (std::size_t s = 0; s < a.extent(0); ++s) {
      auto b = detail::block(a, s);
      if (i < *c)
        g.noalias() += b.adjoint() * b;
      else
        g.noalias() += b * b.adjoint();
    }
    if ((g - Matrix::Identity(dim, dim)).cwiseAbs().maxCoeff() > tol) return false;
  }
  return true;
}

/// <psi| prod_k op_k |psi> / <psi|psi> for operators on distinct sites.
inline cplx expectation_product(const MatrixProductState& psi,
                                const std::vector<std::pair<std::size_t, Matrix>>& factors) {
  std::vector<const Matrix*> ops(psi.length(), nullptr);
  for (const auto& [site, op] : factors) {
    detail::check_site(psi, site, "expectation");
    detail::check_op(psi, op, site, "expectation");
    if (ops[site]) throw ArgumentError("expectation: repeated site");
    ops[site] = &op;
  }
  const cplx num = detail::sandwich(psi.sites(), psi.sites(), ops);
  return num / norm_squared(psi);
}

inline cplx expectation_local(const MatrixProductState& psi, const Matrix& op, std::size_t site) {
  return expectation_product(psi, {{site, op}});
}

/// <op_i op_j> for i != j.
inline cplx correlation(const MatrixProductState& psi, const Matrix& op_i, std::size_t i, const Matrix& op_j,
                        std::size_t j) {
  if (i == j) throw ArgumentError("correlation: sites must differ (use expectation_local with the product)");
  return expectation_product(psi, {{i, op_i}, {j, op_j}});
}

/// Reduced density matrix on one site or an ordered pair of sites; the
/// two-site basis index is s_i * d + s_j.
inline Matrix reduced_density_matrix(const MatrixProductState& psi, std::span<const std::size_t> sites) {
  if (sites.empty() || sites.size() > 2)
    throw ArgumentError("reduced_density_matrix: only one or two sites are supported");
  for (auto s : sites) detail::check_site(psi, s, "reduced_density_matrix");
  std::size_t i = sites[0];
  std::size_t j = sites.size() == 2 ? sites[1] : sites[0];
  if (sites.size() == 2 && i == j) throw ArgumentError("reduced_density_matrix: sites must differ");
  const bool swapped = j < i;
  if (swapped) std::swap(i, j);

  const auto& a = psi.sites();
  const auto lefts = detail::left_environments(std::vector<Tensor>(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(i)));
  const auto rights = detail::right_environments(std::vector<Tensor>(a.begin() + static_cast<std::ptrdiff_t>(j) + 1, a.end()));
  const Matrix& left = lefts.back();
  const Matrix& right = rights.front();
  const std::size_t di = a[i].extent(0);

  Matrix rho;
  if (i == j) {
    rho = Matrix::Zero(static_cast<Eigen::Index>(di), static_cast<Eigen::Index>(di));
    for (std::size_t s = 0; s < di; ++s)
      for (std::size_t t = 0; t < di; ++t) {
        const Matrix m = detail::block(a[i], t).adjoint() * left * detail::block(a[i], s);
        rho(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) = (m.array() * right.array()).sum();
      }
  } else {
    const std::size_t dj = a[j].extent(0);
    const auto dim = static_cast<Eigen::Index>(di * dj);
    rho = Matrix::Zero(dim, dim);
    for (std::size_t s1 = 0; s1 < di; ++s1)
      for (std::size_t t1 = 0; t1 < di; ++t1) {
        Matrix m = detail::block(a[i], t1).adjoint() * left * detail::block(a[i], s1);
        for (std::size_t k = i + 1; k < j; ++k) {
          Matrix next = Matrix::Zero(static_cast<Eigen::Index>(a[k].extent(2)),
                                     static_cast<Eigen::Index>(a[k].extent(2)));
          for (std::size_t u = 0; u < a[k].extent(0); ++u)
            next.noalias() += detail::block(a[k], u).adjoint() * m * detail::block(a[k], u);
          m = std::move(next);
        }
        for (std::size_t s2 = 0; s2 < dj; ++s2)
          for (std::size_t t2 = 0; t2 < dj; ++t2) {
            const Matrix e = detail::block(a[j], t2).adjoint() * m * detail::block(a[j], s2);
            rho(static_cast<Eigen::Index>(s1 * dj + s2), static_cast<Eigen::Index>(t1 * dj + t2)) =
                (e.array() * right.array()).sum();
          }
      }
    if (swapped) {
      // Reorder basis to (s_j, s_i) as requested.
      Matrix r(dim, dim);
      auto idx = [&](std::size_t x, std::size_t y) { return static_cast<Eigen::Index>(y * dj + x); };
      for (std::size_t s1 = 0; s1 < di; ++s1)
        for (std::size_t s2 = 0; s2 < dj; ++s2)
          for (std::size_t t1 = 0; t1 < di; ++t1)
            for (std::size_t t2 = 0; t2 < dj; ++t2)
              r(static_cast<Eigen::Index>(s2 * di + s1), static_cast<Eigen::Index>(t2 * di + t1)) =
                  rho(idx(s2, s1), idx(t2, t1));
      rho = std::move(r);
    }
  }
  const cplx tr = rho.trace();
  return rho / tr.real();
}

inline Matrix reduced_density_matrix(const MatrixProductState& psi, std::initializer_list<std::size_t> sites) {
  return reduced_density_matrix(psi, std::span<const std::size_t>(sites.begin(), sites.size()));
}

/// Schmidt coefficients across bond b (between sites b and b + 1), normalized.
inline SchmidtSpectrum schmidt_spectrum(const MatrixProductState& psi, std::size_t bond) {
  if (bond + 1 >= psi.length()) throw ArgumentError("schmidt_spectrum: bond index out of range");
  const MatrixProductState c = canonicalize(psi, bond);
  const RealVector s = linalg::svd(c.site(bond).to_matrix(2)).s;
  const double total = s.norm();
  if (!(total > 0.0)) throw NumericalError("schmidt_spectrum: zero state");
  SchmidtSpectrum out{bond, {}};
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (s(k) > linalg::kRelativeZero * s(0)) out.values.push_back(s(k) / total);
  return out;
}

/// Von Neumann entropy (natural log) of the bipartition at `bond`.
inline double entanglement_entropy(const MatrixProductState& psi, std::size_t bond) {
  double h = 0.0;
  for (double v : schmidt_spectrum(psi, bond).values) {
    const double p = v * v;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

/// Applies a d x d operator at one site. Bond extents never change; the
/// canonical center survives when the operator acts on it or is unitary.
inline MatrixProductState apply_local(const MatrixProductState& psi, const Matrix& v, std::size_t site) {
  detail::check_site(psi, site, "apply_local");
  detail::check_op(psi, v, site, "apply_local");
  if (v == Matrix::Identity(v.rows(), v.cols())) return psi;
  std::vector<Tensor> sites = psi.sites();
  sites[site] = detail::apply_physical(v, sites[site]);
  auto center = psi.canonical_center();
  const bool unitary = (v.adjoint() * v - Matrix::Identity(v.rows(), v.cols())).cwiseAbs().maxCoeff() < 1e-12;
  if (center && *center != site && !unitary) center.reset();
  return MatrixProductState(std::move(sites), center, psi.log_norm_offset());
}

/// ca |a> + cb |b> represented exactly with bond extents D_a + D_b.
inline MatrixProductState superpose(const MatrixProductState& a, const MatrixProductState& b, cplx ca, cplx cb) {
  const std::size_t n = a.length();
  if (b.length() != n) throw ArgumentError("superpose: length mismatch");
  for (std::size_t i = 0; i < n; ++i)
    if (a.phys_dim(i) != b.phys_dim(i)) throw ArgumentError("superpose: physical dimension mismatch");
  std::vector<Tensor> sites;
  sites.reserve(n);
  if (n == 1) {
    sites.push_back(ca * a.site(0) + cb * b.site(0));
    return MatrixProductState(std::move(sites), std::size_t{0});
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor& x = a.site(i);
    const Tensor& y = b.site(i);
    const std::size_t d = x.extent(0);
    const std::size_t xl = x.extent(1), xr = x.extent(2), yl = y.extent(1), yr = y.extent(2);
    const bool first = i == 0, last = i + 1 == n;
    const std::size_t dl = first ? 1 : xl + yl;
    const std::size_t dr = last ? 1 : xr + yr;
    Tensor t({d, dl, dr});
    for (std::size_t s = 0; s < d; ++s) {
      auto dst = detail::block(t, s);
      const auto ro = static_cast<Eigen::Index>(first ? 0 : xl);
      const auto co = static_cast<Eigen::Index>(last ? 0 : xr);
      dst.block(0, 0, static_cast<Eigen::Index>(xl), static_cast<Eigen::Index>(xr)) =
          (first ? ca : cplx{1.0}) * detail::block(x, s);
      dst.block(ro, co, static_cast<Eigen::Index>(yl), static_cast<Eigen::Index>(yr)) =
          (first ? cb : cplx{1.0}) * detail::block(y, s);
    }
    sites.push_back(std::move(t));
  }
  return MatrixProductState(std::move(sites));
}

struct Compressed {
  MatrixProductState state;
  /// One report per bond, bond 0 first.
  std::vector<TruncationReport> bonds;

  double discarded_weight() const {
    double w = 0.0;
    for (const auto& r : bonds) w += r.discarded_weight;
    return w;
  }
};

/// SVD sweep truncating every bond to at most max_bond. The output keeps the
/// input's norm and is canonical at the last site.
inline Compressed compress(const MatrixProductState& psi, std::size_t max_bond, double tol) {
  if (max_bond == 0) throw ArgumentError("compress: max_bond must be positive");
  std::vector<Tensor> sites = psi.sites();
  const std::size_t n = sites.size();
  double target = 0.0;
  std::vector<TruncationReport> reports = detail::truncate_window(sites, 0, n - 1, max_bond, tol, &target);
  const double current = sites[n - 1].norm();
  if (current > 0.0) sites[n - 1] *= target / current;
  return {MatrixProductState(std::move(sites), n - 1, psi.log_norm_offset()), std::move(reports)};
}

}  // namespace smps
