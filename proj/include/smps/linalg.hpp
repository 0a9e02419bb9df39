#pragma once

// Dense linear-algebra kernels shared by the tensor-network layers. Matrices
// are Eigen column-major; the SVD goes through LAPACK's divide-and-conquer
// driver with an Eigen fallback.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#ifndef lapack_complex_double
#define lapack_complex_double std::complex<double>
#endif
#ifndef lapack_complex_float
#define lapack_complex_float std::complex<float>
#endif
#include <lapacke.h>

namespace smps {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RowMajorMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr cplx I_unit{0.0, 1.0};

/// Outcome of a rank truncation.
struct TruncationReport {
  std::size_t kept = 0;
  /// Sum of squared discarded singular values (absolute, not normalized).
  double discarded_weight = 0.0;
  /// Retained singular values, non-increasing.
  std::vector<double> spectrum;
  /// Set when the factorized input was identically zero.
  bool degenerate = false;
};

struct Svd {
  Matrix u;
  RealVector s;
  Matrix vh;
};

namespace linalg {

/// Singular values below this fraction of the largest are treated as zero.
inline constexpr double kRelativeZero = 1e-14;
/// Two singular values closer than this (relative to the largest) form a multiplet.
inline constexpr double kTieTolerance = 1e-10;

/// Thin SVD, singular values non-increasing.
inline Svd svd(const Matrix& a) {
  const auto m = static_cast<lapack_int>(a.rows());
  const auto n = static_cast<lapack_int>(a.cols());
  const auto k = std::min(m, n);
  Svd out{Matrix(m, k), RealVector(k), Matrix(k, n)};
  Matrix work = a;
  lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'S', m, n, work.data(), m, out.s.data(),
                                   out.u.data(), m, out.vh.data(), k);
  if (info != 0) {
    Eigen::BDCSVD<Matrix> fallback(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.u = fallback.matrixU();
    out.s = fallback.singularValues();
    out.vh = fallback.matrixV().adjoint();
  }
  return out;
}

/// Picks the retained rank for a non-increasing spectrum: the smallest rank whose
/// normalized discarded weight is <= tol, widened to cover a degenerate multiplet
/// at the cut while it fits under max_rank, then capped at max_rank.
inline TruncationReport choose_rank(const RealVector& s, std::size_t max_rank, double tol) {
  TruncationReport report;
  const auto n = static_cast<std::size_t>(s.size());
  if (n == 0 || !(s(0) > 0.0)) {
    report.degenerate = true;
    return report;
  }
  const double largest = s(0);
  std::size_t nonzero = 0;
  while (nonzero < n && s(static_cast<Eigen::Index>(nonzero)) > kRelativeZero * largest) ++nonzero;

  std::vector<double> tail(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    const double v = s(static_cast<Eigen::Index>(i));
    tail[i] = tail[i + 1] + v * v;
  }
  const double total = tail[0];

  std::size_t keep = nonzero;
  while (keep > 1 && tail[keep - 1] / total <= tol) --keep;
  while (keep < nonzero && keep < max_rank &&
         std::abs(s(static_cast<Eigen::Index>(keep - 1)) - s(static_cast<Eigen::Index>(keep))) <=
             kTieTolerance * largest) {
    ++keep;
  }
  keep = std::max<std::size_t>(1, std::min(keep, max_rank));

  report.kept = keep;
  report.discarded_weight = tail[keep];
  report.spectrum.assign(s.data(), s.data() + keep);
  return report;
}

/// f(H) for Hermitian H via its eigendecomposition.
template <class F>
Matrix hermitian_function(const Matrix& h, F&& f) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  const Matrix& v = es.eigenvectors();
  Vector fx(es.eigenvalues().size());
  for (Eigen::Index i = 0; i < fx.size(); ++i) fx(i) = f(es.eigenvalues()(i));
  return v * fx.asDiagonal() * v.adjoint();
}

/// exp(i * theta * H) for Hermitian H.
inline Matrix exp_i_hermitian(const Matrix& h, double theta) {
  return hermitian_function(h, [theta](double x) { return std::exp(I_unit * (theta * x)); });
}

/// Thin QR: a = q r with q having orthonormal columns.
inline std::pair<Matrix, Matrix> thin_qr(const Matrix& a) {
  const Eigen::Index k = std::min(a.rows(), a.cols());
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), k);
  Matrix r = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
  return {std::move(q), std::move(r)};
}

inline bool is_hermitian(const Matrix& m, double tol) {
  return m.rows() == m.cols() && (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace linalg
}  // namespace smps
