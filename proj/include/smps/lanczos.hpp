#pragma once

// Lowest eigenpair of a Hermitian operator given only its action, by restarted
// Lanczos with full reorthogonalization.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "smps/linalg.hpp"

namespace smps {

struct EigenPair {
  double value = 0.0;
  Vector vector;
  /// ||H v - value v|| of the returned pair.
  double residual = 0.0;
  bool converged = false;
};

struct LanczosOptions {
  std::size_t krylov = 32;
  std::size_t restarts = 8;
  double tol = 1e-10;
};

using LinearMap = std::function<Vector(const Vector&)>;

/// Dense diagonalization through explicit columns; only for small problems.
inline EigenPair dense_ground(const LinearMap& apply, Eigen::Index dim) {
  Matrix h(dim, dim);
  for (Eigen::Index k = 0; k < dim; ++k) h.col(k) = apply(Vector::Unit(dim, k));
  h = 0.5 * (h + h.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  EigenPair out{es.eigenvalues()(0), es.eigenvectors().col(0), 0.0, true};
  out.residual = (apply(out.vector) - out.value * out.vector).norm();
  return out;
}

inline EigenPair lanczos_ground(const LinearMap& apply, Vector start, LanczosOptions opt = {}) {
  const Eigen::Index dim = start.size();
  if (start.norm() == 0.0) start = Vector::Ones(dim);
  start.normalize();
  EigenPair best{0.0, start, std::numeric_limits<double>::infinity(), false};
  Vector seed = start;

  for (std::size_t restart = 0; restart <= opt.restarts; ++restart) {
    const auto cap = static_cast<Eigen::Index>(std::min<std::size_t>(opt.krylov, static_cast<std::size_t>(dim)));
    Matrix basis(dim, cap);
    std::vector<double> alpha, beta;
    basis.col(0) = seed;
    Eigen::Index used = 0;
    Vector w;
    for (Eigen::Index k = 0; k < cap; ++k) {
      used = k + 1;
      w = apply(basis.col(k));
      const double a = basis.col(k).dot(w).real();
      alpha.push_back(a);
      // Two passes of classical Gram-Schmidt against the whole basis.
      for (int pass = 0; pass < 2; ++pass) w -= basis.leftCols(k + 1) * (basis.leftCols(k + 1).adjoint() * w);
      const double b = w.norm();
      if (k + 1 == cap || b < 1e-14 * std::max(1.0, std::abs(a))) {
        beta.push_back(b);
        break;
      }
      beta.push_back(b);
      basis.col(k + 1) = w / b;
    }
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(used, used);
    for (Eigen::Index k = 0; k < used; ++k) {
      t(k, k) = alpha[static_cast<std::size_t>(k)];
      if (k + 1 < used) t(k, k + 1) = t(k + 1, k) = beta[static_cast<std::size_t>(k)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const Eigen::VectorXd c = es.eigenvectors().col(0);
    Vector v = basis.leftCols(used) * c.cast<cplx>();
    v.normalize();
    const double value = es.eigenvalues()(0);
    const double residual = (apply(v) - value * v).norm();
    if (residual < best.residual) best = {value, v, residual, false};
    seed = std::move(v);
    if (best.residual <= opt.tol * std::max(1.0, std::abs(best.value))) {
      best.converged = true;
      return best;
    }
    // An invariant Krylov space cannot be extended by restarting.
    if (used < cap) return best;
  }
  return best;
}

}  // namespace smps
