#pragma once

// Variational compression of A|psi>: one-site sweeps that maximize the overlap
// with the exact product at fixed bond extents, seeded by the SVD-truncated
// product.

#include <cmath>
#include <limits>
#include <vector>

#include "smps/errors.hpp"
#include "smps/mpo.hpp"
#include "smps/mps.hpp"

namespace smps {

struct FitOptions {
  std::size_t sweeps = 4;
  /// Stop once a full sweep changes the squared residual by less than this.
  double tol = 1e-10;
};

struct FitResult {
  MatrixProductState state;
  /// ||chi - A psi||^2 of the returned state.
  double residual = 0.0;
  /// Same quantity for the SVD-compressed seed.
  double initial_residual = 0.0;
  std::size_t sweeps_used = 0;
  /// Cleared when the sweep cap was hit before the residual settled.
  bool converged = true;
  std::vector<TruncationReport> seed_reports;
};

namespace detail {

/// env[w] holds the (chi, psi) virtual block for MPO channel w.
using Environment = std::vector<Matrix>;

/// Y[s][w][w'] = sum_s' W(w, w')(s, s') psi_{s'}.
inline std::vector<std::vector<std::vector<Matrix>>> dressed_site(const MatrixProductOperator& op, std::size_t i,
                                                                  const Tensor& psi) {
  const Tensor& w = op.site(i);
  const std::size_t d = psi.extent(0), wl = w.extent(0), wr = w.extent(1);
  std::vector<std::vector<std::vector<Matrix>>> y(
      d, std::vector<std::vector<Matrix>>(wl, std::vector<Matrix>(wr)));
  for (std::size_t a = 0; a < wl; ++a)
    for (std::size_t b = 0; b < wr; ++b) {
      const auto blk = op.block(i, a, b);
      for (std::size_t t = 0; t < d; ++t) {
        Matrix acc = Matrix::Zero(static_cast<Eigen::Index>(psi.extent(1)), static_cast<Eigen::Index>(psi.extent(2)));
        for (std::size_t s = 0; s < d; ++s) {
          const cplx c = blk(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s));
          if (c != cplx{}) acc += c * block(psi, s);
        }
        y[t][a][b] = std::move(acc);
      }
    }
  return y;
}

inline Environment grow_left(const Environment& env, const Tensor& chi,
                             const std::vector<std::vector<std::vector<Matrix>>>& y) {
  const std::size_t d = y.size(), wl = y[0].size(), wr = y[0][0].size();
  Environment next(wr, Matrix::Zero(static_cast<Eigen::Index>(chi.extent(2)), y[0][0][0].cols()));
  for (std::size_t a = 0; a < wl; ++a)
    for (std::size_t t = 0; t < d; ++t) {
      const Matrix left = block(chi, t).adjoint() * env[a];
      for (std::size_t b = 0; b < wr; ++b)
        if (y[t][a][b].cwiseAbs().maxCoeff() > 0.0) next[b].noalias() += left * y[t][a][b];
    }
  return next;
}

inline Environment grow_right(const Environment& env, const Tensor& chi,
                              const std::vector<std::vector<std::vector<Matrix>>>& y) {
  const std::size_t d = y.size(), wl = y[0].size(), wr = y[0][0].size();
  Environment next(wl, Matrix::Zero(static_cast<Eigen::Index>(chi.extent(1)), y[0][0][0].rows()));
  for (std::size_t t = 0; t < d; ++t) {
    const Matrix cc = block(chi, t).conjugate();
    for (std::size_t b = 0; b < wr; ++b) {
      const Matrix right = cc * env[b];
      for (std::size_t a = 0; a < wl; ++a)
        if (y[t][a][b].cwiseAbs().maxCoeff() > 0.0) next[a].noalias() += right * y[t][a][b].transpose();
    }
  }
  return next;
}

/// Optimal center tensor given orthonormal environments.
inline Tensor projected_site(const Environment& left, const Environment& right, const Tensor& shape_like,
                             const std::vector<std::vector<std::vector<Matrix>>>& y) {
  const std::size_t d = y.size(), wl = y[0].size(), wr = y[0][0].size();
  Tensor out({d, shape_like.extent(1), shape_like.extent(2)});
  for (std::size_t t = 0; t < d; ++t) {
    auto dst = block(out, t);
    for (std::size_t a = 0; a < wl; ++a)
      for (std::size_t b = 0; b < wr; ++b)
        if (y[t][a][b].cwiseAbs().maxCoeff() > 0.0) dst.noalias() += left[a] * y[t][a][b] * right[b].transpose();
  }
  return out;
}

}  // namespace detail

/// Best bond-limited approximation of op|psi>. The result is canonical at site 0.
inline FitResult variational_fit(const MatrixProductOperator& op, const MatrixProductState& psi,
                                 std::size_t max_bond, FitOptions options = {}) {
  if (max_bond == 0) throw ArgumentError("variational_fit: max_bond must be positive");
  Compressed seed = apply_mpo(op, psi, max_bond, 0.0);
  const std::size_t n = psi.length();
  // apply_mpo rescales to the exact norm, so this is ||A psi||^2.
  const double target = norm_squared(seed.state);
  auto residual_of = [&](const MatrixProductState& chi) {
    return target - 2.0 * matrix_element(chi, op, psi).real() + norm_squared(chi);
  };

  FitResult result{seed.state, 0.0, 0.0, 0, true, std::move(seed.bonds)};
  result.initial_residual = residual_of(seed.state);
  result.residual = result.initial_residual;
  if (options.sweeps == 0 || n == 1 || !(target > 0.0)) {
    // A single site or a zero product is represented exactly by the seed.
    result.converged = n == 1 || !(target > 0.0) || result.residual <= options.tol;
    return result;
  }

  std::vector<Tensor> chi = canonicalize(seed.state, 0).sites();
  std::vector<std::vector<std::vector<std::vector<Matrix>>>> dressed;
  dressed.reserve(n);
  for (std::size_t i = 0; i < n; ++i) dressed.push_back(detail::dressed_site(op, i, psi.site(i)));

  std::vector<detail::Environment> left(n + 1), right(n + 1);
  left[0] = {Matrix::Ones(1, 1)};
  right[n] = {Matrix::Ones(1, 1)};
  for (std::size_t i = n; i-- > 1;) right[i] = detail::grow_right(right[i + 1], chi[i], dressed[i]);

  double previous = result.residual;
  result.converged = false;
  for (std::size_t sweep = 0; sweep < options.sweeps; ++sweep) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      chi[i] = detail::projected_site(left[i], right[i + 1], chi[i], dressed[i]);
      detail::shift_center_right(chi, i);
      left[i + 1] = detail::grow_left(left[i], chi[i], dressed[i]);
    }
    for (std::size_t i = n - 1; i > 0; --i) {
      chi[i] = detail::projected_site(left[i], right[i + 1], chi[i], dressed[i]);
      detail::shift_center_left(chi, i);
      right[i] = detail::grow_right(right[i + 1], chi[i], dressed[i]);
    }
    chi[0] = detail::projected_site(left[0], right[1], chi[0], dressed[0]);
    const double overlap_sq = chi[0].norm() * chi[0].norm();
    const double residual = std::max(0.0, target - overlap_sq);
    result.sweeps_used = sweep + 1;
    if (residual < result.residual) {
      result.residual = residual;
      result.state = MatrixProductState(chi, std::size_t{0}, psi.log_norm_offset());
    }
    if (std::abs(previous - residual) < options.tol) {
      result.converged = true;
      break;
    }
    previous = residual;
  }
  return result;
}

}  // namespace smps
