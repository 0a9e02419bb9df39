#pragma once

// Two-site DMRG for nearest-neighbour MPO Hamiltonians.

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "smps/errors.hpp"
#include "smps/fit.hpp"
#include "smps/lanczos.hpp"
#include "smps/mpo.hpp"
#include "smps/mps.hpp"
#include "smps/rng.hpp"

namespace smps {

struct DmrgOptions {
  std::size_t max_bond = 64;
  std::size_t max_sweeps = 20;
  /// Converged once a sweep lowers the energy by less than this.
  double tol = 1e-10;
  /// Normalized discarded weight allowed per bond.
  double truncation_tol = 1e-14;
  /// Seed of the random real product state the sweeps start from.
  std::uint64_t seed = 20240601;
  LanczosOptions lanczos{};
  /// Largest local problem that may fall back to a dense solve.
  std::size_t dense_limit = 4096;
};

struct GroundStateResult {
  MatrixProductState state;
  double energy = 0.0;
  /// <H^2> - <H>^2.
  double variance = 0.0;
  std::size_t sweeps_used = 0;
  /// Cleared when the sweep cap was hit first.
  bool converged = false;
  /// Energy after each full (right and left) sweep.
  std::vector<double> sweep_energies;
  /// Largest discarded weight at any bond during the last sweep.
  double max_discarded = 0.0;
};

namespace detail {

/// Sum over the shared channel of two MPO sites, grouped by outer channels.
struct TwoSiteKernel {
  struct Entry {
    std::size_t w0, w2;
    Matrix c;  // (t1 d + t2, s1 d + s2)
  };
  std::vector<Entry> entries;
  std::size_t wl = 0, wr = 0, d1 = 0, d2 = 0;
};

inline TwoSiteKernel two_site_kernel(const MatrixProductOperator& h, std::size_t i) {
  TwoSiteKernel k;
  const Tensor& a = h.site(i);
  const Tensor& b = h.site(i + 1);
  k.wl = a.extent(0);
  k.wr = b.extent(1);
  k.d1 = a.extent(2);
  k.d2 = b.extent(2);
  const auto dim = static_cast<Eigen::Index>(k.d1 * k.d2);
  for (std::size_t w0 = 0; w0 < k.wl; ++w0)
    for (std::size_t w2 = 0; w2 < k.wr; ++w2) {
      Matrix c = Matrix::Zero(dim, dim);
      for (std::size_t w1 = 0; w1 < a.extent(1); ++w1) {
        const Matrix x = h.block(i, w0, w1), y = h.block(i + 1, w1, w2);
        if (x.cwiseAbs().maxCoeff() == 0.0 || y.cwiseAbs().maxCoeff() == 0.0) continue;
        for (Eigen::Index r = 0; r < x.rows(); ++r)
          for (Eigen::Index s = 0; s < x.cols(); ++s)
            c.block(r * y.rows(), s * y.cols(), y.rows(), y.cols()) += x(r, s) * y;
      }
      if (c.cwiseAbs().maxCoeff() > 0.0) k.entries.push_back({w0, w2, std::move(c)});
    }
  return k;
}

/// theta is the (d1 Dl) x (d2 Dr) matrix, flattened column-major.
inline Vector two_site_apply(const TwoSiteKernel& k, const Environment& left, const Environment& right,
                             std::size_t dl, std::size_t dr, const Vector& theta) {
  const auto rows = static_cast<Eigen::Index>(k.d1 * dl), cols = static_cast<Eigen::Index>(k.d2 * dr);
  const Eigen::Map<const Matrix> m(theta.data(), rows, cols);
  const auto el = static_cast<Eigen::Index>(dl), er = static_cast<Eigen::Index>(dr);
  const std::size_t ds = k.d1 * k.d2;
  auto blk = [&](std::size_t s) {
    return m.block(static_cast<Eigen::Index>(s / k.d2) * el, static_cast<Eigen::Index>(s % k.d2) * er, el, er);
  };

  std::vector<std::vector<Matrix>> acc(k.wr, std::vector<Matrix>(ds));
  std::vector<bool> used(k.wr, false);
  std::size_t current = std::numeric_limits<std::size_t>::max();
  std::vector<Matrix> x(ds);
  for (const auto& e : k.entries) {  // entries are ordered by w0
    if (e.w0 != current) {
      current = e.w0;
      for (std::size_t s = 0; s < ds; ++s) x[s].noalias() = left[e.w0] * blk(s);
    }
    if (!used[e.w2]) {
      for (auto& z : acc[e.w2]) z = Matrix::Zero(el, er);
      used[e.w2] = true;
    }
    for (std::size_t t = 0; t < ds; ++t)
      for (std::size_t s = 0; s < ds; ++s) {
        const cplx c = e.c(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s));
        if (c != cplx{}) acc[e.w2][t] += c * x[s];
      }
  }
  Vector out = Vector::Zero(theta.size());
  Eigen::Map<Matrix> o(out.data(), rows, cols);
  for (std::size_t w2 = 0; w2 < k.wr; ++w2) {
    if (!used[w2]) continue;
    const Matrix rt = right[w2].transpose();
    for (std::size_t t = 0; t < ds; ++t)
      o.block(static_cast<Eigen::Index>(t / k.d2) * el, static_cast<Eigen::Index>(t % k.d2) * er, el, er).noalias() +=
          acc[w2][t] * rt;
  }
  return out;
}

inline MatrixProductState random_real_product_state(std::size_t length, std::uint64_t seed) {
  RngStream rng(seed, 0);
  std::vector<Vector> local;
  for (std::size_t i = 0; i < length; ++i) {
    const double angle = 2.0 * std::numbers::pi * rng.uniform();
    Vector v(2);
    v << std::cos(angle), std::sin(angle);
    local.push_back(v);
  }
  return product_state(local);
}

}  // namespace detail

/// Ground state of `h` (any nearest-neighbour MPO on qubits). The returned state
/// is normalized and canonical at site 0.
inline GroundStateResult dmrg(const MatrixProductOperator& h, const DmrgOptions& opt = {}) {
  if (opt.max_bond == 0) throw ArgumentError("dmrg: max_bond must be positive");
  if (opt.max_sweeps == 0) throw ArgumentError("dmrg: need at least one sweep");
  for (std::size_t i = 0; i < h.length(); ++i)
    if (h.phys_dim(i) != 2) throw ArgumentError("dmrg: only qubit chains are supported");
  const std::size_t n = h.length();
  GroundStateResult result{detail::random_real_product_state(n, opt.seed)};

  if (n == 1) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(h.block(0, 0, 0)));
    Tensor t({2, 1, 1});
    t[0] = es.eigenvectors()(0, 0);
    t[1] = es.eigenvectors()(1, 0);
    result.state = MatrixProductState({t}, std::size_t{0});
    result.energy = es.eigenvalues()(0);
    result.sweep_energies = {result.energy};
    result.sweeps_used = 1;
    result.converged = true;
    return result;
  }

  std::vector<Tensor> sites = result.state.sites();
  auto dressed = [&](std::size_t i) { return detail::dressed_site(h, i, sites[i]); };
  std::vector<detail::Environment> left(n + 1), right(n + 1);
  left[0] = {Matrix::Ones(1, 1)};
  right[n] = {Matrix::Ones(1, 1)};
  for (std::size_t i = n; i-- > 1;) right[i] = detail::grow_right(right[i + 1], sites[i], dressed(i));

  std::vector<detail::TwoSiteKernel> kernels;
  for (std::size_t i = 0; i + 1 < n; ++i) kernels.push_back(detail::two_site_kernel(h, i));

  double sweep_discarded = 0.0;
  auto optimize = [&](std::size_t i, bool center_right) {
    const std::size_t d1 = sites[i].extent(0), d2 = sites[i + 1].extent(0);
    const std::size_t dl = sites[i].extent(1), dr = sites[i + 1].extent(2);
    const auto rows = static_cast<Eigen::Index>(d1 * dl), cols = static_cast<Eigen::Index>(d2 * dr);
    Matrix theta(rows, cols);
    for (std::size_t s1 = 0; s1 < d1; ++s1)
      for (std::size_t s2 = 0; s2 < d2; ++s2)
        theta.block(static_cast<Eigen::Index>(s1 * dl), static_cast<Eigen::Index>(s2 * dr),
                    static_cast<Eigen::Index>(dl), static_cast<Eigen::Index>(dr)) =
            detail::block(sites[i], s1) * detail::block(sites[i + 1], s2);
    const LinearMap apply = [&](const Vector& v) {
      return detail::two_site_apply(kernels[i], left[i], right[i + 2], dl, dr, v);
    };
    const Vector start = Eigen::Map<const Vector>(theta.data(), theta.size());
    EigenPair pair = lanczos_ground(apply, start, opt.lanczos);
    if (!pair.converged && static_cast<std::size_t>(start.size()) <= opt.dense_limit)
      pair = dense_ground(apply, start.size());

    const Matrix m = Eigen::Map<const Matrix>(pair.vector.data(), rows, cols);
    const Svd f = linalg::svd(m);
    const TruncationReport rep = linalg::choose_rank(f.s, opt.max_bond, opt.truncation_tol);
    sweep_discarded = std::max(sweep_discarded, rep.discarded_weight);
    const auto k = static_cast<Eigen::Index>(rep.kept);
    const RealVector s = f.s.head(k) / f.s.head(k).norm();
    Matrix u = f.u.leftCols(k), vh = f.vh.topRows(k);
    if (center_right)
      vh = s.cast<cplx>().asDiagonal() * vh;
    else
      u = u * s.cast<cplx>().asDiagonal();
    sites[i] = Tensor::from_matrix(u).reshape({d1, dl, rep.kept});
    sites[i + 1] = permute(Tensor::from_matrix(vh).reshape({rep.kept, d2, dr}), {1, 0, 2});
    if (center_right)
      left[i + 1] = detail::grow_left(left[i], sites[i], dressed(i));
    else
      right[i + 1] = detail::grow_right(right[i + 2], sites[i + 1], dressed(i + 1));
  };

  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    sweep_discarded = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) optimize(i, true);
    for (std::size_t i = n - 1; i-- > 0;) optimize(i, false);
    const MatrixProductState current(sites, std::size_t{0});
    const double energy = expectation_mpo(current, h).real();
    result.sweep_energies.push_back(energy);
    result.sweeps_used = sweep + 1;
    result.max_discarded = sweep_discarded;
    result.state = current;
    result.energy = energy;
    if (std::abs(previous - energy) < opt.tol) {
      result.converged = true;
      break;
    }
    previous = energy;
  }

  const MatrixProductState hpsi = apply_mpo_exact(h, result.state);
  const cplx e = expectation_mpo(result.state, h);
  if (std::abs(e.imag()) > 1e-8) throw NumericalError("dmrg: energy has a non-negligible imaginary part");
  result.energy = e.real();
  result.variance = matrix_element(hpsi, h, result.state).real() - result.energy * result.energy;
  return result;
}

inline GroundStateResult dmrg(const MatrixProductOperator& h, std::size_t max_bond, std::size_t sweeps, double tol) {
  DmrgOptions opt;
  opt.max_bond = max_bond;
  opt.max_sweeps = sweeps;
  opt.tol = tol;
  return dmrg(h, opt);
}

}  // namespace smps
