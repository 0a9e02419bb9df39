#pragma once

// Dense master equation for the unconditional average of the monitored chain:
//
//   d rho / dt = -i [H, rho] + G (A rho A - {A^2, rho} / 2),   A Hermitian,
//
// integrated with classical fourth-order Runge-Kutta.

#include <cmath>
#include <vector>

#include "smps/errors.hpp"
#include "smps/linalg.hpp"

namespace smps {

/// Largest chain the dense integrator accepts.
inline constexpr std::size_t kLindbladMaxSites = 8;

struct LindbladTrajectory {
  std::vector<double> times;
  std::vector<Matrix> states;
};

inline Matrix lindblad_rhs(const Matrix& rho, const Matrix& h, const Matrix& a, const Matrix& a2, double gamma) {
  const Matrix ar = a * rho;
  return -I_unit * (h * rho - rho * h) + gamma * (ar * a - 0.5 * (a2 * rho + rho * a2));
}

/// Records rho every `record_every` steps (and at t = 0); the last step is shortened
/// if needed so the final time is exactly `duration`.
inline LindbladTrajectory lindblad_oracle(const Vector& psi0, const Matrix& h, const Matrix& a, double gamma,
                                          double duration, double dt, std::size_t record_every = 1) {
  const auto dim = psi0.size();
  if (dim > (Eigen::Index{1} << kLindbladMaxSites)) throw SizeError("lindblad: at most 8 qubits are supported");
  if (h.rows() != dim || h.cols() != dim || a.rows() != dim || a.cols() != dim)
    throw DimensionError("lindblad: operator shapes do not match the state");
  if (!linalg::is_hermitian(a, 1e-12) || !linalg::is_hermitian(h, 1e-12))
    throw ArgumentError("lindblad: H and A must be Hermitian");
  if (!(dt > 0.0) || !(duration >= 0.0) || record_every == 0) throw ArgumentError("lindblad: bad time grid");

  const Matrix a2 = a * a;
  Matrix rho = psi0 * psi0.adjoint() / psi0.squaredNorm();
  LindbladTrajectory out;
  out.times.push_back(0.0);
  out.states.push_back(rho);
  const auto steps = static_cast<std::size_t>(std::ceil(duration / dt - 1e-9));
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t0 = static_cast<double>(k - 1) * dt;
    const double step = std::min(dt, duration - t0);
    const Matrix k1 = lindblad_rhs(rho, h, a, a2, gamma);
    const Matrix k2 = lindblad_rhs(rho + 0.5 * step * k1, h, a, a2, gamma);
    const Matrix k3 = lindblad_rhs(rho + 0.5 * step * k2, h, a, a2, gamma);
    const Matrix k4 = lindblad_rhs(rho + step * k3, h, a, a2, gamma);
    rho += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (k % record_every == 0 || k == steps) {
      out.times.push_back(t0 + step);
      out.states.push_back(rho);
    }
  }
  return out;
}

}  // namespace smps
