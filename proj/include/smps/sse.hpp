#pragma once

// Euler-Maruyama integration of the diffusive stochastic Schroedinger equation
//
//   d psi = -i H dt psi + dt (G/2)(2<A> A - A^2 - <A>^2) psi + sqrt(G) (A - <A>) dW psi
//
// with <A> taken from the state at the start of the step. The measurement part
// is assembled as c0 psi + c1 A psi + c2 A(A psi):
//
//   c0 = 1 - dt G <A>^2 / 2 - sqrt(G) <A> dW
//   c1 = dt G <A> + sqrt(G) dW
//   c2 = -dt G / 2
//
// The Hamiltonian part is either folded into the same Euler update or (the
// default) applied afterwards as one symmetric Trotter step. The state is
// renormalized after every step.

#include <cmath>
#include <optional>
#include <vector>

#include "smps/errors.hpp"
#include "smps/mpo.hpp"
#include "smps/mps.hpp"
#include "smps/observables.hpp"
#include "smps/rng.hpp"
#include "smps/tebd.hpp"
#include "smps/trajectory.hpp"

namespace smps {

enum class HamiltonianScheme {
  /// exp(-i H dt) by a second-order Trotter step after the stochastic update.
  trotter,
  /// The literal -i H dt psi Euler term, summed with the others.
  euler,
};

struct SseOptions {
  std::size_t max_bond = 64;
  double tol = 1e-10;
  double budget = 1e-4;
  HamiltonianScheme scheme = HamiltonianScheme::trotter;
  bool keep_final_state = false;
};

/// Norm below which a step is treated as a collapse.
inline constexpr double kCollapseNorm = 1e-12;

/// Operators for repeated steps with fixed H, A and dt.
struct SseContext {
  std::size_t length = 0;
  double dt = 0.0;
  std::optional<std::size_t> local_site;
  Matrix local_a;  // g O for a single-term observable
  std::optional<MatrixProductOperator> a;
  std::optional<MatrixProductOperator> h;  // euler scheme only
  TrotterGates gates;
  bool has_h = false;
  HamiltonianScheme scheme = HamiltonianScheme::trotter;

  SseContext(std::size_t n, const std::vector<BondTerm>& terms, const MeasurementSpec& spec, double step,
             HamiltonianScheme s)
      : length(n), dt(step), has_h(!terms.empty()), scheme(s) {
    if (!(step > 0.0) || !std::isfinite(step)) throw ArgumentError("sse: dt must be positive and finite");
    spec.validate(n);
    if (spec.terms.size() == 1) {
      local_site = spec.terms.front().site;
      local_a = spec.terms.front().coupling * spec.terms.front().op;
    } else if (!spec.terms.empty()) {
      a = observable_mpo(spec, n);
    }
    if (has_h && scheme == HamiltonianScheme::euler) h = bond_terms_mpo(terms, n);
    if (has_h && scheme == HamiltonianScheme::trotter) gates = make_trotter_gates(terms, step);
  }
};

struct SseStep {
  MatrixProductState state;
  double discarded_weight = 0.0;
};

/// <A> for the measured observable, real part; a large imaginary part aborts.
inline double measured_mean(const MatrixProductState& psi, const SseContext& ctx) {
  if (!ctx.local_site && !ctx.a) return 0.0;
  const cplx v = ctx.local_site ? expectation_local(psi, ctx.local_a, *ctx.local_site) : expectation_mpo(psi, *ctx.a);
  if (std::abs(v.imag()) > kHermitianImagTolerance) throw NumericalError("sse: <A> has a non-negligible imaginary part");
  return v.real();
}

inline SseStep sse_euler_step(const MatrixProductState& psi, const SseContext& ctx, double gamma, double dw,
                              const SseOptions& opt = {}) {
  if (psi.length() != ctx.length) throw ArgumentError("sse: chain length differs from the prepared context");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ArgumentError("sse: Gamma must be non-negative");
  const double dt = ctx.dt;
  const double mean = measured_mean(psi, ctx);
  const double sg = std::sqrt(gamma);
  const double c0 = 1.0 - dt * gamma * mean * mean / 2.0 - sg * mean * dw;
  const double c1 = dt * gamma * mean + sg * dw;
  const double c2 = -dt * gamma / 2.0;

  SseStep out{psi, 0.0};
  std::optional<MatrixProductState> next;  // unnormalized, uncompressed sum when set
  const bool measured = ctx.local_site || ctx.a;
  if (ctx.local_site) {
    const Matrix m = c0 * Matrix::Identity(2, 2) + c1 * ctx.local_a + c2 * ctx.local_a * ctx.local_a;
    out.state = apply_local(canonicalize(psi, *ctx.local_site), m, *ctx.local_site);
  } else if (measured) {
    Compressed ap = apply_mpo(*ctx.a, psi, opt.max_bond, opt.tol);
    Compressed aap = apply_mpo(*ctx.a, ap.state, opt.max_bond, opt.tol);
    out.discarded_weight += ap.discarded_weight() + aap.discarded_weight();
    next = superpose(superpose(psi, ap.state, c0, c1), aap.state, 1.0, c2);
  } else {
    out.state = psi;
  }

  if (ctx.has_h && ctx.scheme == HamiltonianScheme::euler) {
    Compressed hp = apply_mpo(*ctx.h, psi, opt.max_bond, opt.tol);
    out.discarded_weight += hp.discarded_weight();
    next = superpose(next ? *next : out.state, hp.state, 1.0, -I_unit * dt);
  }
  if (next) {
    Compressed c = compress(*next, opt.max_bond, opt.tol);
    out.discarded_weight += c.discarded_weight();
    out.state = std::move(c.state);
  }
  if (ctx.has_h && ctx.scheme == HamiltonianScheme::trotter) {
    TrotterResult r = trotter_step(out.state, ctx.gates, opt.max_bond, opt.tol);
    out.discarded_weight += r.discarded_weight;
    out.state = std::move(r.state);
  }
  const double nrm = norm(out.state);
  if (!(nrm >= kCollapseNorm)) throw IntegrationError("sse: state norm collapsed to " + std::to_string(nrm));
  out.state = normalize(out.state);
  return out;
}

/// Convenience form that prepares the operators for a single step.
inline MatrixProductState sse_euler_step(const MatrixProductState& psi, const std::vector<BondTerm>& h,
                                         const MeasurementSpec& spec, double gamma, double dw, double dt,
                                         std::size_t max_bond, double tol,
                                         HamiltonianScheme scheme = HamiltonianScheme::trotter) {
  SseOptions opt;
  opt.max_bond = max_bond;
  opt.tol = tol;
  opt.scheme = scheme;
  return sse_euler_step(psi, SseContext(psi.length(), h, spec, dt, scheme), gamma, dw, opt).state;
}

/// Integrates over the given increments (one per step, each with variance dt).
inline TrajectoryRecord sse_trajectory_path(const MatrixProductState& psi0, const std::vector<BondTerm>& h,
                                            const MeasurementSpec& spec, double gamma, double dt,
                                            const std::vector<double>& increments,
                                            const std::vector<Observable>& observables, const SseOptions& opt = {}) {
  const SseContext ctx(psi0.length(), h, spec, dt, opt.scheme);
  TrajectoryRecord rec;
  rec.dt = dt;
  detail::Recorder out(rec, observables, opt.budget);
  MatrixProductState psi = psi0;
  out.observe_bond(psi);
  out.record(0.0, psi);
  for (std::size_t k = 0; k < increments.size(); ++k) {
    const double t = static_cast<double>(k + 1) * dt;
    SseStep s = sse_euler_step(psi, ctx, gamma, increments[k], opt);
    out.add_discarded(s.discarded_weight);
    rec.increments.push_back({t, increments[k]});
    psi = std::move(s.state);
    out.observe_bond(psi);
    out.record(t, psi);
  }
  if (opt.keep_final_state) rec.final_state = psi;
  return rec;
}

/// Wiener increments sqrt(dt) * N(0, 1) drawn from `rng`, enough to cover `duration`.
inline std::vector<double> wiener_increments(double duration, double dt, RngStream& rng) {
  const std::size_t steps = detail::step_count(duration, dt);
  std::vector<double> dw(steps);
  const double scale = std::sqrt(dt);
  for (auto& x : dw) x = scale * rng.normal();
  return dw;
}

inline TrajectoryRecord sse_trajectory(const MatrixProductState& psi0, const std::vector<BondTerm>& h,
                                       const MeasurementSpec& spec, double gamma, double duration, double dt,
                                       const std::vector<Observable>& observables, RngStream& rng,
                                       const SseOptions& opt = {}) {
  const std::uint64_t seed = rng.seed(), stream = rng.stream();
  TrajectoryRecord rec =
      sse_trajectory_path(psi0, h, spec, gamma, dt, wiener_increments(duration, dt, rng), observables, opt);
  rec.seed = seed;
  rec.stream = stream;
  return rec;
}

}  // namespace smps
