#pragma once

// Discrete weak measurements: sample mu with probability <Omega_mu^dag Omega_mu>,
// then apply Omega_mu and renormalize. Trajectories alternate a Trotter step of
// length 1/kappa with the due measurements.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "smps/errors.hpp"
#include "smps/fit.hpp"
#include "smps/mpo.hpp"
#include "smps/mps.hpp"
#include "smps/observables.hpp"
#include "smps/rng.hpp"
#include "smps/tebd.hpp"
#include "smps/trajectory.hpp"

namespace smps {

/// Probabilities this far outside [0, 1] (or with this large an imaginary part) abort.
inline constexpr double kProbabilityTolerance = 1e-8;

/// Kraus operators and effect of one spec, prepared for a fixed chain length.
/// Single-term specs keep 2 x 2 matrices and skip the MPO machinery.
struct MeasurementChannel {
  MeasurementSpec spec;
  std::size_t length = 0;
  std::optional<std::size_t> local_site;
  Matrix local_kraus[2];  // [0]: mu = +1, [1]: mu = -1
  Matrix local_effect;    // mu = +1
  std::optional<MatrixProductOperator> kraus[2];
  std::optional<MatrixProductOperator> effect;

  MeasurementChannel(MeasurementSpec s, std::size_t n) : spec(std::move(s)), length(n) {
    spec.validate(length);
    if (spec.terms.size() == 1) {
      const MeasurementTerm& t = spec.terms.front();
      local_site = t.site;
      const Matrix a = t.coupling * t.op;
      const Matrix minus = linalg::exp_i_hermitian(a, -spec.phi), plus = linalg::exp_i_hermitian(a, spec.phi);
      local_kraus[0] = 0.5 * (minus + I_unit * plus);
      local_kraus[1] = 0.5 * (minus - I_unit * plus);
      local_effect = local_kraus[0].adjoint() * local_kraus[0];
      return;
    }
    kraus[0] = measurement_mpo(spec, +1, length);
    kraus[1] = measurement_mpo(spec, -1, length);
    effect = povm_effect_mpo(spec, +1, length);
  }
};

struct MeasureOptions {
  std::size_t max_bond = 64;
  double tol = 1e-10;
  /// Variational sweeps after the SVD-compressed application; 0 disables fitting.
  std::size_t fit_sweeps = 0;
};

struct MeasureResult {
  MatrixProductState state;
  int mu = 1;
  /// p(+1) before sampling.
  double p_plus = 0.0;
  /// Probability of the sampled branch.
  double p = 0.0;
  double discarded_weight = 0.0;
};

/// p(+1) = <psi| Omega_+^dag Omega_+ |psi> for a normalized state.
inline double outcome_probability(const MatrixProductState& psi, const MeasurementChannel& ch) {
  if (psi.length() != ch.length) throw ArgumentError("measurement: chain length differs from the prepared channel");
  const cplx v = ch.local_site ? expectation_local(psi, ch.local_effect, *ch.local_site) : expectation_mpo(psi, *ch.effect);
  if (std::abs(v.imag()) > kProbabilityTolerance || v.real() < -kProbabilityTolerance ||
      v.real() > 1.0 + kProbabilityTolerance)
    throw NumericalError("measurement: outcome probability (" + std::to_string(v.real()) + ", " +
                         std::to_string(v.imag()) + ") outside [0, 1]");
  return std::clamp(v.real(), 0.0, 1.0);
}

/// One measurement with the outcome decided by a uniform draw u in [0, 1):
/// mu = +1 iff u < p(+1).
inline MeasureResult discrete_measure_step(const MatrixProductState& psi, const MeasurementChannel& ch, double u,
                                           const MeasureOptions& opt = {}) {
  const double p_plus = outcome_probability(psi, ch);
  const int mu = u < p_plus ? 1 : -1;
  const std::size_t branch = mu == 1 ? 0 : 1;
  MeasureResult out{psi, mu, p_plus, mu == 1 ? p_plus : 1.0 - p_plus, 0.0};

  if (ch.local_site) {
    // Apply at the canonical center so normalize() stays a local operation.
    out.state = normalize(apply_local(canonicalize(psi, *ch.local_site), ch.local_kraus[branch], *ch.local_site));
    return out;
  }
  const MatrixProductOperator& op = *ch.kraus[branch];
  if (opt.fit_sweeps > 0) {
    FitResult fit = variational_fit(op, psi, opt.max_bond, FitOptions{opt.fit_sweeps, opt.tol});
    for (const auto& r : fit.seed_reports) out.discarded_weight += r.discarded_weight;
    out.state = normalize(fit.state);
  } else {
    Compressed c = apply_mpo(op, psi, opt.max_bond, opt.tol);
    out.discarded_weight = c.discarded_weight();
    out.state = normalize(c.state);
  }
  return out;
}

inline MeasureResult discrete_measure_step(const MatrixProductState& psi, const MeasurementChannel& ch, RngStream& rng,
                                           const MeasureOptions& opt = {}) {
  return discrete_measure_step(psi, ch, rng.uniform(), opt);
}

inline MeasureResult discrete_measure_step(const MatrixProductState& psi, const MeasurementSpec& spec, RngStream& rng,
                                           std::size_t max_bond, double tol) {
  return discrete_measure_step(psi, MeasurementChannel(spec, psi.length()), rng, MeasureOptions{max_bond, tol, 0});
}

struct WeakOptions {
  std::size_t max_bond = 64;
  double tol = 1e-10;
  std::size_t fit_sweeps = 0;
  /// Accumulated discarded weight that triggers a warning.
  double budget = 1e-4;
  /// Step length when no measurement is configured. Second-order Trotter error
  /// on an eigenstate scales as dt^2; 1e-3 keeps a ground state fixed to ~1e-7 over T = 10.
  double idle_dt = 1e-3;
  bool keep_final_state = false;
  /// Per spec: 0 samples the outcome, +1 or -1 forces it without consuming a draw.
  std::vector<int> postselect;
};

/// Time step 1/kappa_max and, per spec, the number of steps between its measurements.
struct WeakSchedule {
  double dt = 0.0;
  std::vector<std::size_t> stride;
};

inline WeakSchedule weak_schedule(const std::vector<MeasurementSpec>& specs, double idle_dt) {
  WeakSchedule s;
  double fastest = 0.0;
  for (const auto& spec : specs) {
    if (!(spec.kappa > 0.0) || !std::isfinite(spec.kappa))
      throw ArgumentError("weak_trajectory: kappa must be positive and finite");
    fastest = std::max(fastest, spec.kappa);
  }
  s.dt = specs.empty() ? idle_dt : 1.0 / fastest;
  for (const auto& spec : specs)
    s.stride.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fastest / spec.kappa))));
  return s;
}

/// Repeats: one symmetric Trotter step of length dt, then every due spec in list
/// order, then a record of all observables. Row 0 holds the initial state.
inline TrajectoryRecord weak_trajectory(const MatrixProductState& psi0, const std::vector<BondTerm>& h,
                                        const std::vector<MeasurementSpec>& specs, double duration,
                                        const std::vector<Observable>& observables, RngStream& rng,
                                        const WeakOptions& opt = {}) {
  const std::size_t n = psi0.length();
  const WeakSchedule sched = weak_schedule(specs, opt.idle_dt);
  const std::size_t steps = detail::step_count(duration, sched.dt);
  std::vector<MeasurementChannel> channels;
  for (const auto& spec : specs) channels.emplace_back(spec, n);
  const TrotterGates gates = make_trotter_gates(h, sched.dt);
  const bool evolve = !h.empty();
  const MeasureOptions mopt{opt.max_bond, opt.tol, opt.fit_sweeps};
  if (!opt.postselect.empty() && opt.postselect.size() != specs.size())
    throw ArgumentError("weak_trajectory: postselect needs one entry per spec");
  for (int f : opt.postselect)
    if (f != 0 && f != 1 && f != -1) throw ArgumentError("weak_trajectory: postselect entries must be 0, 1 or -1");

  TrajectoryRecord rec;
  rec.seed = rng.seed();
  rec.stream = rng.stream();
  rec.dt = sched.dt;
  detail::Recorder out(rec, observables, opt.budget);
  MatrixProductState psi = psi0;
  out.observe_bond(psi);
  out.record(0.0, psi);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t = static_cast<double>(k) * sched.dt;
    if (evolve) {
      TrotterResult r = trotter_step(psi, gates, opt.max_bond, opt.tol);
      out.add_discarded(r.discarded_weight);
      psi = std::move(r.state);
    }
    for (std::size_t s = 0; s < channels.size(); ++s) {
      if (k % sched.stride[s] != 0) continue;
      const int forced = opt.postselect.empty() ? 0 : opt.postselect[s];
      MeasureResult m = forced == 0 ? discrete_measure_step(psi, channels[s], rng, mopt)
                                    : discrete_measure_step(psi, channels[s], forced == 1 ? -1.0 : 2.0, mopt);
      if (forced != 0 && !(m.p > kProbabilityTolerance))
        throw NumericalError("weak_trajectory: postselected outcome has zero probability");
      out.add_discarded(m.discarded_weight);
      rec.outcomes.push_back({t, s, m.mu, m.p});
      psi = std::move(m.state);
    }
    out.observe_bond(psi);
    out.record(t, psi);
  }
  if (opt.keep_final_state) rec.final_state = psi;
  return rec;
}

}  // namespace smps
