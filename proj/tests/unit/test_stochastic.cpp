#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

#include "dense_oracle.hpp"
#include "smps/dmrg.hpp"
#include "smps/lindblad.hpp"
#include "smps/measurement.hpp"
#include "smps/snapshot.hpp"
#include "smps/sse.hpp"

using namespace smps;

namespace {

MeasurementSpec spec_of(std::vector<MeasurementTerm> terms, double phi, double kappa = 100.0) {
  MeasurementSpec s;
  s.terms = std::move(terms);
  s.phi = phi;
  s.kappa = kappa;
  return s;
}

oracle::Matrix dense_observable(const MeasurementSpec& s, std::size_t n) {
  oracle::Matrix a = oracle::Matrix::Zero(1 << n, 1 << n);
  for (const auto& t : s.terms) a += t.coupling * oracle::embed(t.op, t.site, n);
  return a;
}

oracle::Matrix dense_bonds(const std::vector<BondTerm>& terms, std::size_t n) {
  oracle::Matrix h = oracle::Matrix::Zero(1 << n, 1 << n);
  for (const auto& t : terms) {
    const oracle::Matrix left = oracle::Matrix::Identity(1 << t.site, 1 << t.site);
    const oracle::Matrix right = oracle::Matrix::Identity(1 << (n - t.site - 2), 1 << (n - t.site - 2));
    h += oracle::kron(oracle::kron(left, t.h), right);
  }
  return h;
}

MatrixProductState plus_x_state(std::size_t n) {
  Vector v(2);
  v << 1.0 / std::numbers::sqrt2, 1.0 / std::numbers::sqrt2;
  return product_state(n, v);
}

}  // namespace

// ---------------------------------------------------------------- observables

TEST(Observables, ParsesNamesAndColumns) {
  const auto a = parse_observable("sz:3", 8);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].columns(), std::vector<std::string>{"sz_3"});
  EXPECT_EQ(parse_observable("szsz:0,5", 8)[0].name(), "szsz_0_5");
  EXPECT_EQ(parse_observable("purity:5,10", 16)[0].name(), "purity_5_10");
  EXPECT_EQ(parse_observable("purity:2", 16)[0].name(), "purity_2");
  EXPECT_EQ(parse_observable("entropy:8", 16)[0].name(), "entropy_8");
  EXPECT_EQ(parse_observable("sp:1", 4)[0].columns(), (std::vector<std::string>{"sp_1_re", "sp_1_im"}));
  EXPECT_EQ(parse_observable("sxsy:0,2", 4)[0].columns(), std::vector<std::string>{"sxsy_0_2"});
  EXPECT_EQ(parse_observable("spsz:0,2", 4)[0].columns().size(), 2u);
}

TEST(Observables, WildcardExpansion) {
  EXPECT_EQ(parse_observable("sz:*", 5).size(), 5u);
  EXPECT_EQ(parse_observable("szsz:0,*", 5).size(), 4u);
  EXPECT_EQ(parse_observable("szsz:*,*", 4).size(), 12u);
  EXPECT_EQ(parse_observable("entropy:*", 6).size(), 5u);
  const auto cols = observable_columns(parse_observables({"sz:*", "entropy:0"}, 3));
  EXPECT_EQ(cols, (std::vector<std::string>{"sz_0", "sz_1", "sz_2", "entropy_0"}));
}

TEST(Observables, RejectsMalformedTokens) {
  for (const char* bad : {"sz", "foo:1", "sz:9", "sz:a", "szsz:1,1", "szsz:1", "entropy:7", "purity:1,2,3", "sz:1,2",
                          "sz:-1", "sz:"})
    EXPECT_THROW(parse_observable(bad, 8), ConfigError) << bad;
}

TEST(Observables, ValuesMatchDenseVector) {
  const std::size_t n = 5;
  const auto psi = normalize(random_mps(n, 4, 11));
  const auto obs = parse_observables({"sx:1", "sy:2", "sp:0", "szsz:0,3", "sxsx:4,1", "purity:2", "purity:1,3",
                                      "entropy:2"},
                                     n);
  const auto v = evaluate_observables(obs, psi);
  const oracle::Vector x = to_vector(psi);
  auto ev = [&](const oracle::Matrix& m) { return x.dot(m * x); };
  std::size_t k = 0;
  EXPECT_NEAR(v[k++], ev(oracle::embed(oracle::pauli('x'), 1, n)).real(), 1e-12);
  EXPECT_NEAR(v[k++], ev(oracle::embed(oracle::pauli('y'), 2, n)).real(), 1e-12);
  const oracle::Matrix sp = 0.5 * (oracle::pauli('x') + cplx(0, 1) * oracle::pauli('y'));
  const cplx spv = ev(oracle::embed(sp, 0, n));
  EXPECT_NEAR(v[k++], spv.real(), 1e-12);
  EXPECT_NEAR(v[k++], spv.imag(), 1e-12);
  EXPECT_NEAR(v[k++], oracle::zz_expectation(x, n, 0, 3), 1e-12);
  EXPECT_NEAR(v[k++], ev(oracle::embed(oracle::pauli('x'), 4, n) * oracle::embed(oracle::pauli('x'), 1, n)).real(),
              1e-12);
  const oracle::Matrix r1 = oracle::partial_trace_single(x, n, 2);
  EXPECT_NEAR(v[k++], (r1 * r1).trace().real(), 1e-12);
  const oracle::Matrix r2 = oracle::partial_trace_pair(x, n, 1, 3);
  EXPECT_NEAR(v[k++], (r2 * r2).trace().real(), 1e-12);
  EXPECT_GT(v[k], 0.0);
  EXPECT_EQ(v.size(), k + 1);
}

// ---------------------------------------------------------------- bond MPO

TEST(BondTermsMpo, MatchesDenseSum) {
  const std::size_t n = 5;
  auto terms = heisenberg_bonds(n, 0.7);
  terms[1].h += oracle::kron(oracle::pauli('x'), oracle::pauli('z'));
  terms.push_back({3, oracle::kron(oracle::pauli('y'), oracle::Matrix::Identity(2, 2))});
  const Matrix dense = to_dense(bond_terms_mpo(terms, n));
  EXPECT_LT((dense - dense_bonds(terms, n)).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT((to_dense(bond_terms_mpo(heisenberg_bonds(n, 1.0), n)) - to_dense(heisenberg_mpo(n, 1.0)))
                .cwiseAbs()
                .maxCoeff(),
            1e-13);
}

// ---------------------------------------------------------------- discrete measurement

TEST(DiscreteMeasure, ZeroAngleLeavesStateAndSplitsEvenly) {
  const auto psi = normalize(random_mps(4, 3, 2));
  const MeasurementChannel ch(spec_of({{1, ops::sigma_z(), 1.0}}, 0.0), 4);
  RngStream rng(5, 0);
  int plus = 0;
  const int draws = 4000;
  for (int k = 0; k < draws; ++k) {
    const auto r = discrete_measure_step(psi, ch, rng);
    EXPECT_NEAR(r.p_plus, 0.5, 1e-14);
    plus += r.mu == 1;
    if (k < 5) EXPECT_LT(oracle::phase_distance(to_vector(r.state), to_vector(psi)), 1e-13);
  }
  EXPECT_NEAR(plus / static_cast<double>(draws), 0.5, 3.0 * std::sqrt(0.25 / draws));
}

TEST(DiscreteMeasure, ThresholdRuleIsDeterministic) {
  const auto psi = normalize(random_mps(4, 3, 3));
  const MeasurementChannel ch(spec_of({{0, ops::sigma_z(), 1.0}, {2, ops::sigma_x(), -0.5}}, 0.4), 4);
  const double p = discrete_measure_step(psi, ch, 0.0).p_plus;
  EXPECT_EQ(discrete_measure_step(psi, ch, 0.0).mu, 1);
  EXPECT_EQ(discrete_measure_step(psi, ch, std::nextafter(p, 0.0)).mu, 1);
  EXPECT_EQ(discrete_measure_step(psi, ch, p).mu, -1);
  EXPECT_NEAR(discrete_measure_step(psi, ch, p).p, 1.0 - p, 1e-15);
}

TEST(DiscreteMeasure, PosteriorMatchesDenseKraus) {
  const std::size_t n = 6;
  const auto psi = normalize(random_mps(n, 4, 8));
  const oracle::Vector x = to_vector(psi);
  for (const auto& spec : {spec_of({{1, ops::sigma_z(), 1.0}, {4, ops::sigma_y(), 0.6}}, 0.37),
                           spec_of({{3, ops::sigma_x(), 1.3}}, 0.2)}) {
    const MeasurementChannel ch(spec, n);
    const oracle::Matrix a = dense_observable(spec, n);
    for (int mu : {1, -1}) {
      const oracle::Matrix kraus =
          0.5 * (oracle::expm(cplx(0, -spec.phi) * a) + cplx(0, mu) * oracle::expm(cplx(0, spec.phi) * a));
      const oracle::Vector post = kraus * x;
      const auto r = discrete_measure_step(psi, ch, mu == 1 ? 0.0 : 1.0 - 1e-16, MeasureOptions{64, 0.0, 0});
      ASSERT_EQ(r.mu, mu);
      EXPECT_NEAR(r.p, post.squaredNorm(), 1e-12);
      EXPECT_NEAR(norm(r.state), 1.0, 1e-10);
      EXPECT_LT((to_vector(r.state) - post / post.norm()).norm(), 1e-10);
      EXPECT_NEAR(r.state.log_norm_offset() - psi.log_norm_offset(), 0.5 * std::log(r.p), 1e-10);
    }
  }
}

TEST(DiscreteMeasure, FitPathAgreesWithSvdPath) {
  const std::size_t n = 6;
  const auto psi = normalize(random_mps(n, 4, 9));
  const MeasurementChannel ch(spec_of({{1, ops::sigma_z(), 1.0}, {4, ops::sigma_z(), 1.0}}, 0.3), n);
  const auto a = discrete_measure_step(psi, ch, 0.2, MeasureOptions{64, 1e-14, 0});
  const auto b = discrete_measure_step(psi, ch, 0.2, MeasureOptions{64, 1e-14, 3});
  EXPECT_EQ(a.mu, b.mu);
  EXPECT_LT(oracle::aligned_distance(to_vector(a.state), to_vector(b.state)), 1e-9);
}

TEST(DiscreteMeasure, EmpiricalFrequencyMatchesProbability) {
  const std::size_t n = 6;
  const auto psi = normalize(random_mps(n, 4, 21));
  const MeasurementChannel ch(spec_of({{0, ops::sigma_z(), 1.0}, {3, ops::sigma_x(), 0.8}}, 0.5), n);
  RngStream rng(99, 1);
  const int draws = 100000;
  int plus = 0;
  double p = 0.0;
  for (int k = 0; k < draws; ++k) {
    const auto r = discrete_measure_step(psi, ch, rng, MeasureOptions{16, 1e-10, 0});
    p = r.p_plus;
    plus += r.mu == 1;
  }
  EXPECT_GT(std::abs(p - 0.5), 0.01);  // a non-trivial split
  EXPECT_NEAR(plus / static_cast<double>(draws), p, 3.0 * std::sqrt(p * (1 - p) / draws));
}

TEST(DiscreteMeasure, MeasuredObservableIsAMartingale) {
  const std::size_t n = 5;
  const auto psi = normalize(random_mps(n, 4, 31));
  const auto spec = spec_of({{1, ops::sigma_z(), 1.0}, {3, ops::sigma_z(), 0.5}}, 0.25);
  const MeasurementChannel ch(spec, n);
  const auto a = observable_mpo(spec, n);
  const double before = expectation_mpo(psi, a).real();
  // Exact average over both branches.
  const auto up = discrete_measure_step(psi, ch, 0.0);
  const auto down = discrete_measure_step(psi, ch, 1.0 - 1e-16);
  const double avg = up.p * expectation_mpo(up.state, a).real() + down.p * expectation_mpo(down.state, a).real();
  EXPECT_NEAR(avg, before, 1e-12);
  EXPECT_GT(std::abs(expectation_mpo(up.state, a).real() - before), 1e-3);
  // Sampled average.
  RngStream rng(4, 4);
  const int draws = 20000;
  double sum = 0.0, sum2 = 0.0;
  for (int k = 0; k < draws; ++k) {
    const double v = expectation_mpo(discrete_measure_step(psi, ch, rng).state, a).real();
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / draws, var = sum2 / draws - mean * mean;
  EXPECT_NEAR(mean, before, 3.0 * std::sqrt(var / draws));
}

TEST(DiscreteMeasure, ProjectiveLimitOnGroundState) {
  const std::size_t n = 10;
  const auto gs = dmrg(heisenberg_mpo(n, 1.0)).state;
  for (double phi : {0.05, 0.3, std::numbers::pi / 4}) {
    const MeasurementChannel ch(spec_of({{0, ops::sigma_z(), 1.0}}, phi), n);
    const auto r = discrete_measure_step(gs, ch, 0.0);
    EXPECT_NEAR(r.p_plus, 0.5, 1e-6);
  }
  const MeasurementChannel ch(spec_of({{0, ops::sigma_z(), 1.0}}, std::numbers::pi / 4), n);
  // At phi = pi/4, Omega_+ projects onto spin down and Omega_- onto spin up.
  const auto plus = discrete_measure_step(gs, ch, 0.0);
  const auto minus = discrete_measure_step(gs, ch, 0.9999);
  EXPECT_NEAR(expectation_local(plus.state, ops::sigma_z(), 0).real(), -1.0, 1e-10);
  EXPECT_NEAR(expectation_local(minus.state, ops::sigma_z(), 0).real(), 1.0, 1e-10);
}

TEST(DiscreteMeasure, RejectsInconsistentProbability) {
  const auto psi = normalize(random_mps(3, 2, 1));
  // Expectations are normalized, so only a corrupted effect can leave [0, 1].
  MeasurementChannel ch(spec_of({{0, ops::sigma_z(), 1.0}}, 0.3), 3);
  ch.local_effect = 2.0 * Matrix::Identity(2, 2);
  EXPECT_THROW(discrete_measure_step(psi, ch, 0.5), NumericalError);
  ch.local_effect = I_unit * Matrix::Identity(2, 2);
  EXPECT_THROW(discrete_measure_step(psi, ch, 0.5), NumericalError);
  ch.local_effect = (1.0 + 1e-11) * Matrix::Identity(2, 2);
  EXPECT_EQ(discrete_measure_step(psi, ch, 0.5).p_plus, 1.0);  // clamped
  EXPECT_THROW(MeasurementChannel(spec_of({{3, ops::sigma_z(), 1.0}}, 0.3), 3), ArgumentError);
}

// ---------------------------------------------------------------- weak trajectories

TEST(WeakTrajectory, NoMeasurementsKeepGroundStateStationary) {
  const std::size_t n = 6;
  const auto gs = dmrg(heisenberg_mpo(n, 1.0)).state;
  RngStream rng(1, 0);
  const auto obs = parse_observables({"sz:0", "szsz:0,1", "sxsx:3,4", "entropy:3"}, n);
  const auto rec = weak_trajectory(gs, heisenberg_bonds(n, 1.0), {}, 10.0, obs, rng);
  ASSERT_EQ(rec.times.size(), 10001u);
  EXPECT_NEAR(rec.times.back(), 10.0, 1e-9);
  EXPECT_TRUE(rec.outcomes.empty());
  for (std::size_t c = 0; c < rec.columns.size(); ++c)
    for (const auto& row : rec.values) EXPECT_NEAR(row[c], rec.values.front()[c], 1e-6) << rec.columns[c];
  EXPECT_EQ(rng.counter(), 0u);
}

TEST(WeakTrajectory, ScheduleStridesAndRecordShape) {
  const std::size_t n = 6;
  const auto psi = normalize(random_mps(n, 2, 5));
  const std::vector<MeasurementSpec> specs{spec_of({{0, ops::sigma_z(), 1.0}}, 0.1, 100.0),
                                           spec_of({{4, ops::sigma_z(), 1.0}}, 0.1, 50.0)};
  RngStream rng(2, 7);
  const auto rec = weak_trajectory(psi, heisenberg_bonds(n, 1.0), specs, 0.1, parse_observables({"sz:*"}, n), rng);
  EXPECT_DOUBLE_EQ(rec.dt, 0.01);
  ASSERT_EQ(rec.times.size(), 11u);
  for (std::size_t k = 1; k < rec.times.size(); ++k) EXPECT_GT(rec.times[k], rec.times[k - 1]);
  EXPECT_EQ(rec.outcomes.size(), 15u);
  std::size_t second = 0;
  for (const auto& o : rec.outcomes) second += o.spec == 1;
  EXPECT_EQ(second, 5u);
  EXPECT_EQ(rec.values.front().size(), n);
  EXPECT_EQ(rec.truncation.size(), rec.times.size());
  EXPECT_EQ(rec.seed, 2u);
  EXPECT_EQ(rec.stream, 7u);
  EXPECT_EQ(rng.counter(), 15u);
}

TEST(WeakTrajectory, ReplayIsBitIdentical) {
  const std::size_t n = 8;
  const auto gs = dmrg(heisenberg_mpo(n, 1.0), DmrgOptions{16}).state;
  const std::vector<MeasurementSpec> specs{spec_of({{0, ops::sigma_z(), 1.0}, {5, ops::sigma_z(), 1.0}}, 0.2)};
  const auto obs = parse_observables({"sz:*", "purity:0,5"}, n);
  WeakOptions opt;
  opt.max_bond = 16;
  RngStream a(42, 3), b(42, 3), c(42, 4);
  const auto ra = weak_trajectory(gs, heisenberg_bonds(n, 1.0), specs, 0.3, obs, a, opt);
  const auto rb = weak_trajectory(gs, heisenberg_bonds(n, 1.0), specs, 0.3, obs, b, opt);
  const auto rc = weak_trajectory(gs, heisenberg_bonds(n, 1.0), specs, 0.3, obs, c, opt);
  ASSERT_EQ(ra.outcomes.size(), rb.outcomes.size());
  for (std::size_t k = 0; k < ra.outcomes.size(); ++k) EXPECT_EQ(ra.outcomes[k].mu, rb.outcomes[k].mu);
  EXPECT_EQ(ra.values, rb.values);
  EXPECT_NE(ra.values, rc.values);
}

TEST(WeakTrajectory, TruncationBudgetWarnsWithoutAborting) {
  const std::size_t n = 8;
  const auto gs = dmrg(heisenberg_mpo(n, 1.0), DmrgOptions{16}).state;
  WeakOptions opt;
  opt.max_bond = 2;
  opt.budget = 1e-12;
  RngStream rng(3, 0);
  const auto rec = weak_trajectory(gs, heisenberg_bonds(n, 1.0),
                                   {spec_of({{0, ops::sigma_z(), 1.0}}, 0.1)}, 0.05,
                                   parse_observables({"sz:0"}, n), rng, opt);
  EXPECT_EQ(rec.times.size(), 6u);
  EXPECT_EQ(rec.warnings.size(), 1u);
  EXPECT_GT(rec.total_discarded, 1e-12);
  EXPECT_LE(rec.max_bond_used, 16u);
}

TEST(WeakTrajectory, StepsKeepUnitNorm) {
  const std::size_t n = 6;
  auto psi = normalize(random_mps(n, 4, 77));
  const MeasurementChannel ch(spec_of({{1, ops::sigma_x(), 1.0}, {2, ops::sigma_z(), 1.0}}, 0.3), n);
  RngStream rng(8, 8);
  for (int k = 0; k < 50; ++k) {
    psi = trotter_step(psi, heisenberg_bonds(n, 1.0), 0.05, 16, 1e-10).state;
    EXPECT_NEAR(norm(psi), 1.0, 1e-10);
    psi = discrete_measure_step(psi, ch, rng, MeasureOptions{16, 1e-10, 0}).state;
    EXPECT_NEAR(norm(psi), 1.0, 1e-10);
  }
}

// ---------------------------------------------------------------- stochastic Schroedinger equation

TEST(Sse, ZeroRateIsATrotterStep) {
  const std::size_t n = 6;
  const auto psi = normalize(random_mps(n, 4, 12));
  const auto h = heisenberg_bonds(n, 1.0);
  const auto spec = spec_of({{0, ops::sigma_z(), 1.0}, {3, ops::sigma_z(), 1.0}}, 0.0);
  const auto next = sse_euler_step(psi, h, spec, 0.0, 0.7, 0.01, 64, 1e-12);
  const auto ref = normalize(trotter_step(psi, h, 0.01, 64, 1e-12).state);
  EXPECT_LT((to_vector(next) - to_vector(ref)).norm(), 1e-10);
}

TEST(Sse, EulerStepMatchesDenseEquation) {
  const std::size_t n = 4;
  const auto psi = normalize(random_mps(n, 4, 13));
  const auto h = heisenberg_bonds(n, 0.9);
  const oracle::Matrix hd = dense_bonds(h, n);
  const oracle::Vector x = to_vector(psi);
  for (const auto& spec : {spec_of({{0, ops::sigma_z(), 1.0}}, 0.0),
                           spec_of({{1, ops::sigma_z(), 1.0}, {3, ops::sigma_x(), -0.7}}, 0.0)}) {
    const oracle::Matrix a = dense_observable(spec, n);
    const double gamma = 1.3, dt = 0.01, dw = 0.087;
    const double m = x.dot(a * x).real();
    const oracle::Matrix id = oracle::Matrix::Identity(16, 16);
    const oracle::Vector dx = (-cplx(0, 1) * dt * hd + dt * gamma / 2 * (2 * m * a - a * a - m * m * id) +
                               std::sqrt(gamma) * (a - m * id) * dw) *
                              x;
    const oracle::Vector ref = (x + dx).normalized();
    const auto got = sse_euler_step(psi, h, spec, gamma, dw, dt, 64, 0.0, HamiltonianScheme::euler);
    EXPECT_LT((to_vector(got) - ref).norm(), 1e-10);
    EXPECT_NEAR(norm(got), 1.0, 1e-12);

    // Default scheme: same stochastic update followed by a Trotter step.
    const oracle::Vector meas = ((1 - dt * gamma * m * m / 2 - std::sqrt(gamma) * m * dw) * id +
                                 (dt * gamma * m + std::sqrt(gamma) * dw) * a - dt * gamma / 2 * a * a) *
                                x;
    const oracle::Vector split = (oracle::expm(-cplx(0, 1) * dt * hd) * meas).normalized();
    const auto got2 = sse_euler_step(psi, h, spec, gamma, dw, dt, 64, 0.0);
    EXPECT_LT((to_vector(got2) - split).norm(), 1e-6);  // Trotter error only
  }
}

TEST(Sse, NormCollapseIsReported) {
  const auto spec = spec_of({{0, ops::sigma_z(), 1.0}}, 0.0);
  // a = 0 on +x; with dt G = 2 and dW = 0 the update annihilates the state.
  EXPECT_THROW(sse_euler_step(plus_x_state(1), {}, spec, 1.0, 0.0, 2.0, 4, 0.0), IntegrationError);
}

TEST(Sse, SingleSpinStepMatchesTwoLevelFormula) {
  const auto spec = spec_of({{0, ops::sigma_z(), 1.0}}, 0.0);
  Vector v(2);
  v << cplx(0.6, 0.1), cplx(0.3, -0.7);
  v.normalize();
  const auto psi = product_state(1, v);
  const double g = 2.0, dt = 1e-3, dw = -0.04;
  const double m = std::norm(v(0)) - std::norm(v(1));
  const double up = 1 + dt * g / 2 * (2 * m - 1 - m * m) + std::sqrt(g) * (1 - m) * dw;
  const double dn = 1 + dt * g / 2 * (-2 * m - 1 - m * m) + std::sqrt(g) * (-1 - m) * dw;
  Vector ref(2);
  ref << up * v(0), dn * v(1);
  ref.normalize();
  EXPECT_LT((to_vector(sse_euler_step(psi, {}, spec, g, dw, dt, 4, 0.0)) - ref).norm(), 1e-14);
}

TEST(Sse, DephasingPinsSpinsEvenly) {
  const auto spec = spec_of({{0, ops::sigma_z(), 1.0}}, 0.0);
  const auto obs = parse_observables({"sz:0"}, 1);
  int pinned = 0, up = 0;
  const int runs = 200;
  for (int s = 0; s < runs; ++s) {
    RngStream rng(17, static_cast<std::uint64_t>(s));
    const auto rec = sse_trajectory(plus_x_state(1), {}, spec, 1.0, 4.0, 0.01, obs, rng);
    const double z = rec.values.back()[0];
    pinned += std::abs(z) > 0.9;
    up += z > 0;
    EXPECT_NEAR(rec.values.front()[0], 0.0, 1e-15);
  }
  EXPECT_GE(pinned, static_cast<int>(0.9 * runs));
  EXPECT_NEAR(up / static_cast<double>(runs), 0.5, 3.0 * std::sqrt(0.25 / runs));
}

TEST(Sse, ZeroRateKeepsGroundStateStationary) {
  const std::size_t n = 6;
  const auto gs = dmrg(heisenberg_mpo(n, 1.0)).state;
  RngStream rng(1, 1);
  const auto rec = sse_trajectory(gs, heisenberg_bonds(n, 1.0), spec_of({{0, ops::sigma_z(), 1.0}}, 0.0), 0.0, 2.0,
                                  1e-3, parse_observables({"sz:0", "szsz:0,1"}, n), rng);
  for (const auto& row : rec.values) {
    EXPECT_NEAR(row[0], rec.values[0][0], 1e-6);
    EXPECT_NEAR(row[1], rec.values[0][1], 1e-6);
  }
  EXPECT_EQ(rec.increments.size(), 2000u);
}

TEST(Sse, RecordedIncrementsReplayTheTrajectory) {
  const std::size_t n = 4;
  const auto psi = normalize(random_mps(n, 2, 3));
  const auto h = heisenberg_bonds(n, 1.0);
  const auto spec = spec_of({{0, ops::sigma_z(), 1.0}, {2, ops::sigma_x(), 1.0}}, 0.0);
  const auto obs = parse_observables({"sz:*"}, n);
  RngStream rng(5, 2);
  const auto rec = sse_trajectory(psi, h, spec, 1.0, 0.5, 0.01, obs, rng);
  std::vector<double> dws;
  for (const auto& e : rec.increments) dws.push_back(e.dw);
  const auto again = sse_trajectory_path(psi, h, spec, 1.0, 0.01, dws, obs);
  EXPECT_EQ(rec.values, again.values);
  EXPECT_EQ(rec.seed, 5u);
}

// ---------------------------------------------------------------- Lindblad oracle

TEST(Lindblad, DephasingDecaysAtTwiceTheRate) {
  const double gamma = 0.8;
  oracle::Vector x(2);
  x << 1.0 / std::numbers::sqrt2, 1.0 / std::numbers::sqrt2;
  const auto traj = lindblad_oracle(x, Matrix::Zero(2, 2), oracle::pauli('z'), gamma, 3.0, 1e-3, 100);
  EXPECT_NEAR(traj.times.back(), 3.0, 1e-12);
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const double sx = (traj.states[k] * oracle::pauli('x')).trace().real();
    EXPECT_NEAR(sx, std::exp(-2.0 * gamma * traj.times[k]), 1e-8);
  }
}

TEST(Lindblad, UnitaryLimitKeepsPurityAndTrace) {
  const std::size_t n = 4;
  const oracle::Matrix h = oracle::heisenberg(n, 1.0);
  const oracle::Matrix a = oracle::embed(oracle::pauli('z'), 0, n);
  const oracle::Vector x = oracle::random_vector(16, 3);
  const auto unitary = lindblad_oracle(x, h, a, 0.0, 2.0, 1e-3, 200);
  const oracle::Matrix exact = oracle::expm(-cplx(0, 1) * 2.0 * h) * x * x.adjoint() * oracle::expm(cplx(0, 1) * 2.0 * h);
  EXPECT_LT((unitary.states.back() - exact).cwiseAbs().maxCoeff(), 1e-9);
  for (const auto& r : unitary.states) EXPECT_NEAR((r * r).trace().real(), 1.0, 1e-9);
  const auto open = lindblad_oracle(x, h, a, 1.0, 2.0, 1e-3, 200);
  for (const auto& r : open.states) {
    EXPECT_NEAR(r.trace().real(), 1.0, 1e-8);
    EXPECT_LT((r - r.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_LT((open.states.back() * open.states.back()).trace().real(), 0.99);
}

TEST(Lindblad, SizeGuard) {
  const oracle::Vector x = oracle::Vector::Zero(512);
  EXPECT_THROW(lindblad_oracle(x, Matrix::Zero(512, 512), Matrix::Zero(512, 512), 1.0, 1.0, 0.1), SizeError);
}

// ---------------------------------------------------------------- snapshots

TEST(Snapshot, RoundTripIsBitExact) {
  const auto psi = normalize(canonicalize(random_mps(7, 5, 19), 3));
  std::stringstream buf;
  write_snapshot(buf, psi);
  const auto back = read_snapshot(buf);
  ASSERT_EQ(back.length(), psi.length());
  EXPECT_EQ(back.canonical_center(), psi.canonical_center());
  EXPECT_EQ(back.log_norm_offset(), psi.log_norm_offset());
  for (std::size_t i = 0; i < psi.length(); ++i) {
    EXPECT_EQ(back.site(i).shape(), psi.site(i).shape());
    EXPECT_TRUE(std::equal(back.site(i).data().begin(), back.site(i).data().end(), psi.site(i).data().begin()));
  }
}

TEST(Snapshot, RejectsCorruptInput) {
  std::stringstream bad("XXXX");
  EXPECT_THROW(read_snapshot(bad), ArgumentError);
  std::stringstream buf;
  write_snapshot(buf, random_mps(3, 2, 1));
  const std::string s = buf.str();
  std::stringstream cut(s.substr(0, s.size() - 5));
  EXPECT_THROW(read_snapshot(cut), ArgumentError);
}
