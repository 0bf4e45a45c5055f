#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "qbattery/chain_model.hpp"
#include "qbattery/minimal_model.hpp"
#include "qbattery/protocol.hpp"

using namespace qbattery;

namespace {

const double kR2 = std::sqrt(2.0);

LocalDecomposition minimal_model(double h, double k) {
  return minimal::build_minimal_hamiltonian(minimal::MinimalParams::make(h, k));
}

ComplexMatrix dense_of(const OperatorSum& op) {
  const auto dim = Eigen::Index{1} << op.num_sites();
  ComplexMatrix m = op.offset() * ComplexMatrix::Identity(dim, dim);
  for (const auto& t : op.terms()) m += oracle::dense(t.label(), t.coefficient());
  return m;
}

struct DenseRun {
  ComplexMatrix rho;
  double e_b = 0.0;
  double e_b_initial = 0.0;
};

// Straight transcription of the protocol with dense matrices and a separate eigensolve.
DenseRun dense_protocol(const LocalDecomposition& d, const ProtocolSpec& spec, double theta) {
  const int n = d.num_sites();
  const auto dim = Eigen::Index{1} << n;
  const ComplexMatrix h = dense_of(d.total());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
  const ComplexVector top = es.eigenvectors().col(dim - 1);
  const ComplexMatrix id = ComplexMatrix::Identity(dim, dim);
  const ComplexMatrix sa = oracle::dense(spec.sigma_a.label());
  const ComplexMatrix sb = oracle::dense(spec.sigma_b.label());
  const ComplexMatrix hb = dense_of(d.piece(static_cast<std::size_t>(spec.site_b)));
  DenseRun out;
  out.rho = ComplexMatrix::Zero(dim, dim);
  for (int mu : {-1, 1}) {
    const ComplexMatrix p = 0.5 * (id + static_cast<double>(mu) * sa);
    const ComplexMatrix u = std::cos(theta) * id - kI * static_cast<double>(mu) * std::sin(theta) * sb;
    const ComplexVector v = u * p * top;
    out.rho += v * v.adjoint();
  }
  out.e_b = (out.rho * hb).trace().real();
  out.e_b_initial = top.dot(hb * top).real();
  return out;
}

}  // namespace

TEST(Conditions, MinimalModelDefaultSpecSatisfiesAll) {
  const auto r = check_protocol_conditions(minimal_model(1.0, 1.0), minimal::default_spec());
  EXPECT_TRUE(r.measurement_commutes_with_bob);
  EXPECT_TRUE(r.bob_local_dynamics);
  EXPECT_TRUE(r.unique_reference);
  EXPECT_TRUE(r.entangled);
  EXPECT_TRUE(r.all());
  EXPECT_TRUE(r.diagnostics.empty());
}

TEST(Conditions, ZMeasurementFailsCommutation) {
  const auto spec = ProtocolSpec::make(2, 0, Pauli::Z, 1, Pauli::Y);
  const auto d = minimal_model(1.0, 1.0);
  const auto r = check_protocol_conditions(d, spec);
  EXPECT_FALSE(r.measurement_commutes_with_bob);
  ASSERT_FALSE(r.diagnostics.empty());
  EXPECT_NE(r.diagnostics.front().find("XX"), std::string::npos);
  EXPECT_THROW(run_protocol_exact(d, spec), PreconditionFailed);
}

TEST(Conditions, DecoupledModelFailsEntanglement) {
  const auto d = minimal::build_minimal_hamiltonian_unchecked(1.0, 0.0);
  const auto r = check_protocol_conditions(d, minimal::default_spec());
  EXPECT_TRUE(r.structural());
  EXPECT_TRUE(r.unique_reference);
  EXPECT_FALSE(r.entangled);
  EXPECT_NEAR(r.entropy, 0.0, 1e-12);
}

TEST(Conditions, BobDynamicsMustStayLocal) {
  // Bob on site 1 of a four-site chain: the bond (1,2) belongs to piece 2 and does not
  // commute with Y_1.
  const auto chain = chain::build_ising_chain(chain::ChainParams::uniform(4, 1.0, 1.0));
  const auto spec = ProtocolSpec::make(4, 0, Pauli::X, 1, Pauli::Y);
  const auto r = check_protocol_conditions(chain.decomposition, spec);
  EXPECT_TRUE(r.measurement_commutes_with_bob);
  EXPECT_FALSE(r.bob_local_dynamics);
  ASSERT_FALSE(r.diagnostics.empty());
  EXPECT_NE(r.diagnostics.back().find("IXXI"), std::string::npos);
}

TEST(Spec, Validation) {
  EXPECT_THROW(ProtocolSpec::make(2, 0, Pauli::X, 0, Pauli::Y), InvalidArgument);
  EXPECT_THROW(ProtocolSpec::make(2, 0, Pauli::X, 2, Pauli::Y), InvalidArgument);
  EXPECT_THROW(ProtocolSpec::make(2, 0, Pauli::I, 1, Pauli::Y), InvalidArgument);
  auto spec = minimal::default_spec();
  spec.sigma_b = PauliString::from_label("XY");
  EXPECT_THROW(spec.validate(2), InvalidArgument);
  spec.sigma_b = PauliString::from_label("IY", 2.0);
  EXPECT_THROW(spec.validate(2), InvalidArgument);
}

TEST(ProjectMeasure, Examples) {
  const auto emax = minimal::emax_closed_form(minimal::MinimalParams::make(1.0, 1.0));
  const auto plus = project_measure(emax, PauliString::from_label("XI"), 1);
  EXPECT_NEAR(plus.probability, 0.5, 1e-12);

  const auto zero = project_measure(StateVector::basis(1, 0), PauliString::from_label("Z"), 1);
  EXPECT_NEAR(zero.probability, 1.0, 1e-15);
  EXPECT_NEAR(std::abs(zero.post_state[0]), 1.0, 1e-15);

  const auto e34 = minimal::emax_closed_form(minimal::MinimalParams::make(3.0, 4.0));
  const auto minus = project_measure(e34, PauliString::from_label("XI"), -1);
  EXPECT_NEAR(minus.probability, 0.5, 1e-12);
  // Dense projector (1 - X0)/2 applied to the same state.
  const ComplexMatrix proj = 0.5 * (ComplexMatrix::Identity(4, 4) - oracle::dense("XI"));
  const ComplexVector expected = (proj * e34.amplitudes()).normalized();
  EXPECT_NEAR(std::abs(expected.dot(minus.post_state.amplitudes())), 1.0, 1e-12);
  const double frozen[] = {0.3162277660, 0.6324555320, -0.3162277660, -0.6324555320};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(minus.post_state[i].real(), frozen[i], 1e-9);
}

TEST(ProjectMeasure, ZeroBranchAndBadOutcome) {
  EXPECT_THROW(project_measure(StateVector::basis(1, 0), PauliString::from_label("Z"), -1), ZeroBranch);
  EXPECT_THROW(project_measure(StateVector::basis(1, 0), PauliString::from_label("Z"), 0), InvalidArgument);
  EXPECT_THROW(project_measure(StateVector::basis(1, 0), PauliString::from_label("Z", 2.0), 1),
               InvalidArgument);
}

TEST(XiEtaTest, MinimalModelValues) {
  const auto d = minimal_model(1.0, 1.0);
  const auto emax = highest_energy_state(d.total()).emax_state;
  const auto xe = compute_xi_eta(emax, d, minimal::default_spec());
  EXPECT_NEAR(xe.xi, 6.0 / kR2, 1e-12);
  EXPECT_NEAR(xe.eta, 2.0 / kR2, 1e-12);
  EXPECT_NEAR(predicted_energy_closed_form(xe, ProtocolKind::battery), (std::sqrt(10.0) - 3.0) / kR2, 1e-12);

  const auto d34 = minimal_model(3.0, 4.0);
  const auto xe34 = compute_xi_eta(highest_energy_state(d34.total()).emax_state, d34, minimal::default_spec());
  EXPECT_NEAR(0.5 * (std::hypot(xe34.xi, xe34.eta) - xe34.xi), 0.3440037453, 1e-9);
  EXPECT_NEAR(0.5 * (std::hypot(xe34.xi, xe34.eta) - xe34.xi), (std::sqrt(1825.0) - 41.0) / 5.0, 1e-12);
}

TEST(XiEtaTest, DecoupledModelHasNoCorrelation) {
  const auto d = minimal::build_minimal_hamiltonian_unchecked(1.0, 0.0);
  const auto emax = highest_energy_state(d.total()).emax_state;
  EXPECT_NEAR(compute_xi_eta(emax, d, minimal::default_spec()).eta, 0.0, 1e-14);
}

TEST(XiEtaTest, ClosedFormMatchesDenseSimulationAtEveryAngle) {
  // Fixes the signs of xi and eta: the closed form must track the dense protocol for all theta.
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  for (int trial = 0; trial < 40; ++trial) {
    const auto d = minimal_model(u(rng), u(rng));
    const auto emax = highest_energy_state(d.total()).emax_state;
    const auto xe = compute_xi_eta(emax, d, minimal::default_spec());
    const double theta = angle(rng);
    const auto dense = dense_protocol(d, minimal::default_spec(), theta);
    EXPECT_NEAR(predicted_energy_closed_form(xe, theta, ProtocolKind::battery),
                dense.e_b - dense.e_b_initial, 1e-10);
  }
}

TEST(OptimalTheta, Examples) {
  EXPECT_NEAR(optimal_theta({1.0, 0.0}), 0.0, 1e-15);
  EXPECT_NEAR(optimal_theta({0.0, 1.0}), std::numbers::pi / 4, 1e-15);
  EXPECT_NEAR(2.0 * optimal_theta({4.2426407, 1.4142136}), 0.3217506, 1e-7);
  EXPECT_THROW(optimal_theta({0.0, 0.0}), DegenerateAngle);
}

TEST(ConditionalUnitaryTest, Examples) {
  const auto spec = minimal::default_spec();
  EXPECT_LT((conditional_unitary(spec, 0.0, 1) - ComplexMatrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-15);
  const ComplexMatrix expected = -kI * oracle::dense("IY");
  EXPECT_LT((conditional_unitary(spec, std::numbers::pi / 2, 1) - expected).cwiseAbs().maxCoeff(), 1e-15);
  for (int mu : {-1, 1}) {
    const ComplexMatrix u = conditional_unitary(spec, 0.37, mu);
    EXPECT_TRUE(is_unitary(u));
    std::mt19937_64 rng(1);
    const ComplexVector v = oracle::random_state(rng, 4);
    EXPECT_LT((apply_conditional_unitary(spec, 0.37, mu, v) - u * v).norm(), 1e-14);
  }
  EXPECT_THROW(conditional_unitary(spec, 0.1, 0), InvalidArgument);
}

TEST(RunExact, MinimalModelHeadline) {
  const auto r = run_protocol_exact(minimal_model(1.0, 1.0), minimal::default_spec());
  EXPECT_NEAR(r.e_b_simulated, (std::sqrt(10.0) - 3.0) / kR2, 1e-12);
  EXPECT_NEAR(r.e_b_simulated, 0.1147476, 1e-7);
  EXPECT_NEAR(r.e_b_initial, 0.0, 1e-12);
  EXPECT_NEAR(r.e_b_predicted, r.e_b_gain(), 1e-12);
  EXPECT_NEAR(r.theta_used, minimal::optimal_phi(minimal::MinimalParams::make(1.0, 1.0)), 1e-12);
  EXPECT_NEAR(r.branch_probability(-1) + r.branch_probability(1), 1.0, 1e-12);
  EXPECT_NEAR(r.alice_energy_change, -1.0 / kR2, 1e-12);
}

TEST(RunExact, MinimalModelThreeFour) {
  const auto r = run_protocol_exact(minimal_model(3.0, 4.0), minimal::default_spec());
  EXPECT_NEAR(r.e_b_simulated, (std::sqrt(1825.0) - 41.0) / 5.0, 1e-12);
  EXPECT_NEAR(r.e_b_simulated, 0.3440037, 1e-7);
}

TEST(RunExact, ZeroAngleLeavesBobUnchanged) {
  const auto d = minimal_model(1.0, 1.0);
  const auto r = run_protocol_exact(d, minimal::default_spec(0.0));
  EXPECT_NEAR(r.e_b_simulated, 0.0, 1e-12);
  EXPECT_NEAR(r.e_b_predicted, 0.0, 1e-15);
  // rho = sum_mu P(mu)|E><E|P(mu).
  const auto emax = highest_energy_state(d.total()).emax_state;
  ComplexMatrix expected = ComplexMatrix::Zero(4, 4);
  for (int mu : {-1, 1}) {
    const ComplexVector v = 0.5 * (emax.amplitudes() + static_cast<double>(mu) * oracle::dense("XI") * emax.amplitudes());
    expected += v * v.adjoint();
  }
  ASSERT_TRUE(r.rho.has_value());
  EXPECT_LT((r.rho->matrix() - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(RunExact, DensityMatrixIsValidAndConsistent) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = minimal_model(u(rng), u(rng));
    const auto r = run_protocol_exact(d, minimal::default_spec());
    ASSERT_TRUE(r.rho.has_value());
    EXPECT_TRUE(r.rho->is_valid());
    EXPECT_NEAR(r.rho->trace_with(materialize(d.piece(1))), r.e_b_simulated, 1e-12);
    const auto dense = dense_protocol(d, minimal::default_spec(), r.theta_used);
    EXPECT_LT((r.rho->matrix() - dense.rho).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(r.e_b_simulated, dense.e_b, 1e-10);
  }
}

TEST(RunExact, BranchesPairMeasurementWithMatchingRotation) {
  // Swapping the rotation sign across branches must change the result; the reported
  // branches must reproduce the correctly paired dense computation.
  const auto d = minimal_model(1.0, 1.0);
  const auto spec = minimal::default_spec();
  const auto r = run_protocol_exact(d, spec);
  const auto emax = highest_energy_state(d.total()).emax_state;
  const ComplexMatrix hb = materialize(d.piece(1));
  double swapped = 0.0;
  for (int mu : {-1, 1}) {
    const auto& br = r.branch(mu);
    EXPECT_EQ(br.mu, mu);
    ASSERT_TRUE(br.post_measurement && br.post_unitary);
    const ComplexVector measured = project(emax.amplitudes(), spec.sigma_a, mu);
    const ComplexVector wrong = apply_conditional_unitary(spec, r.theta_used, -mu, measured);
    swapped += wrong.dot(hb * wrong).real();
    const ComplexVector right = apply_conditional_unitary(spec, r.theta_used, mu, measured).normalized();
    EXPECT_NEAR(std::abs(right.dot(br.post_unitary->amplitudes())), 1.0, 1e-12);
  }
  EXPECT_GT(std::abs(swapped - r.e_b_simulated), 1e-3);
}

TEST(RunExact, BatteryOnHEqualsQetOnMinusH) {
  for (auto [h, k] : {std::pair{1.0, 1.0}, std::pair{3.0, 4.0}, std::pair{0.4, 2.2}}) {
    const auto d = minimal_model(h, k);
    auto qet_spec = minimal::default_spec();
    qet_spec.kind = ProtocolKind::qet;
    const auto battery = run_protocol_exact(d, minimal::default_spec());
    const auto qet = run_protocol_exact(negate_hamiltonian(d), qet_spec);
    EXPECT_NEAR(battery.theta_used, qet.theta_used, 1e-12);
    EXPECT_NEAR(battery.e_b_simulated, -qet.e_b_simulated, 1e-12);
    EXPECT_NEAR(battery.e_b_predicted, -qet.e_b_predicted, 1e-12);
    EXPECT_LT((battery.rho->matrix() - qet.rho->matrix()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT(qet.e_b_simulated, 0.0);
  }
}

TEST(RunExact, ChainsNeverLoseBobEnergyAndMatchPrediction) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 5;
    const auto model = oracle::random_chain(rng, n);
    const auto spec = ProtocolSpec::make(n, n - 2, Pauli::X, n - 1, Pauli::Y);
    const auto r = run_protocol_exact(model.decomposition, spec);
    EXPECT_GE(r.e_b_simulated, r.e_b_initial - 1e-10);
    EXPECT_NEAR(r.e_b_predicted_absolute(), r.e_b_simulated, 1e-9);
    const auto dense = dense_protocol(model.decomposition, spec, r.theta_used);
    EXPECT_NEAR(dense.e_b, r.e_b_simulated, 1e-9);
  }
}

TEST(RunSampled, DeterministicPerSeed) {
  const auto d = minimal_model(1.0, 1.0);
  for (auto est : {SampleEstimator::conditional_expectation, SampleEstimator::energy_readout,
                   SampleEstimator::pauli_readout}) {
    const auto a = run_protocol_sampled(d, minimal::default_spec(), 5000, 42, est);
    const auto b = run_protocol_sampled(d, minimal::default_spec(), 5000, 42, est);
    EXPECT_EQ(std::memcmp(&a.mean, &b.mean, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&a.std_error, &b.std_error, sizeof(double)), 0);
    EXPECT_EQ(a.outcome_counts, b.outcome_counts);
  }
  const auto c = run_protocol_sampled(d, minimal::default_spec(), 5000, 43, SampleEstimator::pauli_readout);
  const auto a = run_protocol_sampled(d, minimal::default_spec(), 5000, 42, SampleEstimator::pauli_readout);
  EXPECT_NE(a.mean, c.mean);
}

TEST(RunSampled, SingleShotIsOneBranchEnergy) {
  const auto d = minimal_model(3.0, 4.0);
  const auto exact = run_protocol_exact(d, minimal::default_spec());
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = run_protocol_sampled(d, minimal::default_spec(), 1, seed);
    EXPECT_EQ(s.std_error, 0.0);
    const bool matches = s.mean == exact.branch(-1).bob_energy || s.mean == exact.branch(1).bob_energy;
    EXPECT_TRUE(matches);
    EXPECT_EQ(s.outcome_counts[0] + s.outcome_counts[1], 1u);
  }
  EXPECT_THROW(run_protocol_sampled(d, minimal::default_spec(), 0, 1), InvalidArgument);
}

TEST(RunSampled, ConditionalEstimatorHasZeroSpreadWhenBranchesAgree) {
  const auto d = minimal_model(1.0, 1.0);
  const auto exact = run_protocol_exact(d, minimal::default_spec());
  EXPECT_NEAR(exact.branch(-1).bob_energy, exact.branch(1).bob_energy, 1e-12);
  const auto s = run_protocol_sampled(d, minimal::default_spec(), 2000, 5);
  EXPECT_NEAR(s.mean, exact.e_b_simulated, 1e-12);
  EXPECT_LT(s.std_error, 1e-12);
}

TEST(RunSampled, BranchStatesAreEigenstatesOfBobsHamiltonian) {
  // At h = k = 1 both branch states sit in the top eigenspace of H_B, so even a
  // projective energy readout is deterministic.
  const auto d = minimal_model(1.0, 1.0);
  const auto s = run_protocol_sampled(d, minimal::default_spec(), 2000, 7, SampleEstimator::energy_readout);
  EXPECT_LT(s.std_error, 1e-12);
  EXPECT_NEAR(s.mean, s.exact, 1e-12);
  const auto eig = hermitian_eigen(materialize(d.piece(1)));
  EXPECT_NEAR(eig.values(3), s.exact, 1e-12);
}

TEST(RunSampled, EnergyReadoutConvergesOffTheSymmetricPoint) {
  const auto d = minimal_model(0.6, 1.9);
  const auto exact = run_protocol_exact(d, minimal::default_spec());
  const auto s = run_protocol_sampled(d, minimal::default_spec(), 20000, 7, SampleEstimator::energy_readout);
  EXPECT_NEAR(s.exact, exact.e_b_simulated, 1e-15);
  if (s.std_error > 0.0) {
    EXPECT_LT(std::abs(s.mean - s.exact), 3.0 * s.std_error);
  } else {
    EXPECT_NEAR(s.mean, s.exact, 1e-12);
  }
}

TEST(RunSampled, PauliReadoutConvergesWithinThreeStandardErrors) {
  const auto d = minimal_model(1.0, 1.0);
  const auto s = run_protocol_sampled(d, minimal::default_spec(), 20000, 7, SampleEstimator::pauli_readout);
  EXPECT_GT(s.std_error, 0.0);
  EXPECT_LT(std::abs(s.mean - s.exact), 3.0 * s.std_error);
  EXPECT_NEAR(static_cast<double>(s.outcome_counts[0]) / 20000.0, 0.5, 0.02);
}

TEST(ClassicalDensity, Examples) {
  EXPECT_NEAR(classical_density_bound(minimal_model(1.0, 1.0)), 0.0, 1e-12);
  const auto d = LocalDecomposition::from_pieces({OperatorSum(2, {PauliString::from_label("ZI", -1.0)}),
                                                  OperatorSum(2, {PauliString::from_label("IZ", -1.0)})});
  EXPECT_NEAR(classical_density_bound(d), 1.0, 1e-14);
}

TEST(CounterRngTest, ReproducibleAndSplittable) {
  const CounterRng a(9, 0);
  const CounterRng b(9, 0);
  const CounterRng c(9, 1);
  int equal = 0;
  double sum = 0.0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    EXPECT_EQ(a.bits(i), b.bits(i));
    equal += a.bits(i) == c.bits(i);
    const double x = a.uniform(i);
    ASSERT_GE(x, 0.0);
    ASSERT_LT(x, 1.0);
    sum += x;
  }
  EXPECT_EQ(equal, 0);
  EXPECT_NEAR(sum / 10000.0, 0.5, 0.01);
  EXPECT_EQ(a.split(3).bits(0), b.split(3).bits(0));
  EXPECT_NE(a.split(3).bits(0), a.split(4).bits(0));
}
