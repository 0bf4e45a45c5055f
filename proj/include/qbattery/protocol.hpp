#pragma once

// Measure / communicate / rotate protocol on an extremal eigenstate.
//
// Alice measures sigma_A with projectors P(mu) = (1 + mu sigma_A) / 2, sends mu to
// Bob, and Bob applies U(mu) = cos(theta) I - i mu sin(theta) sigma_B. Averaging
// over mu gives rho = sum_mu U(mu) P(mu) |ref><ref| P(mu) U(mu)^dagger.
//
// ProtocolKind::battery uses the highest energy state of H; ProtocolKind::qet uses
// the ground state (ordinary energy teleportation). Running the battery on H is
// the same computation as running QET on -H.
//
// xi and eta are evaluated in the teleportation frame: on H_f = s * (H - E_ref),
// with s = -1 for the battery and s = +1 for QET, so that xi >= 0 always and
//   cos 2theta = xi / r,  sin 2theta = eta / r,  r = sqrt(xi^2 + eta^2),
// and Bob's local energy changes by (r - xi) / 2 (battery) or -(r - xi) / 2 (QET).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qbattery/errors.hpp"
#include "qbattery/pauli.hpp"
#include "qbattery/rng.hpp"
#include "qbattery/spectral.hpp"
#include "qbattery/tensor.hpp"

namespace qbattery {

enum class ProtocolKind { battery, qet };

inline const char* to_string(ProtocolKind k) { return k == ProtocolKind::battery ? "battery" : "qet"; }

/// +1 for QET, -1 for the battery (the sign that maps H onto the teleportation frame).
inline double frame_sign(ProtocolKind k) { return k == ProtocolKind::battery ? -1.0 : 1.0; }

struct ProtocolSpec {
  int site_a = 0;
  int site_b = 1;
  PauliString sigma_a;
  PauliString sigma_b;
  std::optional<double> theta;  // empty: optimal angle
  ProtocolKind kind = ProtocolKind::battery;
  double degeneracy_tol = kDefaultDegeneracyTol;

  static ProtocolSpec make(int num_sites, int site_a, Pauli letter_a, int site_b, Pauli letter_b,
                           std::optional<double> theta = std::nullopt,
                           ProtocolKind kind = ProtocolKind::battery) {
    if (letter_a == Pauli::I || letter_b == Pauli::I) {
      throw InvalidArgument("measurement and rotation generators must be X, Y or Z");
    }
    ProtocolSpec spec;
    spec.site_a = site_a;
    spec.site_b = site_b;
    spec.sigma_a = PauliString::single(num_sites, site_a, letter_a);
    spec.sigma_b = PauliString::single(num_sites, site_b, letter_b);
    spec.theta = theta;
    spec.kind = kind;
    spec.validate(num_sites);
    return spec;
  }

  void validate(int num_sites) const {
    if (site_a < 0 || site_a >= num_sites || site_b < 0 || site_b >= num_sites) {
      throw InvalidArgument("protocol sites out of range for " + std::to_string(num_sites) + " sites");
    }
    if (site_a == site_b) throw InvalidArgument("Alice and Bob must sit on different sites");
    check_local_involution(sigma_a, site_a, num_sites, "sigma_A");
    check_local_involution(sigma_b, site_b, num_sites, "sigma_B");
    if (!(degeneracy_tol > 0.0)) throw InvalidArgument("degeneracy tolerance must be positive");
  }

 private:
  static void check_local_involution(const PauliString& s, int site, int num_sites,
                                     const std::string& name) {
    if (s.num_sites() != num_sites) throw InvalidArgument(name + " has the wrong number of sites");
    const auto supp = s.support();
    if (supp.size() != 1 || supp.front() != site) {
      throw InvalidArgument(name + " must act on site " + std::to_string(site) + " only");
    }
    const auto sq = multiply(s, s);
    if (std::abs(sq.coefficient() - Complex(1.0)) > kCoefficientCutoff) {
      throw InvalidArgument(name + " does not square to the identity");
    }
  }
};

struct ConditionReport {
  bool measurement_commutes_with_bob = false;  // [P_A(mu), H_B] = 0
  bool bob_local_dynamics = false;             // [H, sigma_B] = [H_B, sigma_B]
  bool unique_reference = false;               // extremal level non-degenerate
  bool entangled = false;                      // entropy across the A|B cut > 0
  double gap = 0.0;
  double entropy = 0.0;
  int cut_site = 0;
  std::vector<std::string> diagnostics;

  bool structural() const { return measurement_commutes_with_bob && bob_local_dynamics; }
  bool all() const { return structural() && unique_reference && entangled; }
};

inline constexpr double kEntanglementThreshold = 1e-10;

namespace detail {

inline void check_pieces_cover_sites(const LocalDecomposition& d, const ProtocolSpec& spec) {
  spec.validate(d.num_sites());
  const auto n = static_cast<int>(d.size());
  if (spec.site_a >= n || spec.site_b >= n) {
    throw InvalidArgument("decomposition has " + std::to_string(n) +
                          " pieces; pieces are indexed by site");
  }
}

inline std::string describe_terms(const std::vector<PauliString>& terms) {
  std::string out;
  for (const auto& t : terms) {
    if (!out.empty()) out += ", ";
    out += detail::format_coefficient(t.coefficient()) + "*" + t.label();
  }
  return out;
}

inline ConditionReport structural_conditions(const LocalDecomposition& d, const ProtocolSpec& spec) {
  ConditionReport report;
  const auto& h_b = d.piece(static_cast<std::size_t>(spec.site_b));
  const auto bad_a = noncommuting_terms(h_b, spec.sigma_a);
  report.measurement_commutes_with_bob = bad_a.empty();
  if (!bad_a.empty()) {
    report.diagnostics.push_back("sigma_A = " + spec.sigma_a.label() +
                                 " does not commute with H_B terms: " + describe_terms(bad_a));
  }
  const auto rest = d.complement(static_cast<std::size_t>(spec.site_b));
  const auto bad_b = noncommuting_terms(rest, spec.sigma_b);
  report.bob_local_dynamics = bad_b.empty();
  if (!bad_b.empty()) {
    report.diagnostics.push_back("sigma_B = " + spec.sigma_b.label() +
                                 " does not commute with terms outside H_B: " + describe_terms(bad_b));
  }
  return report;
}

inline void fill_spectral_conditions(ConditionReport& report, const SpectrumSummary& spectrum,
                                     const ProtocolSpec& spec) {
  const bool top = spec.kind == ProtocolKind::battery;
  report.gap = top ? spectrum.gap_top : spectrum.gap_bottom;
  report.unique_reference = report.gap >= spec.degeneracy_tol;
  if (!report.unique_reference) {
    report.diagnostics.push_back(std::string(top ? "highest" : "lowest") +
                                 " energy level is degenerate (gap " + std::to_string(report.gap) + ")");
  }
  report.cut_site = std::min(spec.site_a, spec.site_b) + 1;
  const auto& ref = top ? spectrum.emax_state : spectrum.emin_state;
  report.entropy = entanglement_check(ref, report.cut_site);
  report.entangled = report.entropy > kEntanglementThreshold;
  if (!report.entangled) {
    report.diagnostics.push_back("reference state is a product state across the cut at site " +
                                 std::to_string(report.cut_site));
  }
}

inline void require_structural(const ConditionReport& report) {
  if (report.structural()) return;
  std::string msg = "protocol preconditions violated";
  for (const auto& d : report.diagnostics) msg += "; " + d;
  throw PreconditionFailed(msg);
}

}  // namespace detail

/// Checks the four conditions behind the closed-form energy prediction. Never throws
/// for a well-formed spec.
inline ConditionReport check_protocol_conditions(const LocalDecomposition& d, const ProtocolSpec& spec) {
  detail::check_pieces_cover_sites(d, spec);
  auto report = detail::structural_conditions(d, spec);
  detail::fill_spectral_conditions(report, spectrum_summary(d.total()), spec);
  return report;
}

struct MeasurementBranch {
  double probability = 0.0;
  StateVector post_state;
};

/// Unnormalized P(mu)|v> = (v + mu sigma v) / 2.
inline ComplexVector project(const ComplexVector& v, const PauliString& sigma, int mu) {
  return 0.5 * (v + static_cast<double>(mu) * act_on(sigma, v));
}

inline void check_outcome(int mu) {
  if (mu != 1 && mu != -1) throw InvalidArgument("measurement outcome must be +1 or -1");
}

/// Born probability and normalized post-measurement state for outcome mu.
inline MeasurementBranch project_measure(const StateVector& state, const PauliString& sigma, int mu) {
  check_outcome(mu);
  if (sigma.num_sites() != state.num_sites()) throw InvalidArgument("project_measure: site mismatch");
  if (std::abs(multiply(sigma, sigma).coefficient() - Complex(1.0)) > kCoefficientCutoff) {
    throw InvalidArgument("project_measure: operator is not an involution");
  }
  const ComplexVector v = project(state.amplitudes(), sigma, mu);
  const double p = v.squaredNorm();
  if (p < 1e-14) throw ZeroBranch(p);
  return {p, StateVector::normalized(state.num_sites(), v)};
}

struct XiEta {
  double xi = 0.0;
  double eta = 0.0;
};

/// xi = <sigma_B H_f sigma_B>, eta = <sigma_A i[H_f, sigma_B]> on the reference state,
/// with H_f the teleportation-frame Hamiltonian described at the top of this file.
inline XiEta compute_xi_eta(const StateVector& reference, const LocalDecomposition& d,
                            const ProtocolSpec& spec) {
  detail::check_pieces_cover_sites(d, spec);
  detail::require_structural(detail::structural_conditions(d, spec));
  const double s = frame_sign(spec.kind);
  const auto& h = d.total();
  const ComplexVector& v = reference.amplitudes();

  const Complex e_ref = braket(v, h);
  const ComplexVector flipped = act_on(spec.sigma_b, v);
  const Complex flipped_energy = braket(flipped, h);
  const OperatorSum sigma_b_op(h.num_sites(), {spec.sigma_b});
  // sigma_A i[H, sigma_B]; the offset and the zero-point shift drop out of the commutator.
  const ComplexVector hv = act_on(commutator(h, sigma_b_op), v);
  const Complex raw_eta = kI * v.dot(act_on(spec.sigma_a, hv));

  const double tol = 1e-8 * std::max(1.0, std::abs(flipped_energy));
  if (std::abs(flipped_energy.imag()) > tol || std::abs(e_ref.imag()) > tol ||
      std::abs(raw_eta.imag()) > tol) {
    throw PreconditionFailed("xi/eta have imaginary parts above 1e-8; preconditions violated");
  }
  return {s * (flipped_energy.real() - e_ref.real()), s * raw_eta.real()};
}

/// theta in (-pi/2, pi/2] with cos 2theta = xi/r and sin 2theta = eta/r.
inline double optimal_theta(const XiEta& xe) {
  if (std::hypot(xe.xi, xe.eta) < 1e-14) throw DegenerateAngle();
  return 0.5 * std::atan2(xe.eta, xe.xi);
}

/// Bob's energy change for rotation angle theta, expressed in the original frame.
inline double predicted_energy_closed_form(const XiEta& xe, double theta, ProtocolKind kind) {
  const double teleport_frame =
      0.5 * (xe.xi * (1.0 - std::cos(2.0 * theta)) - xe.eta * std::sin(2.0 * theta));
  return frame_sign(kind) * teleport_frame;
}

/// Bob's energy change at the optimal angle: (r - xi)/2 for the battery, -(r - xi)/2 for QET.
inline double predicted_energy_closed_form(const XiEta& xe, ProtocolKind kind) {
  return -frame_sign(kind) * 0.5 * (std::hypot(xe.xi, xe.eta) - xe.xi);
}

/// cos(theta) I - i mu sin(theta) sigma_B on the full space.
inline ComplexMatrix conditional_unitary(const ProtocolSpec& spec, double theta, int mu) {
  check_outcome(mu);
  const auto dim = dim_for_sites(spec.sigma_b.num_sites());
  const ComplexMatrix sigma = materialize(OperatorSum(spec.sigma_b.num_sites(), {spec.sigma_b}));
  return std::cos(theta) * ComplexMatrix::Identity(dim, dim) -
         kI * static_cast<double>(mu) * std::sin(theta) * sigma;
}

/// U(mu) applied to amplitudes without forming the matrix.
inline ComplexVector apply_conditional_unitary(const ProtocolSpec& spec, double theta, int mu,
                                               const ComplexVector& v) {
  return std::cos(theta) * v -
         kI * static_cast<double>(mu) * std::sin(theta) * act_on(spec.sigma_b, v);
}

struct BranchRecord {
  int mu = 1;
  double probability = 0.0;
  std::optional<StateVector> post_measurement;  // empty for a zero-probability branch
  std::optional<StateVector> post_unitary;
  double bob_energy = 0.0;    // <H_B> in the normalized branch state after U(mu)
  double alice_energy = 0.0;  // <H_A> in the normalized branch state after P(mu)
};

struct ProtocolReport {
  ProtocolKind kind = ProtocolKind::battery;
  ConditionReport conditions;
  double reference_energy = 0.0;  // eigenvalue of the reference state
  double offset_shift = 0.0;      // added to H so the reference energy is zero
  std::array<BranchRecord, 2> branches;  // mu = -1, +1
  std::optional<DensityMatrix> rho;
  XiEta xi_eta;
  double theta_used = 0.0;
  bool theta_optimal = false;
  double e_b_initial = 0.0;    // <ref|H_B|ref>
  double e_b_simulated = 0.0;  // Tr[rho H_B]
  double e_b_predicted = 0.0;  // closed-form change of Bob's energy
  double alice_energy_change = 0.0;

  double e_b_gain() const { return e_b_simulated - e_b_initial; }
  double e_b_predicted_absolute() const { return e_b_initial + e_b_predicted; }
  double branch_probability(int mu) const { return branches[mu < 0 ? 0 : 1].probability; }
  const BranchRecord& branch(int mu) const { return branches[mu < 0 ? 0 : 1]; }
};

struct ExactOptions {
  bool build_density_matrix = true;
};

/// Exact ensemble average over both outcomes.
inline ProtocolReport run_protocol_exact(const LocalDecomposition& d, const ProtocolSpec& spec,
                                         ExactOptions options = {}) {
  detail::check_pieces_cover_sites(d, spec);
  ProtocolReport report;
  report.kind = spec.kind;
  report.conditions = detail::structural_conditions(d, spec);
  detail::require_structural(report.conditions);

  const auto spectrum = spec.kind == ProtocolKind::battery
                            ? highest_energy_state(d.total(), spec.degeneracy_tol)
                            : lowest_energy_state(d.total(), spec.degeneracy_tol);
  detail::fill_spectral_conditions(report.conditions, spectrum, spec);
  const StateVector& ref =
      spec.kind == ProtocolKind::battery ? spectrum.emax_state : spectrum.emin_state;
  report.reference_energy =
      spec.kind == ProtocolKind::battery ? spectrum.lambda_max() : spectrum.lambda_min();
  report.offset_shift = -report.reference_energy;

  const auto& h_a = d.piece(static_cast<std::size_t>(spec.site_a));
  const auto& h_b = d.piece(static_cast<std::size_t>(spec.site_b));
  report.xi_eta = compute_xi_eta(ref, d, spec);
  report.theta_optimal = !spec.theta.has_value();
  report.theta_used = spec.theta ? *spec.theta : optimal_theta(report.xi_eta);
  report.e_b_predicted = report.theta_optimal
                             ? predicted_energy_closed_form(report.xi_eta, spec.kind)
                             : predicted_energy_closed_form(report.xi_eta, report.theta_used, spec.kind);

  report.e_b_initial = expectation(ref, h_b);
  const double e_a_initial = expectation(ref, h_a);

  std::array<ComplexVector, 2> final_branches;
  double e_b = 0.0;
  double e_a = 0.0;
  for (int idx = 0; idx < 2; ++idx) {
    const int mu = idx == 0 ? -1 : 1;
    BranchRecord& br = report.branches[static_cast<std::size_t>(idx)];
    br.mu = mu;
    const ComplexVector measured = project(ref.amplitudes(), spec.sigma_a, mu);
    const ComplexVector rotated = apply_conditional_unitary(spec, report.theta_used, mu, measured);
    br.probability = measured.squaredNorm();
    const double branch_b = braket(rotated, h_b).real();
    const double branch_a = braket(measured, h_a).real();
    e_b += branch_b;
    e_a += branch_a;
    if (br.probability >= 1e-14) {
      br.post_measurement = StateVector::normalized(ref.num_sites(), measured);
      br.post_unitary = StateVector::normalized(ref.num_sites(), rotated);
      br.bob_energy = branch_b / br.probability;
      br.alice_energy = branch_a / br.probability;
    }
    final_branches[static_cast<std::size_t>(idx)] = rotated;
  }
  report.e_b_simulated = e_b;
  report.alice_energy_change = e_a - e_a_initial;
  if (options.build_density_matrix) {
    report.rho = DensityMatrix::from_ensemble(ref.num_sites(), final_branches);
  }
  return report;
}

enum class SampleEstimator {
  conditional_expectation,  // average of <H_B> in the sampled branch state
  energy_readout,           // projective measurement of H_B in each shot
  pauli_readout,            // each Pauli term of H_B measured separately in each shot
};

inline const char* to_string(SampleEstimator e) {
  switch (e) {
    case SampleEstimator::conditional_expectation: return "conditional";
    case SampleEstimator::energy_readout: return "readout";
    case SampleEstimator::pauli_readout: return "pauli";
  }
  return "unknown";
}

struct SampledReport {
  std::uint64_t shots = 0;
  std::uint64_t seed = 0;
  SampleEstimator estimator = SampleEstimator::conditional_expectation;
  std::array<std::uint64_t, 2> outcome_counts{};  // mu = -1, +1
  double mean = 0.0;
  double std_error = 0.0;  // sample standard deviation / sqrt(shots); 0 for a single shot
  double exact = 0.0;      // Tr[rho H_B] from the exact ensemble
  double theta_used = 0.0;
};

/// Shot-by-shot Monte-Carlo estimate of Bob's final energy. The result depends only on
/// (decomposition, spec, shots, seed, estimator).
inline SampledReport run_protocol_sampled(const LocalDecomposition& d, const ProtocolSpec& spec,
                                          std::uint64_t shots, std::uint64_t seed,
                                          SampleEstimator estimator = SampleEstimator::conditional_expectation) {
  if (shots < 1) throw InvalidArgument("shots must be at least 1");
  const auto exact = run_protocol_exact(d, spec, ExactOptions{false});

  SampledReport out;
  out.shots = shots;
  out.seed = seed;
  out.estimator = estimator;
  out.exact = exact.e_b_simulated;
  out.theta_used = exact.theta_used;

  // Per-branch readout distributions over the eigenbasis of H_B.
  std::array<std::vector<double>, 2> cdf;
  RealVector levels;
  if (estimator == SampleEstimator::energy_readout) {
    const auto eig = hermitian_eigen(materialize(d.piece(static_cast<std::size_t>(spec.site_b))));
    levels = eig.values;
    for (std::size_t idx = 0; idx < 2; ++idx) {
      const auto& post = exact.branches[idx].post_unitary;
      if (!post) continue;
      const RealVector weights = (eig.vectors.adjoint() * post->amplitudes()).cwiseAbs2();
      cdf[idx].resize(static_cast<std::size_t>(weights.size()));
      double acc = 0.0;
      for (Eigen::Index j = 0; j < weights.size(); ++j) {
        acc += weights(j);
        cdf[idx][static_cast<std::size_t>(j)] = acc;
      }
    }
  }

  // Per-branch P(+1) for every Pauli term of H_B.
  const auto& h_b = d.piece(static_cast<std::size_t>(spec.site_b));
  std::array<std::vector<double>, 2> p_up;
  if (estimator == SampleEstimator::pauli_readout) {
    if (!h_b.has_real_coefficients()) throw NotHermitian("H_B has complex coefficients");
    for (std::size_t idx = 0; idx < 2; ++idx) {
      const auto& post = exact.branches[idx].post_unitary;
      if (!post) continue;
      for (const auto& t : h_b.terms()) {
        const double e = braket(post->amplitudes(), t.with_coefficient(1.0)).real();
        p_up[idx].push_back(std::clamp(0.5 * (1.0 + e), 0.0, 1.0));
      }
    }
  }
  const std::uint64_t n_terms = h_b.terms().size();

  const CounterRng branch_rng(seed, 0);
  const CounterRng readout_rng(seed, 1);
  const double p_minus = exact.branches[0].probability;
  double mean = 0.0;
  double m2 = 0.0;
  for (std::uint64_t shot = 0; shot < shots; ++shot) {
    const std::size_t idx = branch_rng.uniform(shot) < p_minus ? 0 : 1;
    ++out.outcome_counts[idx];
    double value = exact.branches[idx].bob_energy;
    if (estimator == SampleEstimator::energy_readout) {
      const auto& c = cdf[idx];
      const double u = readout_rng.uniform(shot) * c.back();
      const auto it = std::upper_bound(c.begin(), c.end(), u);
      const auto j = std::min<std::size_t>(static_cast<std::size_t>(it - c.begin()), c.size() - 1);
      value = levels(static_cast<Eigen::Index>(j));
    } else if (estimator == SampleEstimator::pauli_readout) {
      value = h_b.offset();
      for (std::uint64_t t = 0; t < n_terms; ++t) {
        const bool up = readout_rng.uniform(shot * n_terms + t) < p_up[idx][t];
        value += h_b.terms()[t].coefficient().real() * (up ? 1.0 : -1.0);
      }
    }
    const double delta = value - mean;
    mean += delta / static_cast<double>(shot + 1);
    m2 += delta * (value - mean);
  }
  out.mean = mean;
  out.std_error = shots > 1 ? std::sqrt(m2 / static_cast<double>(shots - 1) / static_cast<double>(shots))
                            : 0.0;
  return out;
}

/// E_C: the maximum total energy divided by the number of local pieces.
inline double classical_density_bound(const LocalDecomposition& d) {
  return spectrum_summary(d.total()).lambda_max() / static_cast<double>(d.size());
}

}  // namespace qbattery
