#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qbattery/errors.hpp"
#include "qbattery/pauli.hpp"
#include "qbattery/tensor.hpp"

namespace qbattery {

inline constexpr double kDefaultDegeneracyTol = 1e-8;

struct SpectrumSummary {
  RealVector eigenvalues;  // ascending
  double gap_top = 0.0;     // lambda_max - lambda_second
  double gap_bottom = 0.0;  // lambda_second_lowest - lambda_min
  StateVector emax_state;
  StateVector emin_state;

  double lambda_max() const { return eigenvalues(eigenvalues.size() - 1); }
  double lambda_min() const { return eigenvalues(0); }
};

/// Full spectrum and both extremal eigenvectors, without degeneracy checks.
inline SpectrumSummary spectrum_summary(const OperatorSum& h) {
  if (!h.has_real_coefficients()) throw NotHermitian("Hamiltonian has complex coefficients");
  const auto eig = hermitian_eigen(materialize(h));
  const Eigen::Index n = eig.values.size();
  const double inf = std::numeric_limits<double>::infinity();
  return SpectrumSummary{
      eig.values,
      n > 1 ? eig.values(n - 1) - eig.values(n - 2) : inf,
      n > 1 ? eig.values(1) - eig.values(0) : inf,
      StateVector::normalized(h.num_sites(), eig.vectors.col(n - 1)),
      StateVector::normalized(h.num_sites(), eig.vectors.col(0)),
  };
}

/// Spectrum summary; throws DegenerateTop if the top level is not unique.
inline SpectrumSummary highest_energy_state(const OperatorSum& h,
                                            double degeneracy_tol = kDefaultDegeneracyTol) {
  if (!(degeneracy_tol > 0.0)) throw InvalidArgument("degeneracy tolerance must be positive");
  auto summary = spectrum_summary(h);
  if (summary.gap_top < degeneracy_tol) throw DegenerateTop(summary.gap_top, degeneracy_tol);
  return summary;
}

/// Spectrum summary; throws DegenerateBottom if the ground level is not unique.
inline SpectrumSummary lowest_energy_state(const OperatorSum& h,
                                           double degeneracy_tol = kDefaultDegeneracyTol) {
  if (!(degeneracy_tol > 0.0)) throw InvalidArgument("degeneracy tolerance must be positive");
  auto summary = spectrum_summary(h);
  if (summary.gap_bottom < degeneracy_tol) {
    throw DegenerateBottom(summary.gap_bottom, degeneracy_tol);
  }
  return summary;
}

/// H -> -H, piece by piece.
inline LocalDecomposition negate_hamiltonian(const LocalDecomposition& d) {
  std::vector<OperatorSum> pieces;
  pieces.reserve(d.size());
  for (const auto& p : d.pieces()) pieces.push_back(p.negated());
  return LocalDecomposition::from_pieces(std::move(pieces));
}

/// Eigenvalues of the reduced state on sites [0, cut_site).
inline RealVector schmidt_weights(const StateVector& state, int cut_site) {
  if (cut_site <= 0 || cut_site >= state.num_sites()) {
    throw InvalidArgument("cut site " + std::to_string(cut_site) + " must lie strictly inside (0, " +
                          std::to_string(state.num_sites()) + ")");
  }
  const Eigen::Index left = Eigen::Index{1} << cut_site;
  const Eigen::Index right = state.dim() / left;
  // Row-major reshape: index = l * right + r.
  ComplexMatrix psi(left, right);
  for (Eigen::Index l = 0; l < left; ++l) {
    for (Eigen::Index r = 0; r < right; ++r) psi(l, r) = state[l * right + r];
  }
  Eigen::JacobiSVD<ComplexMatrix> svd(psi);
  return svd.singularValues().array().square();
}

/// Von Neumann entropy (nats) of sites [0, cut_site).
inline double entanglement_check(const StateVector& state, int cut_site) {
  const RealVector w = schmidt_weights(state, cut_site);
  double s = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) > 1e-300) s -= w(i) * std::log(w(i));
  }
  return s < 0.0 ? 0.0 : s;
}

}  // namespace qbattery
