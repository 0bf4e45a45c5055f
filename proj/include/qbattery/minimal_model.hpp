#pragma once

// Two-qubit model with closed-form answers:
//
//   H   = H_0 + H_1 + V
//   H_n = -h Z_n - h^2 / s          (s = sqrt(h^2 + k^2))
//   V   = -2k X_0 X_1 - 2k^2 / s
//
// with Alice owning H_A = H_0 and Bob owning H_B = H_1 + V. The constants put the
// highest eigenvalue at zero.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "qbattery/errors.hpp"
#include "qbattery/pauli.hpp"
#include "qbattery/protocol.hpp"
#include "qbattery/tensor.hpp"

namespace qbattery::minimal {

/// Strictly positive field and coupling.
class MinimalParams {
 public:
  static MinimalParams make(double h, double k) {
    if (!(h > 0.0) || !std::isfinite(h)) {
      throw InvalidArgument("h must be a positive finite number (h = 0 leaves the top level "
                            "next to a degeneracy)");
    }
    if (!(k > 0.0) || !std::isfinite(k)) {
      throw InvalidArgument("k must be a positive finite number: at k = 0 the highest energy "
                            "state is a product state, violating the entanglement precondition");
    }
    return MinimalParams(h, k);
  }

  double h() const noexcept { return h_; }
  double k() const noexcept { return k_; }
  double norm() const noexcept { return norm_; }  // sqrt(h^2 + k^2)

 private:
  MinimalParams(double h, double k) : h_(h), k_(k), norm_(std::hypot(h, k)) {}
  double h_;
  double k_;
  double norm_;
};

/// Builds the decomposition for arbitrary (h, k) with h^2 + k^2 > 0, including the
/// boundary cases MinimalParams rejects.
inline LocalDecomposition build_minimal_hamiltonian_unchecked(double h, double k) {
  const double s = std::hypot(h, k);
  if (!(s > 0.0)) throw InvalidArgument("h and k cannot both vanish");
  OperatorSum h0(2, -h * h / s);
  h0.add(PauliString::from_label("ZI", -h));
  OperatorSum h1(2, -h * h / s);
  h1.add(PauliString::from_label("IZ", -h));
  OperatorSum v(2, -2.0 * k * k / s);
  v.add(PauliString::from_label("XX", -2.0 * k));
  return LocalDecomposition::from_pieces({h0, h1 + v});
}

/// Pieces [H_A = H_0, H_B = H_1 + V].
inline LocalDecomposition build_minimal_hamiltonian(const MinimalParams& p) {
  return build_minimal_hamiltonian_unchecked(p.h(), p.k());
}

/// The individual parts H_0, H_1 and V, for bookkeeping checks.
struct MinimalParts {
  OperatorSum h0;
  OperatorSum h1;
  OperatorSum v;
};

inline MinimalParts minimal_parts(const MinimalParams& p) {
  const double s = p.norm();
  MinimalParts parts{OperatorSum(2, -p.h() * p.h() / s), OperatorSum(2, -p.h() * p.h() / s),
                     OperatorSum(2, -2.0 * p.k() * p.k() / s)};
  parts.h0.add(PauliString::from_label("ZI", -p.h()));
  parts.h1.add(PauliString::from_label("IZ", -p.h()));
  parts.v.add(PauliString::from_label("XX", -2.0 * p.k()));
  return parts;
}

/// Analytic highest energy state: a|00> + b|11>.
inline StateVector emax_closed_form(const MinimalParams& p) {
  const double ratio = p.h() / p.norm();
  ComplexVector amps = ComplexVector::Zero(4);
  amps(0) = std::sqrt(0.5 * (1.0 - ratio));
  amps(3) = -std::sqrt(0.5 * (1.0 + ratio));
  return StateVector::normalized(2, amps);
}

/// Bob's rotation angle with cos 2phi = A / sqrt(A^2 + B^2), sin 2phi = B / sqrt(A^2 + B^2),
/// A = h^2 + 2k^2, B = hk.
inline double optimal_phi(const MinimalParams& p) {
  const double a = p.h() * p.h() + 2.0 * p.k() * p.k();
  const double b = p.h() * p.k();
  return 0.5 * std::atan2(b, a);
}

/// Bob's averaged energy for rotation angle phi.
inline double charged_energy_closed_form(const MinimalParams& p, double phi) {
  const double a = p.h() * p.h() + 2.0 * p.k() * p.k();
  const double b = p.h() * p.k();
  return (b * std::sin(2.0 * phi) - a * (1.0 - std::cos(2.0 * phi))) / p.norm();
}

/// Value at the optimal angle in cancellation-free form: B^2 / (s (sqrt(A^2 + B^2) + A)).
inline double optimal_charged_energy(const MinimalParams& p) {
  const double a = p.h() * p.h() + 2.0 * p.k() * p.k();
  const double b = p.h() * p.k();
  return b * b / (p.norm() * (std::hypot(a, b) + a));
}

/// sigma_A = X_0, sigma_B = Y_1.
inline ProtocolSpec default_spec(std::optional<double> theta = std::nullopt,
                                 ProtocolKind kind = ProtocolKind::battery) {
  return ProtocolSpec::make(2, 0, Pauli::X, 1, Pauli::Y, theta, kind);
}

}  // namespace qbattery::minimal
