#pragma once

// Dense complex linear algebra over n-qubit Hilbert spaces.
//
// Site convention: site 0 is the leftmost (most significant) tensor factor,
// so the basis state |b0 b1 ... b(N-1)> has index sum_i b_i * 2^(N-1-i).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <utility>

#include "qbattery/errors.hpp"

namespace qbattery {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr int kMaxSites = 12;
inline constexpr Eigen::Index kMaxDim = Eigen::Index{1} << kMaxSites;

inline constexpr Complex kI{0.0, 1.0};

/// Hilbert-space dimension for `num_sites` qubits.
inline Eigen::Index dim_for_sites(int num_sites) {
  if (num_sites < 1 || num_sites > kMaxSites) {
    throw DimensionError("number of sites must be in [1, " + std::to_string(kMaxSites) +
                         "], got " + std::to_string(num_sites));
  }
  return Eigen::Index{1} << num_sites;
}

/// Bit of the basis index that carries `site`.
inline std::uint64_t site_bit(int site, int num_sites) {
  return std::uint64_t{1} << (num_sites - 1 - site);
}

namespace pauli_matrix {

inline ComplexMatrix identity() { return ComplexMatrix::Identity(2, 2); }

inline ComplexMatrix x() {
  ComplexMatrix m(2, 2);
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}

inline ComplexMatrix y() {
  ComplexMatrix m(2, 2);
  m << 0.0, -kI, kI, 0.0;
  return m;
}

inline ComplexMatrix z() {
  ComplexMatrix m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}

}  // namespace pauli_matrix

/// Largest entry modulus; used to scale tolerances.
inline double max_abs(const ComplexMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const ComplexMatrix& m, double tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, max_abs(m));
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

inline bool is_unitary(const ComplexMatrix& m, double tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  const auto id = ComplexMatrix::Identity(m.rows(), m.cols());
  return (m * m.adjoint() - id).cwiseAbs().maxCoeff() <= tol;
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// I (x) ... (x) op (x) ... (x) I with `op` at `site`.
inline ComplexMatrix kron_lift(const ComplexMatrix& op, int site, int num_sites) {
  if (op.rows() != 2 || op.cols() != 2) {
    throw InvalidArgument("kron_lift expects a 2x2 operator");
  }
  const Eigen::Index dim = dim_for_sites(num_sites);
  if (site < 0 || site >= num_sites) {
    throw InvalidArgument("site " + std::to_string(site) + " out of range for " +
                          std::to_string(num_sites) + " sites");
  }
  // Direct construction: entry (r, c) is nonzero only when r and c agree off `site`.
  const std::uint64_t bit = site_bit(site, num_sites);
  ComplexMatrix out = ComplexMatrix::Zero(dim, dim);
  for (Eigen::Index col = 0; col < dim; ++col) {
    const auto c = static_cast<std::uint64_t>(col);
    const int cb = (c & bit) ? 1 : 0;
    const std::uint64_t base = c & ~bit;
    out(static_cast<Eigen::Index>(base), col) = op(0, cb);
    out(static_cast<Eigen::Index>(base | bit), col) = op(1, cb);
  }
  return out;
}

/// Normalized pure state on `num_sites` qubits.
class StateVector {
 public:
  /// Wraps amplitudes that are already normalized (within 1e-10).
  static StateVector from_amplitudes(int num_sites, ComplexVector amplitudes) {
    check_length(num_sites, amplitudes);
    const double norm2 = amplitudes.squaredNorm();
    if (std::abs(norm2 - 1.0) > 1e-10) {
      throw InvalidArgument("state is not normalized: squared norm " + std::to_string(norm2));
    }
    return StateVector(num_sites, std::move(amplitudes));
  }

  /// Normalizes arbitrary nonzero amplitudes.
  static StateVector normalized(int num_sites, ComplexVector amplitudes) {
    check_length(num_sites, amplitudes);
    const double norm = amplitudes.norm();
    if (norm < 1e-300) throw InvalidArgument("cannot normalize the zero vector");
    amplitudes /= norm;
    return StateVector(num_sites, std::move(amplitudes));
  }

  /// Computational basis state with the given index.
  static StateVector basis(int num_sites, Eigen::Index index) {
    const Eigen::Index dim = dim_for_sites(num_sites);
    if (index < 0 || index >= dim) throw InvalidArgument("basis index out of range");
    ComplexVector v = ComplexVector::Zero(dim);
    v(index) = 1.0;
    return StateVector(num_sites, std::move(v));
  }

  int num_sites() const noexcept { return num_sites_; }
  Eigen::Index dim() const noexcept { return amplitudes_.size(); }
  const ComplexVector& amplitudes() const noexcept { return amplitudes_; }
  Complex operator[](Eigen::Index i) const { return amplitudes_(i); }

 private:
  StateVector(int num_sites, ComplexVector amplitudes)
      : num_sites_(num_sites), amplitudes_(std::move(amplitudes)) {}

  static void check_length(int num_sites, const ComplexVector& amplitudes) {
    const Eigen::Index dim = dim_for_sites(num_sites);
    if (amplitudes.size() != dim) {
      throw InvalidArgument("amplitude count " + std::to_string(amplitudes.size()) +
                            " does not match 2^" + std::to_string(num_sites));
    }
  }

  int num_sites_;
  ComplexVector amplitudes_;
};

/// |<a|b>|, insensitive to global phase.
inline double overlap_modulus(const StateVector& a, const StateVector& b) {
  if (a.dim() != b.dim()) throw InvalidArgument("overlap of states with different dimensions");
  return std::abs(a.amplitudes().dot(b.amplitudes()));
}

struct EigenDecomposition {
  RealVector values;     // ascending
  ComplexMatrix vectors;  // orthonormal columns
};

/// Rescales each eigenvector so its first component with modulus above 1e-10 is
/// real and positive.
inline void fix_eigenvector_phases(ComplexMatrix& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
      const double mag = std::abs(vectors(i, j));
      if (mag > 1e-10) {
        vectors.col(j) *= std::conj(vectors(i, j)) / mag;
        vectors(i, j) = Complex(vectors(i, j).real(), 0.0);
        break;
      }
    }
  }
}

/// Full eigendecomposition of a Hermitian matrix, eigenvalues ascending.
inline EigenDecomposition hermitian_eigen(const ComplexMatrix& m) {
  if (m.rows() != m.cols() || m.rows() < 1) throw InvalidArgument("matrix must be square");
  if (m.rows() > kMaxDim) {
    throw DimensionError("matrix dimension " + std::to_string(m.rows()) + " exceeds " +
                         std::to_string(kMaxDim));
  }
  if (!is_hermitian(m)) throw NotHermitian("hermitian_eigen: input is not Hermitian");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(m, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw Error("hermitian_eigen: solver did not converge");
  EigenDecomposition out{solver.eigenvalues(), solver.eigenvectors()};
  fix_eigenvector_phases(out.vectors);
  return out;
}

/// <state|op|state> for a Hermitian operator.
inline double expectation(const StateVector& state, const ComplexMatrix& op) {
  if (op.rows() != state.dim() || op.cols() != state.dim()) {
    throw InvalidArgument("expectation: operator and state dimensions differ");
  }
  if (!is_hermitian(op)) throw NotHermitian("expectation: operator is not Hermitian");
  const Complex value = state.amplitudes().dot(op * state.amplitudes());
  if (std::abs(value.imag()) > 1e-10 * std::max(1.0, max_abs(op))) {
    throw NotHermitian("expectation has imaginary part " + std::to_string(value.imag()));
  }
  return value.real();
}

/// Applies a 2x2 operator on `site` directly to amplitudes, O(2^N).
inline ComplexVector apply_single_site(const ComplexMatrix& op, int site, int num_sites,
                                       const ComplexVector& amplitudes) {
  if (site < 0 || site >= num_sites) throw InvalidArgument("apply_single_site: site out of range");
  const std::uint64_t bit = site_bit(site, num_sites);
  ComplexVector out(amplitudes.size());
  for (Eigen::Index i = 0; i < amplitudes.size(); ++i) {
    const auto u = static_cast<std::uint64_t>(i);
    if (u & bit) continue;
    const auto j = static_cast<Eigen::Index>(u | bit);
    const Complex a0 = amplitudes(i);
    const Complex a1 = amplitudes(j);
    out(i) = op(0, 0) * a0 + op(0, 1) * a1;
    out(j) = op(1, 0) * a0 + op(1, 1) * a1;
  }
  return out;
}

/// Mixed state: Hermitian, positive semidefinite, unit trace.
class DensityMatrix {
 public:
  /// Validates hermiticity, trace and spectrum (tolerance 1e-10).
  static DensityMatrix from_matrix(int num_sites, ComplexMatrix m) {
    const Eigen::Index dim = dim_for_sites(num_sites);
    if (m.rows() != dim || m.cols() != dim) throw InvalidArgument("density matrix has wrong size");
    DensityMatrix out(num_sites, std::move(m));
    if (!out.is_valid()) throw InvalidArgument("matrix is not a valid density matrix");
    return out;
  }

  static DensityMatrix pure(const StateVector& s) {
    return DensityMatrix(s.num_sites(), s.amplitudes() * s.amplitudes().adjoint());
  }

  /// sum_k |v_k><v_k| over unnormalized branch vectors whose squared norms sum to 1.
  /// Positive semidefinite by construction; trace is checked.
  static DensityMatrix from_ensemble(int num_sites, std::span<const ComplexVector> branches) {
    const Eigen::Index dim = dim_for_sites(num_sites);
    ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
    for (const auto& v : branches) {
      if (v.size() != dim) throw InvalidArgument("ensemble branch has wrong size");
      m.noalias() += v * v.adjoint();
    }
    if (std::abs(m.trace().real() - 1.0) > 1e-10) {
      throw InvalidArgument("ensemble weights do not sum to one");
    }
    return DensityMatrix(num_sites, std::move(m));
  }

  int num_sites() const noexcept { return num_sites_; }
  const ComplexMatrix& matrix() const noexcept { return matrix_; }

  /// Tr[rho op].
  double trace_with(const ComplexMatrix& op) const {
    if (op.rows() != matrix_.rows()) throw InvalidArgument("trace_with: dimension mismatch");
    const Complex t = (matrix_ * op).trace();
    return t.real();
  }

  bool is_valid(double tol = 1e-10) const {
    if (!is_hermitian(matrix_, tol)) return false;
    if (std::abs(matrix_.trace() - Complex(1.0)) > tol) return false;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(matrix_, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff() >= -tol;
  }

 private:
  DensityMatrix(int num_sites, ComplexMatrix m) : num_sites_(num_sites), matrix_(std::move(m)) {}

  int num_sites_;
  ComplexMatrix matrix_;
};

}  // namespace qbattery
