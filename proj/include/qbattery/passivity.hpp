#pragma once

// Local passivity: how far can a unitary on Bob's site alone raise <H_B>?
//
// Unitaries are parametrized as U = Rz(alpha) Ry(beta) Rz(gamma) with
// R_n(t) = exp(-i t sigma_n / 2). Two independent evaluators are provided: a
// multi-start finite-difference ascent acting on the full state, and a grid scan
// over a reduced 3x3 correlation matrix.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "qbattery/errors.hpp"
#include "qbattery/pauli.hpp"
#include "qbattery/rng.hpp"
#include "qbattery/tensor.hpp"

namespace qbattery {

struct EulerAngles {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

/// Rz(alpha) Ry(beta) Rz(gamma) as a 2x2 matrix.
inline ComplexMatrix euler_unitary(const EulerAngles& a) {
  auto rz = [](double t) {
    ComplexMatrix m = ComplexMatrix::Zero(2, 2);
    m(0, 0) = std::exp(Complex(0.0, -t / 2));
    m(1, 1) = std::exp(Complex(0.0, t / 2));
    return m;
  };
  ComplexMatrix ry(2, 2);
  const double c = std::cos(a.beta / 2);
  const double s = std::sin(a.beta / 2);
  ry << c, -s, s, c;
  return rz(a.alpha) * ry * rz(a.gamma);
}

/// <psi| U_b^dagger H_B U_b |psi> with U_b = euler_unitary(angles) on `site_b`.
inline double local_energy(const OperatorSum& h_b, const StateVector& psi, int site_b,
                           const EulerAngles& angles) {
  const ComplexVector rotated =
      apply_single_site(euler_unitary(angles), site_b, psi.num_sites(), psi.amplitudes());
  return braket(rotated, h_b).real();
}

struct PassivityOptions {
  double fd_step = 1e-5;
  double gradient_tol = 1e-8;
  int max_iterations = 20000;
};

struct PassivitySearchResult {
  double max_energy = 0.0;
  EulerAngles best;
  double initial_energy = 0.0;  // <psi|H_B|psi>
  int restarts = 0;
  int converged = 0;  // restarts that met the gradient tolerance
};

namespace detail {

inline std::array<double, 3> central_gradient(const OperatorSum& h_b, const StateVector& psi,
                                              int site_b, const EulerAngles& x, double step) {
  std::array<double, 3> g{};
  for (int i = 0; i < 3; ++i) {
    EulerAngles plus = x;
    EulerAngles minus = x;
    double* p = i == 0 ? &plus.alpha : i == 1 ? &plus.beta : &plus.gamma;
    double* m = i == 0 ? &minus.alpha : i == 1 ? &minus.beta : &minus.gamma;
    *p += step;
    *m -= step;
    g[static_cast<std::size_t>(i)] =
        (local_energy(h_b, psi, site_b, plus) - local_energy(h_b, psi, site_b, minus)) / (2 * step);
  }
  return g;
}

inline EulerAngles step_along(const EulerAngles& x, const std::array<double, 3>& g, double t) {
  return {x.alpha + t * g[0], x.beta + t * g[1], x.gamma + t * g[2]};
}

}  // namespace detail

/// Multi-start gradient ascent of <psi|U^dagger H_B U|psi> over single-site unitaries
/// on `site_b`, starting from seeded uniformly random Euler angles.
inline PassivitySearchResult local_passivity_search(const OperatorSum& h_b, const StateVector& psi,
                                                    int site_b, int restarts, std::uint64_t seed,
                                                    const PassivityOptions& options = {}) {
  if (site_b < 0 || site_b >= psi.num_sites()) throw InvalidArgument("site_b out of range");
  if (h_b.num_sites() != psi.num_sites()) throw InvalidArgument("H_B and state sizes differ");
  if (restarts < 1) throw InvalidArgument("at least one restart required");

  PassivitySearchResult result;
  result.restarts = restarts;
  result.initial_energy = braket(psi.amplitudes(), h_b).real();
  result.max_energy = -std::numeric_limits<double>::infinity();
  const CounterRng rng(seed, 2);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  for (int r = 0; r < restarts; ++r) {
    const auto base = static_cast<std::uint64_t>(r) * 3;
    EulerAngles x{two_pi * rng.uniform(base), std::numbers::pi * rng.uniform(base + 1),
                  two_pi * rng.uniform(base + 2)};
    double fx = local_energy(h_b, psi, site_b, x);
    double t = 1.0;
    bool converged = false;
    for (int it = 0; it < options.max_iterations; ++it) {
      const auto g = detail::central_gradient(h_b, psi, site_b, x, options.fd_step);
      const double gnorm2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
      if (std::sqrt(gnorm2) < options.gradient_tol) {
        converged = true;
        break;
      }
      // Backtracking with the Armijo condition.
      bool accepted = false;
      for (int k = 0; k < 60; ++k) {
        const EulerAngles trial = detail::step_along(x, g, t);
        const double ft = local_energy(h_b, psi, site_b, trial);
        if (ft >= fx + 1e-4 * t * gnorm2) {
          x = trial;
          fx = ft;
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (!accepted) break;  // stalled at rounding level
      t = std::min(t * 2.0, 16.0);
    }
    if (converged) ++result.converged;
    if (fx > result.max_energy) {
      result.max_energy = fx;
      result.best = x;
    }
  }
  return result;
}

inline PassivitySearchResult local_passivity_search(const LocalDecomposition& d, const StateVector& emax,
                                                    int site_b, int restarts, std::uint64_t seed,
                                                    const PassivityOptions& options = {}) {
  if (site_b < 0 || static_cast<std::size_t>(site_b) >= d.size()) {
    throw InvalidArgument("site_b has no local piece");
  }
  return local_passivity_search(d.piece(static_cast<std::size_t>(site_b)), emax, site_b, restarts,
                                seed, options);
}

/// Reduced form of <psi|U^dagger H_B U|psi>: constant + sum_jk R(U)_jk G_jk, where
/// U^dagger sigma_j U = sum_k R(U)_jk sigma_k and G_jk = <O_j (x) sigma_k>.
struct LocalResponse {
  double constant = 0.0;
  Eigen::Matrix3d correlations = Eigen::Matrix3d::Zero();
};

inline LocalResponse local_response(const OperatorSum& h_b, const StateVector& psi, int site_b) {
  if (site_b < 0 || site_b >= psi.num_sites()) throw InvalidArgument("site_b out of range");
  LocalResponse out;
  out.constant = h_b.offset();
  const ComplexVector& v = psi.amplitudes();
  for (const auto& term : h_b.terms()) {
    const Pauli at_b = term.letter(site_b);
    if (std::abs(term.coefficient().imag()) > kCoefficientCutoff) {
      throw NotHermitian("H_B has complex coefficients");
    }
    const double c = term.coefficient().real();
    if (at_b == Pauli::I) {
      out.constant += c * braket(v, term.with_coefficient(1.0)).real();
      continue;
    }
    const int j = static_cast<int>(at_b) - 1;
    for (int k = 0; k < 3; ++k) {
      const auto probe = term.with_coefficient(1.0).with_letter(site_b, static_cast<Pauli>(k + 1));
      out.correlations(j, k) += c * braket(v, probe).real();
    }
  }
  return out;
}

/// SO(3) image of Rz(t) and Ry(t).
inline Eigen::Matrix3d rotation_z(double t) {
  Eigen::Matrix3d m;
  m << std::cos(t), -std::sin(t), 0, std::sin(t), std::cos(t), 0, 0, 0, 1;
  return m;
}

inline Eigen::Matrix3d rotation_y(double t) {
  Eigen::Matrix3d m;
  m << std::cos(t), 0, std::sin(t), 0, 1, 0, -std::sin(t), 0, std::cos(t);
  return m;
}

inline double local_energy(const LocalResponse& response, const EulerAngles& a) {
  const Eigen::Matrix3d r = rotation_z(a.alpha) * rotation_y(a.beta) * rotation_z(a.gamma);
  return response.constant + (r.array() * response.correlations.array()).sum();
}

struct GridScanResult {
  double max_energy = 0.0;
  EulerAngles best;
  std::uint64_t evaluations = 0;
};

/// Exhaustive scan with angular step pi / divisions: alpha, gamma in [0, 2pi), beta in [0, pi].
inline GridScanResult passivity_grid_scan(const OperatorSum& h_b, const StateVector& psi, int site_b,
                                          int divisions = 200) {
  if (divisions < 1) throw InvalidArgument("grid needs at least one division");
  const auto response = local_response(h_b, psi, site_b);
  const double step = std::numbers::pi / divisions;
  const int n_az = 2 * divisions;

  std::vector<double> cos_g(static_cast<std::size_t>(n_az));
  std::vector<double> sin_g(static_cast<std::size_t>(n_az));
  for (int l = 0; l < n_az; ++l) {
    cos_g[static_cast<std::size_t>(l)] = std::cos(l * step);
    sin_g[static_cast<std::size_t>(l)] = std::sin(l * step);
  }

  GridScanResult out;
  out.max_energy = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_az; ++i) {
    const Eigen::Matrix3d a = rotation_z(i * step);
    for (int j = 0; j <= divisions; ++j) {
      // sum_jk (A B C)_jk G_jk = sum_mk C_mk W_mk with W = (A B)^T G, and C = Rz(gamma).
      const Eigen::Matrix3d w = (a * rotation_y(j * step)).transpose() * response.correlations;
      const double even = w(0, 0) + w(1, 1);
      const double odd = w(1, 0) - w(0, 1);
      const double fixed = response.constant + w(2, 2);
      for (int l = 0; l < n_az; ++l) {
        const double f = fixed + cos_g[static_cast<std::size_t>(l)] * even +
                         sin_g[static_cast<std::size_t>(l)] * odd;
        if (f > out.max_energy) {
          out.max_energy = f;
          out.best = {i * step, j * step, l * step};
        }
      }
      out.evaluations += static_cast<std::uint64_t>(n_az);
    }
  }
  return out;
}

}  // namespace qbattery
