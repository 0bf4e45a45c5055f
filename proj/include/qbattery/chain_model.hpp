#pragma once

// Open transverse-field Ising chain used to exercise the protocol beyond two sites:
//
//   H = -sum_n h_n Z_n - sum_n 2 k_n X_n X_{n+1} + sum_n c_n
//
// Piece n holds -h_n Z_n, the bond to its left neighbour (-2 k_{n-1} X_{n-1} X_n) and
// the constant c_n. The constants are chosen so that every piece has zero
// expectation in the highest energy state; for two sites this reproduces the
// minimal model term for term.

#include <string>
#include <vector>

#include "qbattery/errors.hpp"
#include "qbattery/pauli.hpp"
#include "qbattery/spectral.hpp"
#include "qbattery/tensor.hpp"

namespace qbattery::chain {

struct ChainParams {
  std::vector<double> fields;     // h_n, one per site
  std::vector<double> couplings;  // k_n on bond (n, n+1), one per bond

  static ChainParams uniform(int n_sites, double h, double k) {
    if (n_sites < 2 || n_sites > kMaxSites) {
      throw InvalidArgument("chain length must be in [2, " + std::to_string(kMaxSites) + "]");
    }
    return {std::vector<double>(static_cast<std::size_t>(n_sites), h),
            std::vector<double>(static_cast<std::size_t>(n_sites - 1), k)};
  }

  int n_sites() const { return static_cast<int>(fields.size()); }

  void validate() const {
    if (n_sites() < 2 || n_sites() > kMaxSites) {
      throw InvalidArgument("chain length must be in [2, " + std::to_string(kMaxSites) + "]");
    }
    if (couplings.size() + 1 != fields.size()) {
      throw InvalidArgument("chain needs exactly one coupling per bond");
    }
  }
};

struct ChainModel {
  LocalDecomposition decomposition;
  std::vector<double> piece_offsets;  // c_n
};

/// Pieces without constants.
inline std::vector<OperatorSum> bare_pieces(const ChainParams& p) {
  p.validate();
  const int n = p.n_sites();
  std::vector<OperatorSum> pieces;
  for (int site = 0; site < n; ++site) {
    OperatorSum piece(n);
    piece.add(PauliString::single(n, site, Pauli::Z, -p.fields[static_cast<std::size_t>(site)]));
    if (site > 0) {
      auto bond = PauliString::single(n, site - 1, Pauli::X,
                                      -2.0 * p.couplings[static_cast<std::size_t>(site - 1)]);
      piece.add(bond.with_letter(site, Pauli::X));
    }
    pieces.push_back(std::move(piece));
  }
  return pieces;
}

/// Chain with constants zeroing each piece on the highest energy state. Throws
/// DegenerateTop when that state is not unique.
inline ChainModel build_ising_chain(const ChainParams& p,
                                    double degeneracy_tol = kDefaultDegeneracyTol) {
  auto pieces = bare_pieces(p);
  const auto bare = LocalDecomposition::from_pieces(pieces);
  const auto spectrum = highest_energy_state(bare.total(), degeneracy_tol);
  ChainModel model;
  for (auto& piece : pieces) {
    const double c = -expectation(spectrum.emax_state, piece);
    piece.add_offset(c);
    model.piece_offsets.push_back(c);
  }
  model.decomposition = LocalDecomposition::from_pieces(std::move(pieces));
  return model;
}

}  // namespace qbattery::chain
