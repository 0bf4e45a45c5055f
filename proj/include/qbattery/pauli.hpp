#pragma once

// Symbolic Pauli-string operators.
//
// A PauliString is coefficient * P_0 (x) P_1 (x) ... with P_s in {I, X, Y, Z}.
// An OperatorSum is a list of strings plus a real identity offset; the offset is
// never stored as an all-identity string. Commutation between strings is decided
// combinatorially, so structural checks such as [sigma_A, H_B] = 0 are exact.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qbattery/errors.hpp"
#include "qbattery/tensor.hpp"

namespace qbattery {

enum class Pauli : std::uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

inline char to_char(Pauli p) {
  constexpr char kLabels[] = {'I', 'X', 'Y', 'Z'};
  return kLabels[static_cast<int>(p)];
}

inline Pauli pauli_from_char(char c) {
  switch (c) {
    case 'I': case 'i': return Pauli::I;
    case 'X': case 'x': return Pauli::X;
    case 'Y': case 'y': return Pauli::Y;
    case 'Z': case 'z': return Pauli::Z;
    default: throw InvalidArgument(std::string("unknown Pauli letter '") + c + "'");
  }
}

inline ComplexMatrix pauli_matrix_of(Pauli p) {
  switch (p) {
    case Pauli::X: return pauli_matrix::x();
    case Pauli::Y: return pauli_matrix::y();
    case Pauli::Z: return pauli_matrix::z();
    case Pauli::I: break;
  }
  return pauli_matrix::identity();
}

/// Drop threshold for merged coefficients.
inline constexpr double kCoefficientCutoff = 1e-14;

class PauliString {
 public:
  PauliString() = default;

  explicit PauliString(std::vector<Pauli> letters, Complex coefficient = 1.0)
      : coefficient_(coefficient), letters_(std::move(letters)) {}

  /// Parses a label such as "XZI".
  static PauliString from_label(std::string_view label, Complex coefficient = 1.0) {
    std::vector<Pauli> letters;
    letters.reserve(label.size());
    for (char c : label) letters.push_back(pauli_from_char(c));
    return PauliString(std::move(letters), coefficient);
  }

  static PauliString identity(int num_sites, Complex coefficient = 1.0) {
    return PauliString(std::vector<Pauli>(static_cast<std::size_t>(num_sites), Pauli::I),
                       coefficient);
  }

  /// Single letter `p` at `site`, identity elsewhere.
  static PauliString single(int num_sites, int site, Pauli p, Complex coefficient = 1.0) {
    if (site < 0 || site >= num_sites) {
      throw InvalidArgument("site " + std::to_string(site) + " out of range for " +
                            std::to_string(num_sites) + " sites");
    }
    auto s = identity(num_sites, coefficient);
    s.letters_[static_cast<std::size_t>(site)] = p;
    return s;
  }

  int num_sites() const noexcept { return static_cast<int>(letters_.size()); }
  Complex coefficient() const noexcept { return coefficient_; }
  const std::vector<Pauli>& letters() const noexcept { return letters_; }
  Pauli letter(int site) const { return letters_.at(static_cast<std::size_t>(site)); }

  PauliString with_coefficient(Complex c) const { return PauliString(letters_, c); }
  PauliString with_letter(int site, Pauli p) const {
    auto s = *this;
    s.letters_.at(static_cast<std::size_t>(site)) = p;
    return s;
  }

  bool is_identity() const {
    return std::all_of(letters_.begin(), letters_.end(), [](Pauli p) { return p == Pauli::I; });
  }

  std::vector<int> support() const {
    std::vector<int> sites;
    for (int s = 0; s < num_sites(); ++s) {
      if (letters_[static_cast<std::size_t>(s)] != Pauli::I) sites.push_back(s);
    }
    return sites;
  }

  std::string label() const {
    std::string out;
    out.reserve(letters_.size());
    for (Pauli p : letters_) out.push_back(to_char(p));
    return out;
  }

  /// Bit masks of sites carrying an X-type (X or Y) / Z-type (Z or Y) action.
  std::uint64_t x_mask() const { return mask_of(Pauli::X); }
  std::uint64_t z_mask() const { return mask_of(Pauli::Z); }
  std::uint64_t y_mask() const {
    std::uint64_t m = 0;
    for (int s = 0; s < num_sites(); ++s) {
      if (letters_[static_cast<std::size_t>(s)] == Pauli::Y) m |= site_bit(s, num_sites());
    }
    return m;
  }

  friend bool operator==(const PauliString&, const PauliString&) = default;

 private:
  std::uint64_t mask_of(Pauli kind) const {
    std::uint64_t m = 0;
    for (int s = 0; s < num_sites(); ++s) {
      const Pauli p = letters_[static_cast<std::size_t>(s)];
      if (p == kind || p == Pauli::Y) m |= site_bit(s, num_sites());
    }
    return m;
  }

  Complex coefficient_{1.0};
  std::vector<Pauli> letters_;
};

namespace detail {

inline void require_same_sites(int a, int b) {
  if (a != b) {
    throw InvalidArgument("operands act on different numbers of sites (" + std::to_string(a) +
                          " vs " + std::to_string(b) + ")");
  }
}

// i^n for n mod 4.
inline Complex i_power(int n) {
  switch (((n % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

inline std::string format_coefficient(Complex c) {
  std::ostringstream out;
  out.precision(12);
  if (c.imag() == 0.0) {
    out << c.real();
  } else {
    out << '(' << c.real() << (c.imag() < 0 ? "-" : "+") << std::abs(c.imag()) << "i)";
  }
  return out.str();
}

}  // namespace detail

/// Sitewise product with accumulated phase (X*Y = iZ, Y*Z = iX, Z*X = iY).
inline PauliString multiply(const PauliString& a, const PauliString& b) {
  detail::require_same_sites(a.num_sites(), b.num_sites());
  std::vector<Pauli> letters(a.letters().size());
  int quarter_turns = 0;
  for (std::size_t s = 0; s < letters.size(); ++s) {
    const int pa = static_cast<int>(a.letters()[s]);
    const int pb = static_cast<int>(b.letters()[s]);
    letters[s] = static_cast<Pauli>(pa ^ pb);
    if (pa != 0 && pb != 0 && pa != pb) quarter_turns += ((pb - pa + 3) % 3 == 1) ? 1 : -1;
  }
  return PauliString(std::move(letters),
                     a.coefficient() * b.coefficient() * detail::i_power(quarter_turns));
}

/// True when the letter parts commute (the count of anticommuting sites is even).
inline bool commutes(const PauliString& a, const PauliString& b) {
  detail::require_same_sites(a.num_sites(), b.num_sites());
  int anticommuting = 0;
  for (std::size_t s = 0; s < a.letters().size(); ++s) {
    const Pauli pa = a.letters()[s];
    const Pauli pb = b.letters()[s];
    if (pa != Pauli::I && pb != Pauli::I && pa != pb) ++anticommuting;
  }
  return anticommuting % 2 == 0;
}

/// Applies a Pauli string to amplitudes: out = coefficient * P |v>.
inline ComplexVector act_on(const PauliString& p, const ComplexVector& v) {
  const Eigen::Index dim = dim_for_sites(p.num_sites());
  if (v.size() != dim) throw InvalidArgument("apply: state dimension mismatch");
  const std::uint64_t xm = p.x_mask();
  const std::uint64_t zm = p.z_mask();
  const Complex base = p.coefficient() * detail::i_power(std::popcount(p.y_mask()));
  ComplexVector out(dim);
  for (Eigen::Index col = 0; col < dim; ++col) {
    const auto c = static_cast<std::uint64_t>(col);
    const double sign = (std::popcount(c & zm) & 1) ? -1.0 : 1.0;
    out(static_cast<Eigen::Index>(c ^ xm)) = base * sign * v(col);
  }
  return out;
}

class OperatorSum {
 public:
  OperatorSum() = default;
  explicit OperatorSum(int num_sites, double offset = 0.0)
      : num_sites_(num_sites), offset_(offset) {
    if (num_sites < 1) throw InvalidArgument("operator needs at least one site");
  }
  OperatorSum(int num_sites, std::vector<PauliString> terms, double offset = 0.0)
      : OperatorSum(num_sites, offset) {
    for (auto& t : terms) add(std::move(t));
  }

  int num_sites() const noexcept { return num_sites_; }
  const std::vector<PauliString>& terms() const noexcept { return terms_; }
  double offset() const noexcept { return offset_; }

  /// Appends a term; all-identity strings are folded into the offset.
  OperatorSum& add(PauliString term) {
    detail::require_same_sites(num_sites_, term.num_sites());
    if (term.is_identity()) {
      if (std::abs(term.coefficient().imag()) > kCoefficientCutoff) {
        throw InvalidArgument("identity term with imaginary coefficient");
      }
      offset_ += term.coefficient().real();
    } else {
      terms_.push_back(std::move(term));
    }
    return *this;
  }

  OperatorSum& add_offset(double c) {
    offset_ += c;
    return *this;
  }

  /// Like terms merged, sorted by label, near-zero coefficients dropped.
  OperatorSum canonicalized() const {
    std::vector<PauliString> sorted = terms_;
    std::stable_sort(sorted.begin(), sorted.end(), [](const PauliString& a, const PauliString& b) {
      return a.letters() < b.letters();
    });
    OperatorSum out(num_sites_, offset_);
    for (std::size_t i = 0; i < sorted.size();) {
      Complex c = 0.0;
      std::size_t j = i;
      for (; j < sorted.size() && sorted[j].letters() == sorted[i].letters(); ++j) {
        c += sorted[j].coefficient();
      }
      if (std::abs(c) >= kCoefficientCutoff) out.terms_.push_back(sorted[i].with_coefficient(c));
      i = j;
    }
    return out;
  }

  bool is_zero() const {
    const auto c = canonicalized();
    return c.terms_.empty() && c.offset_ == 0.0;
  }

  /// All coefficients real, hence the operator is Hermitian.
  bool has_real_coefficients(double tol = kCoefficientCutoff) const {
    return std::all_of(terms_.begin(), terms_.end(), [tol](const PauliString& t) {
      return std::abs(t.coefficient().imag()) <= tol;
    });
  }

  std::vector<int> support() const {
    std::set<int> sites;
    for (const auto& t : terms_) {
      for (int s : t.support()) sites.insert(s);
    }
    return {sites.begin(), sites.end()};
  }

  OperatorSum negated() const {
    OperatorSum out(num_sites_, -offset_);
    out.terms_.reserve(terms_.size());
    for (const auto& t : terms_) out.terms_.push_back(t.with_coefficient(-t.coefficient()));
    return out;
  }

  OperatorSum scaled(double c) const {
    OperatorSum out(num_sites_, c * offset_);
    for (const auto& t : terms_) out.terms_.push_back(t.with_coefficient(c * t.coefficient()));
    return out;
  }

  OperatorSum& operator+=(const OperatorSum& other) {
    detail::require_same_sites(num_sites_, other.num_sites_);
    terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
    offset_ += other.offset_;
    return *this;
  }

  friend OperatorSum operator+(OperatorSum a, const OperatorSum& b) { return a += b; }
  friend OperatorSum operator-(OperatorSum a, const OperatorSum& b) { return a += b.negated(); }

  /// Coefficient-level equality after canonicalization.
  friend bool same_operator(const OperatorSum& a, const OperatorSum& b) {
    if (a.num_sites_ != b.num_sites_) return false;
    const auto ca = a.canonicalized();
    const auto cb = b.canonicalized();
    return ca.offset_ == cb.offset_ && ca.terms_ == cb.terms_;
  }

 private:
  int num_sites_{1};
  std::vector<PauliString> terms_;
  double offset_{0.0};
};

/// a*b - b*a, like terms merged. Only anticommuting string pairs contribute 2*a_i*b_j.
inline OperatorSum commutator(const OperatorSum& a, const OperatorSum& b) {
  detail::require_same_sites(a.num_sites(), b.num_sites());
  OperatorSum out(a.num_sites());
  for (const auto& ta : a.terms()) {
    for (const auto& tb : b.terms()) {
      if (commutes(ta, tb)) continue;
      const auto prod = multiply(ta, tb);
      out.add(prod.with_coefficient(2.0 * prod.coefficient()));
    }
  }
  return out.canonicalized();
}

/// Terms of `a` that fail to commute with the string `p`.
inline std::vector<PauliString> noncommuting_terms(const OperatorSum& a, const PauliString& p) {
  std::vector<PauliString> out;
  const auto canonical = a.canonicalized();
  for (const auto& t : canonical.terms()) {
    if (!commutes(t, p)) out.push_back(t);
  }
  return out;
}

/// Dense matrix sum_t c_t P_t + offset * I.
inline ComplexMatrix materialize(const OperatorSum& op) {
  const Eigen::Index dim = dim_for_sites(op.num_sites());
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  m.diagonal().setConstant(op.offset());
  for (const auto& t : op.terms()) {
    const std::uint64_t xm = t.x_mask();
    const std::uint64_t zm = t.z_mask();
    const Complex base = t.coefficient() * detail::i_power(std::popcount(t.y_mask()));
    for (Eigen::Index col = 0; col < dim; ++col) {
      const auto c = static_cast<std::uint64_t>(col);
      const double sign = (std::popcount(c & zm) & 1) ? -1.0 : 1.0;
      m(static_cast<Eigen::Index>(c ^ xm), col) += base * sign;
    }
  }
  return m;
}

inline ComplexVector act_on(const OperatorSum& op, const ComplexVector& v) {
  ComplexVector out = op.offset() * v;
  for (const auto& t : op.terms()) out += act_on(t, v);
  return out;
}

/// <v|op|v> for unnormalized amplitudes, without forming the matrix.
inline Complex braket(const ComplexVector& v, const OperatorSum& op) {
  return v.dot(act_on(op, v));
}

inline Complex braket(const ComplexVector& v, const PauliString& p) { return v.dot(act_on(p, v)); }

/// <state|op|state> for an operator with real coefficients.
inline double expectation(const StateVector& state, const OperatorSum& op) {
  if (!op.has_real_coefficients()) throw NotHermitian("expectation: operator has complex coefficients");
  const Complex value = braket(state.amplitudes(), op);
  if (std::abs(value.imag()) > 1e-10 * std::max(1.0, std::abs(value.real()))) {
    throw NotHermitian("expectation has imaginary part " + std::to_string(value.imag()));
  }
  return value.real();
}

/// An ordered list of local pieces H_n together with their sum H.
/// Piece n is the local Hamiltonian attached to site n.
class LocalDecomposition {
 public:
  LocalDecomposition() = default;

  static LocalDecomposition from_pieces(std::vector<OperatorSum> pieces) {
    if (pieces.empty()) throw InvalidArgument("decomposition needs at least one piece");
    OperatorSum total(pieces.front().num_sites());
    for (const auto& p : pieces) total += p;
    LocalDecomposition d;
    d.pieces_ = std::move(pieces);
    d.total_ = total.canonicalized();
    return d;
  }

  const std::vector<OperatorSum>& pieces() const noexcept { return pieces_; }
  const OperatorSum& piece(std::size_t i) const { return pieces_.at(i); }
  const OperatorSum& total() const noexcept { return total_; }
  std::size_t size() const noexcept { return pieces_.size(); }
  int num_sites() const noexcept { return total_.num_sites(); }

  /// Sum of every piece except `i`.
  OperatorSum complement(std::size_t i) const {
    OperatorSum rest(num_sites());
    for (std::size_t j = 0; j < pieces_.size(); ++j) {
      if (j != i) rest += pieces_[j];
    }
    return rest.canonicalized();
  }

 private:
  std::vector<OperatorSum> pieces_;
  OperatorSum total_;
};

/// Distributes the terms of `total` over pieces. `term_indices[p]` lists the term
/// indices (into total.terms()) owned by piece p; `offsets[p]` is its constant.
/// Every term must be assigned exactly once and the offsets must sum to total.offset().
inline LocalDecomposition split_local(const OperatorSum& total,
                                      const std::vector<std::vector<std::size_t>>& term_indices,
                                      const std::vector<double>& offsets) {
  if (term_indices.empty()) throw InvalidArgument("split_local: no pieces given");
  if (offsets.size() != term_indices.size()) {
    throw InvalidArgument("split_local: one offset per piece required");
  }
  std::vector<int> seen(total.terms().size(), 0);
  std::vector<OperatorSum> pieces;
  for (std::size_t p = 0; p < term_indices.size(); ++p) {
    OperatorSum piece(total.num_sites(), offsets[p]);
    for (std::size_t idx : term_indices[p]) {
      if (idx >= total.terms().size()) throw InvalidArgument("split_local: term index out of range");
      if (seen[idx]++ != 0) {
        throw InvalidArgument("split_local: term " + std::to_string(idx) + " (" +
                              total.terms()[idx].label() + ") assigned more than once");
      }
      piece.add(total.terms()[idx]);
    }
    pieces.push_back(std::move(piece));
  }
  for (std::size_t idx = 0; idx < seen.size(); ++idx) {
    if (seen[idx] == 0) {
      throw InvalidArgument("split_local: term " + std::to_string(idx) + " (" +
                            total.terms()[idx].label() + ") is unassigned");
    }
  }
  const double offset_sum = std::accumulate(offsets.begin(), offsets.end(), 0.0);
  if (std::abs(offset_sum - total.offset()) > 1e-12 * std::max(1.0, std::abs(total.offset()))) {
    throw InvalidArgument("split_local: piece offsets do not sum to the total offset");
  }
  return LocalDecomposition::from_pieces(std::move(pieces));
}

}  // namespace qbattery
