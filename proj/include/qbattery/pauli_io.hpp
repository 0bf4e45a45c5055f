#pragma once

// Line-oriented text format for operators:
//
//   # comment
//   sites 2            optional; required only when no term fixes the site count
//   piece 1            following lines belong to piece 1 (decompositions only)
//   -2.0 XX            <coefficient> <one letter per site>
//   offset -1.25       constant (identity) contribution
//
// Numbers use the C locale regardless of the process locale.

#include <charconv>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "qbattery/errors.hpp"
#include "qbattery/pauli.hpp"

namespace qbattery {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    if (i >= s.size()) break;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

inline std::optional<long> parse_long(std::string_view s) {
  long value = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

struct ParsedTerm {
  std::size_t line;
  std::size_t piece;
  std::optional<PauliString> term;  // empty for an offset line
  double offset = 0.0;
};

struct ParsedFile {
  std::optional<int> sites;
  bool has_piece_lines = false;
  std::vector<ParsedTerm> entries;
};

inline ParsedFile parse_lines(std::string_view text, bool allow_pieces) {
  ParsedFile file;
  std::size_t current_piece = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    ++line_no;

    auto line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto tokens = split_ws(line);
    if (tokens.size() != 2) throw ParseError(line_no, "expected two fields");

    if (tokens[0] == "sites") {
      const auto n = parse_long(tokens[1]);
      if (!n || *n < 1) throw ParseError(line_no, "invalid site count");
      if (file.sites && *file.sites != *n) throw ParseError(line_no, "conflicting site count");
      file.sites = static_cast<int>(*n);
    } else if (tokens[0] == "piece") {
      if (!allow_pieces) throw ParseError(line_no, "piece lines are not allowed here");
      const auto n = parse_long(tokens[1]);
      if (!n || *n < 0) throw ParseError(line_no, "invalid piece index");
      current_piece = static_cast<std::size_t>(*n);
      file.has_piece_lines = true;
    } else if (tokens[0] == "offset") {
      const auto v = parse_double(tokens[1]);
      if (!v) throw ParseError(line_no, "invalid offset value");
      file.entries.push_back({line_no, current_piece, std::nullopt, *v});
    } else {
      const auto coeff = parse_double(tokens[0]);
      if (!coeff) throw ParseError(line_no, "invalid coefficient '" + std::string(tokens[0]) + "'");
      PauliString term;
      try {
        term = PauliString::from_label(tokens[1], *coeff);
      } catch (const InvalidArgument& e) {
        throw ParseError(line_no, e.what());
      }
      if (file.sites && term.num_sites() != *file.sites) {
        throw ParseError(line_no, "term length does not match site count");
      }
      if (!file.sites) file.sites = term.num_sites();
      file.entries.push_back({line_no, current_piece, std::move(term), 0.0});
    }
  }
  if (!file.sites) throw ParseError(line_no, "site count unknown: add a 'sites' line");
  for (const auto& e : file.entries) {
    if (e.term && e.term->num_sites() != *file.sites) {
      throw ParseError(e.line, "term length does not match site count");
    }
  }
  return file;
}

}  // namespace detail

inline OperatorSum parse_operator_sum(std::string_view text) {
  const auto file = detail::parse_lines(text, false);
  OperatorSum op(*file.sites);
  for (const auto& e : file.entries) {
    if (e.term) {
      op.add(*e.term);
    } else {
      op.add_offset(e.offset);
    }
  }
  return op;
}

/// Parses a decomposition; a file without `piece` lines yields a single piece.
inline LocalDecomposition parse_decomposition(std::string_view text) {
  const auto file = detail::parse_lines(text, true);
  std::map<std::size_t, OperatorSum> pieces;
  for (const auto& e : file.entries) {
    auto [it, inserted] = pieces.try_emplace(e.piece, *file.sites);
    if (e.term) {
      it->second.add(*e.term);
    } else {
      it->second.add_offset(e.offset);
    }
  }
  if (pieces.empty()) pieces.try_emplace(0, *file.sites);
  std::vector<OperatorSum> ordered;
  std::size_t expected = 0;
  for (auto& [index, op] : pieces) {
    if (index != expected) {
      throw ParseError(0, "piece indices must be contiguous from 0; missing piece " +
                              std::to_string(expected));
    }
    ordered.push_back(std::move(op));
    ++expected;
  }
  return LocalDecomposition::from_pieces(std::move(ordered));
}

inline std::string to_text(const OperatorSum& op) {
  std::ostringstream out;
  out << "sites " << op.num_sites() << '\n';
  for (const auto& t : op.terms()) {
    if (std::abs(t.coefficient().imag()) > kCoefficientCutoff) {
      throw InvalidArgument("text format holds real coefficients only");
    }
    out << detail::format_double(t.coefficient().real()) << ' ' << t.label() << '\n';
  }
  if (op.offset() != 0.0) out << "offset " << detail::format_double(op.offset()) << '\n';
  return out.str();
}

inline std::string to_text(const LocalDecomposition& d) {
  std::ostringstream out;
  out << "sites " << d.num_sites() << '\n';
  for (std::size_t p = 0; p < d.size(); ++p) {
    out << "piece " << p << '\n';
    const auto body = to_text(d.piece(p));
    out << body.substr(body.find('\n') + 1);
  }
  return out.str();
}

}  // namespace qbattery
