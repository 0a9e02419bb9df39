#pragma once

// Named observables recorded along trajectories.
//
//   <op>:<i>            single-site expectation, e.g. "sz:0"
//   <op><op>:<i>,<j>    two-site correlator, e.g. "szsz:0,5"
//   purity:<i>[,<j>]    Tr rho^2 of the one- or two-site reduced state
//   entropy:<b>         von Neumann entropy across bond b
//
// Operators are sx, sy, sz, sp (sigma+), sm (sigma-). Any site or bond may be
// written as "*" to expand over the chain (skipping i == j for correlators).
// Sites are 0-based. Non-Hermitian products produce _re and _im columns.

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "smps/errors.hpp"
#include "smps/mps.hpp"
#include "smps/operators.hpp"

namespace smps {

enum class ObservableKind { Local, Correlator, Purity, Entropy };

struct Observable {
  ObservableKind kind = ObservableKind::Local;
  std::string op1, op2;  // operator names as written
  Matrix m1, m2;
  std::size_t i = 0, j = 0;
  bool pair = false;  // two-site purity
  bool hermitian = true;

  /// Base column name, e.g. "sz_3", "szsz_0_5", "purity_5_10", "entropy_8".
  std::string name() const {
    switch (kind) {
      case ObservableKind::Local: return op1 + "_" + std::to_string(i);
      case ObservableKind::Correlator: return op1 + op2 + "_" + std::to_string(i) + "_" + std::to_string(j);
      case ObservableKind::Purity:
        return pair ? "purity_" + std::to_string(i) + "_" + std::to_string(j) : "purity_" + std::to_string(i);
      case ObservableKind::Entropy: return "entropy_" + std::to_string(i);
    }
    return {};
  }

  std::vector<std::string> columns() const {
    if (hermitian) return {name()};
    return {name() + "_re", name() + "_im"};
  }
};

namespace detail {

inline bool is_pauli_name(std::string_view s) {
  return s == "sx" || s == "sy" || s == "sz" || s == "sp" || s == "sm";
}

/// Parses a non-negative index or "*" (returned as nullopt).
inline std::optional<std::size_t> parse_index(std::string_view s, std::string_view token) {
  if (s == "*") return std::nullopt;
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw ConfigError("observables", "bad index '" + std::string(s) + "' in '" + std::string(token) + "'");
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t k = 0; k <= s.size(); ++k)
    if (k == s.size() || s[k] == sep) {
      parts.push_back(s.substr(start, k - start));
      start = k + 1;
    }
  return parts;
}

}  // namespace detail

/// Expands one token into concrete observables on a chain of `length` sites.
inline std::vector<Observable> parse_observable(std::string_view token, std::size_t length) {
  const auto colon = token.find(':');
  if (colon == std::string_view::npos)
    throw ConfigError("observables", "expected '<name>:<sites>' in '" + std::string(token) + "'");
  const std::string_view head = token.substr(0, colon);
  const auto args = detail::split(token.substr(colon + 1), ',');
  std::vector<std::optional<std::size_t>> idx;
  for (auto a : args) idx.push_back(detail::parse_index(a, token));
  const std::size_t limit = head == "entropy" ? (length > 0 ? length - 1 : 0) : length;
  for (const auto& v : idx)
    if (v && *v >= limit)
      throw ConfigError("observables", "index out of range in '" + std::string(token) + "'");

  auto range = [&](const std::optional<std::size_t>& v) {
    std::vector<std::size_t> r;
    if (v)
      r.push_back(*v);
    else
      for (std::size_t k = 0; k < limit; ++k) r.push_back(k);
    return r;
  };

  std::vector<Observable> out;
  if (head == "entropy") {
    if (idx.size() != 1) throw ConfigError("observables", "entropy takes one bond index");
    for (auto b : range(idx[0])) out.push_back({ObservableKind::Entropy, {}, {}, {}, {}, b, 0, false, true});
    return out;
  }
  if (head == "purity") {
    if (idx.empty() || idx.size() > 2) throw ConfigError("observables", "purity takes one or two sites");
    for (auto a : range(idx[0])) {
      if (idx.size() == 1) {
        out.push_back({ObservableKind::Purity, {}, {}, {}, {}, a, 0, false, true});
        continue;
      }
      for (auto b : range(idx[1]))
        if (a != b) out.push_back({ObservableKind::Purity, {}, {}, {}, {}, a, b, true, true});
    }
    return out;
  }
  if (head.size() == 2 && detail::is_pauli_name(head)) {
    if (idx.size() != 1) throw ConfigError("observables", "single-site observable takes one site");
    const Matrix m = ops::require(head);
    const bool herm = linalg::is_hermitian(m, 1e-14);
    for (auto a : range(idx[0]))
      out.push_back({ObservableKind::Local, std::string(head), {}, m, {}, a, 0, false, herm});
    return out;
  }
  if (head.size() == 4 && detail::is_pauli_name(head.substr(0, 2)) && detail::is_pauli_name(head.substr(2))) {
    if (idx.size() != 2) throw ConfigError("observables", "correlator takes two sites");
    if (idx[0] && idx[1] && *idx[0] == *idx[1])
      throw ConfigError("observables", "correlator sites must differ in '" + std::string(token) + "'");
    const Matrix a = ops::require(head.substr(0, 2)), b = ops::require(head.substr(2));
    // Operators on distinct sites commute, so the product is Hermitian iff both are.
    const bool herm = linalg::is_hermitian(a, 1e-14) && linalg::is_hermitian(b, 1e-14);
    for (auto x : range(idx[0]))
      for (auto y : range(idx[1]))
        if (x != y)
          out.push_back({ObservableKind::Correlator, std::string(head.substr(0, 2)), std::string(head.substr(2)), a, b,
                         x, y, false, herm});
    return out;
  }
  throw ConfigError("observables", "unknown observable '" + std::string(head) + "'");
}

inline std::vector<Observable> parse_observables(const std::vector<std::string>& tokens, std::size_t length) {
  std::vector<Observable> out;
  for (const auto& t : tokens) {
    auto more = parse_observable(t, length);
    out.insert(out.end(), more.begin(), more.end());
  }
  return out;
}

inline std::vector<std::string> observable_columns(const std::vector<Observable>& obs) {
  std::vector<std::string> names;
  for (const auto& o : obs)
    for (auto& c : o.columns()) names.push_back(std::move(c));
  return names;
}

/// Tolerance on the imaginary part of a Hermitian expectation value.
inline constexpr double kHermitianImagTolerance = 1e-8;

/// Values in column order for a normalized or unnormalized state.
inline std::vector<double> evaluate_observables(const std::vector<Observable>& obs, const MatrixProductState& psi) {
  std::vector<double> values;
  values.reserve(obs.size());
  auto push = [&](const Observable& o, cplx v) {
    if (o.hermitian) {
      if (std::abs(v.imag()) > kHermitianImagTolerance)
        throw NumericalError("observable " + o.name() + " has imaginary part " + std::to_string(v.imag()));
      values.push_back(v.real());
    } else {
      values.push_back(v.real());
      values.push_back(v.imag());
    }
  };
  for (const auto& o : obs) {
    switch (o.kind) {
      case ObservableKind::Local: push(o, expectation_local(psi, o.m1, o.i)); break;
      case ObservableKind::Correlator: push(o, correlation(psi, o.m1, o.i, o.m2, o.j)); break;
      case ObservableKind::Purity: {
        const Matrix rho = o.pair ? reduced_density_matrix(psi, {o.i, o.j}) : reduced_density_matrix(psi, {o.i});
        push(o, (rho * rho).trace());
        break;
      }
      case ObservableKind::Entropy: values.push_back(entanglement_entropy(psi, o.i)); break;
    }
  }
  return values;
}

}  // namespace smps
