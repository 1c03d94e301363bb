#pragma once

// Modular-arithmetic constraint systems backing the synthetic environment.
// A system {x = r_i (mod m_i)} is solvable iff every pair agrees modulo
// gcd(m_i, m_j); a solvable system has exactly one solution per lcm period.

#include <charconv>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "agentic/errors.hpp"

namespace agentic {

struct Constraint {
  std::int64_t residue = 0;
  std::int64_t modulus = 2;

  bool satisfied_by(std::int64_t x) const {
    const auto r = x % modulus;
    return (r < 0 ? r + modulus : r) == residue;
  }
  bool operator==(const Constraint&) const = default;
};

using ConstraintSystem = std::vector<Constraint>;

inline Constraint make_constraint(std::int64_t residue, std::int64_t modulus) {
  require(modulus >= 2, ErrorCode::InvalidArgument, "modulus must be >= 2");
  residue %= modulus;
  if (residue < 0) residue += modulus;
  return {residue, modulus};
}

inline bool satisfies(const ConstraintSystem& system, std::int64_t x) {
  for (const auto& c : system)
    if (!c.satisfied_by(x)) return false;
  return true;
}

/// lcm of all moduli (1 for an empty system).
inline std::int64_t period(const ConstraintSystem& system) {
  std::int64_t l = 1;
  for (const auto& c : system) l = std::lcm(l, c.modulus);
  return l;
}

namespace detail {

// Extended Euclid: returns g and sets a*x + b*y = g.
inline std::int64_t ext_gcd(std::int64_t a, std::int64_t b, std::int64_t& x, std::int64_t& y) {
  if (b == 0) {
    x = 1;
    y = 0;
    return a;
  }
  std::int64_t x1 = 0, y1 = 0;
  const auto g = ext_gcd(b, a % b, x1, y1);
  x = y1;
  y = x1 - (a / b) * y1;
  return g;
}

inline std::int64_t mod(std::int64_t a, std::int64_t m) {
  const auto r = a % m;
  return r < 0 ? r + m : r;
}

}  // namespace detail

/// Merges two congruences; nullopt when they contradict.
inline std::optional<Constraint> merge(const Constraint& a, const Constraint& b) {
  std::int64_t p = 0, q = 0;
  const auto g = detail::ext_gcd(a.modulus, b.modulus, p, q);
  const auto diff = b.residue - a.residue;
  if (diff % g != 0) return std::nullopt;
  const auto l = a.modulus / g * b.modulus;
  const auto step = detail::mod(static_cast<std::int64_t>(
                                    static_cast<__int128>(diff / g) * p % (b.modulus / g)),
                                b.modulus / g);
  return Constraint{detail::mod(a.residue + a.modulus * step, l), l};
}

/// Least non-negative solution, or nullopt for a contradictory system.
inline std::optional<std::int64_t> least_solution(const ConstraintSystem& system) {
  Constraint acc{0, 1};
  for (const auto& c : system) {
    if (acc.modulus == 1) {
      acc = c;
      continue;
    }
    auto merged = merge(acc, c);
    if (!merged) return std::nullopt;
    acc = *merged;
  }
  return acc.modulus == 1 ? 0 : acc.residue;
}

inline bool solvable(const ConstraintSystem& system) { return least_solution(system).has_value(); }

/// Index of the first constraint inconsistent with the consistent prefix
/// accumulated before it, scanning in order.
inline std::optional<std::size_t> first_conflict(const ConstraintSystem& system) {
  Constraint acc{0, 1};
  for (std::size_t i = 0; i < system.size(); ++i) {
    if (acc.modulus == 1) {
      acc = system[i];
      continue;
    }
    auto merged = merge(acc, system[i]);
    if (!merged) return i;
    acc = *merged;
  }
  return std::nullopt;
}

inline std::string render_constraint(const Constraint& c) {
  return "x = " + std::to_string(c.residue) + " (mod " + std::to_string(c.modulus) + ")";
}

/// Deterministic problem text for a system.
inline std::string render_system(const ConstraintSystem& system) {
  std::ostringstream out;
  out << "Find the least non-negative integer x such that ";
  for (std::size_t i = 0; i < system.size(); ++i) {
    if (i > 0) out << (i + 1 == system.size() ? " and " : ", ");
    out << render_constraint(system[i]);
  }
  out << ".";
  return out.str();
}

/// Recovers the system from render_system text; nullopt when no clause parses.
inline std::optional<ConstraintSystem> parse_system_text(std::string_view text) {
  ConstraintSystem system;
  constexpr std::string_view kClause = "x = ";
  std::size_t pos = 0;
  while ((pos = text.find(kClause, pos)) != std::string_view::npos) {
    pos += kClause.size();
    std::int64_t r = 0, m = 0;
    auto res = std::from_chars(text.data() + pos, text.data() + text.size(), r);
    if (res.ec != std::errc{}) continue;
    std::string_view rest(res.ptr, text.data() + text.size() - res.ptr);
    constexpr std::string_view kMod = " (mod ";
    if (!rest.starts_with(kMod)) continue;
    rest.remove_prefix(kMod.size());
    res = std::from_chars(rest.data(), rest.data() + rest.size(), m);
    if (res.ec != std::errc{} || res.ptr == rest.data() + rest.size() || *res.ptr != ')') continue;
    if (m < 2 || r < 0 || r >= m) continue;
    system.push_back({r, m});
  }
  if (system.empty()) return std::nullopt;
  return system;
}

/// Program text understood by the synthetic checker: "check r1%m1 r2%m2 ...".
inline std::string checker_program(const ConstraintSystem& system) {
  std::string out = "check";
  for (const auto& c : system) out += " " + std::to_string(c.residue) + "%" + std::to_string(c.modulus);
  return out;
}

/// Parses checker_program output; nullopt for malformed programs.
inline std::optional<ConstraintSystem> parse_checker_program(std::string_view program) {
  std::istringstream in{std::string(program)};
  std::string word;
  if (!(in >> word) || word != "check") return std::nullopt;
  ConstraintSystem system;
  while (in >> word) {
    const auto pct = word.find('%');
    if (pct == std::string::npos) return std::nullopt;
    try {
      std::size_t used_r = 0, used_m = 0;
      const auto r = std::stoll(word.substr(0, pct), &used_r);
      const auto m = std::stoll(word.substr(pct + 1), &used_m);
      if (used_r != pct || used_m != word.size() - pct - 1 || m < 2 || r < 0 || r >= m) return std::nullopt;
      system.push_back({r, m});
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  if (system.empty()) return std::nullopt;
  return system;
}

}  // namespace agentic
