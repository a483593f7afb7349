#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "derivguide/symbols.hpp"

namespace dg {

using VarId = std::uint32_t;
using NodeId = std::uint32_t;

/// A first-order term: a variable or a function symbol applied to arguments.
/// Constants are nullary functions.
struct Term {
  bool is_var = false;
  std::uint32_t id = 0;  // VarId when is_var, SymbolId otherwise
  std::vector<Term> args;

  static Term var(VarId v) { return Term{true, v, {}}; }
  static Term fn(SymbolId f, std::vector<Term> args = {}) { return Term{false, f, std::move(args)}; }

  friend bool operator==(const Term& a, const Term& b) {
    return a.is_var == b.is_var && a.id == b.id && a.args == b.args;
  }
};

struct Literal {
  bool positive = true;
  SymbolId predicate = 0;
  std::vector<Term> args;

  friend bool operator==(const Literal& a, const Literal& b) {
    return a.positive == b.positive && a.predicate == b.predicate && a.args == b.args;
  }
};

/// A clause is a multiset of literals plus the bookkeeping the prover needs.
struct Clause {
  std::vector<Literal> literals;
  std::uint64_t age = 0;
  std::uint32_t weight = 0;
  NodeId node = 0;

  bool empty() const { return literals.empty(); }
};

/// Variable bindings. Triangular while unification runs; `mgu` and `match`
/// hand back fully resolved (idempotent) substitutions.
class Substitution;
std::optional<Substitution> mgu(const Literal& a, const Literal& b);
std::optional<Substitution> mgu(const Term& a, const Term& b);

class Substitution {
public:
  const Term* lookup(VarId v) const;
  void bind(VarId v, Term t);
  bool bound(VarId v) const { return lookup(v) != nullptr; }

  Term apply(const Term& t) const;
  Literal apply(const Literal& l) const;
  std::vector<Literal> apply(const std::vector<Literal>& ls) const;

  /// Bound variables in ascending order.
  std::vector<VarId> domain() const;
  std::size_t size() const;

private:
  friend class Unifier;
  friend std::optional<Substitution> mgu(const Literal&, const Literal&);
  friend std::optional<Substitution> mgu(const Term&, const Term&);
  std::vector<std::optional<Term>> bindings_;
};

/// Most general unifier of the atoms of `a` and `b`; polarity is ignored.
/// Absent on symbol clash or occurs-check failure.
std::optional<Substitution> mgu(const Literal& a, const Literal& b);
std::optional<Substitution> mgu(const Term& a, const Term& b);

/// One-way matching: a substitution `s` over the variables of `pattern` with
/// s(pattern) == instance. Variables of `instance` are treated as constants.
bool match(const Literal& pattern, const Literal& instance, Substitution& s);

/// True iff some substitution maps `c` onto a sub-multiset of `d`.
bool subsumes(const Clause& c, const Clause& d);
bool subsumes(const std::vector<Literal>& c, const std::vector<Literal>& d);

/// Symbol counting: every predicate, function and variable occurrence is 1.
std::uint32_t clause_weight(const std::vector<Literal>& literals);
inline std::uint32_t clause_weight(const Clause& c) { return clause_weight(c.literals); }
std::uint32_t term_weight(const Term& t);

/// Contains some literal together with its complement.
bool is_tautology(const std::vector<Literal>& literals);

/// Renumbers variables 0..k-1 in order of first occurrence; returns k.
VarId normalize_variables(std::vector<Literal>& literals);
/// One past the largest variable id (0 for ground clauses).
VarId variable_bound(const std::vector<Literal>& literals);
void shift_variables(std::vector<Literal>& literals, VarId offset);
/// Drops exact duplicate literals, keeping first occurrences.
void remove_duplicate_literals(std::vector<Literal>& literals);

/// Equal after normalizing variable names (and literal order kept as-is).
bool variant_equal(std::vector<Literal> a, std::vector<Literal> b);

std::string to_string(const Term& t);
std::string to_string(const Literal& l);
/// `p(X0) | ~q(X0)`, or `$false` for the empty clause.
std::string to_string(const std::vector<Literal>& literals);
inline std::string to_string(const Clause& c) { return to_string(c.literals); }

}  // namespace dg
