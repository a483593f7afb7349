#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <thread>

#include "derivguide/parser.hpp"
#include "derivguide/symbols.hpp"
#include "derivguide/term.hpp"
#include "support.hpp"

using namespace dg;
using dgtest::clause;
using dgtest::lits;

namespace {

Term sym(const char* name, std::vector<Term> args = {}) { return Term::fn(SymbolTable::global().intern(name), args); }

Literal atom(const char* pred, std::vector<Term> args, bool positive = true) {
  return Literal{positive, SymbolTable::global().intern(pred), std::move(args)};
}

/// Random term over f/2, g/1, a, b and variables X0..X3.
Term random_term(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> d(0, 5);
  int k = depth <= 0 ? d(rng) % 3 : d(rng);
  switch (k) {
    case 0: return Term::var(std::uniform_int_distribution<VarId>(0, 3)(rng));
    case 1: return sym("a");
    case 2: return sym("b");
    case 3: return sym("g", {random_term(rng, depth - 1)});
    default: return sym("f", {random_term(rng, depth - 1), random_term(rng, depth - 1)});
  }
}

Literal random_literal(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, 1);
  return atom(d(rng) ? "p" : "r", {random_term(rng, 2), random_term(rng, 2)}, d(rng) == 1);
}

std::vector<Literal> random_clause(std::mt19937_64& rng, int max_len) {
  std::vector<Literal> c;
  int len = std::uniform_int_distribution<int>(1, max_len)(rng);
  for (int i = 0; i < len; ++i) c.push_back(random_literal(rng));
  return c;
}

}  // namespace

TEST_CASE("parse axiom clause with input label") {
  auto cs = parse_problem("cnf(a1, axiom, p(X) | ~q(X)).");
  REQUIRE(cs.size() == 1);
  CHECK(cs[0].origin == "input");
  CHECK(cs[0].name == "a1");
  REQUIRE(cs[0].literals.size() == 2);
  CHECK(cs[0].literals[0].positive);
  CHECK_FALSE(cs[0].literals[1].positive);
  CHECK(to_string(cs[0].literals) == "p(X0) | ~q(X0)");
}

TEST_CASE("parse theory axiom carries its origin label") {
  auto cs = parse_problem("cnf(t1, theory_axiom(assoc), eq(f(f(X,Y),Z), f(X,f(Y,Z)))).");
  REQUIRE(cs.size() == 1);
  CHECK(cs[0].origin == "assoc");
  CHECK(clause_weight(cs[0].literals) == 11);
}

TEST_CASE("empty input yields no clauses") {
  CHECK(parse_problem("").empty());
  CHECK(parse_problem("% only a comment\n\n").empty());
}

TEST_CASE("parser accepts roles, comments, parentheses and $false") {
  auto cs = parse_problem(
      "% header\n"
      "cnf(h, hypothesis, (p(a) | q)).  /* block\n comment */\n"
      "cnf(n, negated_conjecture, ~p(_Var)).\n"
      "cnf(e, axiom, $false).\n");
  REQUIRE(cs.size() == 3);
  CHECK(cs[0].literals.size() == 2);
  CHECK(cs[1].literals[0].args[0].is_var);
  CHECK(cs[2].literals.empty());
}

TEST_CASE("parser errors report position") {
  SUBCASE("syntax") {
    try {
      parse_problem("cnf(a, axiom, p(X).\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 1);
      CHECK(e.column() > 1);
    }
  }
  SUBCASE("unknown role") { CHECK_THROWS_AS(parse_problem("cnf(a, lemma, p)."), ParseError); }
  SUBCASE("arity mismatch") { CHECK_THROWS_AS(parse_problem("cnf(a, axiom, p(a)).\ncnf(b, axiom, p(a,b))."), ParseError); }
  SUBCASE("function arity mismatch") { CHECK_THROWS_AS(parse_problem("cnf(a, axiom, p(f(a)) | p(f(a,b)))."), ParseError); }
  SUBCASE("error on a later line") {
    try {
      parse_problem("cnf(a, axiom, p).\n\ncnf(b axiom, p).");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
}

TEST_CASE("parse/print round trip") {
  std::string text =
      "cnf(a, axiom, p(X, f(Y, a)) | ~q(g(X))).\n"
      "cnf(b, theory_axiom(comm), ~r(X, Y) | r(Y, X)).\n"
      "cnf(c, negated_conjecture, ~p(a, f(b, a))).\n";
  auto first = parse_problem(text);
  auto second = parse_problem(print_problem(first));
  REQUIRE(first.size() == second.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].origin == second[i].origin);
    CHECK(first[i].literals == second[i].literals);
  }
}

TEST_CASE("mgu examples") {
  auto a = lits("p(X, a)")[0];
  auto bs = lits("p(b, Y)");
  shift_variables(bs, 1);
  auto b = bs[0];
  auto s = mgu(a, b);
  REQUIRE(s);
  CHECK(s->apply(a) == s->apply(b));
  CHECK(to_string(s->apply(a)) == "p(b,a)");

  CHECK_FALSE(mgu(lits("p(X)")[0], Literal{true, SymbolTable::global().intern("p"), {sym("f", {Term::var(0)})}}));
  CHECK_FALSE(mgu(lits("p(X)")[0], lits("q(X)")[0]));
}

TEST_CASE("mgu ignores polarity") {
  CHECK(mgu(lits("p(X)")[0], lits("~p(a)")[0]));
}

TEST_CASE("mgu properties on random pairs") {
  std::mt19937_64 rng(7);
  int unified = 0;
  for (int i = 0; i < 2000; ++i) {
    Literal a = random_literal(rng);
    Literal b = random_literal(rng);
    // rename b apart
    std::vector<Literal> bs{b};
    shift_variables(bs, 4);
    b = bs[0];
    auto ab = mgu(a, b);
    auto ba = mgu(b, a);
    REQUIRE(ab.has_value() == ba.has_value());
    if (!ab) continue;
    ++unified;
    Literal ua = ab->apply(a), ub = ab->apply(b);
    CHECK(ua.args == ub.args);
    // idempotence
    CHECK(ab->apply(ua) == ua);
    // symmetric up to renaming
    CHECK(variant_equal({ua}, {ba->apply(a)}));
  }
  CHECK(unified > 50);
}

TEST_CASE("subsumption examples") {
  CHECK(subsumes(lits("p(X)"), lits("p(a) | q(b)")));
  CHECK_FALSE(subsumes(lits("p(X) | p(Y)"), lits("p(a)")));
  CHECK(subsumes(lits("p(X) | p(Y)"), lits("p(a) | p(b)")));
  CHECK_FALSE(subsumes(lits("p(X, X)"), lits("p(a, b)")));
  CHECK(subsumes(lits("p(X, Y) | ~q(Y)"), lits("~q(a) | r | p(b, a)")));
  CHECK_FALSE(subsumes(lits("p(X)"), lits("~p(a)")));
  auto c = lits("p(X, f(Y)) | ~q(Y, X)");
  CHECK(subsumes(c, c));
  CHECK(subsumes(clause("p(X)"), clause("p(f(a))")));
}

TEST_CASE("subsumption is reflexive and transitive and respects weight") {
  std::mt19937_64 rng(11);
  int chains = 0;
  for (int i = 0; i < 3000; ++i) {
    auto c = random_clause(rng, 2);
    auto d = random_clause(rng, 3);
    auto e = random_clause(rng, 4);
    shift_variables(d, 8);
    shift_variables(e, 16);
    CHECK(subsumes(c, c));
    if (subsumes(c, d)) CHECK(clause_weight(c) <= clause_weight(d));
    if (subsumes(c, d) && subsumes(d, e)) {
      ++chains;
      CHECK(subsumes(c, e));
    }
  }
  // build guaranteed chains from instances
  for (int i = 0; i < 200; ++i) {
    auto c = random_clause(rng, 2);
    Substitution s1, s2;
    // bindings use fresh variables so the substitutions stay acyclic
    s1.bind(0, sym("g", {Term::var(30)}));
    s2.bind(1, sym("f", {Term::var(31), sym("a")}));
    auto d = s1.apply(c);
    d.push_back(random_literal(rng));
    auto e = s2.apply(d);
    REQUIRE(subsumes(c, d));
    REQUIRE(subsumes(d, e));
    CHECK(subsumes(c, e));
    ++chains;
  }
  CHECK(chains >= 200);
}

TEST_CASE("clause weight counts every symbol and variable") {
  CHECK(clause_weight(lits("p(a)")) == 2);
  CHECK(clause_weight(lits("p(f(X,Y)) | ~q(X)")) == 6);
  CHECK(clause_weight(std::vector<Literal>{}) == 0);
  CHECK(clause_weight(lits("$false")) == 0);
}

TEST_CASE("tautology, duplicates and normalization") {
  CHECK(is_tautology(lits("p(X) | q | ~p(X)")));
  CHECK_FALSE(is_tautology(lits("p(X) | ~p(Y)")));
  auto d = lits("p(X) | q | p(X)");
  remove_duplicate_literals(d);
  CHECK(d.size() == 2);
  auto n = lits("p(Y, X) | q(X)");
  shift_variables(n, 5);
  CHECK(variable_bound(n) == 7);
  CHECK(normalize_variables(n) == 2);
  CHECK(to_string(n) == "p(X0,X1) | q(X1)");
}

TEST_CASE("match is one-way") {
  Substitution s;
  CHECK(match(lits("p(X, Y)")[0], lits("p(a, f(b))")[0], s));
  Substitution t;
  CHECK_FALSE(match(lits("p(a, b)")[0], lits("p(X, b)")[0], t));
}

TEST_CASE("symbol table supports concurrent interning") {
  std::vector<std::thread> threads;
  std::vector<SymbolId> ids(8);
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&, t] {
      for (int i = 0; i < 500; ++i) SymbolTable::global().intern("conc_" + std::to_string(i));
      ids[t] = SymbolTable::global().intern("conc_shared");
    });
  for (auto& th : threads) th.join();
  for (auto id : ids) CHECK(id == ids[0]);
  CHECK(SymbolTable::global().name(ids[0]) == "conc_shared");
}
