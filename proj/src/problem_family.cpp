#include "derivguide/problem_family.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <sstream>

namespace dg {

std::string theory_library() {
  return "% arithmetic closure axioms\n"
         "cnf(nat_succ, theory_axiom(nat_succ), ~nat(X) | nat(s(X))).\n"
         "cnf(nat_plus, theory_axiom(nat_plus), ~nat(X) | ~nat(Y) | nat(plus(X, Y))).\n"
         "cnf(nat_times, theory_axiom(nat_times), ~nat(X) | ~nat(Y) | nat(times(X, Y))).\n"
         "cnf(le_succ, theory_axiom(le_succ), ~nat(X) | le(X, s(X))).\n"
         "cnf(le_trans, theory_axiom(le_trans), ~le(X, Y) | ~le(Y, Z) | le(X, Z)).\n";
}

namespace {

std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, std::max(lo, hi))(rng);
}

/// Random ground term of exactly `weight` symbols over f/2, g/1 and two constants.
std::string ground_term(std::mt19937_64& rng, std::size_t weight) {
  if (weight <= 1) return uniform(rng, 0, 1) ? "a" : "b";
  if (weight == 2 || uniform(rng, 0, 2) == 0) return "g(" + ground_term(rng, weight - 1) + ")";
  std::size_t left = uniform(rng, 1, weight - 2);
  return "f(" + ground_term(rng, left) + ", " + ground_term(rng, weight - 1 - left) + ")";
}

}  // namespace

std::vector<std::pair<std::string, std::string>> generate_family(const FamilyOptions& o) {
  std::mt19937_64 rng(o.seed);
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < o.problems; ++i) {
    const std::size_t k = uniform(rng, o.min_chain, o.max_chain);
    const std::size_t w = uniform(rng, o.min_term, o.max_term);
    const std::size_t facts = uniform(rng, o.min_facts, o.max_facts);
    const std::string t = ground_term(rng, w);

    std::vector<std::string> clauses;
    clauses.push_back("cnf(start, axiom, q0(" + t + ")).");
    for (std::size_t j = 0; j < k; ++j)
      clauses.push_back("cnf(step" + std::to_string(j) + ", axiom, ~q" + std::to_string(j) + "(" + t + ") | q" +
                        std::to_string(j + 1) + "(" + t + ")).");
    clauses.push_back("cnf(goal, negated_conjecture, ~q" + std::to_string(k) + "(" + t + ")).");
    std::size_t decoys = 0;
    if (o.max_decoy > 0) {
      decoys = uniform(rng, o.min_decoy, o.max_decoy);
      std::string u = ground_term(rng, w);
      while (u == t) u = ground_term(rng, w);
      if (decoys > 0) clauses.push_back("cnf(decoy_start, axiom, q0(" + u + ")).");
      for (std::size_t j = 0; j < decoys; ++j)
        clauses.push_back("cnf(decoy" + std::to_string(j) + ", axiom, ~q" + std::to_string(j) + "(" + u + ") | q" +
                          std::to_string(j + 1) + "(" + u + ")).");
    }
    for (std::size_t j = 0; j < facts; ++j)
      clauses.push_back("cnf(fact" + std::to_string(j) + ", axiom, nat(c" + std::to_string(j) + ")).");
    std::shuffle(clauses.begin(), clauses.end(), rng);

    std::ostringstream text;
    text << "% chain " << k << ", term weight " << w << ", " << facts << " nat facts";
    if (decoys > 0) text << ", " << decoys << " decoy steps";
    text << '\n';
    for (const auto& c : clauses) text << c << '\n';
    char name[64];
    std::snprintf(name, sizeof name, "%s%03zu", o.prefix.c_str(), i);
    out.emplace_back(name, text.str());
  }
  return out;
}

}  // namespace dg
