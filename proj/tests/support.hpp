#pragma once

#include <random>
#include <string>
#include <vector>

#include "derivguide/derivation.hpp"
#include "derivguide/model.hpp"
#include "derivguide/parser.hpp"
#include "derivguide/term.hpp"

namespace dgtest {

/// Literals of a single clause written in the input syntax, e.g. "p(X) | ~q(a)".
inline std::vector<dg::Literal> lits(const std::string& disjunction) {
  auto cs = dg::parse_problem("cnf(c, axiom, " + disjunction + ").");
  return cs.at(0).literals;
}

inline dg::Clause clause(const std::string& disjunction, dg::NodeId node = 0) {
  dg::Clause c;
  c.literals = lits(disjunction);
  c.weight = dg::clause_weight(c.literals);
  c.node = node;
  return c;
}

inline std::vector<dg::ParsedClause> problem(const std::string& text) { return dg::parse_problem(text); }

inline const std::vector<std::string>& test_origins() {
  static const std::vector<std::string> o{"input", "thax_a", "thax_b"};
  return o;
}

inline const std::vector<dg::RuleSignature>& test_rules() {
  static const std::vector<dg::RuleSignature> r{{"Resolution", 2}, {"Factoring", 1}};
  return r;
}

inline dg::ModelParams random_model(std::size_t n, std::uint64_t seed) {
  auto m = dg::ModelParams::create(n, test_origins(), test_rules(), seed);
  // perturb gamma/beta/c away from their neutral initial values
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& v : m.values()) v += 0.1 * u(rng);
  return m;
}

/// Random derivation DAG with shared subderivations. Leaves use the test
/// origins; inner nodes pick Resolution over two earlier nodes or Factoring
/// over one, biased towards recent nodes so depth grows.
inline dg::DerivationStore random_dag(std::mt19937_64& rng, std::size_t leaves, std::size_t inner,
                                      std::size_t max_depth = 6) {
  dg::DerivationStore s("random");
  std::vector<std::size_t> depth;
  std::uniform_int_distribution<std::size_t> pick_origin(0, test_origins().size() - 1);
  for (std::size_t i = 0; i < leaves; ++i) {
    s.record(test_origins()[pick_origin(rng)]);
    depth.push_back(0);
  }
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (std::size_t i = 0; i < inner; ++i) {
    auto pick = [&] {
      // prefer recent nodes but allow any; reject picks that would exceed max_depth
      for (int tries = 0; tries < 50; ++tries) {
        std::size_t n = s.size();
        std::size_t lo = coin(rng) < 0.6 && n > 4 ? n - 4 : 0;
        std::size_t id = std::uniform_int_distribution<std::size_t>(lo, n - 1)(rng);
        if (depth[id] + 1 <= max_depth) return static_cast<dg::NodeId>(id);
      }
      return static_cast<dg::NodeId>(0);
    };
    dg::NodeId id;
    if (coin(rng) < 0.75) {
      dg::NodeId a = pick(), b = pick();
      id = s.record("Resolution", {a, b});
      depth.push_back(std::max(depth[a], depth[b]) + 1);
    } else {
      dg::NodeId a = pick();
      id = s.record("Factoring", {a});
      depth.push_back(depth[a] + 1);
    }
    (void)id;
  }
  for (dg::NodeId i = 0; i < s.size(); ++i)
    if (coin(rng) < 0.6) s.set_selected(i);
  for (dg::NodeId i = 0; i < s.size(); ++i)
    if (s.node(i).selected && coin(rng) < 0.4) s.set_in_proof(i);
  return s;
}

}  // namespace dgtest
