#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dg {

/// Shared library of labeled arithmetic axioms. Together with a few `nat`
/// facts in a problem they generate a large number of light, useless clauses.
std::string theory_library();

/// Knobs for the synthetic chain family. Each problem holds a chain
///   q0(t), ~q0(t) | q1(t), ..., ~q{k-1}(t) | qk(t), ~qk(t)
/// over a ground term t, plus `nat` facts that feed the theory library.
/// Optional decoy steps repeat the chain over a second term u; they are
/// input clauses like the real chain but never reach the goal.
struct FamilyOptions {
  std::size_t problems = 60;
  std::uint64_t seed = 1;
  std::size_t min_chain = 2;
  std::size_t max_chain = 8;
  std::size_t min_term = 6;  // weight of the chain's ground term
  std::size_t max_term = 14;
  std::size_t min_facts = 1;
  std::size_t max_facts = 3;
  std::size_t min_decoy = 0;  // decoy steps over the second term; 0 and 0 draws nothing
  std::size_t max_decoy = 0;
  std::string prefix = "fam";
};

/// (name, problem text) pairs, names zero-padded so they sort by index.
std::vector<std::pair<std::string, std::string>> generate_family(const FamilyOptions& options);

}  // namespace dg
