#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "derivguide/derivation.hpp"
#include "derivguide/guidance.hpp"
#include "derivguide/model.hpp"
#include "derivguide/parser.hpp"
#include "derivguide/term.hpp"

namespace dg {

struct Limits {
  std::size_t max_selections = 20000;
  std::optional<double> wall_seconds;  // reported budgets use selections
};

enum class Status { Refutation, Saturated, LimitReached };
std::string to_string(Status s);

struct SaturationStats {
  std::size_t selections = 0;
  std::size_t generated = 0;
  std::size_t model_evals = 0;
  std::size_t classifications = 0;
  std::size_t fallbacks = 0;
  double seconds = 0.0;
  double model_eval_seconds = 0.0;
  double model_eval_time_fraction = 0.0;
};

struct SaturationOutcome {
  Status status = Status::Saturated;
  SaturationStats stats;
  DerivationStore derivation;  // selected / in_proof flags set
  std::vector<NodeId> proof;   // ascending ids, refutations only
  std::vector<NodeId> selection_sequence;
  std::vector<std::vector<Literal>> clauses;  // literals per node id
  std::vector<NodeId> final_active;
};

/// A conclusion of one inference, before it is stamped into the prover state.
struct Conclusion {
  std::vector<Literal> literals;
  std::string_view rule;
  std::vector<NodeId> premises;
};

/// Binary resolution on every opposite-polarity literal pair. `d` is renamed
/// apart internally; premises are (node(c), node(d)).
std::vector<Conclusion> resolve(const Clause& c, const Clause& d);
/// One merged instance per unifiable same-polarity literal pair.
std::vector<Conclusion> factor(const Clause& c);

/// The given-clause loop. `model` is required for every variant but Base.
SaturationOutcome saturate(std::span<const ParsedClause> initial, const SelectionScheme& scheme,
                           std::shared_ptr<const ModelParams> model, const Limits& limits,
                           const std::string& problem = {});

/// `id. <clause> [<rule> <premise-ids>]`, one line per proof node.
std::string format_proof(const SaturationOutcome& outcome);

}  // namespace dg
