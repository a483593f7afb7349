#include "derivguide/prover.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <sstream>
#include <unordered_map>

#include "derivguide/evaluator.hpp"

namespace dg {

std::string to_string(Status s) {
  switch (s) {
    case Status::Refutation: return "refutation";
    case Status::Saturated: return "saturated";
    case Status::LimitReached: return "limit";
  }
  return "?";
}

namespace {

std::vector<Literal> finish(std::vector<Literal> lits) {
  remove_duplicate_literals(lits);
  normalize_variables(lits);
  return lits;
}

}  // namespace

std::vector<Conclusion> resolve(const Clause& c, const Clause& d) {
  std::vector<Literal> renamed = d.literals;
  shift_variables(renamed, variable_bound(c.literals));
  std::vector<Conclusion> out;
  for (std::size_t i = 0; i < c.literals.size(); ++i) {
    const Literal& l = c.literals[i];
    for (std::size_t j = 0; j < renamed.size(); ++j) {
      const Literal& m = renamed[j];
      if (l.positive == m.positive || l.predicate != m.predicate) continue;
      auto theta = mgu(l, m);
      if (!theta) continue;
      std::vector<Literal> lits;
      lits.reserve(c.literals.size() + renamed.size() - 2);
      for (std::size_t k = 0; k < c.literals.size(); ++k)
        if (k != i) lits.push_back(theta->apply(c.literals[k]));
      for (std::size_t k = 0; k < renamed.size(); ++k)
        if (k != j) lits.push_back(theta->apply(renamed[k]));
      out.push_back(Conclusion{finish(std::move(lits)), kResolutionRule, {c.node, d.node}});
    }
  }
  return out;
}

std::vector<Conclusion> factor(const Clause& c) {
  std::vector<Conclusion> out;
  for (std::size_t i = 0; i < c.literals.size(); ++i)
    for (std::size_t j = i + 1; j < c.literals.size(); ++j) {
      const Literal& a = c.literals[i];
      const Literal& b = c.literals[j];
      if (a.positive != b.positive || a.predicate != b.predicate) continue;
      auto theta = mgu(a, b);
      if (!theta) continue;
      std::vector<Literal> lits;
      for (std::size_t k = 0; k < c.literals.size(); ++k)
        if (k != j) lits.push_back(theta->apply(c.literals[k]));
      out.push_back(Conclusion{finish(std::move(lits)), kFactoringRule, {c.node}});
    }
  return out;
}

namespace {

class ModelClassifier : public ClauseClassifier {
public:
  ModelClassifier(Evaluator& evaluator, const DerivationStore& store) : evaluator_(evaluator), store_(store) {}
  double logit(NodeId id) override { return evaluator_.logit(store_, id); }

private:
  Evaluator& evaluator_;
  const DerivationStore& store_;
};

/// Active clauses plus the top-symbol indexes used to find inference and
/// subsumption partners.
class ActiveSet {
public:
  void add(const Clause& c) {
    if (member_.size() <= c.node) member_.resize(c.node + 1, 0);
    member_[c.node] = 1;
    ids_.push_back(c.node);
    for (const auto& l : c.literals) occurrences(l.positive, l.predicate).push_back(c.node);
    if (!c.literals.empty())
      first_[key(c.literals[0].positive, c.literals[0].predicate)].push_back(c.node);
  }
  void remove(NodeId id) { member_[id] = 0; }
  bool contains(NodeId id) const { return id < member_.size() && member_[id]; }

  /// Active clauses with some literal of the given sign and predicate.
  std::vector<NodeId> with_literal(bool positive, SymbolId predicate) const {
    auto it = (positive ? pos_ : neg_).find(predicate);
    return live(it == (positive ? pos_ : neg_).end() ? nullptr : &it->second);
  }
  std::vector<NodeId> with_first_literal(bool positive, SymbolId predicate) const {
    auto it = first_.find(key(positive, predicate));
    return live(it == first_.end() ? nullptr : &it->second);
  }
  std::vector<NodeId> all() const { return live(&ids_); }

private:
  static std::uint64_t key(bool positive, SymbolId p) { return (static_cast<std::uint64_t>(p) << 1) | positive; }

  std::vector<NodeId>& occurrences(bool positive, SymbolId p) { return (positive ? pos_ : neg_)[p]; }

  std::vector<NodeId> live(const std::vector<NodeId>* ids) const {
    std::vector<NodeId> out;
    if (!ids) return out;
    for (auto id : *ids)
      if (contains(id)) out.push_back(id);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::vector<char> member_;
  std::vector<NodeId> ids_;
  std::unordered_map<SymbolId, std::vector<NodeId>> pos_;
  std::unordered_map<SymbolId, std::vector<NodeId>> neg_;
  std::unordered_map<std::uint64_t, std::vector<NodeId>> first_;
};

class Prover {
public:
  Prover(const SelectionScheme& scheme, std::shared_ptr<const ModelParams> model, const Limits& limits,
         const std::string& problem)
      : limits_(limits) {
    outcome_.derivation.set_problem(problem);
    scheme.validate();
    if (scheme.uses_model()) {
      if (!model) throw ConfigError("scheme " + to_string(scheme.variant) + " needs a model");
      evaluator_.emplace(model, scheme.cache);
      classifier_.emplace(*evaluator_, outcome_.derivation);
    }
    double threshold = scheme.threshold.value_or(model ? model->threshold() : 0.0);
    passive_.emplace(scheme, threshold, classifier_ ? &*classifier_ : nullptr);
  }

  SaturationOutcome run(std::span<const ParsedClause> initial) {
    start_ = std::chrono::steady_clock::now();
    outcome_.status = loop(initial);
    auto& stats = outcome_.stats;
    stats.seconds = elapsed();
    if (evaluator_) {
      stats.model_evals = evaluator_->stats().evaluations;
      stats.model_eval_seconds = evaluator_->stats().seconds;
      if (stats.seconds > 0) stats.model_eval_time_fraction = std::min(stats.model_eval_seconds / stats.seconds, 1.0);
    }
    stats.classifications = passive_->classifications();
    outcome_.final_active = active_.all();
    return std::move(outcome_);
  }

private:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  /// Stamps a new clause; returns true if it is the empty clause.
  bool add_clause(std::vector<Literal> literals, std::string_view label, std::span<const NodeId> premises) {
    NodeId id = outcome_.derivation.record(label, premises);
    Clause c;
    c.weight = clause_weight(literals);
    c.age = next_age_++;
    c.node = id;
    c.literals = std::move(literals);
    clauses_.push_back(std::move(c));
    const Clause& stored = clauses_.back();
    if (stored.empty()) {
      outcome_.proof = extract_proof(outcome_.derivation, id);
      return true;
    }
    passive_->insert(PassiveEntry{id, stored.age, stored.weight});
    return false;
  }

  bool forward_subsumed(const Clause& c) const {
    std::vector<NodeId> candidates;
    for (const auto& l : c.literals) {
      auto ids = active_.with_first_literal(l.positive, l.predicate);
      candidates.insert(candidates.end(), ids.begin(), ids.end());
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    for (auto id : candidates)
      if (subsumes(clauses_[id], c)) return true;
    return false;
  }

  void backward_subsume(const Clause& c) {
    const Literal& first = c.literals[0];
    for (auto id : active_.with_literal(first.positive, first.predicate))
      if (subsumes(c, clauses_[id])) active_.remove(id);
  }

  Status loop(std::span<const ParsedClause> initial) {
    for (const auto& pc : initial) {
      std::vector<Literal> lits = pc.literals;
      normalize_variables(lits);
      if (add_clause(std::move(lits), pc.origin, {})) return Status::Refutation;
    }
    auto& stats = outcome_.stats;
    std::vector<NodeId> partners;
    while (!passive_->empty()) {
      if (stats.selections >= limits_.max_selections) return Status::LimitReached;
      if (limits_.wall_seconds && elapsed() > *limits_.wall_seconds) return Status::LimitReached;

      Selection sel = passive_->select_next();
      ++stats.selections;
      if (sel.fallback) ++stats.fallbacks;
      outcome_.selection_sequence.push_back(sel.id);
      outcome_.derivation.set_selected(sel.id);

      // clauses_ may grow below; work on a copy of the given clause
      const Clause given = clauses_[sel.id];
      if (is_tautology(given.literals) || forward_subsumed(given)) continue;
      backward_subsume(given);
      active_.add(given);

      std::vector<Conclusion> conclusions = factor(given);
      partners.clear();
      for (const auto& l : given.literals) {
        auto ids = active_.with_literal(!l.positive, l.predicate);
        partners.insert(partners.end(), ids.begin(), ids.end());
      }
      std::sort(partners.begin(), partners.end());
      partners.erase(std::unique(partners.begin(), partners.end()), partners.end());
      for (auto id : partners) {
        auto more = resolve(given, clauses_[id]);
        std::move(more.begin(), more.end(), std::back_inserter(conclusions));
      }
      for (auto& c : conclusions) {
        ++stats.generated;
        if (add_clause(std::move(c.literals), c.rule, c.premises)) return Status::Refutation;
      }
    }
    return Status::Saturated;
  }

  Limits limits_;
  SaturationOutcome outcome_;
  std::optional<Evaluator> evaluator_;
  std::optional<ModelClassifier> classifier_;
  std::optional<PassiveStore> passive_;
  ActiveSet active_;
  std::vector<Clause> clauses_;
  std::uint64_t next_age_ = 0;
  std::chrono::steady_clock::time_point start_;

public:
  std::vector<Clause>& clauses() { return clauses_; }
};

}  // namespace

SaturationOutcome saturate(std::span<const ParsedClause> initial, const SelectionScheme& scheme,
                           std::shared_ptr<const ModelParams> model, const Limits& limits, const std::string& problem) {
  Prover prover(scheme, std::move(model), limits, problem);
  SaturationOutcome out = prover.run(initial);
  out.clauses.reserve(prover.clauses().size());
  for (auto& c : prover.clauses()) out.clauses.push_back(std::move(c.literals));
  return out;
}

std::string format_proof(const SaturationOutcome& outcome) {
  std::ostringstream out;
  const auto& store = outcome.derivation;
  for (auto id : outcome.proof) {
    const auto& n = store.node(id);
    out << id << ". " << to_string(outcome.clauses[id]) << " [" << store.label(id);
    for (auto p : n.premises) out << ' ' << p;
    out << "]\n";
  }
  return out.str();
}

}  // namespace dg
