#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "derivguide/derivation.hpp"
#include "derivguide/model.hpp"

namespace dg {

/// Incremental inference over a growing derivation store, as used inside
/// the prover. With the cache on, embeddings and logits are shared by every
/// node of one fingerprint class; with it off, embeddings are still memoized
/// per node but logits are recomputed on every request.
class Evaluator {
public:
  struct Stats {
    std::size_t evaluations = 0;         // eval-head applications
    std::size_t deriv_computations = 0;  // deriv-block applications
    std::size_t cache_hits = 0;
    double seconds = 0.0;                // time spent computing, lookups excluded
  };

  Evaluator(std::shared_ptr<const ModelParams> model, bool use_cache);

  double logit(const DerivationStore& store, NodeId id);
  const Eigen::VectorXd& embedding(const DerivationStore& store, NodeId id);

  const ModelParams& model() const { return *model_; }
  const Stats& stats() const { return stats_; }
  bool caching() const { return use_cache_; }

private:
  struct CacheEntry {
    Eigen::VectorXd embedding;
    std::optional<double> logit;
  };

  const Eigen::VectorXd* lookup(const DerivationStore& store, NodeId id);
  const Eigen::VectorXd& compute(const DerivationStore& store, NodeId id);

  std::shared_ptr<const ModelParams> model_;
  bool use_cache_;
  std::unordered_map<Fingerprint, CacheEntry, FingerprintHash> by_fingerprint_;
  std::vector<std::optional<Eigen::VectorXd>> by_node_;
  Stats stats_;
};

}  // namespace dg
