#include "derivguide/evaluator.hpp"

#include <chrono>

#include "derivguide/network.hpp"

namespace dg {

namespace {

class Stopwatch {
public:
  explicit Stopwatch(double& sink) : sink_(sink), start_(std::chrono::steady_clock::now()) {}
  ~Stopwatch() { sink_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

private:
  double& sink_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

Evaluator::Evaluator(std::shared_ptr<const ModelParams> model, bool use_cache)
    : model_(std::move(model)), use_cache_(use_cache) {
  if (!model_) throw ModelError("evaluator needs a model");
}

const Eigen::VectorXd* Evaluator::lookup(const DerivationStore& store, NodeId id) {
  if (use_cache_) {
    auto it = by_fingerprint_.find(store.fingerprint(id));
    return it == by_fingerprint_.end() ? nullptr : &it->second.embedding;
  }
  if (id < by_node_.size() && by_node_[id]) return &*by_node_[id];
  return nullptr;
}

const Eigen::VectorXd& Evaluator::compute(const DerivationStore& store, NodeId id) {
  const auto& node = store.node(id);
  Eigen::VectorXd v;
  if (node.leaf()) {
    Stopwatch sw(stats_.seconds);
    v = init_embed(*model_, store.label(id));
  } else {
    std::vector<Eigen::VectorXd> children;
    children.reserve(node.premises.size());
    for (auto p : node.premises) children.push_back(*lookup(store, p));
    Stopwatch sw(stats_.seconds);
    v = deriv_embed(*model_, store.label(id), children);
    stats_.deriv_computations += node.premises.size() > 2 ? node.premises.size() - 1 : 1;
  }
  if (use_cache_) {
    auto [it, inserted] = by_fingerprint_.emplace(store.fingerprint(id), CacheEntry{std::move(v), std::nullopt});
    return it->second.embedding;
  }
  if (by_node_.size() <= id) by_node_.resize(store.size());
  by_node_[id] = std::move(v);
  return *by_node_[id];
}

const Eigen::VectorXd& Evaluator::embedding(const DerivationStore& store, NodeId id) {
  if (const auto* hit = lookup(store, id)) {
    ++stats_.cache_hits;
    return *hit;
  }
  // post-order over missing ancestors without recursion; derivations can be deep
  std::vector<std::pair<NodeId, bool>> stack{{id, false}};
  while (!stack.empty()) {
    auto [cur, expanded] = stack.back();
    stack.pop_back();
    if (lookup(store, cur)) continue;
    if (expanded) {
      compute(store, cur);
      continue;
    }
    stack.emplace_back(cur, true);
    for (auto p : store.node(cur).premises)
      if (!lookup(store, p)) stack.emplace_back(p, false);
  }
  return *lookup(store, id);
}

double Evaluator::logit(const DerivationStore& store, NodeId id) {
  if (use_cache_) {
    auto it = by_fingerprint_.find(store.fingerprint(id));
    if (it != by_fingerprint_.end() && it->second.logit) {
      ++stats_.cache_hits;
      return *it->second.logit;
    }
  }
  const Eigen::VectorXd& v = embedding(store, id);
  double value;
  {
    Stopwatch sw(stats_.seconds);
    value = eval_logit(*model_, v);
  }
  ++stats_.evaluations;
  if (use_cache_) by_fingerprint_[store.fingerprint(id)].logit = value;
  return value;
}

}  // namespace dg
