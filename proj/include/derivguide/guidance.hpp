#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "derivguide/term.hpp"

namespace dg {

enum class SchemeVariant {
  Base,               // S
  PriorityQueueOnly,  // M^{1,0}
  LogitQueueOnly,     // M^{-R}
  BasePlusPriority,   // S (+) M^{1,0}
  BasePlusLogit,      // S (+) M^{-R}
  Layered,            // S (+) S[M^1]
};

std::string to_string(SchemeVariant v);
SchemeVariant variant_from_string(const std::string& s);

struct Ratio {
  unsigned first = 1;
  unsigned second = 1;
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Which queues exist and how they alternate.
///
/// `second_level` is written base:model, so {1,2} takes two model-side turns
/// for every base turn.
struct SelectionScheme {
  SchemeVariant variant = SchemeVariant::Base;
  Ratio age_weight{1, 10};
  Ratio second_level{1, 2};
  std::optional<double> threshold;  // falls back to the model's stored threshold
  bool lazy = true;
  bool cache = true;
  std::string model_path;

  bool uses_model() const { return variant != SchemeVariant::Base; }
  bool has_base() const;
  void validate() const;

  static SelectionScheme from_json(const nlohmann::json& j);
  static SelectionScheme load(const std::string& path);
  nlohmann::json to_json() const;
};

/// Round-robin over a period of first+second turns; the first `first` turns
/// of every period belong to the first side.
class RatioCounter {
public:
  explicit RatioCounter(Ratio r = {}) : ratio_(r) {}
  bool first_turn() const { return position_ < ratio_.first; }
  void advance() { position_ = (position_ + 1) % (ratio_.first + ratio_.second); }

private:
  Ratio ratio_;
  unsigned position_ = 0;
};

/// Source of logits for passive clauses, identified by node id.
class ClauseClassifier {
public:
  virtual ~ClauseClassifier() = default;
  virtual double logit(NodeId id) = 0;
};

struct PassiveEntry {
  NodeId id = 0;
  std::uint64_t age = 0;
  std::uint32_t weight = 0;
};

enum class SelectionSource { BaseAge, BaseWeight, ModelAge, ModelWeight, ModelPriority, ModelLogit };

struct Selection {
  NodeId id;
  SelectionSource source;
  bool fallback = false;  // a model-side turn that found no positive clause
};

struct Classification {
  bool positive;
  double logit;
};

/// positive iff logit >= threshold
inline Classification classify(double logit, double threshold) { return {logit >= threshold, logit}; }

using PriorityKey = std::tuple<int, std::uint64_t, NodeId>;
using LogitKey = std::tuple<double, std::uint64_t, NodeId>;
/// (0 if positive else 1, age, id)
PriorityKey order_key_m10(bool positive, std::uint64_t age, NodeId id);
/// (-logit, age, id)
LogitKey order_key_mR(double logit, std::uint64_t age, NodeId id);

/// The passive set as a family of priority queues. Removal is lazy: an
/// entry popped or forgotten elsewhere is skipped when it surfaces.
class PassiveStore {
public:
  /// `classifier` may be null only for the Base variant.
  PassiveStore(SelectionScheme scheme, double threshold, ClauseClassifier* classifier);

  void insert(const PassiveEntry& entry);
  /// Requires a non-empty store.
  Selection select_next();
  /// One model-side turn of the lazy layered loop: pops S-best candidates,
  /// evaluates them, forgets negatives, and returns the first positive.
  /// nullopt signals fallback.
  std::optional<Selection> lazy_select_positive();

  bool empty() const { return size_ == 0; }
  std::size_t size() const { return size_; }
  bool contains(NodeId id) const { return id < info_.size() && info_[id].in_passive; }
  /// Number of classifier queries issued.
  std::size_t classifications() const { return classifications_; }
  std::optional<double> known_logit(NodeId id) const;

private:
  struct Info {
    std::uint64_t age = 0;
    std::uint32_t weight = 0;
    bool in_passive = false;
    bool in_model = false;  // still a candidate on the model side
    std::optional<double> logit;
  };

  template <typename K>
  using MinQueue = std::priority_queue<K, std::vector<K>, std::greater<K>>;
  using AgeKey = std::tuple<std::uint64_t, NodeId>;
  using WeightKey = std::tuple<std::uint32_t, std::uint64_t, NodeId>;

  double evaluate(NodeId id);
  bool positive(NodeId id) { return evaluate(id) >= threshold_; }
  Selection take(NodeId id, SelectionSource source);

  Selection select_base();
  std::optional<Selection> select_model_side();
  std::optional<Selection> select_priority();
  std::optional<Selection> select_logit();

  template <typename K>
  std::optional<NodeId> pop_valid(MinQueue<K>& q, bool model_side);

  SelectionScheme scheme_;
  double threshold_;
  ClauseClassifier* classifier_;

  std::vector<Info> info_;
  std::size_t size_ = 0;
  std::size_t classifications_ = 0;

  RatioCounter second_level_;
  RatioCounter base_age_weight_;
  RatioCounter model_age_weight_;

  MinQueue<AgeKey> age_;
  MinQueue<WeightKey> weight_;
  MinQueue<AgeKey> model_age_;
  MinQueue<WeightKey> model_weight_;
  MinQueue<PriorityKey> priority_;
  MinQueue<AgeKey> pending_;   // lazy M^{1,0}: not yet evaluated, by age
  MinQueue<AgeKey> negative_;  // lazy M^{1,0}: evaluated negative, by age
  MinQueue<LogitKey> logit_;
};

}  // namespace dg
