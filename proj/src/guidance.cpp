#include "derivguide/guidance.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

namespace dg {

using nlohmann::json;

std::string to_string(SchemeVariant v) {
  switch (v) {
    case SchemeVariant::Base: return "base";
    case SchemeVariant::PriorityQueueOnly: return "priority";
    case SchemeVariant::LogitQueueOnly: return "logit";
    case SchemeVariant::BasePlusPriority: return "base+priority";
    case SchemeVariant::BasePlusLogit: return "base+logit";
    case SchemeVariant::Layered: return "layered";
  }
  return "?";
}

SchemeVariant variant_from_string(const std::string& s) {
  for (auto v : {SchemeVariant::Base, SchemeVariant::PriorityQueueOnly, SchemeVariant::LogitQueueOnly,
                 SchemeVariant::BasePlusPriority, SchemeVariant::BasePlusLogit, SchemeVariant::Layered})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown scheme variant '" + s + "'");
}

bool SelectionScheme::has_base() const {
  return variant != SchemeVariant::PriorityQueueOnly && variant != SchemeVariant::LogitQueueOnly;
}

void SelectionScheme::validate() const {
  // one side may be switched off (1:0 is pure age) but not both
  if (age_weight.first + age_weight.second == 0) throw ConfigError("age:weight ratio needs a positive component");
  if (second_level.first + second_level.second == 0)
    throw ConfigError("second-level ratio needs a positive component");
  if (threshold && std::isnan(*threshold)) throw ConfigError("threshold must be a number");
  if (lazy && (variant == SchemeVariant::LogitQueueOnly || variant == SchemeVariant::BasePlusLogit))
    throw ConfigError("lazy evaluation is incompatible with logit ordering");
}

namespace {

Ratio ratio_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(std::string(what) + " must be a pair");
  return Ratio{j[0].get<unsigned>(), j[1].get<unsigned>()};
}

double threshold_value(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "inf") return std::numeric_limits<double>::infinity();
  }
  throw ConfigError("threshold must be a number, \"inf\" or \"-inf\"");
}

}  // namespace

SelectionScheme SelectionScheme::from_json(const json& j) {
  SelectionScheme s;
  try {
    if (j.contains("variant")) s.variant = variant_from_string(j.at("variant").get<std::string>());
    if (j.contains("age_weight")) s.age_weight = ratio_from_json(j.at("age_weight"), "age_weight");
    if (j.contains("second_level")) s.second_level = ratio_from_json(j.at("second_level"), "second_level");
    if (j.contains("threshold")) s.threshold = threshold_value(j.at("threshold"));
    s.lazy = j.contains("lazy") ? j.at("lazy").get<bool>()
                                : s.variant != SchemeVariant::LogitQueueOnly && s.variant != SchemeVariant::BasePlusLogit;
    if (j.contains("cache")) s.cache = j.at("cache").get<bool>();
    if (j.contains("model")) s.model_path = j.at("model").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad scheme: ") + e.what());
  }
  s.validate();
  return s;
}

SelectionScheme SelectionScheme::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

json SelectionScheme::to_json() const {
  json j = {{"variant", to_string(variant)},
            {"age_weight", {age_weight.first, age_weight.second}},
            {"second_level", {second_level.first, second_level.second}},
            {"lazy", lazy},
            {"cache", cache}};
  if (threshold) {
    if (std::isfinite(*threshold))
      j["threshold"] = *threshold;
    else
      j["threshold"] = *threshold > 0 ? "inf" : "-inf";
  }
  if (!model_path.empty()) j["model"] = model_path;
  return j;
}

PriorityKey order_key_m10(bool positive, std::uint64_t age, NodeId id) { return {positive ? 0 : 1, age, id}; }

LogitKey order_key_mR(double logit, std::uint64_t age, NodeId id) { return {-logit, age, id}; }

PassiveStore::PassiveStore(SelectionScheme scheme, double threshold, ClauseClassifier* classifier)
    : scheme_(std::move(scheme)),
      threshold_(threshold),
      classifier_(classifier),
      // model turns come first in every period
      second_level_(Ratio{scheme_.second_level.second, scheme_.second_level.first}),
      base_age_weight_(scheme_.age_weight),
      model_age_weight_(scheme_.age_weight) {
  scheme_.validate();
  if (scheme_.uses_model() && !classifier_) throw ConfigError("scheme " + to_string(scheme_.variant) + " needs a model");
}

double PassiveStore::evaluate(NodeId id) {
  auto& info = info_[id];
  if (!info.logit) {
    ++classifications_;
    info.logit = classifier_->logit(id);
  }
  return *info.logit;
}

std::optional<double> PassiveStore::known_logit(NodeId id) const {
  if (id >= info_.size()) return std::nullopt;
  return info_[id].logit;
}

void PassiveStore::insert(const PassiveEntry& e) {
  if (e.id < info_.size() && info_[e.id].in_passive)
    throw std::logic_error("clause " + std::to_string(e.id) + " is already passive");
  if (info_.size() <= e.id) info_.resize(e.id + 1);
  info_[e.id] = Info{e.age, e.weight, true, false, std::nullopt};
  ++size_;
  if (scheme_.has_base()) {
    age_.emplace(e.age, e.id);
    weight_.emplace(e.weight, e.age, e.id);
  }
  switch (scheme_.variant) {
    case SchemeVariant::Base:
      break;
    case SchemeVariant::Layered:
      if (scheme_.lazy || positive(e.id)) {
        info_[e.id].in_model = true;
        model_age_.emplace(e.age, e.id);
        model_weight_.emplace(e.weight, e.age, e.id);
      }
      break;
    case SchemeVariant::PriorityQueueOnly:
    case SchemeVariant::BasePlusPriority:
      if (scheme_.lazy)
        pending_.emplace(e.age, e.id);
      else
        priority_.push(order_key_m10(positive(e.id), e.age, e.id));
      break;
    case SchemeVariant::LogitQueueOnly:
    case SchemeVariant::BasePlusLogit:
      logit_.push(order_key_mR(evaluate(e.id), e.age, e.id));
      break;
  }
}

template <typename K>
std::optional<NodeId> PassiveStore::pop_valid(MinQueue<K>& q, bool model_side) {
  while (!q.empty()) {
    NodeId id = std::get<std::tuple_size_v<K> - 1>(q.top());
    q.pop();
    const auto& info = info_[id];
    if (info.in_passive && (!model_side || info.in_model)) return id;
  }
  return std::nullopt;
}

Selection PassiveStore::take(NodeId id, SelectionSource source) {
  auto& info = info_[id];
  info.in_passive = false;
  info.in_model = false;
  --size_;
  return Selection{id, source, false};
}

Selection PassiveStore::select_next() {
  if (empty()) throw std::logic_error("select_next on an empty passive set");
  if (!scheme_.has_base()) {
    auto s = select_model_side();
    if (!s) throw std::logic_error("model queue out of sync with passive set");
    return *s;
  }
  if (!scheme_.uses_model()) return select_base();
  const bool model_turn = second_level_.first_turn();
  second_level_.advance();
  if (model_turn) {
    if (auto s = select_model_side()) return *s;
    Selection s = select_base();
    s.fallback = true;
    return s;
  }
  return select_base();
}

Selection PassiveStore::select_base() {
  const bool by_age = base_age_weight_.first_turn();
  base_age_weight_.advance();
  auto id = by_age ? pop_valid(age_, false) : pop_valid(weight_, false);
  if (!id) throw std::logic_error("base queues out of sync with passive set");
  return take(*id, by_age ? SelectionSource::BaseAge : SelectionSource::BaseWeight);
}

std::optional<Selection> PassiveStore::select_model_side() {
  switch (scheme_.variant) {
    case SchemeVariant::Layered:
      return lazy_select_positive();
    case SchemeVariant::PriorityQueueOnly:
    case SchemeVariant::BasePlusPriority:
      return select_priority();
    case SchemeVariant::LogitQueueOnly:
    case SchemeVariant::BasePlusLogit:
      return select_logit();
    case SchemeVariant::Base:
      break;
  }
  return std::nullopt;
}

std::optional<Selection> PassiveStore::lazy_select_positive() {
  // S picks the queue once per turn; negatives are skipped within that queue.
  // In eager mode the model-side queues only ever hold positives, so the
  // same loop performs no evaluations.
  const bool by_age = model_age_weight_.first_turn();
  while (auto id = by_age ? pop_valid(model_age_, true) : pop_valid(model_weight_, true)) {
    if (positive(*id)) {
      model_age_weight_.advance();
      return take(*id, by_age ? SelectionSource::ModelAge : SelectionSource::ModelWeight);
    }
    info_[*id].in_model = false;  // forgotten by S[M^1], still passive for S
  }
  return std::nullopt;
}

std::optional<Selection> PassiveStore::select_priority() {
  if (!scheme_.lazy) {
    if (auto id = pop_valid(priority_, false)) return take(*id, SelectionSource::ModelPriority);
    return std::nullopt;
  }
  while (auto id = pop_valid(pending_, false)) {
    if (positive(*id)) return take(*id, SelectionSource::ModelPriority);
    negative_.emplace(info_[*id].age, *id);
  }
  if (auto id = pop_valid(negative_, false)) return take(*id, SelectionSource::ModelPriority);
  return std::nullopt;
}

std::optional<Selection> PassiveStore::select_logit() {
  if (auto id = pop_valid(logit_, false)) return take(*id, SelectionSource::ModelLogit);
  return std::nullopt;
}

}  // namespace dg
