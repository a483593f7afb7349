#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <random>

#include "derivguide/guidance.hpp"

using namespace dg;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Fixed logits per node id, counting every query.
class TableClassifier : public ClauseClassifier {
public:
  explicit TableClassifier(std::map<NodeId, double> logits) : logits_(std::move(logits)) {}
  double logit(NodeId id) override {
    ++queries;
    return logits_.at(id);
  }
  std::size_t queries = 0;

private:
  std::map<NodeId, double> logits_;
};

bool is_model_source(SelectionSource s) { return s != SelectionSource::BaseAge && s != SelectionSource::BaseWeight; }

struct Fixture {
  std::vector<PassiveEntry> entries;
  std::map<NodeId, double> logits;
};

Fixture random_fixture(std::uint64_t seed, std::size_t n, double positive_rate = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint32_t> w(1, 40);
  std::uniform_real_distribution<double> u(0, 1);
  Fixture f;
  for (NodeId i = 0; i < n; ++i) {
    f.entries.push_back({i, i, w(rng)});
    f.logits[i] = u(rng) < positive_rate ? u(rng) * 3 : -u(rng) * 3 - 0.01;
  }
  return f;
}

std::vector<Selection> drain(PassiveStore& p) {
  std::vector<Selection> out;
  while (!p.empty()) out.push_back(p.select_next());
  return out;
}

std::vector<NodeId> ids(const std::vector<Selection>& s) {
  std::vector<NodeId> out;
  for (const auto& x : s) out.push_back(x.id);
  return out;
}

SelectionScheme scheme(SchemeVariant v, bool lazy) {
  SelectionScheme s;
  s.variant = v;
  s.lazy = lazy;
  return s;
}

}  // namespace

TEST_CASE("ratio counter gives the first side the first turns of each period") {
  RatioCounter c(Ratio{1, 10});
  std::vector<bool> turns;
  for (int i = 0; i < 22; ++i) {
    turns.push_back(c.first_turn());
    c.advance();
  }
  for (int i = 0; i < 22; ++i) CHECK(turns[i] == (i % 11 == 0));

  RatioCounter pure_age(Ratio{1, 0});
  for (int i = 0; i < 5; ++i, pure_age.advance()) CHECK(pure_age.first_turn());
}

TEST_CASE("age:weight 1:10 over 11 selections") {
  SelectionScheme s;
  PassiveStore p(s, 0.0, nullptr);
  // weight decreasing with age so the two queues disagree
  for (NodeId i = 0; i < 20; ++i) p.insert({i, i, 100 - i});
  std::vector<Selection> picks;
  for (int i = 0; i < 11; ++i) picks.push_back(p.select_next());
  CHECK(picks[0].source == SelectionSource::BaseAge);
  CHECK(picks[0].id == 0);
  for (int i = 1; i < 11; ++i) {
    CHECK(picks[i].source == SelectionSource::BaseWeight);
    CHECK(picks[i].id == 20 - i);
  }
}

TEST_CASE("age:weight ratio is exact over 3300 selections") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint32_t> w(1, 50);
  SelectionScheme s;
  PassiveStore p(s, 0.0, nullptr);
  for (NodeId i = 0; i < 3300; ++i) p.insert({i, i, w(rng)});
  std::size_t age = 0, weight = 0;
  for (auto sel : drain(p)) (sel.source == SelectionSource::BaseAge ? age : weight)++;
  CHECK(age == 300);
  CHECK(weight == 3000);
}

TEST_CASE("weight ties break by age then id") {
  SelectionScheme s;
  s.age_weight = {0, 1};
  PassiveStore p(s, 0.0, nullptr);
  p.insert({5, 3, 7});
  p.insert({2, 1, 7});
  p.insert({9, 0, 8});
  CHECK(ids(drain(p)) == std::vector<NodeId>{2, 5, 9});
}

TEST_CASE("lazy layered store evaluates nothing at insertion") {
  auto f = random_fixture(1, 100);
  TableClassifier lazy_c(f.logits), eager_c(f.logits);
  PassiveStore lazy(scheme(SchemeVariant::Layered, true), 0.0, &lazy_c);
  PassiveStore eager(scheme(SchemeVariant::Layered, false), 0.0, &eager_c);
  for (auto e : f.entries) {
    lazy.insert(e);
    eager.insert(e);
  }
  CHECK(lazy.classifications() == 0);
  CHECK(lazy_c.queries == 0);
  CHECK(eager.classifications() == 100);
  CHECK(eager_c.queries == 100);
}

TEST_CASE("eager logit ordering evaluates every insertion") {
  auto f = random_fixture(2, 100);
  TableClassifier c(f.logits);
  PassiveStore p(scheme(SchemeVariant::BasePlusLogit, false), 0.0, &c);
  for (auto e : f.entries) p.insert(e);
  CHECK(p.classifications() == 100);
}

TEST_CASE("lazy model turn skips negatives and stops at the first positive") {
  TableClassifier c({{0, -1.0}, {1, -2.0}, {2, 3.0}, {3, 5.0}});
  auto s = scheme(SchemeVariant::Layered, true);
  s.age_weight = {1, 0};
  PassiveStore p(s, 0.0, &c);
  for (NodeId i = 0; i < 4; ++i) p.insert({i, i, 1});
  auto pick = p.lazy_select_positive();
  REQUIRE(pick);
  CHECK(pick->id == 2);
  CHECK(pick->source == SelectionSource::ModelAge);
  CHECK(p.classifications() == 3);
  // negatives stay passive for the base side
  CHECK(p.contains(0));
  CHECK(p.contains(1));
  CHECK(p.size() == 3);
  // and are not reevaluated by the model side
  auto next = p.lazy_select_positive();
  REQUIRE(next);
  CHECK(next->id == 3);
  CHECK(p.classifications() == 4);
  CHECK_FALSE(p.lazy_select_positive());
  CHECK(p.classifications() == 4);
}

TEST_CASE("all-negative layered run falls back and matches Base") {
  auto f = random_fixture(3, 200, 0.0);
  TableClassifier c(f.logits);
  PassiveStore layered(scheme(SchemeVariant::Layered, true), 0.0, &c);
  PassiveStore base(SelectionScheme{}, 0.0, nullptr);
  for (auto e : f.entries) {
    layered.insert(e);
    base.insert(e);
  }
  auto a = drain(layered);
  auto b = drain(base);
  CHECK(ids(a) == ids(b));
  std::size_t fallbacks = 0;
  for (const auto& s : a) {
    CHECK_FALSE(is_model_source(s.source));
    fallbacks += s.fallback;
  }
  // two of every three turns belong to the model side under 1:2
  CHECK(fallbacks > 120);
}

TEST_CASE("classification boundary") {
  CHECK(classify(0.0, 0.0).positive);
  CHECK_FALSE(classify(-1e-300, 0.0).positive);
  CHECK(classify(-0.25, -0.25).positive);
  CHECK(classify(-1e300, -kInf).positive);
  CHECK(classify(-kInf, -kInf).positive);
  CHECK_FALSE(classify(1e300, kInf).positive);
  CHECK(classify(2.0, 0.0).logit == 2.0);
}

TEST_CASE("order keys") {
  CHECK(order_key_m10(true, 100, 5) < order_key_m10(false, 0, 0));
  CHECK(order_key_m10(false, 3, 9) < order_key_m10(false, 4, 1));
  CHECK(order_key_m10(true, 3, 1) < order_key_m10(true, 3, 2));
  CHECK(order_key_mR(2.0, 100, 5) < order_key_mR(1.0, 0, 0));
  CHECK(order_key_mR(1.0, 1, 5) < order_key_mR(1.0, 2, 0));
}

TEST_CASE("lazy and eager agree on the selection sequence") {
  for (auto v : {SchemeVariant::Layered, SchemeVariant::BasePlusPriority, SchemeVariant::PriorityQueueOnly}) {
    for (std::uint64_t seed = 10; seed < 30; ++seed) {
      auto f = random_fixture(seed, 150);
      TableClassifier lc(f.logits), ec(f.logits);
      PassiveStore lazy(scheme(v, true), 0.0, &lc);
      PassiveStore eager(scheme(v, false), 0.0, &ec);
      std::vector<Selection> ls, es;
      // interleave insertions and selections like a prover would
      for (std::size_t i = 0; i < f.entries.size(); ++i) {
        lazy.insert(f.entries[i]);
        eager.insert(f.entries[i]);
        if (i % 3 == 2) {
          ls.push_back(lazy.select_next());
          es.push_back(eager.select_next());
        }
      }
      auto lr = drain(lazy), er = drain(eager);
      ls.insert(ls.end(), lr.begin(), lr.end());
      es.insert(es.end(), er.begin(), er.end());
      CHECK(ids(ls) == ids(es));
      CHECK(lazy.classifications() <= eager.classifications());
    }
  }
}

TEST_CASE("lazy saves evaluations when selection stops early") {
  auto f = random_fixture(7, 300);
  TableClassifier lc(f.logits), ec(f.logits);
  PassiveStore lazy(scheme(SchemeVariant::Layered, true), 0.0, &lc);
  PassiveStore eager(scheme(SchemeVariant::Layered, false), 0.0, &ec);
  for (auto e : f.entries) {
    lazy.insert(e);
    eager.insert(e);
  }
  for (int i = 0; i < 20; ++i) CHECK(lazy.select_next().id == eager.select_next().id);
  CHECK(lazy.classifications() < eager.classifications());
}

TEST_CASE("threshold -inf makes layered a pure S alternation") {
  auto f = random_fixture(8, 90);
  TableClassifier c(f.logits);
  PassiveStore p(scheme(SchemeVariant::Layered, true), -kInf, &c);
  for (auto e : f.entries) p.insert(e);
  // model-side picks follow S over the current passive set
  std::map<NodeId, PassiveEntry> live;
  for (auto e : f.entries) live[e.id] = e;
  RatioCounter model_side(Ratio{1, 10});
  RatioCounter base_side(Ratio{1, 10});
  std::size_t turn = 0;
  while (!p.empty()) {
    auto s = p.select_next();
    CHECK_FALSE(s.fallback);
    const bool model_turn = turn % 3 != 2;
    CHECK(is_model_source(s.source) == model_turn);
    auto& counter = model_turn ? model_side : base_side;
    const bool by_age = counter.first_turn();
    counter.advance();
    NodeId expect = live.begin()->first;
    for (const auto& [id, e] : live) {
      const auto& best = live[expect];
      bool better = by_age ? e.age < best.age
                           : std::tie(e.weight, e.age, e.id) < std::tie(best.weight, best.age, best.id);
      if (better) expect = id;
    }
    CHECK(s.id == expect);
    live.erase(s.id);
    ++turn;
  }
}

TEST_CASE("priority queue only orders positives first by age") {
  TableClassifier c({{0, -1.0}, {1, 1.0}, {2, -3.0}, {3, 0.5}});
  PassiveStore p(scheme(SchemeVariant::PriorityQueueOnly, true), 0.0, &c);
  for (NodeId i = 0; i < 4; ++i) p.insert({i, i, 1});
  CHECK(ids(drain(p)) == std::vector<NodeId>{1, 3, 0, 2});
}

TEST_CASE("logit queue orders by descending logit") {
  TableClassifier c({{0, -1.0}, {1, 1.0}, {2, -3.0}, {3, 1.0}});
  PassiveStore p(scheme(SchemeVariant::LogitQueueOnly, false), 0.0, &c);
  for (NodeId i = 0; i < 4; ++i) p.insert({i, i, 1});
  CHECK(ids(drain(p)) == std::vector<NodeId>{1, 3, 0, 2});
}

TEST_CASE("scheme validation") {
  CHECK_THROWS_AS(scheme(SchemeVariant::BasePlusLogit, true).validate(), ConfigError);
  CHECK_THROWS_AS(scheme(SchemeVariant::LogitQueueOnly, true).validate(), ConfigError);
  CHECK_NOTHROW(scheme(SchemeVariant::BasePlusLogit, false).validate());
  SelectionScheme zero;
  zero.age_weight = {0, 0};
  CHECK_THROWS_AS(zero.validate(), ConfigError);
  SelectionScheme zero2;
  zero2.second_level = {0, 0};
  CHECK_THROWS_AS(zero2.validate(), ConfigError);
  SelectionScheme nan;
  nan.threshold = std::nan("");
  CHECK_THROWS_AS(nan.validate(), ConfigError);
  CHECK_THROWS_AS(PassiveStore(scheme(SchemeVariant::Layered, true), 0.0, nullptr), ConfigError);
  CHECK_THROWS_AS(variant_from_string("greedy"), ConfigError);
}

TEST_CASE("scheme JSON") {
  auto j = nlohmann::json::parse(
      R"({"variant":"layered","second_level":[1,2],"threshold":-0.25,"lazy":true,"cache":false,"model":"m.bin"})");
  auto s = SelectionScheme::from_json(j);
  CHECK(s.variant == SchemeVariant::Layered);
  CHECK(s.second_level == Ratio{1, 2});
  CHECK(s.age_weight == Ratio{1, 10});
  CHECK(*s.threshold == -0.25);
  CHECK_FALSE(s.cache);
  CHECK(s.model_path == "m.bin");
  auto back = SelectionScheme::from_json(s.to_json());
  CHECK(back.to_json() == s.to_json());

  auto logit = SelectionScheme::from_json(nlohmann::json::parse(R"({"variant":"base+logit"})"));
  CHECK_FALSE(logit.lazy);
  auto inf = SelectionScheme::from_json(nlohmann::json::parse(R"({"variant":"layered","threshold":"-inf"})"));
  CHECK(*inf.threshold == -kInf);
  CHECK(SelectionScheme::from_json(inf.to_json()).threshold == inf.threshold);

  CHECK_THROWS_AS(SelectionScheme::from_json(nlohmann::json::parse(R"({"second_level":[1]})")), ConfigError);
  CHECK_THROWS_AS(SelectionScheme::from_json(nlohmann::json::parse(R"({"threshold":"big"})")), ConfigError);
  CHECK_THROWS_AS(SelectionScheme::from_json(nlohmann::json::parse(R"({"variant":"logit","lazy":true})")), ConfigError);
  CHECK_THROWS_AS(SelectionScheme::load("/nonexistent/scheme.json"), ConfigError);
}

TEST_CASE("double insertion is a logic error") {
  PassiveStore p(SelectionScheme{}, 0.0, nullptr);
  p.insert({0, 0, 1});
  CHECK_THROWS_AS(p.insert({0, 1, 1}), std::logic_error);
  p.select_next();
  CHECK_THROWS_AS(p.select_next(), std::logic_error);
}
