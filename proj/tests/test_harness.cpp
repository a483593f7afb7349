#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "derivguide/harness.hpp"
#include "derivguide/problem_family.hpp"
#include "support.hpp"

using namespace dg;
namespace fs = std::filesystem;

namespace {

BenchmarkReport report_solving(const std::set<std::string>& all, const std::set<std::string>& solved) {
  BenchmarkReport r;
  r.scheme = "x";
  for (const auto& name : all) {
    ProblemResult p;
    p.problem = name;
    p.status = solved.count(name) ? "refutation" : "limit";
    r.results.push_back(p);
  }
  return r;
}

const Corpus& family() {
  static const Corpus corpus = [] {
    FamilyOptions o;
    o.problems = 16;
    o.seed = 3;
    o.min_term = 4;
    o.max_term = 8;
    o.min_chain = 2;
    o.max_chain = 12;
    return Corpus::from_texts(generate_family(o), theory_library());
  }();
  return corpus;
}

BenchOptions budget(std::size_t selections) {
  BenchOptions o;
  o.limits.max_selections = selections;
  o.workers = 4;
  return o;
}

TrainConfig tiny_training() {
  TrainConfig c;
  c.dim = 8;
  c.dropout = 0.0;
  c.lr_peak = 3e-3;
  c.warmup_epochs = 5;
  c.max_epochs = 15;
  c.patience = 15;
  c.target_nodes = 150;
  c.split = 0.7;
  c.seed = 2;
  return c;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("dg_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("diff set arithmetic") {
  std::set<std::string> all{"a", "b", "c", "d", "e"};
  auto base = report_solving(all, {"a", "b", "c"});
  auto run = report_solving(all, {"b", "c", "d", "e"});
  auto d = diff(run, base, "S");
  CHECK(d.baseline == "S");
  CHECK(d.gained == std::vector<std::string>{"d", "e"});
  CHECK(d.lost == std::vector<std::string>{"a"});
  CHECK(d.percent == doctest::Approx(400.0 / 3));
  CHECK(d.solved == d.baseline_solved + d.gained.size() - d.lost.size());

  auto same = diff(base, base);
  CHECK(same.percent == 100.0);
  CHECK(same.gained.empty());
  CHECK(same.lost.empty());

  auto other = report_solving({"a", "z"}, {});
  CHECK_THROWS_AS(diff(other, base), HarnessError);
}

TEST_CASE("corpus loading") {
  auto dir = scratch("corpus");
  std::ofstream(dir / "b.p") << "cnf(x, axiom, p(a)).\ncnf(y, negated_conjecture, ~p(a)).\n";
  std::ofstream(dir / "a.p") << "cnf(x, axiom, q(a)).\n";
  std::ofstream(dir / "broken.p") << "cnf(x, axiom, p(a).\n";
  std::ofstream(dir / "notes.txt") << "not a problem\n";
  std::ofstream(dir / "lib.ax") << "cnf(t, theory_axiom(thax_a), r(b)).\n";
  auto corpus = Corpus::load(dir.string(), (dir / "lib.ax").string());
  REQUIRE(corpus.problems.size() == 3);
  CHECK(corpus.problems[0].name == "a");
  CHECK(corpus.problems[0].clauses.size() == 2);
  CHECK(corpus.problems[0].clauses.back().origin == "thax_a");
  CHECK(corpus.problems[1].name == "b");
  CHECK_FALSE(corpus.problems[2].error.empty());
  CHECK(corpus.subset({"b"}).problems.size() == 1);

  auto run = bench(corpus, SelectionScheme{}, nullptr, budget(100));
  REQUIRE(run.report.results.size() == 3);
  CHECK(run.report.results[0].status == "saturated");
  CHECK(run.report.results[1].status == "refutation");
  CHECK(run.report.results[2].status == "error");
  CHECK_THROWS_AS(Corpus::load((dir / "missing").string()), HarnessError);
  fs::remove_all(dir);
}

TEST_CASE("bench is deterministic, model-free and self-consistent") {
  auto a = bench(family(), SelectionScheme{}, nullptr, budget(200)).report;
  auto b = bench(family(), SelectionScheme{}, nullptr, budget(200)).report;
  REQUIRE(a.results.size() == b.results.size());
  for (std::size_t i = 0; i < a.results.size(); ++i) {
    CHECK(a.results[i].problem == b.results[i].problem);
    CHECK(a.results[i].status == b.results[i].status);
    CHECK(a.results[i].selections == b.results[i].selections);
    CHECK(a.results[i].generated == b.results[i].generated);
  }
  CHECK(a.eval_time_fraction() == 0.0);
  CHECK(a.model_evals() == 0);
  auto self = diff(a, a);
  CHECK(self.gained.empty());
  CHECK(self.lost.empty());
  CHECK(std::is_sorted(a.results.begin(), a.results.end(),
                       [](const auto& x, const auto& y) { return x.problem < y.problem; }));
}

TEST_CASE("report CSV round trip and summary") {
  auto run = bench(family(), SelectionScheme{}, nullptr, budget(150)).report;
  run.diff = diff(run, run, "self");
  auto dir = scratch("csv");
  auto path = (dir / "report.csv").string();
  write_report_csv(path, run);
  auto back = read_report_csv(path);
  REQUIRE(back.results.size() == run.results.size());
  for (std::size_t i = 0; i < run.results.size(); ++i) {
    CHECK(back.results[i].problem == run.results[i].problem);
    CHECK(back.results[i].status == run.results[i].status);
    CHECK(back.results[i].selections == run.results[i].selections);
    CHECK(back.results[i].model_evals == run.results[i].model_evals);
  }
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "problem,status,selections,generated,model_evals,fallbacks,seconds,model_eval_seconds,eval_fraction");
  auto summary = summary_json(run);
  CHECK(summary.at("solved").get<std::size_t>() == run.solved());
  CHECK(summary.at("baseline").at("name") == "self");
  fs::remove_all(dir);
}

TEST_CASE("logs are written for kept runs") {
  auto dir = scratch("logs");
  auto o = budget(300);
  o.keep = KeepLogs::Solved;
  o.log_dir = dir.string();
  auto run = bench(family(), SelectionScheme{}, nullptr, o);
  CHECK(run.logs.size() == run.report.solved());
  for (const auto& name : run.report.solved_set()) {
    auto path = dir / (name + ".dlog");
    REQUIRE(fs::exists(path));
    auto log = read_log(path.string());
    CHECK(log.problem() == name);
    CHECK(log.proof_count() > 0);
  }
  fs::remove_all(dir);
}

TEST_CASE("threshold sweep") {
  auto model = std::make_shared<const ModelParams>(dgtest::random_model(8, 1));
  SelectionScheme s;
  s.variant = SchemeVariant::Layered;
  auto base = bench(family(), SelectionScheme{}, nullptr, budget(150)).report;
  std::vector<double> ts{-0.5, -0.25, 0.0, 0.25, 0.5};
  auto rows = sweep_threshold(family(), s, model, ts, budget(150), &base);
  REQUIRE(rows.size() == 5);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].threshold == ts[i]);
    REQUIRE(rows[i].diff);
    CHECK(rows[i].diff->solved == rows[i].solved);
  }
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  const std::string text = csv.str();
  std::size_t lines = std::count(text.begin(), text.end(), '\n');
  CHECK(lines == 6);

  // -inf: every clause is positive, so the run equals an explicit -inf scheme
  auto inf = sweep_threshold(family(), s, model, {-std::numeric_limits<double>::infinity()}, budget(150));
  s.threshold = -std::numeric_limits<double>::infinity();
  auto direct = bench(family(), s, model, budget(150)).report;
  CHECK(inf[0].solved == direct.solved());
}

TEST_CASE("same-problem logs are merged before compression") {
  DerivationStore a("p");
  a.set_selected(a.record("input"));
  DerivationStore b("p");
  NodeId x = b.record("input");
  NodeId y = b.record("thax_a");
  b.set_selected(b.record("Resolution", {x, y}));
  DerivationStore c("q");
  c.record("input");
  auto out = prepare_derivations({b, c, a});
  REQUIRE(out.size() == 2);
  CHECK(out[0].problem() == "p");
  CHECK(out[0].size() == 3);
  CHECK(out[0].selected_count() == 2);
  CHECK(out[1].problem() == "q");
}

TEST_CASE("reinforcing loop") {
  auto base_opts = budget(300);
  SelectionScheme base;
  auto state = initial_loop_state(family(), base, base_opts);
  REQUIRE(state.iteration == 0);
  REQUIRE(state.proofs.size() >= 2);
  CHECK(state.baseline_solved == state.solved());
  for (const auto& [name, log] : state.proofs) CHECK(log.proof_count() > 0);

  SelectionScheme layered;
  layered.variant = SchemeVariant::Layered;
  SelectionScheme layered_neg = layered;
  layered_neg.threshold = -0.5;

  LoopConfig config;
  config.schemes = {layered, layered_neg, base};
  config.baseline = base;
  config.train = tiny_training();
  config.bench = base_opts;

  SUBCASE("first iteration trains on U without collecting") {
    auto r = loop_iteration(state, family(), config);
    CHECK(r.new_proofs == 0);
    CHECK(state.iteration == 1);
    CHECK(state.model.has_value());
    CHECK(r.report.has_value());
    CHECK(r.examples_positive > 0);
    CHECK(r.examples_negative > 0);
  }

  SUBCASE("one proof per problem, first found kept, U monotone") {
    loop_iteration(state, family(), config);
    auto before = state.proofs;
    auto r = loop_iteration(state, family(), config);
    CHECK(state.proofs.size() == before.size() + r.new_proofs);
    for (const auto& [name, log] : before) CHECK(state.proofs.at(name) == log);
    for (const auto& [name, log] : state.proofs) CHECK(log.problem() == name);
  }

  SUBCASE("an iteration with no new proofs is a fixed point") {
    LoopConfig plain = config;
    plain.schemes = {base};
    auto first = loop_iteration(state, family(), plain);
    auto proofs = state.proofs;
    auto second = loop_iteration(state, family(), plain);
    CHECK(second.new_proofs == 0);
    CHECK(state.proofs == proofs);
    CHECK(second.examples_positive == first.examples_positive);
    CHECK(second.examples_negative == first.examples_negative);
    CHECK(second.training.reports == first.training.reports);
  }

  SUBCASE("save and load") {
    loop_iteration(state, family(), config);
    auto dir = scratch("state");
    save_loop_state(dir.string(), state);
    auto back = load_loop_state(dir.string());
    CHECK(back.iteration == state.iteration);
    CHECK(back.baseline_solved == state.baseline_solved);
    CHECK(back.proofs == state.proofs);
    REQUIRE(back.model.has_value());
    CHECK(*back.model == *state.model);
    fs::remove_all(dir);
  }
}

TEST_CASE("negative mining logs failing baseline runs") {
  auto small = budget(120);
  SelectionScheme base;
  auto state = initial_loop_state(family(), base, small);
  // a different ratio with a larger budget stands in for a guided scheme
  auto bigger = budget(2000);
  bigger.keep = KeepLogs::Solved;
  SelectionScheme other;
  other.age_weight = {1, 3};
  auto extra = bench(family(), other, nullptr, bigger);
  std::size_t added = 0;
  for (auto& [name, log] : extra.logs)
    if (state.proofs.try_emplace(name, log).second) ++added;
  REQUIRE(added > 0);

  std::ostringstream notice;
  auto mined = negative_mine(family(), state, base, small, &notice);
  CHECK(mined.size() == added);
  for (const auto& m : mined) {
    CHECK_FALSE(state.baseline_solved.count(m.problem));
    CHECK_FALSE(m.succeeded);
    CHECK(m.log.proof_count() == 0);
    CHECK(m.log.selected_count() > 0);
  }
  CHECK(notice.str().empty());

  // with a larger mining budget the baseline succeeds and a notice is printed
  auto lucky = negative_mine(family(), state, base, budget(2000), &notice);
  for (const auto& m : lucky) CHECK(m.succeeded);
  CHECK(notice.str().find("notice") != std::string::npos);

  SelectionScheme layered;
  layered.variant = SchemeVariant::Layered;
  CHECK_THROWS_AS(negative_mine(family(), state, layered, small), ConfigError);

  // mining adds negatives to the plain loop data
  LoopConfig config;
  config.baseline = base;
  config.train = tiny_training();
  config.bench = small;
  config.bench_after = false;
  auto plain_state = state;
  auto plain = loop_iteration(plain_state, family(), config);
  config.negative_mining = true;
  auto mining_state = state;
  auto mining = loop_iteration(mining_state, family(), config);
  CHECK(mining.mined == added);
  CHECK(mining.examples_negative > plain.examples_negative);
  CHECK(mining.examples_positive == plain.examples_positive);
}

TEST_CASE("problem family generation") {
  FamilyOptions o;
  o.problems = 12;
  o.seed = 9;
  auto a = generate_family(o);
  auto b = generate_family(o);
  CHECK(a == b);
  REQUIRE(a.size() == 12);
  CHECK(a[0].first == "fam000");
  CHECK(std::is_sorted(a.begin(), a.end()));
  auto corpus = Corpus::from_texts(a, theory_library());
  for (const auto& p : corpus.problems) {
    CHECK(p.error.empty());
    std::size_t goals = 0, theory = 0;
    for (const auto& c : p.clauses) {
      goals += c.name == "goal";
      theory += c.origin != "input";
    }
    CHECK(goals == 1);
    CHECK(theory == 5);
  }
  // without the distracting theory every chain is refuted quickly
  auto run = bench(Corpus::from_texts(a), SelectionScheme{}, nullptr, budget(2000));
  CHECK(run.report.solved() == 12);

  o.min_decoy = 3;
  o.max_decoy = 3;
  auto decoyed = generate_family(o);
  for (std::size_t i = 0; i < decoyed.size(); ++i) {
    CHECK(decoyed[i].second.find("decoy2") != std::string::npos);
    CHECK(a[i].second.find("decoy") == std::string::npos);
  }
}
