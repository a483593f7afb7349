#include "derivguide/harness.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

namespace dg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Problem parse_one(std::string name, const std::string& text, const std::string& theory_text) {
  Problem p;
  p.name = std::move(name);
  try {
    Parser parser;
    // theory first so the arity table is seeded by the library
    auto theory = parser.parse(theory_text);
    p.clauses = parser.parse(text);
    p.clauses.insert(p.clauses.end(), std::make_move_iterator(theory.begin()), std::make_move_iterator(theory.end()));
  } catch (const std::exception& e) {
    p.clauses.clear();
    p.error = e.what();
  }
  return p;
}

void sort_problems(std::vector<Problem>& ps) {
  std::sort(ps.begin(), ps.end(), [](const Problem& a, const Problem& b) { return a.name < b.name; });
}

/// Runs `fn(i)` for i in [0, n) on a bounded pool.
template <typename F>
void parallel_for(std::size_t n, unsigned workers, F fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

Corpus Corpus::load(const std::string& dir, const std::string& theory_path) {
  if (!fs::is_directory(dir)) throw HarnessError("corpus directory not found: " + dir);
  std::string theory = theory_path.empty() ? std::string() : read_file(theory_path);
  Corpus c;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".p") continue;
    std::string name = entry.path().stem().string();
    std::string text;
    try {
      text = read_file(entry.path().string());
    } catch (const std::exception& e) {
      c.problems.push_back(Problem{name, {}, e.what()});
      continue;
    }
    c.problems.push_back(parse_one(name, text, theory));
  }
  sort_problems(c.problems);
  return c;
}

Corpus Corpus::from_texts(const std::vector<std::pair<std::string, std::string>>& texts,
                          const std::string& theory_text) {
  Corpus c;
  for (const auto& [name, text] : texts) c.problems.push_back(parse_one(name, text, theory_text));
  sort_problems(c.problems);
  return c;
}

std::set<std::string> Corpus::names() const {
  std::set<std::string> out;
  for (const auto& p : problems) out.insert(p.name);
  return out;
}

Corpus Corpus::subset(const std::set<std::string>& keep) const {
  Corpus c;
  for (const auto& p : problems)
    if (keep.count(p.name)) c.problems.push_back(p);
  return c;
}

std::size_t BenchmarkReport::solved() const {
  return static_cast<std::size_t>(std::count_if(results.begin(), results.end(), [](auto& r) { return r.solved(); }));
}

std::set<std::string> BenchmarkReport::solved_set() const {
  std::set<std::string> out;
  for (const auto& r : results)
    if (r.solved()) out.insert(r.problem);
  return out;
}

double BenchmarkReport::eval_time_fraction() const {
  double model = 0.0, total = 0.0;
  for (const auto& r : results) {
    model += r.model_eval_seconds;
    total += r.seconds;
  }
  return total > 0.0 ? std::min(model / total, 1.0) : 0.0;
}

std::size_t BenchmarkReport::model_evals() const {
  std::size_t n = 0;
  for (const auto& r : results) n += r.model_evals;
  return n;
}

BenchRun bench(const Corpus& corpus, const SelectionScheme& scheme, std::shared_ptr<const ModelParams> model,
               const BenchOptions& options) {
  scheme.validate();
  if (scheme.uses_model() && !model) throw ConfigError("scheme " + to_string(scheme.variant) + " needs a model");
  if (!options.log_dir.empty()) fs::create_directories(options.log_dir);

  const auto n = corpus.problems.size();
  std::vector<ProblemResult> results(n);
  std::vector<std::optional<DerivationStore>> logs(n);
  parallel_for(n, options.workers, [&](std::size_t i) {
    const Problem& p = corpus.problems[i];
    ProblemResult& r = results[i];
    r.problem = p.name;
    if (!p.error.empty()) {
      r.status = "error";
      r.error = p.error;
      return;
    }
    SaturationOutcome out;
    try {
      out = saturate(p.clauses, scheme, model, options.limits, p.name);
    } catch (const std::exception& e) {
      r.status = "error";
      r.error = e.what();
      return;
    }
    r.status = to_string(out.status);
    r.selections = out.stats.selections;
    r.generated = out.stats.generated;
    r.model_evals = out.stats.model_evals;
    r.fallbacks = out.stats.fallbacks;
    r.seconds = out.stats.seconds;
    r.model_eval_seconds = out.stats.model_eval_seconds;
    r.eval_fraction = out.stats.model_eval_time_fraction;
    const bool keep = options.keep == KeepLogs::All || (options.keep == KeepLogs::Solved && r.solved());
    if (!options.log_dir.empty() && (keep || r.solved()))
      write_log((fs::path(options.log_dir) / (p.name + ".dlog")).string(), out.derivation);
    if (keep) logs[i] = std::move(out.derivation);
  });

  BenchRun run;
  run.report.scheme = to_string(scheme.variant);
  run.report.results = std::move(results);
  for (std::size_t i = 0; i < n; ++i)
    if (logs[i]) run.logs.emplace(corpus.problems[i].name, std::move(*logs[i]));
  return run;
}

DiffResult diff(const BenchmarkReport& report, const BenchmarkReport& baseline, const std::string& baseline_name) {
  std::set<std::string> a, b;
  for (const auto& r : report.results) a.insert(r.problem);
  for (const auto& r : baseline.results) b.insert(r.problem);
  if (a != b) throw HarnessError("reports cover different corpora");
  DiffResult d;
  d.baseline = baseline_name.empty() ? baseline.scheme : baseline_name;
  auto solved = report.solved_set();
  auto base = baseline.solved_set();
  d.solved = solved.size();
  d.baseline_solved = base.size();
  std::set_difference(solved.begin(), solved.end(), base.begin(), base.end(), std::back_inserter(d.gained));
  std::set_difference(base.begin(), base.end(), solved.begin(), solved.end(), std::back_inserter(d.lost));
  d.percent = base.empty() ? 0.0 : 100.0 * static_cast<double>(d.solved) / static_cast<double>(d.baseline_solved);
  return d;
}

void write_report_csv(std::ostream& out, const BenchmarkReport& report) {
  out << "problem,status,selections,generated,model_evals,fallbacks,seconds,model_eval_seconds,eval_fraction\n";
  for (const auto& r : report.results)
    out << r.problem << ',' << r.status << ',' << r.selections << ',' << r.generated << ',' << r.model_evals << ','
        << r.fallbacks << ',' << r.seconds << ',' << r.model_eval_seconds << ',' << r.eval_fraction << '\n';
}

void write_report_csv(const std::string& path, const BenchmarkReport& report) {
  std::ofstream out(path);
  if (!out) throw HarnessError("cannot write " + path);
  write_report_csv(out, report);
}

BenchmarkReport read_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw HarnessError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("problem,status,", 0) != 0)
    throw HarnessError(path + ": not a benchmark report");
  BenchmarkReport report;
  report.scheme = fs::path(path).stem().string();
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 9) throw HarnessError(path + ":" + std::to_string(lineno) + ": expected 9 columns");
    try {
      ProblemResult r;
      r.problem = cells[0];
      r.status = cells[1];
      r.selections = std::stoull(cells[2]);
      r.generated = std::stoull(cells[3]);
      r.model_evals = std::stoull(cells[4]);
      r.fallbacks = std::stoull(cells[5]);
      r.seconds = std::stod(cells[6]);
      r.model_eval_seconds = std::stod(cells[7]);
      r.eval_fraction = std::stod(cells[8]);
      report.results.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw HarnessError(path + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  std::sort(report.results.begin(), report.results.end(),
            [](const ProblemResult& a, const ProblemResult& b) { return a.problem < b.problem; });
  return report;
}

json summary_json(const BenchmarkReport& report) {
  json j = {{"scheme", report.scheme},
            {"problems", report.results.size()},
            {"solved", report.solved()},
            {"model_evals", report.model_evals()},
            {"eval_time_fraction", report.eval_time_fraction()}};
  if (report.diff) {
    const auto& d = *report.diff;
    j["baseline"] = {{"name", d.baseline},   {"solved", d.baseline_solved}, {"percent", d.percent},
                     {"gained", d.gained.size()}, {"lost", d.lost.size()},     {"gained_problems", d.gained},
                     {"lost_problems", d.lost}};
  }
  return j;
}

std::vector<SweepRow> sweep_threshold(const Corpus& corpus, const SelectionScheme& scheme,
                                      std::shared_ptr<const ModelParams> model, const std::vector<double>& thresholds,
                                      const BenchOptions& options, const BenchmarkReport* baseline) {
  std::vector<SweepRow> rows;
  for (double t : thresholds) {
    SelectionScheme s = scheme;
    s.threshold = t;
    BenchOptions o = options;
    o.keep = KeepLogs::None;
    o.log_dir.clear();
    auto run = bench(corpus, s, model, o);
    SweepRow row;
    row.threshold = t;
    row.solved = run.report.solved();
    row.model_evals = run.report.model_evals();
    row.eval_time_fraction = run.report.eval_time_fraction();
    if (baseline) row.diff = diff(run.report, *baseline);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "threshold,solved,percent,gained,lost,model_evals,eval_time_fraction\n";
  for (const auto& r : rows) {
    out << r.threshold << ',' << r.solved << ',';
    if (r.diff)
      out << r.diff->percent << ',' << r.diff->gained.size() << ',' << r.diff->lost.size();
    else
      out << ",,";
    out << ',' << r.model_evals << ',' << r.eval_time_fraction << '\n';
  }
}

std::vector<CompressedDerivation> prepare_derivations(const std::vector<DerivationStore>& logs) {
  std::map<std::string, DerivationStore> merged;
  for (const auto& log : logs) {
    auto [it, fresh] = merged.try_emplace(log.problem(), log);
    if (!fresh) it->second.append(log);
  }
  std::vector<CompressedDerivation> out;
  out.reserve(merged.size());
  for (const auto& [name, store] : merged) out.push_back(compress(store));
  return out;
}

std::set<std::string> LoopState::solved() const {
  std::set<std::string> out;
  for (const auto& [name, log] : proofs) out.insert(name);
  return out;
}

LoopState initial_loop_state(const Corpus& corpus, const SelectionScheme& baseline, const BenchOptions& options) {
  BenchOptions o = options;
  o.keep = KeepLogs::Solved;
  auto run = bench(corpus, baseline, nullptr, o);
  LoopState state;
  state.baseline_solved = run.report.solved_set();
  state.proofs = std::move(run.logs);
  return state;
}

void save_loop_state(const std::string& dir, const LoopState& state) {
  fs::create_directories(fs::path(dir) / "proofs");
  json j = {{"v", 1}, {"iteration", state.iteration}, {"baseline_solved", state.baseline_solved}};
  json proofs = json::object();
  for (const auto& [name, log] : state.proofs) {
    std::string rel = "proofs/" + name + ".dlog";
    write_log((fs::path(dir) / rel).string(), log);
    proofs[name] = rel;
  }
  j["proofs"] = proofs;
  if (state.model) {
    save_model((fs::path(dir) / "model.bin").string(), *state.model);
    j["model"] = "model.bin";
  }
  std::ofstream out(fs::path(dir) / "state.json");
  if (!out) throw HarnessError("cannot write loop state in " + dir);
  out << j.dump(2) << '\n';
}

LoopState load_loop_state(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "state.json");
  if (!in) throw HarnessError("no loop state in " + dir);
  LoopState state;
  try {
    json j = json::parse(in);
    state.iteration = j.at("iteration").get<std::size_t>();
    state.baseline_solved = j.at("baseline_solved").get<std::set<std::string>>();
    for (const auto& [name, rel] : j.at("proofs").items())
      state.proofs.emplace(name, read_log((fs::path(dir) / rel.get<std::string>()).string()));
    if (j.contains("model")) state.model = load_model((fs::path(dir) / j["model"].get<std::string>()).string());
  } catch (const json::exception& e) {
    throw HarnessError(dir + "/state.json: " + e.what());
  }
  return state;
}

std::vector<MinedLog> negative_mine(const Corpus& corpus, const LoopState& state, const SelectionScheme& baseline,
                                    const BenchOptions& options, std::ostream* notice) {
  if (baseline.uses_model()) throw ConfigError("negative mining runs the model-free baseline");
  std::set<std::string> targets;
  for (const auto& name : state.solved())
    if (!state.baseline_solved.count(name)) targets.insert(name);
  Corpus sub = corpus.subset(targets);
  BenchOptions o = options;
  o.keep = KeepLogs::All;
  o.log_dir.clear();
  auto run = bench(sub, baseline, nullptr, o);
  std::vector<MinedLog> out;
  for (const auto& r : run.report.results) {
    auto it = run.logs.find(r.problem);
    if (it == run.logs.end()) continue;
    MinedLog m{r.problem, std::move(it->second), r.solved()};
    if (m.succeeded && notice)
      *notice << "notice: baseline solved " << r.problem << " while mining; using its proof log\n";
    out.push_back(std::move(m));
  }
  return out;
}

LoopResult loop_iteration(LoopState& state, const Corpus& corpus, const LoopConfig& config, std::ostream* notice) {
  LoopResult result;

  if (state.model) {
    auto model = std::make_shared<const ModelParams>(*state.model);
    for (const auto& scheme : config.schemes) {
      BenchOptions o = config.bench;
      o.keep = KeepLogs::Solved;
      o.log_dir.clear();
      auto run = bench(corpus, scheme, model, o);
      // logs is keyed by name, so this walks problems in order
      for (auto& [name, log] : run.logs)
        if (state.proofs.try_emplace(name, std::move(log)).second) ++result.new_proofs;
    }
  }

  std::vector<DerivationStore> logs;
  std::set<std::string> replaced;
  if (config.negative_mining) {
    for (auto& m : negative_mine(corpus, state, config.baseline, config.bench, notice)) {
      ++result.mined;
      if (m.succeeded) replaced.insert(m.problem);
      logs.push_back(std::move(m.log));
    }
  }
  for (const auto& [name, log] : state.proofs)
    if (!replaced.count(name)) logs.push_back(log);

  if (logs.empty()) throw HarnessError("loop iteration without any proofs to learn from");
  auto derivations = prepare_derivations(logs);
  for (const auto& d : derivations)
    for (const auto& n : d.nodes())
      if (n.selected) (n.in_proof ? result.examples_positive : result.examples_negative)++;

  auto split = build_batches(derivations, config.train.target_nodes, config.train.split, config.train.seed);
  Dataset data(std::move(derivations), notice);
  result.training = train(config.train, data, split);
  if (result.training.diverged) throw TrainingError(result.training.diagnostic);

  state.model = result.training.best;
  ++state.iteration;

  if (config.bench_after && !config.schemes.empty()) {
    BenchOptions o = config.bench;
    o.keep = KeepLogs::None;
    result.report = bench(corpus, config.schemes.front(), std::make_shared<const ModelParams>(*state.model), o).report;
  }
  return result;
}

}  // namespace dg
