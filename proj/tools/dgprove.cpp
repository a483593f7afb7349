// Command line front end: proving, data preparation, training and benchmarks.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "derivguide/derivation.hpp"
#include "derivguide/guidance.hpp"
#include "derivguide/harness.hpp"
#include "derivguide/model.hpp"
#include "derivguide/parser.hpp"
#include "derivguide/problem_family.hpp"
#include "derivguide/prover.hpp"
#include "derivguide/training.hpp"

namespace fs = std::filesystem;
using namespace dg;

namespace {

SelectionScheme load_scheme(const std::string& path) {
  return path.empty() ? SelectionScheme{} : SelectionScheme::load(path);
}

std::shared_ptr<const ModelParams> load_scheme_model(const SelectionScheme& scheme, const std::string& override_path) {
  std::string path = override_path.empty() ? scheme.model_path : override_path;
  if (!scheme.uses_model()) return nullptr;
  if (path.empty()) throw ConfigError("scheme " + to_string(scheme.variant) + " needs a model (model_path or --model)");
  return std::make_shared<const ModelParams>(load_model(path));
}

std::vector<double> parse_thresholds(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  for (std::string cell; std::getline(ss, cell, ',');) {
    if (cell == "inf" || cell == "+inf")
      out.push_back(std::numeric_limits<double>::infinity());
    else if (cell == "-inf")
      out.push_back(-std::numeric_limits<double>::infinity());
    else
      out.push_back(std::stod(cell));
  }
  return out;
}

std::vector<DerivationStore> read_log_dir(const std::string& dir) {
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".dlog") paths.push_back(e.path());
  std::sort(paths.begin(), paths.end());
  std::vector<DerivationStore> logs;
  for (const auto& p : paths) logs.push_back(read_log(p.string()));
  return logs;
}

void print_summary(const BenchmarkReport& report) {
  std::cout << "solved " << report.solved() << "/" << report.results.size();
  if (report.diff)
    std::cout << " (" << report.diff->percent << "% of " << report.diff->baseline << ", gained "
              << report.diff->gained.size() << ", lost " << report.diff->lost.size() << ")";
  std::cout << ", eval-time fraction " << report.eval_time_fraction() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Saturation prover with learned clause selection"};
  app.require_subcommand(1);

  // solve
  std::string problem_path, theory_path, scheme_path, model_path, log_path, proof_path;
  std::size_t max_selections = Limits{}.max_selections;
  auto* solve = app.add_subcommand("solve", "Run the prover on one problem");
  solve->add_option("problem", problem_path, "Problem file")->required()->check(CLI::ExistingFile);
  solve->add_option("--theory", theory_path, "Theory library")->check(CLI::ExistingFile);
  solve->add_option("--scheme", scheme_path, "Selection scheme JSON")->check(CLI::ExistingFile);
  solve->add_option("--model", model_path, "Model file (overrides the scheme's model_path)");
  solve->add_option("--max-selections", max_selections, "Selection budget");
  solve->add_option("--log", log_path, "Write the derivation log here");
  solve->add_option("--proof", proof_path, "Write the proof here");

  // inspect-model
  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect-model", "Print a model file's header");
  inspect->add_option("model", inspect_path)->required()->check(CLI::ExistingFile);

  // prepare
  std::string logs_dir, data_path;
  TrainConfig prep;
  auto* prepare = app.add_subcommand("prepare", "Compress logs and split them into batches");
  prepare->add_option("--logs", logs_dir, "Directory of .dlog files")->required()->check(CLI::ExistingDirectory);
  prepare->add_option("--out", data_path, "Output data file")->required();
  prepare->add_option("--target-nodes", prep.target_nodes, "Nodes per batch");
  prepare->add_option("--split", prep.split, "Training fraction of the batches");
  prepare->add_option("--seed", prep.seed, "Shuffle seed");

  // train
  std::string config_path, model_out, report_path;
  auto* train_cmd = app.add_subcommand("train", "Train a model on prepared data");
  train_cmd->add_option("--data", data_path, "Prepared data file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--config", config_path, "Training config JSON")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", model_out, "Output model")->required();
  train_cmd->add_option("--report", report_path, "Per-epoch CSV");

  // metrics
  std::string roc_path, thresholds_list = "-inf,-1,-0.5,-0.25,0,0.25,0.5,1,inf";
  auto* metrics_cmd = app.add_subcommand("metrics", "TPR/TNR of a model on derivation logs");
  metrics_cmd->add_option("--logs", logs_dir, "Directory of .dlog files")->required()->check(CLI::ExistingDirectory);
  metrics_cmd->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  metrics_cmd->add_option("--thresholds", thresholds_list);
  metrics_cmd->add_option("--out", roc_path, "ROC CSV");

  // bench
  std::string corpus_dir, out_path, baseline_path, log_dir, summary_path;
  unsigned workers = 0;
  auto* bench_cmd = app.add_subcommand("bench", "Run a scheme over a corpus");
  bench_cmd->add_option("--corpus", corpus_dir)->required()->check(CLI::ExistingDirectory);
  bench_cmd->add_option("--theory", theory_path)->check(CLI::ExistingFile);
  bench_cmd->add_option("--scheme", scheme_path)->check(CLI::ExistingFile);
  bench_cmd->add_option("--model", model_path);
  bench_cmd->add_option("--max-selections", max_selections);
  bench_cmd->add_option("--out", out_path, "Report CSV")->required();
  bench_cmd->add_option("--baseline", baseline_path, "Baseline report CSV")->check(CLI::ExistingFile);
  bench_cmd->add_option("--log-dir", log_dir, "Write logs of solved runs here");
  bench_cmd->add_option("--summary", summary_path, "JSON summary");
  bench_cmd->add_option("--workers", workers, "Parallel problems (0: all cores)");

  // sweep
  std::string sweep_thresholds = "-0.5,-0.25,0,0.25,0.5";
  auto* sweep = app.add_subcommand("sweep", "Bench one scheme at several thresholds");
  sweep->add_option("--corpus", corpus_dir)->required()->check(CLI::ExistingDirectory);
  sweep->add_option("--theory", theory_path)->check(CLI::ExistingFile);
  sweep->add_option("--scheme", scheme_path)->required()->check(CLI::ExistingFile);
  sweep->add_option("--model", model_path);
  sweep->add_option("--thresholds", sweep_thresholds);
  sweep->add_option("--max-selections", max_selections);
  sweep->add_option("--baseline", baseline_path)->check(CLI::ExistingFile);
  sweep->add_option("--out", out_path)->required();
  sweep->add_option("--workers", workers);

  // mine
  std::string state_dir, mined_dir;
  auto* mine = app.add_subcommand("mine", "Log failing baseline runs on guided-only problems");
  mine->add_option("--state", state_dir, "Loop state directory")->required()->check(CLI::ExistingDirectory);
  mine->add_option("--scheme", scheme_path, "Baseline scheme")->check(CLI::ExistingFile);
  mine->add_option("--corpus", corpus_dir)->required()->check(CLI::ExistingDirectory);
  mine->add_option("--theory", theory_path)->check(CLI::ExistingFile);
  mine->add_option("--max-selections", max_selections);
  mine->add_option("--out", mined_dir, "Directory for the mined logs")->required();
  mine->add_option("--workers", workers);

  // loop
  std::size_t iterations = 1;
  std::vector<std::string> scheme_paths;
  bool negative_mining = false;
  auto* loop = app.add_subcommand("loop", "Alternate training and guided proving");
  loop->add_option("--state", state_dir, "Loop state directory (created from a baseline run if missing)")->required();
  loop->add_option("--corpus", corpus_dir)->required()->check(CLI::ExistingDirectory);
  loop->add_option("--theory", theory_path)->check(CLI::ExistingFile);
  loop->add_option("--schemes", scheme_paths, "Guided schemes, in priority order")->required();
  loop->add_option("--baseline-scheme", scheme_path, "Model-free baseline")->check(CLI::ExistingFile);
  loop->add_option("--config", config_path, "Training config JSON")->check(CLI::ExistingFile);
  loop->add_option("--iterations", iterations);
  loop->add_option("--max-selections", max_selections);
  loop->add_flag("--negative-mining", negative_mining);
  loop->add_option("--workers", workers);

  // generate
  FamilyOptions family;
  std::string gen_dir;
  auto* generate = app.add_subcommand("generate", "Write the synthetic chain family and its theory library");
  generate->add_option("--out", gen_dir)->required();
  generate->add_option("--problems", family.problems);
  generate->add_option("--seed", family.seed);
  generate->add_option("--min-chain", family.min_chain);
  generate->add_option("--max-chain", family.max_chain);
  generate->add_option("--min-term", family.min_term);
  generate->add_option("--max-term", family.max_term);
  generate->add_option("--min-decoy", family.min_decoy, "Decoy steps over a second term");
  generate->add_option("--max-decoy", family.max_decoy);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) {
      Parser parser;
      std::vector<ParsedClause> clauses;
      std::vector<ParsedClause> theory;
      if (!theory_path.empty()) theory = parser.parse(read_file(theory_path));
      clauses = parser.parse(read_file(problem_path));
      clauses.insert(clauses.end(), theory.begin(), theory.end());
      auto scheme = load_scheme(scheme_path);
      auto model = load_scheme_model(scheme, model_path);
      Limits limits;
      limits.max_selections = max_selections;
      auto out = saturate(clauses, scheme, model, limits, fs::path(problem_path).stem().string());
      std::cout << "status " << to_string(out.status) << "\nselections " << out.stats.selections << "\ngenerated "
                << out.stats.generated << "\nmodel_evals " << out.stats.model_evals << "\nseconds "
                << out.stats.seconds << "\neval_time_fraction " << out.stats.model_eval_time_fraction << '\n';
      if (!log_path.empty()) write_log(log_path, out.derivation);
      if (out.status == Status::Refutation) {
        if (proof_path.empty()) {
          std::cout << format_proof(out);
        } else {
          std::ofstream(proof_path) << format_proof(out);
        }
      }
      return out.status == Status::Refutation ? 0 : 1;
    }

    if (*inspect) {
      std::cout << read_model_header(inspect_path) << '\n';
      return 0;
    }

    if (*prepare) {
      prep.validate();
      auto derivations = prepare_derivations(read_log_dir(logs_dir));
      auto split = build_batches(derivations, prep.target_nodes, prep.split, prep.seed);
      std::cout << derivations.size() << " derivations, " << split.train.size() << " training and "
                << split.validation.size() << " validation batches\n";
      write_bundle(data_path, DataBundle{std::move(derivations), std::move(split)});
      return 0;
    }

    if (*train_cmd) {
      TrainConfig config = config_path.empty() ? TrainConfig{} : TrainConfig::load(config_path);
      auto bundle = read_bundle(data_path);
      Dataset data(std::move(bundle.derivations), &std::cerr);
      auto result = train(config, data, bundle.split);
      if (!report_path.empty()) {
        std::ofstream out(report_path);
        write_report_csv(out, result.reports);
      }
      save_model(model_out, result.best);
      if (!result.reports.empty()) {
        const auto& best = result.reports[result.best_epoch ? result.best_epoch - 1 : 0];
        std::cout << "best epoch " << result.best_epoch << ", val_loss " << best.val_loss << ", tpr " << best.tpr
                  << ", tnr " << best.tnr << '\n';
      }
      if (result.diverged) {
        std::cerr << "training diverged: " << result.diagnostic << '\n';
        return 2;
      }
      return 0;
    }

    if (*metrics_cmd) {
      auto model = load_model(model_path);
      auto derivations = prepare_derivations(read_log_dir(logs_dir));
      auto report = metrics(model, derivations, parse_thresholds(thresholds_list));
      if (roc_path.empty()) {
        write_roc_csv(std::cout, report);
      } else {
        std::ofstream out(roc_path);
        write_roc_csv(out, report);
      }
      return 0;
    }

    if (*bench_cmd) {
      auto corpus = Corpus::load(corpus_dir, theory_path);
      auto scheme = load_scheme(scheme_path);
      BenchOptions options;
      options.limits.max_selections = max_selections;
      options.workers = workers;
      options.log_dir = log_dir;
      auto run = bench(corpus, scheme, load_scheme_model(scheme, model_path), options);
      if (!baseline_path.empty()) run.report.diff = diff(run.report, read_report_csv(baseline_path));
      write_report_csv(out_path, run.report);
      if (!summary_path.empty()) std::ofstream(summary_path) << summary_json(run.report).dump(2) << '\n';
      print_summary(run.report);
      return 0;
    }

    if (*sweep) {
      auto corpus = Corpus::load(corpus_dir, theory_path);
      auto scheme = load_scheme(scheme_path);
      BenchOptions options;
      options.limits.max_selections = max_selections;
      options.workers = workers;
      std::optional<BenchmarkReport> baseline;
      if (!baseline_path.empty()) baseline = read_report_csv(baseline_path);
      auto rows = sweep_threshold(corpus, scheme, load_scheme_model(scheme, model_path),
                                  parse_thresholds(sweep_thresholds), options, baseline ? &*baseline : nullptr);
      std::ofstream out(out_path);
      write_sweep_csv(out, rows);
      write_sweep_csv(std::cout, rows);
      return 0;
    }

    if (*mine) {
      auto corpus = Corpus::load(corpus_dir, theory_path);
      auto state = load_loop_state(state_dir);
      BenchOptions options;
      options.limits.max_selections = max_selections;
      options.workers = workers;
      auto mined = negative_mine(corpus, state, load_scheme(scheme_path), options, &std::cerr);
      fs::create_directories(mined_dir);
      for (const auto& m : mined)
        write_log((fs::path(mined_dir) / (m.problem + (m.succeeded ? ".proof.dlog" : ".mined.dlog"))).string(), m.log);
      std::cout << mined.size() << " logs mined\n";
      return 0;
    }

    if (*loop) {
      auto corpus = Corpus::load(corpus_dir, theory_path);
      LoopConfig config;
      config.baseline = load_scheme(scheme_path);
      for (const auto& p : scheme_paths) config.schemes.push_back(SelectionScheme::load(p));
      config.train = config_path.empty() ? TrainConfig{} : TrainConfig::load(config_path);
      config.negative_mining = negative_mining;
      config.bench.limits.max_selections = max_selections;
      config.bench.workers = workers;

      LoopState state;
      if (fs::exists(fs::path(state_dir) / "state.json")) {
        state = load_loop_state(state_dir);
      } else {
        state = initial_loop_state(corpus, config.baseline, config.bench);
        std::cout << "baseline solved " << state.baseline_solved.size() << "/" << corpus.problems.size() << '\n';
      }
      for (std::size_t i = 0; i < iterations; ++i) {
        auto result = loop_iteration(state, corpus, config, &std::cerr);
        std::cout << "iteration " << state.iteration << ": " << result.new_proofs << " new proofs, "
                  << result.mined << " mined logs, U = " << state.proofs.size() << ", examples +"
                  << result.examples_positive << "/-" << result.examples_negative << '\n';
        if (result.report) print_summary(*result.report);
        save_loop_state(state_dir, state);
      }
      return 0;
    }

    if (*generate) {
      fs::create_directories(gen_dir);
      for (const auto& [name, text] : generate_family(family)) std::ofstream(fs::path(gen_dir) / (name + ".p")) << text;
      std::ofstream(fs::path(gen_dir) / "theory.lib") << theory_library();
      std::cout << family.problems << " problems written to " << gen_dir << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
