#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "derivguide/derivation.hpp"
#include "derivguide/guidance.hpp"
#include "derivguide/model.hpp"
#include "derivguide/parser.hpp"
#include "derivguide/prover.hpp"
#include "derivguide/training.hpp"

namespace dg {

class HarnessError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Problem {
  std::string name;
  std::vector<ParsedClause> clauses;  // problem clauses, then the theory library
  std::string error;                  // non-empty when the problem could not be read
};

/// Problems sorted by name, parsed once and shared by every run.
struct Corpus {
  std::vector<Problem> problems;

  /// Every `*.p` file in `dir`; the name is the file stem.
  static Corpus load(const std::string& dir, const std::string& theory_path = {});
  /// In-memory variant: (name, text) pairs plus an optional theory text.
  static Corpus from_texts(const std::vector<std::pair<std::string, std::string>>& texts,
                           const std::string& theory_text = {});

  std::set<std::string> names() const;
  /// The sub-corpus whose names are in `keep`.
  Corpus subset(const std::set<std::string>& keep) const;
};

struct ProblemResult {
  std::string problem;
  std::string status;  // refutation | saturated | limit | error
  std::size_t selections = 0;
  std::size_t generated = 0;
  std::size_t model_evals = 0;
  std::size_t fallbacks = 0;
  double seconds = 0.0;
  double model_eval_seconds = 0.0;
  double eval_fraction = 0.0;
  std::string error;

  bool solved() const { return status == "refutation"; }
  friend bool operator==(const ProblemResult&, const ProblemResult&) = default;
};

struct DiffResult {
  std::string baseline;
  std::size_t solved = 0;
  std::size_t baseline_solved = 0;
  std::vector<std::string> gained;
  std::vector<std::string> lost;
  double percent = 0.0;  // 100 * solved / baseline_solved; 0 when the baseline solves nothing
};

struct BenchmarkReport {
  std::string scheme;
  std::vector<ProblemResult> results;  // sorted by problem
  std::optional<DiffResult> diff;

  std::size_t solved() const;
  std::set<std::string> solved_set() const;
  /// Summed model time over summed wall time.
  double eval_time_fraction() const;
  std::size_t model_evals() const;
};

enum class KeepLogs { None, Solved, All };

struct BenchOptions {
  Limits limits;
  unsigned workers = 0;  // 0: hardware concurrency
  std::string log_dir;   // when set, `<problem>.dlog` per kept run
  KeepLogs keep = KeepLogs::None;
};

struct BenchRun {
  BenchmarkReport report;
  std::map<std::string, DerivationStore> logs;  // per `BenchOptions::keep`
};

BenchRun bench(const Corpus& corpus, const SelectionScheme& scheme, std::shared_ptr<const ModelParams> model,
               const BenchOptions& options);

/// Throws HarnessError when the two reports cover different problems.
DiffResult diff(const BenchmarkReport& report, const BenchmarkReport& baseline, const std::string& baseline_name = {});

void write_report_csv(std::ostream& out, const BenchmarkReport& report);
void write_report_csv(const std::string& path, const BenchmarkReport& report);
BenchmarkReport read_report_csv(const std::string& path);
nlohmann::json summary_json(const BenchmarkReport& report);

struct SweepRow {
  double threshold = 0.0;
  std::size_t solved = 0;
  std::size_t model_evals = 0;
  double eval_time_fraction = 0.0;
  std::optional<DiffResult> diff;
};

/// One bench per threshold with the scheme's threshold overridden.
std::vector<SweepRow> sweep_threshold(const Corpus& corpus, const SelectionScheme& scheme,
                                      std::shared_ptr<const ModelParams> model, const std::vector<double>& thresholds,
                                      const BenchOptions& options, const BenchmarkReport* baseline = nullptr);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Logs from the same problem are joined into one DAG before compression.
std::vector<CompressedDerivation> prepare_derivations(const std::vector<DerivationStore>& logs);

struct LoopState {
  std::size_t iteration = 0;
  std::set<std::string> baseline_solved;
  std::map<std::string, DerivationStore> proofs;  // U: one proof log per problem
  std::optional<ModelParams> model;               // latest trained model

  std::set<std::string> solved() const;
};

/// Baseline bench with proof logging; iteration 0.
LoopState initial_loop_state(const Corpus& corpus, const SelectionScheme& baseline, const BenchOptions& options);

/// A directory holding state.json, one dlog per proof and model.bin.
void save_loop_state(const std::string& dir, const LoopState& state);
LoopState load_loop_state(const std::string& dir);

struct MinedLog {
  std::string problem;
  DerivationStore log;
  bool succeeded = false;  // the baseline unexpectedly found a proof
};

/// Runs the baseline on every problem of U that it did not solve originally.
std::vector<MinedLog> negative_mine(const Corpus& corpus, const LoopState& state, const SelectionScheme& baseline,
                                    const BenchOptions& options, std::ostream* notice = nullptr);

struct LoopConfig {
  std::vector<SelectionScheme> schemes;  // tried in order with the current model
  SelectionScheme baseline;              // for negative mining
  TrainConfig train;
  bool negative_mining = false;
  bool bench_after = true;  // bench schemes.front() with the new model
  BenchOptions bench;
};

struct LoopResult {
  std::size_t new_proofs = 0;
  std::size_t mined = 0;
  std::size_t examples_positive = 0;
  std::size_t examples_negative = 0;
  TrainResult training;
  std::optional<BenchmarkReport> report;
};

/// Collect proofs with the current model (scheme order, then problem order),
/// optionally mine negatives, train a fresh model on U and install it.
LoopResult loop_iteration(LoopState& state, const Corpus& corpus, const LoopConfig& config,
                          std::ostream* notice = nullptr);

}  // namespace dg
