#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "derivguide/derivation.hpp"
#include "derivguide/model.hpp"
#include "derivguide/network.hpp"

namespace dg {

struct TrainConfig {
  std::size_t dim = 64;
  double dropout = 0.3;
  double lr_peak = 2.5e-4;
  std::size_t warmup_epochs = 50;
  std::size_t max_epochs = 100;
  std::size_t patience = 15;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double split = 0.8;
  std::size_t target_nodes = 1000;
  std::uint64_t seed = 1;
  double threshold = 0.0;  // stored in the model, used for TPR/TNR reports

  void validate() const;
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig load(const std::string& path);
  nlohmann::json to_json() const;
};

class TrainingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Indices into the derivation list.
struct Batch {
  std::vector<std::size_t> derivations;
  std::size_t nodes = 0;
  friend bool operator==(const Batch&, const Batch&) = default;
};

struct BatchSplit {
  std::vector<Batch> train;
  std::vector<Batch> validation;
};

/// Derivations above `target_nodes` become singleton batches; the rest are
/// packed greedily in order up to `target_nodes`. Batches are then shuffled
/// by `seed` and the first round(split * count) go to training.
BatchSplit build_batches(std::span<const std::size_t> sizes, std::size_t target_nodes, double split,
                         std::uint64_t seed);
BatchSplit build_batches(std::span<const CompressedDerivation> derivations, std::size_t target_nodes, double split,
                         std::uint64_t seed);

/// Per node weight (0 for non-examples). Every problem carries total mass
/// 1/|problems|, split evenly between its positives and its negatives.
/// Problems without selected nodes get no mass and a warning on `warn`.
std::vector<std::vector<double>> example_weights(std::span<const CompressedDerivation> derivations,
                                                 std::ostream* warn = nullptr);

/// max(L,0) - L*y + log(1 + exp(-|L|))
double bce_with_logits(double logit, double y);

/// Training data with everything the forward pass needs precomputed.
class Dataset {
public:
  Dataset(std::vector<CompressedDerivation> derivations, std::ostream* warn = nullptr);

  const std::vector<CompressedDerivation>& derivations() const { return derivations_; }
  const std::vector<std::vector<double>>& weights() const { return weights_; }
  std::size_t size() const { return derivations_.size(); }

  /// Origin labels and rule signatures seen in the data, plus the prover's own rules.
  std::vector<std::string> origin_vocabulary() const;
  std::vector<RuleSignature> rule_vocabulary() const;

private:
  std::vector<CompressedDerivation> derivations_;
  std::vector<std::vector<double>> weights_;
};

struct LossAndGradient {
  double loss = 0.0;
  double weight = 0.0;  // total example weight in the batch
  std::vector<double> gradient;
};

/// Sum of w * BCE over the batch; gradient only when `with_gradient`.
LossAndGradient batch_loss(const ModelParams& params, const Dataset& data, const Batch& batch, double dropout,
                           std::mt19937_64* rng, bool with_gradient);

/// Adam with bias correction.
class Adam {
public:
  Adam(std::size_t size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  /// Throws TrainingError on a non-finite gradient, leaving params untouched.
  void step(std::span<double> params, std::span<const double> gradient, double lr);
  std::size_t steps() const { return t_; }

private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

/// Linear warmup to `peak` at `warmup`, then peak * warmup / epoch. Epochs count from 1.
double lr_schedule(std::size_t epoch, std::size_t warmup, double peak);

/// Tracks the best validation loss; stop once `patience` epochs pass without improvement.
class EarlyStopping {
public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}
  /// True when `loss` is a new best.
  bool update(std::size_t epoch, double loss);
  bool should_stop() const { return stale_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

private:
  std::size_t patience_;
  std::size_t stale_ = 0;
  std::size_t best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

struct EpochReport {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double tpr = 0.0;
  double tnr = 0.0;
  friend bool operator==(const EpochReport&, const EpochReport&) = default;
};

struct TrainResult {
  ModelParams best;
  ModelParams last;
  std::vector<EpochReport> reports;
  std::size_t best_epoch = 0;
  bool diverged = false;
  std::string diagnostic;
};

ModelParams initial_model(const TrainConfig& config, const Dataset& data);

/// Validation batches only ever feed losses and metrics, never the optimizer.
TrainResult train(const TrainConfig& config, const Dataset& data, const BatchSplit& split,
                  std::optional<ModelParams> init = std::nullopt);

void write_report_csv(std::ostream& out, std::span<const EpochReport> reports);

struct ThresholdMetrics {
  double threshold = 0.0;
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
  double tpr = 0.0, tnr = 0.0, fpr = 0.0;
};

struct MetricsReport {
  std::vector<ThresholdMetrics> rows;  // ascending threshold
  /// Per problem: the lowest logit among its positive examples.
  std::vector<std::pair<std::string, double>> min_positive_logit;
};

/// Confusion counts of the >= t rule over all examples (selected nodes).
MetricsReport metrics(const ModelParams& params, std::span<const CompressedDerivation> derivations,
                      std::span<const double> thresholds);

void write_roc_csv(std::ostream& out, const MetricsReport& report);

/// Prepared training data on disk: a JSON header with the batch split,
/// followed by one derivation log section per problem.
struct DataBundle {
  std::vector<CompressedDerivation> derivations;
  BatchSplit split;
};
void write_bundle(const std::string& path, const DataBundle& bundle);
DataBundle read_bundle(const std::string& path);

}  // namespace dg
