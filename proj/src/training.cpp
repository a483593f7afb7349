#include "derivguide/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

namespace dg {

using nlohmann::json;

void TrainConfig::validate() const {
  if (dim == 0) throw TrainingError("dim must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw TrainingError("dropout must lie in [0,1)");
  if (!(split > 0.0 && split < 1.0)) throw TrainingError("split must lie in (0,1)");
  if (!(lr_peak > 0.0)) throw TrainingError("lr_peak must be positive");
  if (warmup_epochs == 0) throw TrainingError("warmup_epochs must be positive");
  if (target_nodes == 0) throw TrainingError("target_nodes must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw TrainingError("Adam betas must lie in [0,1)");
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  try {
    c.dim = j.value("dim", c.dim);
    c.dropout = j.value("dropout", c.dropout);
    c.lr_peak = j.value("lr_peak", c.lr_peak);
    c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.split = j.value("split", c.split);
    c.target_nodes = j.value("target_nodes", c.target_nodes);
    c.seed = j.value("seed", c.seed);
    c.threshold = j.value("threshold", c.threshold);
  } catch (const json::exception& e) {
    throw TrainingError(std::string("bad training config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TrainingError("cannot open " + path);
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw TrainingError(path + ": " + e.what());
  }
}

json TrainConfig::to_json() const {
  return {{"dim", dim},           {"dropout", dropout},     {"lr_peak", lr_peak}, {"warmup_epochs", warmup_epochs},
          {"max_epochs", max_epochs}, {"patience", patience}, {"beta1", beta1},     {"beta2", beta2},
          {"adam_eps", adam_eps}, {"split", split},         {"target_nodes", target_nodes}, {"seed", seed},
          {"threshold", threshold}};
}

BatchSplit build_batches(std::span<const std::size_t> sizes, std::size_t target_nodes, double split,
                         std::uint64_t seed) {
  if (sizes.empty()) throw TrainingError("no derivations to batch");
  std::vector<Batch> batches;
  Batch open;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] > target_nodes) {
      batches.push_back(Batch{{i}, sizes[i]});
      continue;
    }
    if (!open.derivations.empty() && open.nodes + sizes[i] > target_nodes) {
      batches.push_back(std::move(open));
      open = Batch{};
    }
    open.derivations.push_back(i);
    open.nodes += sizes[i];
  }
  if (!open.derivations.empty()) batches.push_back(std::move(open));

  std::mt19937_64 rng(seed);
  std::shuffle(batches.begin(), batches.end(), rng);
  auto n_train = static_cast<std::size_t>(std::lround(split * static_cast<double>(batches.size())));
  n_train = std::min(n_train, batches.size());
  BatchSplit out;
  out.train.assign(batches.begin(), batches.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.validation.assign(batches.begin() + static_cast<std::ptrdiff_t>(n_train), batches.end());
  return out;
}

BatchSplit build_batches(std::span<const CompressedDerivation> derivations, std::size_t target_nodes, double split,
                         std::uint64_t seed) {
  std::vector<std::size_t> sizes;
  sizes.reserve(derivations.size());
  for (const auto& d : derivations) sizes.push_back(d.size());
  return build_batches(sizes, target_nodes, split, seed);
}

std::vector<std::vector<double>> example_weights(std::span<const CompressedDerivation> derivations,
                                                 std::ostream* warn) {
  std::size_t problems = 0;
  for (const auto& d : derivations) {
    if (d.selected_count() > 0)
      ++problems;
    else if (warn)
      *warn << "warning: derivation '" << d.problem() << "' has no selected clauses; excluded\n";
  }
  std::vector<std::vector<double>> weights;
  weights.reserve(derivations.size());
  for (const auto& d : derivations) {
    std::vector<double> w(d.size(), 0.0);
    std::size_t pos = 0, neg = 0;
    for (const auto& n : d.nodes())
      if (n.selected) (n.in_proof ? pos : neg)++;
    if (pos + neg > 0) {
      const double mass = 1.0 / static_cast<double>(problems);
      const double pos_mass = neg == 0 ? mass : pos == 0 ? 0.0 : mass / 2;
      const double neg_mass = mass - pos_mass;
      for (const auto& n : d.nodes()) {
        if (!n.selected) continue;
        w[n.id] = n.in_proof ? pos_mass / static_cast<double>(pos) : neg_mass / static_cast<double>(neg);
      }
    }
    weights.push_back(std::move(w));
  }
  return weights;
}

double bce_with_logits(double logit, double y) {
  return std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::abs(logit)));
}

Dataset::Dataset(std::vector<CompressedDerivation> derivations, std::ostream* warn)
    : derivations_(std::move(derivations)), weights_(example_weights(derivations_, warn)) {}

std::vector<std::string> Dataset::origin_vocabulary() const {
  std::set<std::string> origins{std::string(kUnknownOrigin)};
  origins.insert("input");
  for (const auto& d : derivations_)
    for (const auto& o : d.origins()) origins.insert(o);
  return {origins.begin(), origins.end()};
}

std::vector<RuleSignature> Dataset::rule_vocabulary() const {
  std::set<std::pair<std::string, std::size_t>> rules{{std::string(kResolutionRule), 2},
                                                      {std::string(kFactoringRule), 1}};
  for (const auto& d : derivations_)
    for (const auto& n : d.nodes())
      if (!n.leaf()) rules.emplace(d.label(n.id), std::min<std::size_t>(n.premises.size(), 2));
  std::vector<RuleSignature> out;
  for (const auto& [name, arity] : rules) out.push_back({name, arity});
  return out;
}

LossAndGradient batch_loss(const ModelParams& params, const Dataset& data, const Batch& batch, double dropout,
                           std::mt19937_64* rng, bool with_gradient) {
  LossAndGradient out;
  if (with_gradient) out.gradient.assign(params.size(), 0.0);
  ForwardOptions options{dropout, rng, with_gradient};
  for (auto di : batch.derivations) {
    const auto& store = data.derivations()[di];
    const auto& weights = data.weights()[di];
    DagGraph graph = build_graph(params, store);
    std::vector<std::uint32_t> eval_nodes;
    std::vector<double> w, y;
    for (const auto& n : store.nodes())
      if (n.selected && weights[n.id] > 0.0) {
        eval_nodes.push_back(graph.of_store[n.id]);
        w.push_back(weights[n.id]);
        y.push_back(n.in_proof ? 1.0 : 0.0);
      }
    if (eval_nodes.empty()) continue;
    ForwardPass pass = forward_dag(params, graph, eval_nodes, options);
    std::vector<double> dlogits(eval_nodes.size());
    for (std::size_t i = 0; i < eval_nodes.size(); ++i) {
      out.loss += w[i] * bce_with_logits(pass.logits[i], y[i]);
      out.weight += w[i];
      dlogits[i] = w[i] * (sigmoid(pass.logits[i]) - y[i]);
    }
    if (with_gradient) backward_dag(params, graph, pass, eval_nodes, dlogits, out.gradient);
  }
  return out;
}

Adam::Adam(std::size_t size, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> gradient, double lr) {
  if (params.size() != m_.size() || gradient.size() != m_.size()) throw TrainingError("Adam state size mismatch");
  for (std::size_t i = 0; i < gradient.size(); ++i)
    if (!std::isfinite(gradient[i])) throw TrainingError("non-finite gradient at parameter " + std::to_string(i));
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < gradient.size(); ++i) {
    const double g = gradient[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

double lr_schedule(std::size_t epoch, std::size_t warmup, double peak) {
  const double e = static_cast<double>(std::max<std::size_t>(epoch, 1));
  const double w = static_cast<double>(warmup);
  return epoch <= warmup ? peak * e / w : peak * w / e;
}

bool EarlyStopping::update(std::size_t epoch, double loss) {
  if (loss < best_loss_) {
    best_loss_ = loss;
    best_epoch_ = epoch;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

ModelParams initial_model(const TrainConfig& config, const Dataset& data) {
  ModelParams p = ModelParams::create(config.dim, data.origin_vocabulary(), data.rule_vocabulary(), config.seed);
  p.set_threshold(config.threshold);
  return p;
}

namespace {

struct Rates {
  double tpr = 0.0, tnr = 0.0;
};

Rates rates_at(const ModelParams& params, const Dataset& data, const std::vector<Batch>& batches, double threshold) {
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
  for (const auto& b : batches)
    for (auto di : b.derivations) {
      const auto& store = data.derivations()[di];
      for (auto [id, logit] : infer_logits(params, store)) {
        const bool predicted = logit >= threshold;
        if (store.node(id).in_proof)
          (predicted ? tp : fn)++;
        else
          (predicted ? fp : tn)++;
      }
    }
  Rates r;
  r.tpr = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.tnr = tn + fp ? static_cast<double>(tn) / static_cast<double>(tn + fp) : 0.0;
  return r;
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& data, const BatchSplit& split,
                  std::optional<ModelParams> init) {
  config.validate();
  if (split.train.empty() || split.validation.empty())
    throw TrainingError("training needs non-empty train and validation sets");
  ModelParams params = init ? std::move(*init) : initial_model(config, data);
  params.set_threshold(config.threshold);

  TrainResult result{params, params, {}, 0, false, {}};
  Adam adam(params.size(), config.beta1, config.beta2, config.adam_eps);
  EarlyStopping stopper(config.patience);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(split.train.size());

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double lr = lr_schedule(epoch, config.warmup_epochs, config.lr_peak);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    double train_loss = 0.0, train_weight = 0.0;
    try {
      for (auto bi : order) {
        auto lg = batch_loss(params, data, split.train[bi], config.dropout, &rng, true);
        if (!std::isfinite(lg.loss)) throw TrainingError("non-finite training loss");
        train_loss += lg.loss;
        train_weight += lg.weight;
        adam.step(params.values(), lg.gradient, lr);
      }
    } catch (const TrainingError& e) {
      result.diverged = true;
      result.diagnostic = "epoch " + std::to_string(epoch) + ": " + e.what() + "; last good epoch " +
                          std::to_string(epoch - 1);
      break;
    }

    double val_loss = 0.0, val_weight = 0.0;
    for (const auto& b : split.validation) {
      auto lg = batch_loss(params, data, b, 0.0, nullptr, false);
      val_loss += lg.loss;
      val_weight += lg.weight;
    }
    EpochReport report;
    report.epoch = epoch;
    report.lr = lr;
    report.train_loss = train_weight > 0 ? train_loss / train_weight : 0.0;
    report.val_loss = val_weight > 0 ? val_loss / val_weight : 0.0;
    auto r = rates_at(params, data, split.validation, config.threshold);
    report.tpr = r.tpr;
    report.tnr = r.tnr;
    result.reports.push_back(report);
    result.last = params;

    if (!std::isfinite(report.val_loss)) {
      result.diverged = true;
      result.diagnostic = "epoch " + std::to_string(epoch) + ": non-finite validation loss";
      break;
    }
    if (stopper.update(epoch, report.val_loss)) {
      result.best = params;
      result.best_epoch = epoch;
    }
    if (stopper.should_stop()) break;
  }
  return result;
}

void write_report_csv(std::ostream& out, std::span<const EpochReport> reports) {
  out << "epoch,lr,train_loss,val_loss,tpr,tnr\n";
  out.precision(10);
  for (const auto& r : reports)
    out << r.epoch << ',' << r.lr << ',' << r.train_loss << ',' << r.val_loss << ',' << r.tpr << ',' << r.tnr << '\n';
}

MetricsReport metrics(const ModelParams& params, std::span<const CompressedDerivation> derivations,
                      std::span<const double> thresholds) {
  std::vector<std::pair<double, bool>> examples;
  MetricsReport report;
  for (const auto& d : derivations) {
    double min_pos = std::numeric_limits<double>::infinity();
    bool any_pos = false;
    for (auto [id, logit] : infer_logits(params, d)) {
      const bool pos = d.node(id).in_proof;
      examples.emplace_back(logit, pos);
      if (pos) {
        any_pos = true;
        min_pos = std::min(min_pos, logit);
      }
    }
    if (any_pos) report.min_positive_logit.emplace_back(d.problem(), min_pos);
  }
  std::vector<double> ts(thresholds.begin(), thresholds.end());
  std::sort(ts.begin(), ts.end());
  for (double t : ts) {
    ThresholdMetrics m;
    m.threshold = t;
    for (auto [logit, pos] : examples) {
      const bool predicted = logit >= t;
      if (pos)
        (predicted ? m.tp : m.fn)++;
      else
        (predicted ? m.fp : m.tn)++;
    }
    m.tpr = m.tp + m.fn ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
    m.tnr = m.tn + m.fp ? static_cast<double>(m.tn) / static_cast<double>(m.tn + m.fp) : 0.0;
    m.fpr = 1.0 - m.tnr;
    report.rows.push_back(m);
  }
  return report;
}

void write_roc_csv(std::ostream& out, const MetricsReport& report) {
  out << "threshold,tpr,tnr,fpr,tp,fn,tn,fp\n";
  for (const auto& m : report.rows)
    out << m.threshold << ',' << m.tpr << ',' << m.tnr << ',' << m.fpr << ',' << m.tp << ',' << m.fn << ',' << m.tn
        << ',' << m.fp << '\n';
}

void write_bundle(const std::string& path, const DataBundle& bundle) {
  std::ofstream out(path);
  if (!out) throw TrainingError("cannot write " + path);
  auto batches_json = [](const std::vector<Batch>& bs) {
    json arr = json::array();
    for (const auto& b : bs) arr.push_back(b.derivations);
    return arr;
  };
  json header = {{"v", 1},
                 {"kind", "dataset"},
                 {"derivations", bundle.derivations.size()},
                 {"train", batches_json(bundle.split.train)},
                 {"validation", batches_json(bundle.split.validation)}};
  out << header.dump() << '\n';
  for (const auto& d : bundle.derivations) {
    out << json{{"section", d.problem()}, {"lines", d.size() + 1}}.dump() << '\n';
    write_log(out, d);
  }
}

DataBundle read_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TrainingError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw TrainingError(path + ": empty data file");
  DataBundle bundle;
  try {
    json header = json::parse(line);
    if (header.at("v") != 1 || header.at("kind") != "dataset") throw TrainingError(path + ": not a dataset");
    auto count = header.at("derivations").get<std::size_t>();
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::getline(in, line)) throw TrainingError(path + ": truncated");
      auto lines = json::parse(line).at("lines").get<std::size_t>();
      std::string section;
      for (std::size_t k = 0; k < lines; ++k) {
        if (!std::getline(in, line)) throw TrainingError(path + ": truncated section");
        section += line;
        section += '\n';
      }
      std::istringstream ss(section);
      bundle.derivations.push_back(read_log(ss));
    }
    auto batches = [&](const json& arr) {
      std::vector<Batch> out;
      for (const auto& b : arr) {
        Batch batch;
        batch.derivations = b.get<std::vector<std::size_t>>();
        for (auto di : batch.derivations) {
          if (di >= bundle.derivations.size()) throw TrainingError(path + ": batch index out of range");
          batch.nodes += bundle.derivations[di].size();
        }
        out.push_back(std::move(batch));
      }
      return out;
    };
    bundle.split.train = batches(header.at("train"));
    bundle.split.validation = batches(header.at("validation"));
  } catch (const json::exception& e) {
    throw TrainingError(path + ": " + e.what());
  }
  return bundle;
}

}  // namespace dg
