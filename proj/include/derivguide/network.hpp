#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "derivguide/derivation.hpp"
#include "derivguide/model.hpp"

namespace dg {

/// I_l; unknown labels fall back to the `unknown_origin` vector.
Eigen::VectorXd init_embed(const ModelParams& params, std::string_view origin);

/// D_r(v_1..v_k) = LayerNorm(W2 * ReLU(W1 * [v_1..v_k] + b1) + b2).
/// Rules with more premises than any stored block are bracketed left to right
/// through the rule's binary block.
Eigen::VectorXd deriv_embed(const ModelParams& params, std::string_view rule,
                            std::span<const Eigen::VectorXd> children);

/// E(v) = W2 * ReLU(W1 * v + b) + c.
double eval_logit(const ModelParams& params, const Eigen::VectorXd& v);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Per-application intermediate values kept for the backward pass.
struct DerivTape {
  Eigen::VectorXd input;   // concatenated (possibly dropped-out) children
  Eigen::VectorXd hidden;  // pre-ReLU, 2n
  Eigen::VectorXd normalized;
  double inv_std = 0;
};

struct EvalTape {
  Eigen::VectorXd input;
  Eigen::VectorXd hidden;  // pre-ReLU, n
};

/// The single-application building blocks shared by every forward path, so
/// cached inference, raw DAG evaluation and training agree bit for bit.
Eigen::VectorXd deriv_apply(const ModelParams::RuleView& rule, const Eigen::VectorXd& input, double eps,
                            DerivTape* tape = nullptr);
double eval_apply(const ModelParams::EvalView& head, const Eigen::VectorXd& input, EvalTape* tape = nullptr);

/// A derivation DAG resolved against a model's vocabularies. Inferences with
/// more than two premises become chains of binary applications; the extra
/// nodes have no store counterpart.
struct DagGraph {
  static constexpr std::uint32_t kNoStoreNode = 0xffffffffu;

  struct Node {
    bool leaf = true;
    std::uint32_t block = 0;  // origin index for leaves, rule index otherwise
    std::vector<std::uint32_t> inputs;
    std::uint32_t store_node = kNoStoreNode;
  };

  std::vector<Node> nodes;
  std::vector<std::uint32_t> of_store;  // store node id -> graph node
};

DagGraph build_graph(const ModelParams& params, const DerivationStore& store);

struct ForwardOptions {
  double dropout = 0.0;             // inverted dropout on every embedding read
  std::mt19937_64* rng = nullptr;   // required when dropout > 0
  bool keep_tape = false;
};

/// One bottom-up pass: embeddings for every graph node and logits for the
/// requested `eval_nodes` (graph ids).
struct ForwardPass {
  std::vector<Eigen::VectorXd> embeddings;
  std::vector<double> logits;

  // tape, filled when keep_tape is set
  std::vector<DerivTape> deriv;            // indexed by graph node (empty for leaves)
  std::vector<std::vector<Eigen::VectorXd>> deriv_masks;  // per graph node, per input slot
  std::vector<EvalTape> eval;              // per eval read
  std::vector<Eigen::VectorXd> eval_masks;
  std::size_t deriv_computations = 0;
};

ForwardPass forward_dag(const ModelParams& params, const DagGraph& graph, std::span<const std::uint32_t> eval_nodes,
                        const ForwardOptions& options = {});

/// Reverse mode through the eval head, every deriv block and the DAG; the
/// gradients of shared subderivations accumulate over all their readers.
/// `dlogits[i]` is dLoss/dlogit for `eval_nodes[i]`; `grad` is accumulated into.
void backward_dag(const ModelParams& params, const DagGraph& graph, const ForwardPass& pass,
                  std::span<const std::uint32_t> eval_nodes, std::span<const double> dlogits, std::span<double> grad);

/// Inference over a whole store: logits for every selected node (or every
/// node when `all_nodes`), keyed by store id.
std::vector<std::pair<NodeId, double>> infer_logits(const ModelParams& params, const DerivationStore& store,
                                                    bool all_nodes = false);

}  // namespace dg
