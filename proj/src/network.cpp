#include "derivguide/network.hpp"

#include <cmath>

namespace dg {

namespace {

Eigen::VectorXd relu(const Eigen::VectorXd& x) { return x.cwiseMax(0.0); }

Eigen::VectorXd relu_mask(const Eigen::VectorXd& x) {
  return (x.array() > 0.0).cast<double>().matrix();
}

std::size_t resolve_rule(const ModelParams& params, std::string_view rule, std::size_t premises) {
  std::size_t arity = premises > 2 ? 2 : premises;
  auto index = params.rule_index(rule, arity);
  if (!index)
    throw ModelError("model has no block for rule " + std::string(rule) + " with " + std::to_string(premises) +
                     " premises");
  return *index;
}

Eigen::VectorXd concat(std::initializer_list<const Eigen::VectorXd*> parts) {
  Eigen::Index total = 0;
  for (auto* p : parts) total += p->size();
  Eigen::VectorXd out(total);
  Eigen::Index at = 0;
  for (auto* p : parts) {
    out.segment(at, p->size()) = *p;
    at += p->size();
  }
  return out;
}

Eigen::VectorXd dropout_mask(std::size_t n, double p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double scale = 1.0 / (1.0 - p);
  Eigen::VectorXd mask(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask[i] = u(rng) < p ? 0.0 : scale;
  return mask;
}

}  // namespace

Eigen::VectorXd deriv_apply(const ModelParams::RuleView& rule, const Eigen::VectorXd& input, double eps,
                            DerivTape* tape) {
  Eigen::VectorXd hidden = rule.w1 * input + rule.b1;
  Eigen::VectorXd y = rule.w2 * relu(hidden) + rule.b2;
  const double n = static_cast<double>(y.size());
  const double mean = y.sum() / n;
  Eigen::VectorXd centered = y.array() - mean;
  const double var = centered.squaredNorm() / n;
  const double inv_std = 1.0 / std::sqrt(var + eps);
  Eigen::VectorXd normalized = centered * inv_std;
  Eigen::VectorXd out = rule.gamma.cwiseProduct(normalized) + rule.beta;
  if (tape) {
    tape->input = input;
    tape->hidden = std::move(hidden);
    tape->normalized = std::move(normalized);
    tape->inv_std = inv_std;
  }
  return out;
}

double eval_apply(const ModelParams::EvalView& head, const Eigen::VectorXd& input, EvalTape* tape) {
  Eigen::VectorXd hidden = head.w1 * input + head.b;
  double logit = (head.w2 * relu(hidden))(0, 0) + head.c;
  if (tape) {
    tape->input = input;
    tape->hidden = std::move(hidden);
  }
  return logit;
}

Eigen::VectorXd init_embed(const ModelParams& params, std::string_view origin) {
  return params.init(params.origin_index(origin));
}

Eigen::VectorXd deriv_embed(const ModelParams& params, std::string_view rule,
                            std::span<const Eigen::VectorXd> children) {
  if (children.empty()) throw ModelError("inference without premises");
  auto index = resolve_rule(params, rule, children.size());
  auto view = params.rule(index);
  const double eps = params.layer_norm_eps();
  if (children.size() == 1) return deriv_apply(view, children[0], eps);
  Eigen::VectorXd acc = deriv_apply(view, concat({&children[0], &children[1]}), eps);
  for (std::size_t i = 2; i < children.size(); ++i) acc = deriv_apply(view, concat({&acc, &children[i]}), eps);
  return acc;
}

double eval_logit(const ModelParams& params, const Eigen::VectorXd& v) { return eval_apply(params.eval(), v); }

DagGraph build_graph(const ModelParams& params, const DerivationStore& store) {
  DagGraph g;
  g.of_store.resize(store.size());
  g.nodes.reserve(store.size());
  for (const auto& n : store.nodes()) {
    DagGraph::Node node;
    if (n.leaf()) {
      node.block = static_cast<std::uint32_t>(params.origin_index(store.label(n.id)));
    } else {
      node.leaf = false;
      node.block = static_cast<std::uint32_t>(resolve_rule(params, store.label(n.id), n.premises.size()));
      if (n.premises.size() <= 2) {
        for (auto p : n.premises) node.inputs.push_back(g.of_store[p]);
      } else {
        // left-associated chain of binary applications
        std::uint32_t acc = g.of_store[n.premises[0]];
        for (std::size_t i = 1; i + 1 < n.premises.size(); ++i) {
          DagGraph::Node inner;
          inner.leaf = false;
          inner.block = node.block;
          inner.inputs = {acc, g.of_store[n.premises[i]]};
          g.nodes.push_back(std::move(inner));
          acc = static_cast<std::uint32_t>(g.nodes.size() - 1);
        }
        node.inputs = {acc, g.of_store[n.premises.back()]};
      }
    }
    node.store_node = n.id;
    g.of_store[n.id] = static_cast<std::uint32_t>(g.nodes.size());
    g.nodes.push_back(std::move(node));
  }
  return g;
}

ForwardPass forward_dag(const ModelParams& params, const DagGraph& graph, std::span<const std::uint32_t> eval_nodes,
                        const ForwardOptions& options) {
  const bool drop = options.dropout > 0.0;
  if (drop && !options.rng) throw ModelError("dropout requires a random generator");
  const std::size_t n = params.dim();
  const double eps = params.layer_norm_eps();

  ForwardPass pass;
  pass.embeddings.resize(graph.nodes.size());
  if (options.keep_tape) {
    pass.deriv.resize(graph.nodes.size());
    if (drop) pass.deriv_masks.resize(graph.nodes.size());
  }
  for (std::size_t g = 0; g < graph.nodes.size(); ++g) {
    const auto& node = graph.nodes[g];
    if (node.leaf) {
      pass.embeddings[g] = params.init(node.block);
      continue;
    }
    Eigen::VectorXd input(static_cast<Eigen::Index>(n * node.inputs.size()));
    for (std::size_t s = 0; s < node.inputs.size(); ++s) {
      auto segment = input.segment(static_cast<Eigen::Index>(s * n), static_cast<Eigen::Index>(n));
      if (drop) {
        Eigen::VectorXd mask = dropout_mask(n, options.dropout, *options.rng);
        segment = pass.embeddings[node.inputs[s]].cwiseProduct(mask);
        if (options.keep_tape) pass.deriv_masks[g].push_back(std::move(mask));
      } else {
        segment = pass.embeddings[node.inputs[s]];
      }
    }
    pass.embeddings[g] =
        deriv_apply(params.rule(node.block), input, eps, options.keep_tape ? &pass.deriv[g] : nullptr);
    ++pass.deriv_computations;
  }

  const auto head = params.eval();
  pass.logits.reserve(eval_nodes.size());
  if (options.keep_tape) {
    pass.eval.resize(eval_nodes.size());
    if (drop) pass.eval_masks.resize(eval_nodes.size());
  }
  for (std::size_t i = 0; i < eval_nodes.size(); ++i) {
    EvalTape* tape = options.keep_tape ? &pass.eval[i] : nullptr;
    if (drop) {
      Eigen::VectorXd mask = dropout_mask(n, options.dropout, *options.rng);
      pass.logits.push_back(eval_apply(head, pass.embeddings[eval_nodes[i]].cwiseProduct(mask), tape));
      if (options.keep_tape) pass.eval_masks[i] = std::move(mask);
    } else {
      pass.logits.push_back(eval_apply(head, pass.embeddings[eval_nodes[i]], tape));
    }
  }
  return pass;
}

void backward_dag(const ModelParams& params, const DagGraph& graph, const ForwardPass& pass,
                  std::span<const std::uint32_t> eval_nodes, std::span<const double> dlogits, std::span<double> grad) {
  if (pass.deriv.size() != graph.nodes.size() || pass.eval.size() != eval_nodes.size())
    throw ModelError("backward pass needs a forward pass with tape");
  const auto n = static_cast<Eigen::Index>(params.dim());
  const auto& blocks = params.blocks();
  const bool drop = !pass.eval_masks.empty() || !pass.deriv_masks.empty();

  std::vector<Eigen::VectorXd> dv(graph.nodes.size(), Eigen::VectorXd::Zero(n));

  const auto head = params.eval();
  auto g_w1 = block_matrix(grad, blocks[params.eval_block(0)]);
  auto g_b = block_vector(grad, blocks[params.eval_block(1)]);
  auto g_w2 = block_matrix(grad, blocks[params.eval_block(2)]);
  double& g_c = grad[blocks[params.eval_block(3)].offset];
  for (std::size_t i = 0; i < eval_nodes.size(); ++i) {
    const double g = dlogits[i];
    if (g == 0.0) continue;
    const auto& tape = pass.eval[i];
    g_c += g;
    g_w2 += g * relu(tape.hidden).transpose();
    Eigen::VectorXd dh = (head.w2.transpose() * g).cwiseProduct(relu_mask(tape.hidden));
    g_w1 += dh * tape.input.transpose();
    g_b += dh;
    Eigen::VectorXd du = head.w1.transpose() * dh;
    if (drop) du = du.cwiseProduct(pass.eval_masks[i]);
    dv[eval_nodes[i]] += du;
  }

  for (std::size_t gi = graph.nodes.size(); gi-- > 0;) {
    const auto& node = graph.nodes[gi];
    const Eigen::VectorXd& dout = dv[gi];
    if (node.leaf) {
      block_vector(grad, blocks[params.init_block(node.block)]) += dout;
      continue;
    }
    if (dout.isZero(0.0)) continue;
    const auto& tape = pass.deriv[gi];
    const auto rule = params.rule(node.block);
    block_vector(grad, blocks[params.rule_block(node.block, 4)]) += dout.cwiseProduct(tape.normalized);
    block_vector(grad, blocks[params.rule_block(node.block, 5)]) += dout;
    Eigen::VectorXd dnorm = dout.cwiseProduct(rule.gamma);
    const double nd = static_cast<double>(n);
    const double mean_d = dnorm.sum() / nd;
    const double mean_dn = dnorm.dot(tape.normalized) / nd;
    Eigen::VectorXd dy = tape.inv_std * (dnorm.array() - mean_d - tape.normalized.array() * mean_dn).matrix();
    Eigen::VectorXd x = relu(tape.hidden);
    block_matrix(grad, blocks[params.rule_block(node.block, 2)]) += dy * x.transpose();
    block_vector(grad, blocks[params.rule_block(node.block, 3)]) += dy;
    Eigen::VectorXd dh = (rule.w2.transpose() * dy).cwiseProduct(relu_mask(tape.hidden));
    block_matrix(grad, blocks[params.rule_block(node.block, 0)]) += dh * tape.input.transpose();
    block_vector(grad, blocks[params.rule_block(node.block, 1)]) += dh;
    Eigen::VectorXd dinput = rule.w1.transpose() * dh;
    for (std::size_t s = 0; s < node.inputs.size(); ++s) {
      Eigen::VectorXd part = dinput.segment(static_cast<Eigen::Index>(s) * n, n);
      if (drop) part = part.cwiseProduct(pass.deriv_masks[gi][s]);
      dv[node.inputs[s]] += part;
    }
  }
}

std::vector<std::pair<NodeId, double>> infer_logits(const ModelParams& params, const DerivationStore& store,
                                                    bool all_nodes) {
  DagGraph graph = build_graph(params, store);
  std::vector<std::uint32_t> eval_nodes;
  std::vector<NodeId> ids;
  for (const auto& n : store.nodes())
    if (all_nodes || n.selected) {
      eval_nodes.push_back(graph.of_store[n.id]);
      ids.push_back(n.id);
    }
  ForwardPass pass = forward_dag(params, graph, eval_nodes);
  std::vector<std::pair<NodeId, double>> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) out.emplace_back(ids[i], pass.logits[i]);
  return out;
}

}  // namespace dg
