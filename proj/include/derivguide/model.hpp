#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dg {

using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

inline constexpr std::string_view kUnknownOrigin = "unknown_origin";

struct RuleSignature {
  std::string name;
  std::size_t arity = 2;
  friend bool operator==(const RuleSignature&, const RuleSignature&) = default;
};

/// One named tensor inside the flat parameter vector (column-major).
struct ParamBlock {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return rows * cols; }
  friend bool operator==(const ParamBlock&, const ParamBlock&) = default;
};

class ModelError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// All trainable tensors of the derivation classifier, stored in one flat
/// vector of doubles so optimizers and gradient checks can treat them
/// uniformly. Layout: one init vector per origin label, six blocks per rule
/// (W1, b1, W2, b2, gamma, beta), then the eval head (W1, b, W2, c).
class ModelParams {
public:
  struct RuleView {
    ConstMatrixMap w1;  // 2n x kn
    ConstVectorMap b1;  // 2n
    ConstMatrixMap w2;  // n x 2n
    ConstVectorMap b2;  // n
    ConstVectorMap gamma;
    ConstVectorMap beta;
  };
  struct EvalView {
    ConstMatrixMap w1;  // n x n
    ConstVectorMap b;   // n
    ConstMatrixMap w2;  // 1 x n
    double c;
  };

  /// Empty placeholder (dim 0); use create or load_model for a usable model.
  ModelParams() = default;

  static constexpr int kRuleBlocks = 6;
  static constexpr int kEvalBlocks = 4;

  /// Fresh, seeded initialization. `unknown_origin` is always appended to the
  /// origin vocabulary if missing.
  static ModelParams create(std::size_t dim, std::vector<std::string> origins, std::vector<RuleSignature> rules,
                            std::uint64_t seed);

  std::size_t dim() const { return dim_; }
  double layer_norm_eps() const { return layer_norm_eps_; }
  void set_layer_norm_eps(double eps) { layer_norm_eps_ = eps; }
  double threshold() const { return threshold_; }
  void set_threshold(double t) { threshold_ = t; }

  const std::vector<std::string>& origins() const { return origins_; }
  const std::vector<RuleSignature>& rules() const { return rules_; }

  /// Unknown labels map to `unknown_origin`.
  std::size_t origin_index(std::string_view origin) const;
  std::optional<std::size_t> rule_index(std::string_view rule, std::size_t arity) const;

  ConstVectorMap init(std::size_t origin) const;
  RuleView rule(std::size_t index) const;
  EvalView eval() const;

  std::size_t init_block(std::size_t origin) const { return origin; }
  std::size_t rule_block(std::size_t rule, int part) const { return origins_.size() + rule * kRuleBlocks + part; }
  std::size_t eval_block(int part) const { return origins_.size() + rules_.size() * kRuleBlocks + part; }

  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  bool all_finite() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

private:
  ModelParams(std::size_t dim, std::vector<std::string> origins, std::vector<RuleSignature> rules);
  ConstMatrixMap matrix(std::size_t block) const;
  ConstVectorMap vector(std::size_t block) const;

  std::size_t dim_ = 0;
  double layer_norm_eps_ = 1e-5;
  double threshold_ = 0.0;
  std::vector<std::string> origins_;
  std::vector<RuleSignature> rules_;
  std::vector<ParamBlock> blocks_;
  std::vector<double> values_;

  friend ModelParams load_model(std::istream&);
};

/// Writable views into a gradient (or any vector shaped like the params).
MatrixMap block_matrix(std::span<double> data, const ParamBlock& block);
VectorMap block_vector(std::span<double> data, const ParamBlock& block);

inline constexpr std::uint32_t kModelVersion = 1;

/// Binary file: 8-byte magic, u32 version, u64 header length, JSON header,
/// then every block's doubles (little-endian) in header order.
void save_model(std::ostream& out, const ModelParams& params);
ModelParams load_model(std::istream& in);
void save_model(const std::string& path, const ModelParams& params);
ModelParams load_model(const std::string& path);
/// The JSON header alone, for inspection.
std::string read_model_header(const std::string& path);

}  // namespace dg
