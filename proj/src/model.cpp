#include "derivguide/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>

namespace dg {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'D', 'G', 'M', 'O', 'D', 'E', 'L', '\0'};

template <typename T>
void write_le(std::ostream& out, T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    out.write(bytes.data(), sizeof(T));
  } else {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
}

template <typename T>
T read_le(std::istream& in) {
  std::array<char, sizeof(T)> bytes{};
  if (!in.read(bytes.data(), sizeof(T))) throw ModelError("model file truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

json threshold_to_json(double t) {
  if (std::isfinite(t)) return t;
  return t > 0 ? "inf" : "-inf";
}

double threshold_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  throw ModelError("bad threshold value " + s);
}

}  // namespace

ModelParams::ModelParams(std::size_t dim, std::vector<std::string> origins, std::vector<RuleSignature> rules)
    : dim_(dim), origins_(std::move(origins)), rules_(std::move(rules)) {
  if (dim_ == 0) throw ModelError("embedding dimension must be positive");
  if (std::find(origins_.begin(), origins_.end(), kUnknownOrigin) == origins_.end())
    origins_.emplace_back(kUnknownOrigin);
  for (const auto& r : rules_)
    if (r.arity < 1 || r.arity > 2)
      throw ModelError("unsupported arity " + std::to_string(r.arity) + " for rule " + r.name);

  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
    blocks_.push_back(ParamBlock{std::move(name), rows, cols, offset});
    offset += rows * cols;
  };
  const std::size_t n = dim_;
  for (const auto& o : origins_) add("init/" + o, n, 1);
  for (const auto& r : rules_) {
    std::string prefix = "rule/" + r.name + "/" + std::to_string(r.arity) + "/";
    add(prefix + "W1", 2 * n, r.arity * n);
    add(prefix + "b1", 2 * n, 1);
    add(prefix + "W2", n, 2 * n);
    add(prefix + "b2", n, 1);
    add(prefix + "gamma", n, 1);
    add(prefix + "beta", n, 1);
  }
  add("eval/W1", n, n);
  add("eval/b", n, 1);
  add("eval/W2", 1, n);
  add("eval/c", 1, 1);
  values_.assign(offset, 0.0);
}

ModelParams ModelParams::create(std::size_t dim, std::vector<std::string> origins, std::vector<RuleSignature> rules,
                                std::uint64_t seed) {
  ModelParams p(dim, std::move(origins), std::move(rules));
  std::mt19937_64 rng(seed);
  auto fill_uniform = [&](std::size_t block, double bound) {
    const auto& b = p.blocks_[block];
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < b.size(); ++i) p.values_[b.offset + i] = dist(rng);
  };
  auto fill_const = [&](std::size_t block, double value) {
    const auto& b = p.blocks_[block];
    std::fill_n(p.values_.begin() + static_cast<std::ptrdiff_t>(b.offset), b.size(), value);
  };
  const double n = static_cast<double>(dim);
  for (std::size_t o = 0; o < p.origins_.size(); ++o) fill_uniform(p.init_block(o), 1.0 / std::sqrt(n));
  for (std::size_t r = 0; r < p.rules_.size(); ++r) {
    const double fan_in1 = n * static_cast<double>(p.rules_[r].arity);
    fill_uniform(p.rule_block(r, 0), 1.0 / std::sqrt(fan_in1));
    fill_uniform(p.rule_block(r, 1), 1.0 / std::sqrt(fan_in1));
    fill_uniform(p.rule_block(r, 2), 1.0 / std::sqrt(2 * n));
    fill_uniform(p.rule_block(r, 3), 1.0 / std::sqrt(2 * n));
    fill_const(p.rule_block(r, 4), 1.0);
    fill_const(p.rule_block(r, 5), 0.0);
  }
  fill_uniform(p.eval_block(0), 1.0 / std::sqrt(n));
  fill_uniform(p.eval_block(1), 1.0 / std::sqrt(n));
  fill_uniform(p.eval_block(2), 1.0 / std::sqrt(n));
  fill_uniform(p.eval_block(3), 1.0 / std::sqrt(n));
  return p;
}

std::size_t ModelParams::origin_index(std::string_view origin) const {
  auto it = std::find(origins_.begin(), origins_.end(), origin);
  if (it == origins_.end()) it = std::find(origins_.begin(), origins_.end(), kUnknownOrigin);
  return static_cast<std::size_t>(it - origins_.begin());
}

std::optional<std::size_t> ModelParams::rule_index(std::string_view rule, std::size_t arity) const {
  for (std::size_t i = 0; i < rules_.size(); ++i)
    if (rules_[i].name == rule && rules_[i].arity == arity) return i;
  return std::nullopt;
}

ConstMatrixMap ModelParams::matrix(std::size_t block) const {
  const auto& b = blocks_[block];
  return ConstMatrixMap(values_.data() + b.offset, static_cast<Eigen::Index>(b.rows), static_cast<Eigen::Index>(b.cols));
}

ConstVectorMap ModelParams::vector(std::size_t block) const {
  const auto& b = blocks_[block];
  return ConstVectorMap(values_.data() + b.offset, static_cast<Eigen::Index>(b.size()));
}

ConstVectorMap ModelParams::init(std::size_t origin) const { return vector(init_block(origin)); }

ModelParams::RuleView ModelParams::rule(std::size_t r) const {
  return RuleView{matrix(rule_block(r, 0)), vector(rule_block(r, 1)), matrix(rule_block(r, 2)),
                  vector(rule_block(r, 3)), vector(rule_block(r, 4)), vector(rule_block(r, 5))};
}

ModelParams::EvalView ModelParams::eval() const {
  return EvalView{matrix(eval_block(0)), vector(eval_block(1)), matrix(eval_block(2)),
                  values_[blocks_[eval_block(3)].offset]};
}

bool ModelParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

MatrixMap block_matrix(std::span<double> data, const ParamBlock& b) {
  return MatrixMap(data.data() + b.offset, static_cast<Eigen::Index>(b.rows), static_cast<Eigen::Index>(b.cols));
}

VectorMap block_vector(std::span<double> data, const ParamBlock& b) {
  return VectorMap(data.data() + b.offset, static_cast<Eigen::Index>(b.size()));
}

void save_model(std::ostream& out, const ModelParams& params) {
  json rules = json::array();
  for (const auto& r : params.rules()) rules.push_back({{"name", r.name}, {"arity", r.arity}});
  json blocks = json::array();
  for (const auto& b : params.blocks()) blocks.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});
  json header = {{"version", kModelVersion},
                 {"dim", params.dim()},
                 {"layer_norm_eps", params.layer_norm_eps()},
                 {"threshold", threshold_to_json(params.threshold())},
                 {"origins", params.origins()},
                 {"rules", rules},
                 {"blocks", blocks}};
  std::string text = header.dump();
  out.write(kMagic, sizeof(kMagic));
  write_le<std::uint32_t>(out, kModelVersion);
  write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (double v : params.values()) write_le<double>(out, v);
  if (!out) throw ModelError("failed writing model");
}

namespace {

json read_header(std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ModelError("not a model file");
  auto version = read_le<std::uint32_t>(in);
  if (version != kModelVersion) throw ModelError("unsupported model version " + std::to_string(version));
  auto length = read_le<std::uint64_t>(in);
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) throw ModelError("model header truncated");
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed model header: ") + e.what());
  }
}

}  // namespace

ModelParams load_model(std::istream& in) {
  json header = read_header(in);
  try {
    if (header.at("version").get<std::uint32_t>() != kModelVersion) throw ModelError("header version mismatch");
    std::vector<RuleSignature> rules;
    for (const auto& r : header.at("rules")) {
      auto arity = r.at("arity").get<std::size_t>();
      if (arity < 1 || arity > 2)
        throw ModelError("unknown rule arity " + std::to_string(arity) + " for " + r.at("name").get<std::string>());
      rules.push_back({r.at("name").get<std::string>(), arity});
    }
    ModelParams params(header.at("dim").get<std::size_t>(), header.at("origins").get<std::vector<std::string>>(),
                       std::move(rules));
    params.layer_norm_eps_ = header.at("layer_norm_eps").get<double>();
    params.threshold_ = threshold_from_json(header.at("threshold"));
    const auto& declared = header.at("blocks");
    if (declared.size() != params.blocks_.size()) throw ModelError("block count does not match dimensions");
    for (std::size_t i = 0; i < declared.size(); ++i) {
      const auto& b = params.blocks_[i];
      if (declared[i].at("name") != b.name || declared[i].at("rows") != b.rows || declared[i].at("cols") != b.cols)
        throw ModelError("dimension mismatch in block " + b.name);
    }
    for (auto& v : params.values_) v = read_le<double>(in);
    return params;
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed model header: ") + e.what());
  }
}

void save_model(const std::string& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write " + path);
  save_model(out, params);
}

ModelParams load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open " + path);
  return load_model(in);
}

std::string read_model_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open " + path);
  return read_header(in).dump(2);
}

}  // namespace dg
