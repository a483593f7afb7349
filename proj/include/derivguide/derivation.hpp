#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "derivguide/term.hpp"

namespace dg {

inline constexpr std::string_view kResolutionRule = "Resolution";
inline constexpr std::string_view kFactoringRule = "Factoring";

enum class LabelKind : std::uint8_t { Origin, Rule };

/// Id of an abstract derivation tree in the global hash-consing table.
struct Fingerprint {
  std::uint32_t value = 0;
  friend bool operator==(Fingerprint, Fingerprint) = default;
  friend auto operator<=>(Fingerprint, Fingerprint) = default;
};

struct FingerprintHash {
  std::size_t operator()(Fingerprint f) const noexcept { return std::hash<std::uint32_t>{}(f.value); }
};

/// Hash-consed table of abstract derivation trees. Two fingerprints are equal
/// iff the trees are equal, so trees are never materialized.
class FingerprintTable {
public:
  static FingerprintTable& global();

  std::uint32_t intern_label(LabelKind kind, std::string_view name);
  Fingerprint make(std::uint32_t label, std::span<const Fingerprint> children);

  /// Renders e.g. `Resolution(thax_assoc,Factoring(input))`. Exponential in
  /// DAG depth for shared subtrees; meant for diagnostics and tests.
  std::string render(Fingerprint f) const;
  std::size_t size() const;

private:
  struct Entry {
    std::uint32_t label;
    std::vector<Fingerprint> children;
  };
  struct KeyHash {
    std::size_t operator()(const std::vector<std::uint32_t>& key) const noexcept;
  };

  mutable std::shared_mutex mutex_;
  std::vector<std::pair<LabelKind, std::string>> labels_;
  std::unordered_map<std::string, std::uint32_t> label_ids_;
  std::vector<Entry> entries_;
  std::unordered_map<std::vector<std::uint32_t>, std::uint32_t, KeyHash> index_;
};

struct DerivationNode {
  NodeId id = 0;
  std::uint32_t label = 0;  // index into the store's origin or rule vocabulary
  std::vector<NodeId> premises;
  bool selected = false;
  bool in_proof = false;

  bool leaf() const { return premises.empty(); }
};

class DerivationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The derivation DAG of one prover run. Ids are dense and topological:
/// every premise has a smaller id than its conclusion.
///
/// Fingerprints are memoized internally; a store is not safe for concurrent
/// mutation, and fingerprint queries count as mutation.
class DerivationStore {
public:
  DerivationStore() = default;
  explicit DerivationStore(std::string problem) : problem_(std::move(problem)) {}

  /// Leaf when `premises` is empty (label is an origin), inference otherwise.
  NodeId record(std::string_view label, std::span<const NodeId> premises = {});
  NodeId record(std::string_view label, std::initializer_list<NodeId> premises) {
    return record(label, std::span<const NodeId>(premises.begin(), premises.size()));
  }

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  const DerivationNode& node(NodeId id) const { return nodes_.at(id); }
  const std::vector<DerivationNode>& nodes() const { return nodes_; }

  void set_selected(NodeId id, bool value = true) { nodes_.at(id).selected = value; }
  void set_in_proof(NodeId id, bool value = true) { nodes_.at(id).in_proof = value; }

  const std::string& label(NodeId id) const;
  const std::vector<std::string>& origins() const { return origins_; }
  const std::vector<std::string>& rules() const { return rules_; }

  const std::string& problem() const { return problem_; }
  void set_problem(std::string p) { problem_ = std::move(p); }

  Fingerprint fingerprint(NodeId id) const;
  /// Number of canonical encodings built so far; at most one per node.
  std::size_t fingerprint_constructions() const { return fingerprints_.size(); }

  /// Disjoint union: appends `other`'s nodes with shifted ids; returns the shift.
  NodeId append(const DerivationStore& other);

  std::size_t selected_count() const;
  std::size_t proof_count() const;

  friend bool operator==(const DerivationStore& a, const DerivationStore& b);

private:
  std::uint32_t label_index(std::vector<std::string>& vocab, std::unordered_map<std::string, std::uint32_t>& ids,
                            std::string_view name);

  std::string problem_;
  std::vector<DerivationNode> nodes_;
  std::vector<std::string> origins_;
  std::vector<std::string> rules_;
  std::unordered_map<std::string, std::uint32_t> origin_ids_;
  std::unordered_map<std::string, std::uint32_t> rule_ids_;
  mutable std::vector<Fingerprint> fingerprints_;
};

/// Factorization by derivation-tree equivalence: one representative (the
/// lowest id) per fingerprint class. A class is in the proof if any member
/// was, and selected if any member was.
using CompressedDerivation = DerivationStore;
CompressedDerivation compress(const DerivationStore& store);

/// Premise-closed ancestor set of `root` in ascending id order; marks every
/// member's in_proof flag.
std::vector<NodeId> extract_proof(DerivationStore& store, NodeId root);

inline constexpr int kLogVersion = 1;

void write_log(std::ostream& out, const DerivationStore& store);
DerivationStore read_log(std::istream& in);
void write_log(const std::string& path, const DerivationStore& store);
DerivationStore read_log(const std::string& path);

}  // namespace dg
