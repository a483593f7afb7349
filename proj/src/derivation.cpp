#include "derivguide/derivation.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <istream>
#include <ostream>

namespace dg {

using nlohmann::json;

FingerprintTable& FingerprintTable::global() {
  static FingerprintTable table;
  return table;
}

std::size_t FingerprintTable::KeyHash::operator()(const std::vector<std::uint32_t>& key) const noexcept {
  std::size_t h = 0xcbf29ce484222325ULL;
  for (auto v : key) {
    h ^= v;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint32_t FingerprintTable::intern_label(LabelKind kind, std::string_view name) {
  std::string key = (kind == LabelKind::Origin ? "o:" : "r:") + std::string(name);
  {
    std::shared_lock lock(mutex_);
    if (auto it = label_ids_.find(key); it != label_ids_.end()) return it->second;
  }
  std::unique_lock lock(mutex_);
  if (auto it = label_ids_.find(key); it != label_ids_.end()) return it->second;
  auto id = static_cast<std::uint32_t>(labels_.size());
  labels_.emplace_back(kind, std::string(name));
  label_ids_.emplace(std::move(key), id);
  return id;
}

Fingerprint FingerprintTable::make(std::uint32_t label, std::span<const Fingerprint> children) {
  std::vector<std::uint32_t> key;
  key.reserve(children.size() + 1);
  key.push_back(label);
  for (auto c : children) key.push_back(c.value);
  {
    std::shared_lock lock(mutex_);
    if (auto it = index_.find(key); it != index_.end()) return Fingerprint{it->second};
  }
  std::unique_lock lock(mutex_);
  if (auto it = index_.find(key); it != index_.end()) return Fingerprint{it->second};
  auto id = static_cast<std::uint32_t>(entries_.size());
  entries_.push_back(Entry{label, {children.begin(), children.end()}});
  index_.emplace(std::move(key), id);
  return Fingerprint{id};
}

std::string FingerprintTable::render(Fingerprint f) const {
  Entry entry;
  std::string name;
  {
    std::shared_lock lock(mutex_);
    entry = entries_.at(f.value);
    name = labels_.at(entry.label).second;
  }
  if (entry.children.empty()) return name;
  std::string out = name + "(";
  for (std::size_t i = 0; i < entry.children.size(); ++i) {
    if (i) out += ',';
    out += render(entry.children[i]);
  }
  return out + ")";
}

std::size_t FingerprintTable::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::uint32_t DerivationStore::label_index(std::vector<std::string>& vocab,
                                           std::unordered_map<std::string, std::uint32_t>& ids,
                                           std::string_view name) {
  auto [it, inserted] = ids.try_emplace(std::string(name), static_cast<std::uint32_t>(vocab.size()));
  if (inserted) vocab.emplace_back(name);
  return it->second;
}

NodeId DerivationStore::record(std::string_view label, std::span<const NodeId> premises) {
  auto id = static_cast<NodeId>(nodes_.size());
  for (auto p : premises)
    if (p >= id) throw DerivationError("unknown premise id " + std::to_string(p));
  DerivationNode n;
  n.id = id;
  n.premises.assign(premises.begin(), premises.end());
  n.label = premises.empty() ? label_index(origins_, origin_ids_, label) : label_index(rules_, rule_ids_, label);
  nodes_.push_back(std::move(n));
  return id;
}

const std::string& DerivationStore::label(NodeId id) const {
  const auto& n = nodes_.at(id);
  return n.leaf() ? origins_[n.label] : rules_[n.label];
}

Fingerprint DerivationStore::fingerprint(NodeId id) const {
  if (id >= nodes_.size()) throw DerivationError("unknown node id " + std::to_string(id));
  auto& table = FingerprintTable::global();
  std::vector<Fingerprint> children;
  // ids are topological, so filling the memo in id order never recurses
  while (fingerprints_.size() <= id) {
    const auto& n = nodes_[fingerprints_.size()];
    children.clear();
    for (auto p : n.premises) children.push_back(fingerprints_[p]);
    auto kind = n.leaf() ? LabelKind::Origin : LabelKind::Rule;
    auto label = table.intern_label(kind, n.leaf() ? origins_[n.label] : rules_[n.label]);
    fingerprints_.push_back(table.make(label, children));
  }
  return fingerprints_[id];
}

NodeId DerivationStore::append(const DerivationStore& other) {
  auto shift = static_cast<NodeId>(nodes_.size());
  std::vector<NodeId> premises;
  for (const auto& n : other.nodes_) {
    premises.clear();
    for (auto p : n.premises) premises.push_back(p + shift);
    NodeId id = record(other.label(n.id), premises);
    nodes_[id].selected = n.selected;
    nodes_[id].in_proof = n.in_proof;
  }
  return shift;
}

std::size_t DerivationStore::selected_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return n.selected; }));
}

std::size_t DerivationStore::proof_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return n.in_proof; }));
}

bool operator==(const DerivationStore& a, const DerivationStore& b) {
  if (a.problem_ != b.problem_ || a.nodes_.size() != b.nodes_.size()) return false;
  for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
    const auto& x = a.nodes_[i];
    const auto& y = b.nodes_[i];
    if (x.premises != y.premises || x.selected != y.selected || x.in_proof != y.in_proof ||
        a.label(x.id) != b.label(y.id))
      return false;
  }
  return true;
}

CompressedDerivation compress(const DerivationStore& store) {
  CompressedDerivation out(store.problem());
  std::unordered_map<Fingerprint, NodeId, FingerprintHash> representative;
  std::vector<NodeId> remap(store.size());
  std::vector<NodeId> premises;
  for (const auto& n : store.nodes()) {
    Fingerprint f = store.fingerprint(n.id);
    auto it = representative.find(f);
    NodeId target;
    if (it == representative.end()) {
      premises.clear();
      for (auto p : n.premises) premises.push_back(remap[p]);
      target = out.record(store.label(n.id), premises);
      representative.emplace(f, target);
    } else {
      target = it->second;
    }
    remap[n.id] = target;
    if (n.selected) out.set_selected(target);
    if (n.in_proof) out.set_in_proof(target);
  }
  return out;
}

std::vector<NodeId> extract_proof(DerivationStore& store, NodeId root) {
  std::vector<char> seen(store.size(), 0);
  std::vector<NodeId> stack{root};
  seen.at(root) = 1;
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    for (auto p : store.node(id).premises)
      if (!seen[p]) {
        seen[p] = 1;
        stack.push_back(p);
      }
  }
  std::vector<NodeId> proof;
  for (NodeId id = 0; id < store.size(); ++id)
    if (seen[id]) {
      proof.push_back(id);
      store.set_in_proof(id);
    }
  return proof;
}

void write_log(std::ostream& out, const DerivationStore& store) {
  json header = {{"v", kLogVersion}, {"problem", store.problem()}, {"origins", store.origins()}, {"rules", store.rules()}};
  out << header.dump() << '\n';
  for (const auto& n : store.nodes()) {
    json rec = {{"id", n.id}, {"l", store.label(n.id)}, {"p", n.premises}, {"s", n.selected ? 1 : 0},
                {"q", n.in_proof ? 1 : 0}};
    out << rec.dump() << '\n';
  }
}

DerivationStore read_log(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) -> DerivationError {
    return DerivationError("derivation log line " + std::to_string(lineno) + ": " + what);
  };
  if (!std::getline(in, line)) throw DerivationError("derivation log: missing header");
  ++lineno;
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw fail(std::string("malformed header: ") + e.what());
  }
  if (!header.is_object() || !header.contains("v")) throw fail("malformed header");
  if (header["v"] != kLogVersion) throw fail("unsupported version " + header["v"].dump());
  DerivationStore store(header.value("problem", std::string{}));
  std::vector<NodeId> premises;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json rec = json::parse(line);
      auto id = rec.at("id").get<NodeId>();
      if (id != store.size()) throw fail("non-sequential node id " + std::to_string(id));
      premises = rec.at("p").get<std::vector<NodeId>>();
      for (auto p : premises)
        if (p >= id) throw fail("dangling premise id " + std::to_string(p));
      store.record(rec.at("l").get<std::string>(), premises);
      store.set_selected(id, rec.at("s").get<int>() != 0);
      store.set_in_proof(id, rec.at("q").get<int>() != 0);
    } catch (const json::exception& e) {
      throw fail(std::string("malformed record: ") + e.what());
    }
  }
  return store;
}

void write_log(const std::string& path, const DerivationStore& store) {
  std::ofstream out(path);
  if (!out) throw DerivationError("cannot write " + path);
  write_log(out, store);
}

DerivationStore read_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DerivationError("cannot open " + path);
  return read_log(in);
}

}  // namespace dg
