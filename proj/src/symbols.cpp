#include "derivguide/symbols.hpp"

#include <mutex>
#include <stdexcept>

namespace dg {

SymbolTable& SymbolTable::global() {
  static SymbolTable table;
  return table;
}

SymbolId SymbolTable::intern(std::string_view name) {
  std::string key(name);
  {
    std::shared_lock lock(mutex_);
    if (auto it = ids_.find(key); it != ids_.end()) return it->second;
  }
  std::unique_lock lock(mutex_);
  if (auto it = ids_.find(key); it != ids_.end()) return it->second;
  auto id = static_cast<SymbolId>(names_.size());
  names_.push_back(key);
  ids_.emplace(std::move(key), id);
  return id;
}

const std::string& SymbolTable::name(SymbolId id) const {
  std::shared_lock lock(mutex_);
  if (id >= names_.size()) throw std::out_of_range("unknown symbol id");
  // deque elements never move once inserted
  return names_[id];
}

std::size_t SymbolTable::size() const {
  std::shared_lock lock(mutex_);
  return names_.size();
}

}  // namespace dg
