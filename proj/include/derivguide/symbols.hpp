#pragma once

#include <cstdint>
#include <deque>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>

namespace dg {

using SymbolId = std::uint32_t;

/// Process-wide interning of predicate and function names.
///
/// Ids are stable for the lifetime of the process. Lookups take a shared lock,
/// insertion an exclusive one, so concurrent provers may parse in parallel.
class SymbolTable {
public:
  static SymbolTable& global();

  SymbolId intern(std::string_view name);
  const std::string& name(SymbolId id) const;
  std::size_t size() const;

private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, SymbolId> ids_;
  std::deque<std::string> names_;
};

}  // namespace dg
