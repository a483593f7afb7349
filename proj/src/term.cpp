#include "derivguide/term.hpp"

#include <algorithm>
#include <unordered_map>
#include <utility>

namespace dg {

const Term* Substitution::lookup(VarId v) const {
  if (v >= bindings_.size() || !bindings_[v]) return nullptr;
  return &*bindings_[v];
}

void Substitution::bind(VarId v, Term t) {
  if (v >= bindings_.size()) bindings_.resize(v + 1);
  bindings_[v] = std::move(t);
}

Term Substitution::apply(const Term& t) const {
  if (t.is_var) {
    if (const Term* b = lookup(t.id)) return apply(*b);
    return t;
  }
  Term out{false, t.id, {}};
  out.args.reserve(t.args.size());
  for (const auto& a : t.args) out.args.push_back(apply(a));
  return out;
}

Literal Substitution::apply(const Literal& l) const {
  Literal out{l.positive, l.predicate, {}};
  out.args.reserve(l.args.size());
  for (const auto& a : l.args) out.args.push_back(apply(a));
  return out;
}

std::vector<Literal> Substitution::apply(const std::vector<Literal>& ls) const {
  std::vector<Literal> out;
  out.reserve(ls.size());
  for (const auto& l : ls) out.push_back(apply(l));
  return out;
}

std::vector<VarId> Substitution::domain() const {
  std::vector<VarId> vars;
  for (VarId v = 0; v < bindings_.size(); ++v)
    if (bindings_[v]) vars.push_back(v);
  return vars;
}

std::size_t Substitution::size() const {
  return static_cast<std::size_t>(
      std::count_if(bindings_.begin(), bindings_.end(), [](const auto& b) { return b.has_value(); }));
}

namespace {

VarId term_var_bound(const Term& t) {
  if (t.is_var) return t.id + 1;
  VarId m = 0;
  for (const auto& a : t.args) m = std::max(m, term_var_bound(a));
  return m;
}

}  // namespace

/// Robinson unification over a triangular substitution.
class Unifier {
public:
  explicit Unifier(Substitution& s) : s_(s) {}

  bool unify(const Term& a, const Term& b) {
    std::vector<std::pair<const Term*, const Term*>> todo{{&a, &b}};
    while (!todo.empty()) {
      auto [x, y] = todo.back();
      todo.pop_back();
      x = &walk(*x);
      y = &walk(*y);
      if (x->is_var && y->is_var && x->id == y->id) continue;
      if (x->is_var) {
        if (occurs(x->id, *y)) return false;
        s_.bindings_[x->id] = *y;
        continue;
      }
      if (y->is_var) {
        if (occurs(y->id, *x)) return false;
        s_.bindings_[y->id] = *x;
        continue;
      }
      if (x->id != y->id || x->args.size() != y->args.size()) return false;
      for (std::size_t i = 0; i < x->args.size(); ++i) todo.emplace_back(&x->args[i], &y->args[i]);
    }
    return true;
  }

  void make_idempotent() {
    Substitution resolved;
    resolved.bindings_.resize(s_.bindings_.size());
    for (VarId v = 0; v < s_.bindings_.size(); ++v)
      if (s_.bindings_[v]) resolved.bindings_[v] = s_.apply(*s_.bindings_[v]);
    s_ = std::move(resolved);
  }

private:
  const Term& walk(const Term& t) const {
    const Term* cur = &t;
    while (cur->is_var) {
      const Term* next = s_.lookup(cur->id);
      if (!next) break;
      cur = next;
    }
    return *cur;
  }

  bool occurs(VarId v, const Term& t) const {
    const Term& w = walk(t);
    if (w.is_var) return w.id == v;
    return std::any_of(w.args.begin(), w.args.end(), [&](const Term& a) { return occurs(v, a); });
  }

  Substitution& s_;
};

std::optional<Substitution> mgu(const Term& a, const Term& b) {
  Substitution s;
  // bindings are only ever written to existing slots, so references into
  // the vector stay valid during unification
  s.bindings_.resize(std::max(term_var_bound(a), term_var_bound(b)));
  Unifier u(s);
  if (!u.unify(a, b)) return std::nullopt;
  u.make_idempotent();
  return s;
}

std::optional<Substitution> mgu(const Literal& a, const Literal& b) {
  if (a.predicate != b.predicate || a.args.size() != b.args.size()) return std::nullopt;
  Substitution s;
  VarId bound = 0;
  for (const auto& t : a.args) bound = std::max(bound, term_var_bound(t));
  for (const auto& t : b.args) bound = std::max(bound, term_var_bound(t));
  s.bindings_.resize(bound);
  Unifier u(s);
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!u.unify(a.args[i], b.args[i])) return std::nullopt;
  u.make_idempotent();
  return s;
}

namespace {

bool match_term(const Term& pattern, const Term& instance, Substitution& s) {
  if (pattern.is_var) {
    if (const Term* b = s.lookup(pattern.id)) return *b == instance;
    s.bind(pattern.id, instance);
    return true;
  }
  if (instance.is_var || pattern.id != instance.id || pattern.args.size() != instance.args.size())
    return false;
  for (std::size_t i = 0; i < pattern.args.size(); ++i)
    if (!match_term(pattern.args[i], instance.args[i], s)) return false;
  return true;
}

bool compatible(const Literal& a, const Literal& b) {
  return a.positive == b.positive && a.predicate == b.predicate && a.args.size() == b.args.size();
}

bool subsume_from(const std::vector<Literal>& c, const std::vector<Literal>& d, std::size_t i,
                  std::vector<char>& used, const Substitution& s) {
  if (i == c.size()) return true;
  for (std::size_t j = 0; j < d.size(); ++j) {
    if (used[j] || !compatible(c[i], d[j])) continue;
    Substitution extended = s;
    if (!match(c[i], d[j], extended)) continue;
    used[j] = 1;
    if (subsume_from(c, d, i + 1, used, extended)) return true;
    used[j] = 0;
  }
  return false;
}

void rename_term(Term& t, std::unordered_map<VarId, VarId>& mapping) {
  if (t.is_var) {
    auto [it, inserted] = mapping.try_emplace(t.id, static_cast<VarId>(mapping.size()));
    t.id = it->second;
    return;
  }
  for (auto& a : t.args) rename_term(a, mapping);
}

void shift_term(Term& t, VarId offset) {
  if (t.is_var) {
    t.id += offset;
    return;
  }
  for (auto& a : t.args) shift_term(a, offset);
}

}  // namespace

bool match(const Literal& pattern, const Literal& instance, Substitution& s) {
  if (pattern.predicate != instance.predicate || pattern.args.size() != instance.args.size())
    return false;
  for (std::size_t i = 0; i < pattern.args.size(); ++i)
    if (!match_term(pattern.args[i], instance.args[i], s)) return false;
  return true;
}

bool subsumes(const std::vector<Literal>& c, const std::vector<Literal>& d) {
  if (c.size() > d.size()) return false;
  // cheap rejection: every literal of c needs at least one candidate in d
  for (const auto& l : c)
    if (std::none_of(d.begin(), d.end(), [&](const Literal& m) { return compatible(l, m); }))
      return false;
  std::vector<char> used(d.size(), 0);
  return subsume_from(c, d, 0, used, Substitution{});
}

bool subsumes(const Clause& c, const Clause& d) { return subsumes(c.literals, d.literals); }

std::uint32_t term_weight(const Term& t) {
  std::uint32_t w = 1;
  for (const auto& a : t.args) w += term_weight(a);
  return w;
}

std::uint32_t clause_weight(const std::vector<Literal>& literals) {
  std::uint32_t w = 0;
  for (const auto& l : literals) {
    w += 1;
    for (const auto& a : l.args) w += term_weight(a);
  }
  return w;
}

bool is_tautology(const std::vector<Literal>& literals) {
  for (std::size_t i = 0; i < literals.size(); ++i)
    for (std::size_t j = i + 1; j < literals.size(); ++j)
      if (literals[i].positive != literals[j].positive && literals[i].predicate == literals[j].predicate &&
          literals[i].args == literals[j].args)
        return true;
  return false;
}

VarId normalize_variables(std::vector<Literal>& literals) {
  std::unordered_map<VarId, VarId> mapping;
  for (auto& l : literals)
    for (auto& a : l.args) rename_term(a, mapping);
  return static_cast<VarId>(mapping.size());
}

VarId variable_bound(const std::vector<Literal>& literals) {
  VarId m = 0;
  for (const auto& l : literals)
    for (const auto& a : l.args) m = std::max(m, term_var_bound(a));
  return m;
}

void shift_variables(std::vector<Literal>& literals, VarId offset) {
  for (auto& l : literals)
    for (auto& a : l.args) shift_term(a, offset);
}

void remove_duplicate_literals(std::vector<Literal>& literals) {
  std::vector<Literal> kept;
  kept.reserve(literals.size());
  for (auto& l : literals)
    if (std::find(kept.begin(), kept.end(), l) == kept.end()) kept.push_back(std::move(l));
  literals = std::move(kept);
}

bool variant_equal(std::vector<Literal> a, std::vector<Literal> b) {
  if (a.size() != b.size()) return false;
  normalize_variables(a);
  normalize_variables(b);
  return a == b;
}

std::string to_string(const Term& t) {
  if (t.is_var) return "X" + std::to_string(t.id);
  std::string out = SymbolTable::global().name(t.id);
  if (!t.args.empty()) {
    out += '(';
    for (std::size_t i = 0; i < t.args.size(); ++i) {
      if (i) out += ',';
      out += to_string(t.args[i]);
    }
    out += ')';
  }
  return out;
}

std::string to_string(const Literal& l) {
  std::string out = l.positive ? "" : "~";
  out += SymbolTable::global().name(l.predicate);
  if (!l.args.empty()) {
    out += '(';
    for (std::size_t i = 0; i < l.args.size(); ++i) {
      if (i) out += ',';
      out += to_string(l.args[i]);
    }
    out += ')';
  }
  return out;
}

std::string to_string(const std::vector<Literal>& literals) {
  if (literals.empty()) return "$false";
  std::string out;
  for (std::size_t i = 0; i < literals.size(); ++i) {
    if (i) out += " | ";
    out += to_string(literals[i]);
  }
  return out;
}

}  // namespace dg
