#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "derivguide/term.hpp"

namespace dg {

/// Origin label for clauses that come from the problem file itself.
inline constexpr std::string_view kInputOrigin = "input";

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error(what + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
        line_(line),
        column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

private:
  std::size_t line_;
  std::size_t column_;
};

struct ParsedClause {
  std::string name;
  std::string origin;  // `input` or the theory_axiom(<name>) argument
  std::vector<Literal> literals;
};

/// Parser for the CNF subset:
///   cnf(<name>, <role>, <disjunction>).
/// with role in {axiom, hypothesis, negated_conjecture, theory_axiom(<ident>)}.
///
/// Arity checks span every text handed to one Parser instance, so a theory
/// library and a problem parsed through the same instance must agree.
class Parser {
public:
  std::vector<ParsedClause> parse(std::string_view text);

private:
  // (name, is_predicate) -> arity
  std::map<std::pair<std::string, bool>, std::size_t> arities_;
};

std::vector<ParsedClause> parse_problem(std::string_view text);

/// Prints clauses back in the input grammar.
std::string print_problem(const std::vector<ParsedClause>& clauses);

std::string read_file(const std::string& path);

}  // namespace dg
