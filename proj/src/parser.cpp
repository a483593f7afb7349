#include "derivguide/parser.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace dg {

namespace {

class Lexer {
public:
  explicit Lexer(std::string_view text) : text_(text) {}

  void skip_space() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '%') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '*') {
        advance();
        advance();
        while (pos_ < text_.size() && !(text_[pos_] == '*' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/'))
          advance();
        if (pos_ >= text_.size()) fail("unterminated block comment");
        advance();
        advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  bool at_end() {
    skip_space();
    return pos_ >= text_.size();
  }

  char peek() {
    skip_space();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  bool accept(char c) {
    if (peek() != c) return false;
    advance();
    return true;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  std::string identifier() {
    skip_space();
    std::size_t start = pos_;
    if (pos_ < text_.size() && text_[pos_] == '$') advance();
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      advance();
    if (start == pos_) fail("expected identifier");
    return std::string(text_.substr(start, pos_ - start));
  }

  /// Formula names may also be integers.
  std::string name() {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == '\'') {
      std::size_t start = pos_;
      advance();
      while (pos_ < text_.size() && text_[pos_] != '\'') advance();
      if (pos_ >= text_.size()) fail("unterminated quoted name");
      advance();
      return std::string(text_.substr(start, pos_ - start));
    }
    return identifier();
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line_, column_); }

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

private:
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t column_ = 1;
};

bool is_variable_name(const std::string& s) {
  return !s.empty() && (std::isupper(static_cast<unsigned char>(s[0])) || s[0] == '_');
}

class ClauseParser {
public:
  ClauseParser(Lexer& lex, std::map<std::pair<std::string, bool>, std::size_t>& arities)
      : lex_(lex), arities_(arities) {}

  std::vector<Literal> disjunction() {
    std::vector<Literal> lits;
    bool parenthesized = lex_.accept('(');
    do {
      if (auto lit = literal()) lits.push_back(std::move(*lit));
    } while (lex_.accept('|'));
    if (parenthesized) lex_.expect(')');
    return lits;
  }

private:
  // `$false` yields no literal
  std::optional<Literal> literal() {
    bool positive = !lex_.accept('~');
    std::size_t line = lex_.line(), col = lex_.column();
    std::string name = lex_.identifier();
    if (name == "$false") {
      if (!positive) throw ParseError("negated $false is not supported", line, col);
      return std::nullopt;
    }
    if (is_variable_name(name) || name[0] == '$') throw ParseError("expected predicate, got '" + name + "'", line, col);
    Literal lit{positive, SymbolTable::global().intern(name), {}};
    if (lex_.accept('(')) {
      do {
        lit.args.push_back(term());
      } while (lex_.accept(','));
      lex_.expect(')');
    }
    check_arity(name, true, lit.args.size(), line, col);
    return lit;
  }

  Term term() {
    std::size_t line = lex_.line(), col = lex_.column();
    std::string name = lex_.identifier();
    if (is_variable_name(name)) {
      auto [it, inserted] = vars_.try_emplace(name, static_cast<VarId>(vars_.size()));
      return Term::var(it->second);
    }
    if (name[0] == '$') throw ParseError("unsupported builtin '" + name + "'", line, col);
    Term t = Term::fn(SymbolTable::global().intern(name));
    if (lex_.accept('(')) {
      do {
        t.args.push_back(term());
      } while (lex_.accept(','));
      lex_.expect(')');
    }
    check_arity(name, false, t.args.size(), line, col);
    return t;
  }

  void check_arity(const std::string& name, bool predicate, std::size_t arity, std::size_t line, std::size_t col) {
    auto [it, inserted] = arities_.try_emplace({name, predicate}, arity);
    if (!inserted && it->second != arity)
      throw ParseError("arity mismatch for '" + name + "': " + std::to_string(arity) + " vs " +
                           std::to_string(it->second),
                       line, col);
  }

  Lexer& lex_;
  std::map<std::pair<std::string, bool>, std::size_t>& arities_;
  std::unordered_map<std::string, VarId> vars_;
};

}  // namespace

std::vector<ParsedClause> Parser::parse(std::string_view text) {
  Lexer lex(text);
  std::vector<ParsedClause> out;
  while (!lex.at_end()) {
    std::size_t line = lex.line(), col = lex.column();
    std::string keyword = lex.identifier();
    if (keyword != "cnf") throw ParseError("expected 'cnf', got '" + keyword + "'", line, col);
    lex.expect('(');
    ParsedClause pc;
    pc.name = lex.name();
    lex.expect(',');
    line = lex.line();
    col = lex.column();
    std::string role = lex.identifier();
    if (role == "theory_axiom") {
      lex.expect('(');
      pc.origin = lex.identifier();
      lex.expect(')');
    } else if (role == "axiom" || role == "hypothesis" || role == "negated_conjecture") {
      pc.origin = std::string(kInputOrigin);
    } else {
      throw ParseError("unknown role '" + role + "'", line, col);
    }
    lex.expect(',');
    ClauseParser clause(lex, arities_);
    pc.literals = clause.disjunction();
    lex.expect(')');
    lex.expect('.');
    out.push_back(std::move(pc));
  }
  return out;
}

std::vector<ParsedClause> parse_problem(std::string_view text) {
  Parser p;
  return p.parse(text);
}

std::string print_problem(const std::vector<ParsedClause>& clauses) {
  std::ostringstream out;
  for (const auto& c : clauses) {
    std::string role = c.origin == kInputOrigin ? "axiom" : "theory_axiom(" + c.origin + ")";
    out << "cnf(" << c.name << ", " << role << ", " << to_string(c.literals) << ").\n";
  }
  return out.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dg
