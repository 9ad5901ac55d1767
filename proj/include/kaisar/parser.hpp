#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "kaisar/syntax.hpp"

namespace kaisar {

struct ParseError : std::runtime_error {
  int line, col;
  ParseError(const std::string& msg, int line, int col)
      : std::runtime_error(msg), line(line), col(col) {}
};

struct Token {
  enum Kind { Ident, Number, Sym, End } kind;
  std::string text;
  int line = 0, col = 0;
};

// Tokenizer shared by the expression and proof-script parsers.
class Tokens {
 public:
  explicit Tokens(const std::string& src);
  const Token& peek(int ahead = 0) const;
  Token next();
  bool at(const std::string& sym_or_kw) const;
  bool accept(const std::string& sym_or_kw);
  void expect(const std::string& sym_or_kw);
  [[noreturn]] void fail(const std::string& msg) const;
  size_t pos() const { return i_; }
  void rewind(size_t p) { i_ = p; }
  bool done() const { return peek().kind == Token::End; }

 private:
  std::vector<Token> toks_;
  size_t i_ = 0;
};

// "x12" -> Variable(base "x", index 12); "x'" handled by the parser.
Variable variable_of_ident(const std::string& ident);

TermPtr parse_term_at(Tokens& ts);
FormulaPtr parse_formula_at(Tokens& ts);
ProgramPtr parse_program_at(Tokens& ts);

TermPtr parse_term(const std::string& s);
FormulaPtr parse_formula(const std::string& s);
ProgramPtr parse_program(const std::string& s);
Sequent parse_sequent(const std::string& s);

}  // namespace kaisar
