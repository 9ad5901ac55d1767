#include "kaisar/parser.hpp"

#include <cctype>
#include <cstring>

namespace kaisar {

// -- lexer ------------------------------------------------------------------

static const char* kSymbols[] = {
    "<->", "->", "<=", ">=", "!=", ":=", "++", "|-", "=>", "\\/", "/\\",
    "(", ")", "[", "]", "{", "}", "<", ">", "=", "!", "&", "|", "+", "-",
    "*", "/", "^", ";", "?", ",", "'", "~", "@", ":",
};

Tokens::Tokens(const std::string& src) {
  int line = 1, col = 1;
  size_t i = 0;
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k) {
      if (src[i + k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    i += n;
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '#' || (c == '/' && i + 1 < src.size() && src[i + 1] == '/')) {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      while (j < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[j])) ||
              src[j] == '_'))
        ++j;
      t.kind = Token::Ident;
      t.text = src.substr(i, j - i);
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j])))
        ++j;
      if (j < src.size() && src[j] == '.' && j + 1 < src.size() &&
          std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
        ++j;
        while (j < src.size() &&
               std::isdigit(static_cast<unsigned char>(src[j])))
          ++j;
      }
      t.kind = Token::Number;
      t.text = src.substr(i, j - i);
      advance(j - i);
    } else if (c == '\\') {
      // \forall, \exists, \/ handled via the symbol table below.
      size_t j = i + 1;
      while (j < src.size() && std::isalpha(static_cast<unsigned char>(src[j])))
        ++j;
      if (j > i + 1) {
        t.kind = Token::Sym;
        t.text = src.substr(i, j - i);
        advance(j - i);
      } else if (i + 1 < src.size() && src[i + 1] == '/') {
        t.kind = Token::Sym;
        t.text = "\\/";
        advance(2);
      } else {
        throw ParseError("stray backslash", line, col);
      }
    } else {
      t.kind = Token::Sym;
      t.text.clear();
      for (const char* s : kSymbols) {
        size_t n = std::strlen(s);
        if (src.compare(i, n, s) == 0 && n > t.text.size()) t.text = s;
      }
      if (t.text.empty())
        throw ParseError(std::string("unexpected character '") + c + "'", line,
                         col);
      advance(t.text.size());
    }
    toks_.push_back(std::move(t));
  }
  Token end;
  end.kind = Token::End;
  end.line = line;
  end.col = col;
  toks_.push_back(end);
}

const Token& Tokens::peek(int ahead) const {
  size_t j = i_ + ahead;
  if (j >= toks_.size()) j = toks_.size() - 1;
  return toks_[j];
}
Token Tokens::next() {
  Token t = peek();
  if (i_ + 1 < toks_.size()) ++i_;
  return t;
}
bool Tokens::at(const std::string& s) const {
  const Token& t = peek();
  return (t.kind == Token::Sym || t.kind == Token::Ident) && t.text == s;
}
bool Tokens::accept(const std::string& s) {
  if (!at(s)) return false;
  next();
  return true;
}
void Tokens::expect(const std::string& s) {
  if (!accept(s)) fail("expected '" + s + "'");
}
void Tokens::fail(const std::string& msg) const {
  const Token& t = peek();
  std::string got = t.kind == Token::End ? "end of input" : "'" + t.text + "'";
  throw ParseError(msg + " (found " + got + ")", t.line, t.col);
}

Variable variable_of_ident(const std::string& ident) {
  size_t j = ident.size();
  while (j > 0 && std::isdigit(static_cast<unsigned char>(ident[j - 1]))) --j;
  if (j == 0 || j == ident.size()) return Variable(ident);
  return Variable(ident.substr(0, j), std::stoi(ident.substr(j)));
}

// -- terms ------------------------------------------------------------------

static TermPtr term_sum(Tokens& ts);

static Rational exponent_at(Tokens& ts) {
  bool paren = ts.accept("(");
  bool neg = paren && ts.accept("-");
  if (ts.peek().kind != Token::Number) ts.fail("expected exponent");
  Rational num = rational_of(ts.next().text);
  Rational r = num;
  if (paren && ts.accept("/")) {
    if (ts.peek().kind != Token::Number) ts.fail("expected denominator");
    Rational den = rational_of(ts.next().text);
    if (den == 0) ts.fail("zero denominator");
    r = num / den;
  }
  if (neg) r = -r;
  if (paren) ts.expect(")");
  return r;
}

static TermPtr term_atom(Tokens& ts) {
  const Token& t = ts.peek();
  if (t.kind == Token::Number) {
    return tlit(rational_of(ts.next().text));
  }
  if (t.kind == Token::Ident) {
    std::string name = ts.next().text;
    if (ts.at("(")) {
      ts.next();
      TermPtr a = term_sum(ts);
      TermPtr b;
      if (ts.accept(",")) b = term_sum(ts);
      ts.expect(")");
      if (name == "abs" || name == "sqrt") {
        if (b) ts.fail(name + " takes one argument");
        return tapp(name, a);
      }
      if (name == "min" || name == "max") {
        if (!b) ts.fail(name + " takes two arguments");
        return tapp(name, a, b);
      }
      if (name == "now") {
        if (b) ts.fail("now takes one argument");
        return tnow(a);
      }
      if (b) ts.fail("unexpected second argument");
      return tnominal(name, a);
    }
    Variable v = variable_of_ident(name);
    if (ts.accept("'")) v.primed = true;
    return tvar(v);
  }
  if (ts.accept("(")) {
    TermPtr a = term_sum(ts);
    ts.expect(")");
    if (ts.accept("'")) return tdifferential(a);
    return a;
  }
  ts.fail("expected term");
}

static TermPtr term_postfix(Tokens& ts) {
  TermPtr a = term_atom(ts);
  if (ts.accept("^")) return tpower(a, exponent_at(ts));
  return a;
}

static TermPtr term_unary(Tokens& ts) {
  if (ts.accept("-")) return tneg(term_unary(ts));
  return term_postfix(ts);
}

static TermPtr term_product(Tokens& ts) {
  TermPtr a = term_unary(ts);
  while (ts.at("*") || ts.at("/")) {
    bool times = ts.next().text == "*";
    TermPtr b = term_unary(ts);
    if (!times && a->kind == TermKind::Lit && b->kind == TermKind::Lit &&
        b->lit != 0) {
      a = tlit(a->lit / b->lit);  // fold p/q literals
    } else {
      a = times ? ttimes(a, b) : tdivide(a, b);
    }
  }
  return a;
}

static TermPtr term_sum(Tokens& ts) {
  TermPtr a = term_product(ts);
  while (ts.at("+") || ts.at("-")) {
    bool plus = ts.next().text == "+";
    TermPtr b = term_product(ts);
    a = plus ? tplus(a, b) : tminus(a, b);
  }
  return a;
}

TermPtr parse_term_at(Tokens& ts) { return term_sum(ts); }

// -- formulas ---------------------------------------------------------------

static FormulaPtr f_equiv(Tokens& ts);
static FormulaPtr f_unary(Tokens& ts);

static bool at_cmp(Tokens& ts) {
  return ts.at("<") || ts.at("<=") || ts.at("=") || ts.at(">=") || ts.at(">") ||
         ts.at("!=");
}

static CmpOp cmp_of(const std::string& s) {
  if (s == "<") return CmpOp::Lt;
  if (s == "<=") return CmpOp::Le;
  if (s == "=") return CmpOp::Eq;
  if (s == ">=") return CmpOp::Ge;
  if (s == ">") return CmpOp::Gt;
  return CmpOp::Ne;
}

static FormulaPtr f_atom(Tokens& ts) {
  if (ts.peek().kind == Token::Ident) {
    if (ts.at("true")) {
      // "true" could in principle be a variable; it is reserved.
      size_t save = ts.pos();
      ts.next();
      if (!at_cmp(ts)) return ftrue();
      ts.rewind(save);
    }
    if (ts.at("false")) {
      size_t save = ts.pos();
      ts.next();
      if (!at_cmp(ts)) return ffalse();
      ts.rewind(save);
    }
  }
  if (ts.accept("!")) return fnot(f_unary(ts));
  if (ts.at("\\forall") || ts.at("\\exists")) {
    bool uni = ts.next().text == "\\forall";
    std::vector<Variable> binders;
    if (ts.peek().kind != Token::Ident) ts.fail("expected quantifier binder");
    binders.push_back(variable_of_ident(ts.next().text));
    // Further idents are binders only when another ident follows; an ident
    // followed by "(" starts the body (function or state application).
    while (ts.peek().kind == Token::Ident && ts.peek(1).kind == Token::Ident)
      binders.push_back(variable_of_ident(ts.next().text));
    FormulaPtr body = f_unary(ts);
    for (auto it = binders.rbegin(); it != binders.rend(); ++it)
      body = uni ? fforall(*it, body) : fexists(*it, body);
    return body;
  }
  if (ts.accept("[")) {
    ProgramPtr p = parse_program_at(ts);
    ts.expect("]");
    return fbox(p, f_unary(ts));
  }
  if (ts.at("<") ) {
    ts.next();
    ProgramPtr p = parse_program_at(ts);
    ts.expect(">");
    return fdiamond(p, f_unary(ts));
  }
  if (ts.accept("@")) {
    if (ts.peek().kind != Token::Ident) ts.fail("expected state name after @");
    return fnominal(ts.next().text);
  }
  // Comparison, or a parenthesized formula.
  size_t save = ts.pos();
  try {
    TermPtr a = parse_term_at(ts);
    if (!at_cmp(ts)) {
      // A lone identifier in formula position names a formula abbreviation.
      if (a->kind == TermKind::Var && !a->var.primed)
        return fabbrev(a->var.str());
      ts.fail("expected comparison");
    }
    CmpOp op = cmp_of(ts.next().text);
    TermPtr b = parse_term_at(ts);
    return fcmp(op, a, b);
  } catch (const ParseError&) {
    ts.rewind(save);
  }
  if (ts.accept("(")) {
    FormulaPtr f = f_equiv(ts);
    ts.expect(")");
    return f;
  }
  ts.fail("expected formula");
}

static FormulaPtr f_unary(Tokens& ts) { return f_atom(ts); }

static FormulaPtr f_and(Tokens& ts) {
  FormulaPtr a = f_unary(ts);
  if (!ts.at("&")) return a;
  ts.next();
  return fand(a, f_and(ts));
}
static FormulaPtr f_o(Tokens& ts) {
  FormulaPtr a = f_and(ts);
  if (!ts.at("|")) return a;
  ts.next();
  return f_or(a, f_o(ts));
}
static FormulaPtr f_imply(Tokens& ts) {
  FormulaPtr a = f_o(ts);
  if (!ts.accept("->")) return a;
  return fimply(a, f_imply(ts));
}
static FormulaPtr f_equiv(Tokens& ts) {
  FormulaPtr a = f_imply(ts);
  if (!ts.accept("<->")) return a;
  return fequiv(a, f_equiv(ts));
}

FormulaPtr parse_formula_at(Tokens& ts) { return f_equiv(ts); }

// -- programs ---------------------------------------------------------------

static ProgramPtr p_atom(Tokens& ts) {
  if (ts.accept("?")) return ptest(parse_formula_at(ts));
  if (ts.at("{")) {
    // ODE if the brace opens with ident'
    bool ode = ts.peek(1).kind == Token::Ident && ts.peek(2).kind == Token::Sym &&
               ts.peek(2).text == "'";
    ts.next();
    if (ode) {
      std::vector<ODEEq> eqs;
      for (;;) {
        if (ts.peek().kind != Token::Ident) ts.fail("expected ODE variable");
        Variable v = variable_of_ident(ts.next().text);
        ts.expect("'");
        ts.expect("=");
        eqs.push_back({v, parse_term_at(ts)});
        if (!ts.accept(",")) break;
      }
      FormulaPtr dom = ftrue();
      if (ts.accept("&")) dom = parse_formula_at(ts);
      ts.expect("}");
      return pode(std::move(eqs), dom);
    }
    ProgramPtr p = parse_program_at(ts);
    ts.expect("}");
    if (ts.accept("*")) return ploop(p);
    return p;
  }
  if (ts.peek().kind == Token::Ident) {
    Variable v = variable_of_ident(ts.next().text);
    ts.expect(":=");
    if (ts.accept("*")) return passign_any(v);
    return passign(v, parse_term_at(ts));
  }
  ts.fail("expected program");
}

static ProgramPtr p_seq(Tokens& ts) {
  ProgramPtr a = p_atom(ts);
  if (!ts.accept(";")) return a;
  return pseq(a, p_seq(ts));
}

ProgramPtr parse_program_at(Tokens& ts) {
  ProgramPtr a = p_seq(ts);
  if (!ts.accept("++")) return a;
  return pchoice(a, parse_program_at(ts));
}

// -- entry points -----------------------------------------------------------

template <typename F>
static auto whole(const std::string& s, F f) {
  Tokens ts(s);
  auto r = f(ts);
  if (!ts.done()) ts.fail("trailing input");
  return r;
}

TermPtr parse_term(const std::string& s) {
  return whole(s, [](Tokens& ts) { return parse_term_at(ts); });
}
FormulaPtr parse_formula(const std::string& s) {
  return whole(s, [](Tokens& ts) { return parse_formula_at(ts); });
}
ProgramPtr parse_program(const std::string& s) {
  return whole(s, [](Tokens& ts) { return parse_program_at(ts); });
}

Sequent parse_sequent(const std::string& s) {
  return whole(s, [](Tokens& ts) {
    Sequent sq;
    if (!ts.at("|-")) {
      sq.ante.push_back(parse_formula_at(ts));
      while (ts.accept(",")) sq.ante.push_back(parse_formula_at(ts));
    }
    ts.expect("|-");
    if (!ts.done()) {
      sq.succ.push_back(parse_formula_at(ts));
      while (ts.accept(",")) sq.succ.push_back(parse_formula_at(ts));
    }
    return sq;
  });
}

}  // namespace kaisar
