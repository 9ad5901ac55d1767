#include "kaisar/syntax.hpp"

#include <sstream>

namespace kaisar {

std::string Variable::str() const {
  std::string s = base;
  if (index) s += std::to_string(*index);
  if (primed) s += "'";
  return s;
}

// -- term factories ---------------------------------------------------------

static TermPtr mk(Term t) { return std::make_shared<Term>(std::move(t)); }

TermPtr tvar(const Variable& v) {
  Term t{TermKind::Var};
  t.var = v;
  return mk(std::move(t));
}
TermPtr tvar(const std::string& name) { return tvar(Variable(name)); }
TermPtr tlit(const Rational& q) {
  Term t{TermKind::Lit};
  t.lit = q;
  return mk(std::move(t));
}
static TermPtr bin(TermKind k, TermPtr a, TermPtr b) {
  Term t{k};
  t.a = std::move(a);
  t.b = std::move(b);
  return mk(std::move(t));
}
TermPtr tplus(TermPtr a, TermPtr b) { return bin(TermKind::Plus, a, b); }
TermPtr tminus(TermPtr a, TermPtr b) { return bin(TermKind::Minus, a, b); }
TermPtr ttimes(TermPtr a, TermPtr b) { return bin(TermKind::Times, a, b); }
TermPtr tdivide(TermPtr a, TermPtr b) { return bin(TermKind::Divide, a, b); }
TermPtr tneg(TermPtr a) { return bin(TermKind::Neg, a, nullptr); }
TermPtr tpower(TermPtr a, const Rational& exp) {
  Term t{TermKind::Power};
  t.a = std::move(a);
  t.lit = exp;
  return mk(std::move(t));
}
TermPtr tdifferential(TermPtr a) { return bin(TermKind::Differential, a, nullptr); }
TermPtr tapp(const std::string& fn, TermPtr a, TermPtr b) {
  Term t{TermKind::App};
  t.name = fn;
  t.a = std::move(a);
  t.b = std::move(b);
  return mk(std::move(t));
}
TermPtr tnominal(const std::string& state, TermPtr a) {
  Term t{TermKind::Nominal};
  t.name = state;
  t.a = std::move(a);
  return mk(std::move(t));
}
TermPtr tnow(TermPtr a) { return bin(TermKind::Now, a, nullptr); }
TermPtr tabbrev(const std::string& name) {
  Term t{TermKind::Abbrev};
  t.name = name;
  return mk(std::move(t));
}

// -- formula factories ------------------------------------------------------

static FormulaPtr mkf(Formula f) { return std::make_shared<Formula>(std::move(f)); }

FormulaPtr ftrue() { return mkf(Formula{FormulaKind::True}); }
FormulaPtr ffalse() { return mkf(Formula{FormulaKind::False}); }
FormulaPtr fcmp(CmpOp op, TermPtr a, TermPtr b) {
  Formula f{FormulaKind::Cmp};
  f.op = op;
  f.t1 = std::move(a);
  f.t2 = std::move(b);
  return mkf(std::move(f));
}
static FormulaPtr binf(FormulaKind k, FormulaPtr a, FormulaPtr b) {
  Formula f{k};
  f.f1 = std::move(a);
  f.f2 = std::move(b);
  return mkf(std::move(f));
}
FormulaPtr fand(FormulaPtr a, FormulaPtr b) { return binf(FormulaKind::And, a, b); }
FormulaPtr f_or(FormulaPtr a, FormulaPtr b) { return binf(FormulaKind::Or, a, b); }
FormulaPtr fimply(FormulaPtr a, FormulaPtr b) { return binf(FormulaKind::Imply, a, b); }
FormulaPtr fequiv(FormulaPtr a, FormulaPtr b) { return binf(FormulaKind::Equiv, a, b); }
FormulaPtr fnot(FormulaPtr a) { return binf(FormulaKind::Not, a, nullptr); }
static FormulaPtr quant(FormulaKind k, const Variable& v, FormulaPtr a) {
  Formula f{k};
  f.var = v;
  f.f1 = std::move(a);
  return mkf(std::move(f));
}
FormulaPtr fforall(const Variable& v, FormulaPtr a) {
  return quant(FormulaKind::Forall, v, a);
}
FormulaPtr fexists(const Variable& v, FormulaPtr a) {
  return quant(FormulaKind::Exists, v, a);
}
static FormulaPtr modal(FormulaKind k, ProgramPtr p, FormulaPtr a) {
  Formula f{k};
  f.prog = std::move(p);
  f.f1 = std::move(a);
  return mkf(std::move(f));
}
FormulaPtr fbox(ProgramPtr p, FormulaPtr a) {
  return modal(FormulaKind::Box, p, a);
}
FormulaPtr fdiamond(ProgramPtr p, FormulaPtr a) {
  return modal(FormulaKind::Diamond, p, a);
}
FormulaPtr fnominal(const std::string& state) {
  Formula f{FormulaKind::NominalF};
  f.name = state;
  return mkf(std::move(f));
}
FormulaPtr fabbrev(const std::string& name) {
  Formula f{FormulaKind::AbbrevF};
  f.name = name;
  return mkf(std::move(f));
}

// -- program factories ------------------------------------------------------

static ProgramPtr mkp(Program p) { return std::make_shared<Program>(std::move(p)); }

ProgramPtr passign(const Variable& v, TermPtr t) {
  Program p{ProgramKind::Assign};
  p.var = v;
  p.term = std::move(t);
  return mkp(std::move(p));
}
ProgramPtr passign_any(const Variable& v) {
  Program p{ProgramKind::AssignAny};
  p.var = v;
  return mkp(std::move(p));
}
ProgramPtr ptest(FormulaPtr f) {
  Program p{ProgramKind::Test};
  p.fml = std::move(f);
  return mkp(std::move(p));
}
ProgramPtr pseq(ProgramPtr a, ProgramPtr b) {
  Program p{ProgramKind::Seq};
  p.a = std::move(a);
  p.b = std::move(b);
  return mkp(std::move(p));
}
ProgramPtr pchoice(ProgramPtr a, ProgramPtr b) {
  Program p{ProgramKind::Choice};
  p.a = std::move(a);
  p.b = std::move(b);
  return mkp(std::move(p));
}
ProgramPtr ploop(ProgramPtr a) {
  Program p{ProgramKind::Loop};
  p.a = std::move(a);
  return mkp(std::move(p));
}
ProgramPtr pode(std::vector<ODEEq> eqs, FormulaPtr domain) {
  Program p{ProgramKind::ODE};
  p.odes = std::move(eqs);
  p.fml = std::move(domain);
  return mkp(std::move(p));
}

// -- comparison helpers -----------------------------------------------------

CmpOp cmp_negate(CmpOp op) {
  switch (op) {
    case CmpOp::Lt: return CmpOp::Ge;
    case CmpOp::Le: return CmpOp::Gt;
    case CmpOp::Eq: return CmpOp::Ne;
    case CmpOp::Ge: return CmpOp::Lt;
    case CmpOp::Gt: return CmpOp::Le;
    case CmpOp::Ne: return CmpOp::Eq;
  }
  return CmpOp::Eq;
}
CmpOp cmp_flip(CmpOp op) {
  switch (op) {
    case CmpOp::Lt: return CmpOp::Gt;
    case CmpOp::Le: return CmpOp::Ge;
    case CmpOp::Ge: return CmpOp::Le;
    case CmpOp::Gt: return CmpOp::Lt;
    default: return op;
  }
}
std::string cmp_str(CmpOp op) {
  switch (op) {
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Eq: return "=";
    case CmpOp::Ge: return ">=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ne: return "!=";
  }
  return "=";
}

// -- structural equality ----------------------------------------------------

bool equal(const TermPtr& x, const TermPtr& y) {
  if (x == y) return true;
  if (!x || !y) return false;
  if (x->kind != y->kind) return false;
  switch (x->kind) {
    case TermKind::Var: return x->var == y->var;
    case TermKind::Lit: return x->lit == y->lit;
    case TermKind::Power:
      return x->lit == y->lit && equal(x->a, y->a);
    case TermKind::App:
    case TermKind::Nominal:
    case TermKind::Abbrev:
      if (x->name != y->name) return false;
      [[fallthrough]];
    default:
      return equal(x->a, y->a) && equal(x->b, y->b);
  }
}

bool equal(const ProgramPtr& x, const ProgramPtr& y) {
  if (x == y) return true;
  if (!x || !y) return false;
  if (x->kind != y->kind) return false;
  switch (x->kind) {
    case ProgramKind::Assign:
      return x->var == y->var && equal(x->term, y->term);
    case ProgramKind::AssignAny: return x->var == y->var;
    case ProgramKind::Test: return equal(x->fml, y->fml);
    case ProgramKind::Seq:
    case ProgramKind::Choice:
      return equal(x->a, y->a) && equal(x->b, y->b);
    case ProgramKind::Loop: return equal(x->a, y->a);
    case ProgramKind::ODE: {
      if (x->odes.size() != y->odes.size()) return false;
      for (size_t i = 0; i < x->odes.size(); ++i)
        if (!(x->odes[i].var == y->odes[i].var) ||
            !equal(x->odes[i].rhs, y->odes[i].rhs))
          return false;
      return equal(x->fml, y->fml);
    }
  }
  return false;
}

bool equal(const FormulaPtr& x, const FormulaPtr& y) {
  if (x == y) return true;
  if (!x || !y) return false;
  if (x->kind != y->kind) return false;
  switch (x->kind) {
    case FormulaKind::True:
    case FormulaKind::False: return true;
    case FormulaKind::Cmp:
      return x->op == y->op && equal(x->t1, y->t1) && equal(x->t2, y->t2);
    case FormulaKind::Forall:
    case FormulaKind::Exists:
      return x->var == y->var && equal(x->f1, y->f1);
    case FormulaKind::Box:
    case FormulaKind::Diamond:
      return equal(x->prog, y->prog) && equal(x->f1, y->f1);
    case FormulaKind::NominalF:
    case FormulaKind::AbbrevF: return x->name == y->name;
    default:
      return equal(x->f1, y->f1) && equal(x->f2, y->f2);
  }
}

bool equal(const Sequent& x, const Sequent& y) {
  if (x.ante.size() != y.ante.size() || x.succ.size() != y.succ.size())
    return false;
  for (size_t i = 0; i < x.ante.size(); ++i)
    if (!equal(x.ante[i], y.ante[i])) return false;
  for (size_t i = 0; i < x.succ.size(); ++i)
    if (!equal(x.succ[i], y.succ[i])) return false;
  return true;
}

// -- printing ---------------------------------------------------------------
// Term precedence: + - (1) < * / (2) < unary - (3) < ^ (4) < atoms (5).
// Formula precedence: <-> (1) < -> (2) < | (3) < & (4) < prefix (5) < atoms.
// Program precedence: ++ (1) < ; (2) < atoms (3).

static void pt(std::ostream& os, const TermPtr& t, int prec);
static void pf(std::ostream& os, const FormulaPtr& f, int prec);
static void pp(std::ostream& os, const ProgramPtr& p, int prec);

static void pt(std::ostream& os, const TermPtr& t, int prec) {
  switch (t->kind) {
    case TermKind::Var: os << t->var.str(); return;
    case TermKind::Lit: {
      std::string s = rational_str(t->lit);
      if (!s.empty() && s[0] == '-' && prec > 3) {
        os << "(" << s << ")";
      } else {
        os << s;
      }
      return;
    }
    case TermKind::Plus:
    case TermKind::Minus: {
      bool need = prec > 1;
      if (need) os << "(";
      pt(os, t->a, 1);
      os << (t->kind == TermKind::Plus ? " + " : " - ");
      pt(os, t->b, 2);  // left-assoc: right child binds tighter
      if (need) os << ")";
      return;
    }
    case TermKind::Times:
    case TermKind::Divide: {
      bool need = prec > 2;
      if (need) os << "(";
      pt(os, t->a, 2);
      os << (t->kind == TermKind::Times ? "*" : "/");
      pt(os, t->b, 3);
      if (need) os << ")";
      return;
    }
    case TermKind::Neg: {
      bool need = prec > 3;
      if (need) os << "(";
      os << "-";
      pt(os, t->a, 3);
      if (need) os << ")";
      return;
    }
    case TermKind::Power: {
      bool need = prec > 4;
      if (need) os << "(";
      pt(os, t->a, 5);
      os << "^";
      if (is_integer(t->lit) && t->lit >= 0) {
        os << rational_str(t->lit);
      } else {
        os << "(" << numerator(t->lit) << "/" << denominator(t->lit) << ")";
      }
      if (need) os << ")";
      return;
    }
    case TermKind::Differential:
      os << "(";
      pt(os, t->a, 0);
      os << ")'";
      return;
    case TermKind::App:
      os << t->name << "(";
      pt(os, t->a, 0);
      if (t->b) {
        os << ", ";
        pt(os, t->b, 0);
      }
      os << ")";
      return;
    case TermKind::Nominal:
      os << t->name << "(";
      pt(os, t->a, 0);
      os << ")";
      return;
    case TermKind::Now:
      os << "now(";
      pt(os, t->a, 0);
      os << ")";
      return;
    case TermKind::Abbrev: os << t->name; return;
  }
}

static void pf(std::ostream& os, const FormulaPtr& f, int prec) {
  switch (f->kind) {
    case FormulaKind::True: os << "true"; return;
    case FormulaKind::False: os << "false"; return;
    case FormulaKind::Cmp:
      pt(os, f->t1, 1);
      os << " " << cmp_str(f->op) << " ";
      pt(os, f->t2, 1);
      return;
    case FormulaKind::Equiv: {
      bool need = prec > 1;
      if (need) os << "(";
      pf(os, f->f1, 2);
      os << " <-> ";
      pf(os, f->f2, 1);
      if (need) os << ")";
      return;
    }
    case FormulaKind::Imply: {
      bool need = prec > 2;
      if (need) os << "(";
      pf(os, f->f1, 3);
      os << " -> ";
      pf(os, f->f2, 2);  // right-assoc
      if (need) os << ")";
      return;
    }
    case FormulaKind::Or: {
      bool need = prec > 3;
      if (need) os << "(";
      pf(os, f->f1, 3);
      os << " | ";
      pf(os, f->f2, 4);
      if (need) os << ")";
      return;
    }
    case FormulaKind::And: {
      bool need = prec > 4;
      if (need) os << "(";
      pf(os, f->f1, 4);
      os << " & ";
      pf(os, f->f2, 5);
      if (need) os << ")";
      return;
    }
    case FormulaKind::Not:
      os << "!";
      pf(os, f->f1, 5);
      return;
    case FormulaKind::Forall:
    case FormulaKind::Exists:
      os << (f->kind == FormulaKind::Forall ? "\\forall " : "\\exists ")
         << f->var.str() << " ";
      pf(os, f->f1, 5);
      return;
    case FormulaKind::Box:
      os << "[";
      pp(os, f->prog, 0);
      os << "]";
      pf(os, f->f1, 5);
      return;
    case FormulaKind::Diamond:
      os << "<";
      pp(os, f->prog, 0);
      os << ">";
      pf(os, f->f1, 5);
      return;
    case FormulaKind::NominalF: os << "@" << f->name; return;
    case FormulaKind::AbbrevF: os << f->name; return;
  }
}

static void pp(std::ostream& os, const ProgramPtr& p, int prec) {
  switch (p->kind) {
    case ProgramKind::Assign:
      os << p->var.str() << " := ";
      pt(os, p->term, 1);
      return;
    case ProgramKind::AssignAny: os << p->var.str() << " := *"; return;
    case ProgramKind::Test:
      os << "?";
      pf(os, p->fml, 1);
      return;
    case ProgramKind::Seq: {
      bool need = prec > 2;
      if (need) os << "{";
      pp(os, p->a, 3);
      os << "; ";
      pp(os, p->b, 2);
      if (need) os << "}";
      return;
    }
    case ProgramKind::Choice: {
      bool need = prec > 1;
      if (need) os << "{";
      pp(os, p->a, 2);
      os << " ++ ";
      pp(os, p->b, 1);
      if (need) os << "}";
      return;
    }
    case ProgramKind::Loop:
      os << "{";
      pp(os, p->a, 0);
      os << "}*";
      return;
    case ProgramKind::ODE: {
      os << "{";
      for (size_t i = 0; i < p->odes.size(); ++i) {
        if (i) os << ", ";
        os << p->odes[i].var.str() << "' = ";
        pt(os, p->odes[i].rhs, 1);
      }
      if (!(p->fml && p->fml->kind == FormulaKind::True)) {
        os << " & ";
        pf(os, p->fml, 1);
      }
      os << "}";
      return;
    }
  }
}

std::string print(const TermPtr& t) {
  std::ostringstream os;
  pt(os, t, 0);
  return os.str();
}
std::string print(const FormulaPtr& f) {
  std::ostringstream os;
  pf(os, f, 0);
  return os.str();
}
std::string print(const ProgramPtr& p) {
  std::ostringstream os;
  pp(os, p, 0);
  return os.str();
}
std::string print(const Sequent& s) {
  std::ostringstream os;
  for (size_t i = 0; i < s.ante.size(); ++i) {
    if (i) os << ", ";
    pf(os, s.ante[i], 0);
  }
  os << (s.ante.empty() ? "|- " : " |- ");
  for (size_t i = 0; i < s.succ.size(); ++i) {
    if (i) os << ", ";
    pf(os, s.succ[i], 0);
  }
  return os.str();
}

// -- core check -------------------------------------------------------------

bool is_core(const TermPtr& t) {
  if (!t) return true;
  switch (t->kind) {
    case TermKind::Nominal:
    case TermKind::Now:
    case TermKind::Abbrev: return false;
    default: return is_core(t->a) && is_core(t->b);
  }
}

static bool is_core_p(const ProgramPtr& p);

bool is_core(const FormulaPtr& f) {
  if (!f) return true;
  switch (f->kind) {
    case FormulaKind::NominalF:
    case FormulaKind::AbbrevF: return false;
    case FormulaKind::Cmp: return is_core(f->t1) && is_core(f->t2);
    case FormulaKind::Box:
    case FormulaKind::Diamond:
      return is_core_p(f->prog) && is_core(f->f1);
    default: return is_core(f->f1) && is_core(f->f2);
  }
}

static bool is_core_p(const ProgramPtr& p) {
  if (!p) return true;
  switch (p->kind) {
    case ProgramKind::Assign: return is_core(p->term);
    case ProgramKind::AssignAny: return true;
    case ProgramKind::Test: return is_core(p->fml);
    case ProgramKind::Seq:
    case ProgramKind::Choice: return is_core_p(p->a) && is_core_p(p->b);
    case ProgramKind::Loop: return is_core_p(p->a);
    case ProgramKind::ODE: {
      for (auto& e : p->odes)
        if (!is_core(e.rhs)) return false;
      return is_core(p->fml);
    }
  }
  return true;
}

}  // namespace kaisar
