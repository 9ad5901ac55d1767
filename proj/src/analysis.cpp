#include "kaisar/analysis.hpp"

namespace kaisar {

// -- variable sets ----------------------------------------------------------

static void fv(const TermPtr& t, VarSet& out) {
  if (!t) return;
  if (t->kind == TermKind::Var) {
    out.insert(t->var);
    return;
  }
  fv(t->a, out);
  fv(t->b, out);
}

VarSet free_vars(const TermPtr& t) {
  VarSet s;
  fv(t, s);
  return s;
}

VarSet must_bound_vars(const ProgramPtr& p) {
  switch (p->kind) {
    case ProgramKind::Assign:
    case ProgramKind::AssignAny: return {p->var};
    case ProgramKind::Test:
    case ProgramKind::Loop: return {};
    case ProgramKind::Seq: {
      VarSet s = must_bound_vars(p->a);
      for (auto& v : must_bound_vars(p->b)) s.insert(v);
      return s;
    }
    case ProgramKind::Choice: {
      VarSet a = must_bound_vars(p->a), b = must_bound_vars(p->b), s;
      for (auto& v : a)
        if (b.count(v)) s.insert(v);
      return s;
    }
    case ProgramKind::ODE: {
      VarSet s;
      for (auto& e : p->odes) {
        s.insert(e.var);
        s.insert(e.var.prime());
      }
      return s;
    }
  }
  return {};
}

VarSet bound_vars(const ProgramPtr& p) {
  switch (p->kind) {
    case ProgramKind::Assign:
    case ProgramKind::AssignAny: return {p->var};
    case ProgramKind::Test: return {};
    case ProgramKind::Seq:
    case ProgramKind::Choice: {
      VarSet s = bound_vars(p->a);
      for (auto& v : bound_vars(p->b)) s.insert(v);
      return s;
    }
    case ProgramKind::Loop: return bound_vars(p->a);
    case ProgramKind::ODE: {
      VarSet s;
      for (auto& e : p->odes) {
        s.insert(e.var);
        s.insert(e.var.prime());
      }
      return s;
    }
  }
  return {};
}

static void fvf(const FormulaPtr& f, VarSet& out);

static void fvp(const ProgramPtr& p, VarSet& out) {
  switch (p->kind) {
    case ProgramKind::Assign: fv(p->term, out); return;
    case ProgramKind::AssignAny: return;
    case ProgramKind::Test: fvf(p->fml, out); return;
    case ProgramKind::Seq: {
      fvp(p->a, out);
      VarSet b;
      fvp(p->b, b);
      VarSet mb = must_bound_vars(p->a);
      for (auto& v : b)
        if (!mb.count(v)) out.insert(v);
      return;
    }
    case ProgramKind::Choice:
      fvp(p->a, out);
      fvp(p->b, out);
      return;
    case ProgramKind::Loop: fvp(p->a, out); return;
    case ProgramKind::ODE:
      for (auto& e : p->odes) {
        out.insert(e.var);
        fv(e.rhs, out);
      }
      fvf(p->fml, out);
      return;
  }
}

static void fvf(const FormulaPtr& f, VarSet& out) {
  if (!f) return;
  switch (f->kind) {
    case FormulaKind::Cmp:
      fv(f->t1, out);
      fv(f->t2, out);
      return;
    case FormulaKind::Forall:
    case FormulaKind::Exists: {
      VarSet body;
      fvf(f->f1, body);
      body.erase(f->var);
      for (auto& v : body) out.insert(v);
      return;
    }
    case FormulaKind::Box:
    case FormulaKind::Diamond: {
      fvp(f->prog, out);
      VarSet body;
      fvf(f->f1, body);
      VarSet mb = must_bound_vars(f->prog);
      for (auto& v : body)
        if (!mb.count(v)) out.insert(v);
      return;
    }
    default:
      fvf(f->f1, out);
      fvf(f->f2, out);
      return;
  }
}

VarSet free_vars(const FormulaPtr& f) {
  VarSet s;
  fvf(f, s);
  return s;
}
VarSet free_vars(const ProgramPtr& p) {
  VarSet s;
  fvp(p, s);
  return s;
}

VarSet bound_vars(const FormulaPtr& f) {
  VarSet s;
  if (!f) return s;
  switch (f->kind) {
    case FormulaKind::Forall:
    case FormulaKind::Exists: {
      s = bound_vars(f->f1);
      s.insert(f->var);
      return s;
    }
    case FormulaKind::Box:
    case FormulaKind::Diamond: {
      s = bound_vars(f->f1);
      for (auto& v : bound_vars(f->prog)) s.insert(v);
      return s;
    }
    case FormulaKind::Cmp: return s;
    default: {
      s = bound_vars(f->f1);
      if (f->f2)
        for (auto& v : bound_vars(f->f2)) s.insert(v);
      return s;
    }
  }
}

static void avt(const TermPtr& t, VarSet& out) {
  if (!t) return;
  if (t->kind == TermKind::Var) out.insert(t->var);
  avt(t->a, out);
  avt(t->b, out);
}
static void avf(const FormulaPtr& f, VarSet& out);
static void avp(const ProgramPtr& p, VarSet& out) {
  if (!p) return;
  switch (p->kind) {
    case ProgramKind::Assign:
      out.insert(p->var);
      avt(p->term, out);
      return;
    case ProgramKind::AssignAny: out.insert(p->var); return;
    case ProgramKind::Test: avf(p->fml, out); return;
    case ProgramKind::ODE:
      for (auto& e : p->odes) {
        out.insert(e.var);
        out.insert(e.var.prime());
        avt(e.rhs, out);
      }
      avf(p->fml, out);
      return;
    default:
      avp(p->a, out);
      avp(p->b, out);
      return;
  }
}
static void avf(const FormulaPtr& f, VarSet& out) {
  if (!f) return;
  switch (f->kind) {
    case FormulaKind::Cmp:
      avt(f->t1, out);
      avt(f->t2, out);
      return;
    case FormulaKind::Forall:
    case FormulaKind::Exists:
      out.insert(f->var);
      avf(f->f1, out);
      return;
    case FormulaKind::Box:
    case FormulaKind::Diamond:
      avp(f->prog, out);
      avf(f->f1, out);
      return;
    default:
      avf(f->f1, out);
      avf(f->f2, out);
      return;
  }
}

VarSet all_vars(const TermPtr& t) {
  VarSet s;
  avt(t, s);
  return s;
}
VarSet all_vars(const FormulaPtr& f) {
  VarSet s;
  avf(f, s);
  return s;
}
VarSet all_vars(const ProgramPtr& p) {
  VarSet s;
  avp(p, s);
  return s;
}

// -- substitution -----------------------------------------------------------

TermPtr substitute(const TermPtr& t, const SubstMap& m) {
  if (!t || m.empty()) return t;
  switch (t->kind) {
    case TermKind::Var: {
      auto it = m.find(t->var);
      return it == m.end() ? t : it->second;
    }
    case TermKind::Lit:
    case TermKind::Abbrev: return t;
    case TermKind::Power: {
      TermPtr a = substitute(t->a, m);
      return a == t->a ? t : tpower(a, t->lit);
    }
    default: {
      TermPtr a = substitute(t->a, m);
      TermPtr b = substitute(t->b, m);
      if (a == t->a && b == t->b) return t;
      Term copy = *t;
      copy.a = a;
      copy.b = b;
      return std::make_shared<Term>(std::move(copy));
    }
  }
}

static SubstMap applicable(const SubstMap& m, const VarSet& fvs) {
  SubstMap r;
  for (auto& [k, v] : m) {
    if (!fvs.count(k)) continue;
    // Identity entries are no-ops; dropping them avoids spurious capture.
    if (v && v->kind == TermKind::Var && v->var == k) continue;
    r.emplace(k, v);
  }
  return r;
}

FormulaPtr substitute(const FormulaPtr& f, const SubstMap& m);

ProgramPtr substitute(const ProgramPtr& p, const SubstMap& m) {
  if (!p || m.empty()) return p;
  // Caller (the modal case below, or a direct user) must have established
  // that no key and no value variable is bound by this program.
  VarSet bv = bound_vars(p);
  for (auto& [k, v] : m) {
    if (bv.count(k))
      throw CaptureError("substituted variable " + k.str() + " is bound");
    for (auto& fvv : free_vars(v))
      if (bv.count(fvv))
        throw CaptureError("variable " + fvv.str() + " would be captured");
  }
  switch (p->kind) {
    case ProgramKind::Assign: return passign(p->var, substitute(p->term, m));
    case ProgramKind::AssignAny: return p;
    case ProgramKind::Test: return ptest(substitute(p->fml, m));
    case ProgramKind::Seq:
      return pseq(substitute(p->a, m), substitute(p->b, m));
    case ProgramKind::Choice:
      return pchoice(substitute(p->a, m), substitute(p->b, m));
    case ProgramKind::Loop: return ploop(substitute(p->a, m));
    case ProgramKind::ODE: {
      std::vector<ODEEq> eqs;
      for (auto& e : p->odes) eqs.push_back({e.var, substitute(e.rhs, m)});
      return pode(std::move(eqs), substitute(p->fml, m));
    }
  }
  return p;
}

FormulaPtr substitute(const FormulaPtr& f, const SubstMap& m) {
  if (!f || m.empty()) return f;
  switch (f->kind) {
    case FormulaKind::True:
    case FormulaKind::False:
    case FormulaKind::NominalF:
    case FormulaKind::AbbrevF: return f;
    case FormulaKind::Cmp:
      return fcmp(f->op, substitute(f->t1, m), substitute(f->t2, m));
    case FormulaKind::Forall:
    case FormulaKind::Exists: {
      SubstMap inner = m;
      inner.erase(f->var);
      inner = applicable(inner, free_vars(f->f1));
      for (auto& [k, v] : inner)
        if (free_vars(v).count(f->var))
          throw CaptureError("binder " + f->var.str() + " would capture");
      FormulaPtr body = substitute(f->f1, inner);
      return f->kind == FormulaKind::Forall ? fforall(f->var, body)
                                            : fexists(f->var, body);
    }
    case FormulaKind::Box:
    case FormulaKind::Diamond: {
      SubstMap inner = applicable(m, free_vars(f));
      if (inner.empty()) return f;
      // Assignments bind sequentially: the rhs sees the outer map, the
      // postcondition no longer substitutes the assigned variable.
      if (f->prog->kind == ProgramKind::Assign ||
          f->prog->kind == ProgramKind::AssignAny) {
        const ProgramPtr& p = f->prog;
        SubstMap after = inner;
        after.erase(p->var);
        after = applicable(after, free_vars(f->f1));
        for (auto& [k, v] : after)
          if (free_vars(v).count(p->var))
            throw CaptureError("assignment to " + p->var.str() +
                               " would capture");
        FormulaPtr body = substitute(f->f1, after);
        ProgramPtr np = p->kind == ProgramKind::Assign
                            ? passign(p->var, substitute(p->term, inner))
                            : passign_any(p->var);
        return f->kind == FormulaKind::Box ? fbox(np, body)
                                           : fdiamond(np, body);
      }
      VarSet bv = bound_vars(f->prog);
      for (auto& [k, v] : inner) {
        if (bv.count(k))
          throw CaptureError("substituted variable " + k.str() +
                             " is bound by the program");
        for (auto& fvv : free_vars(v))
          if (bv.count(fvv))
            throw CaptureError("variable " + fvv.str() + " would be captured");
      }
      ProgramPtr prog = substitute(f->prog, inner);
      FormulaPtr body = substitute(f->f1, inner);
      return f->kind == FormulaKind::Box ? fbox(prog, body)
                                          : fdiamond(prog, body);
    }
    case FormulaKind::Not: return fnot(substitute(f->f1, m));
    case FormulaKind::And:
      return fand(substitute(f->f1, m), substitute(f->f2, m));
    case FormulaKind::Or:
      return f_or(substitute(f->f1, m), substitute(f->f2, m));
    case FormulaKind::Imply:
      return fimply(substitute(f->f1, m), substitute(f->f2, m));
    case FormulaKind::Equiv:
      return fequiv(substitute(f->f1, m), substitute(f->f2, m));
  }
  return f;
}

FormulaPtr rename_free(const FormulaPtr& f, const RenameMap& m) {
  SubstMap sm;
  for (auto& [k, v] : m) sm.emplace(k, tvar(v));
  return substitute(f, sm);
}
TermPtr rename_free(const TermPtr& t, const RenameMap& m) {
  SubstMap sm;
  for (auto& [k, v] : m) sm.emplace(k, tvar(v));
  return substitute(t, sm);
}

// -- negation normal form ---------------------------------------------------

static FormulaPtr nnf_neg(const FormulaPtr& f);

FormulaPtr nnf(const FormulaPtr& f) {
  switch (f->kind) {
    case FormulaKind::Not: return nnf_neg(f->f1);
    case FormulaKind::And: return fand(nnf(f->f1), nnf(f->f2));
    case FormulaKind::Or: return f_or(nnf(f->f1), nnf(f->f2));
    case FormulaKind::Imply: return f_or(nnf_neg(f->f1), nnf(f->f2));
    case FormulaKind::Equiv:
      return fand(f_or(nnf_neg(f->f1), nnf(f->f2)),
                  f_or(nnf(f->f1), nnf_neg(f->f2)));
    case FormulaKind::Forall: return fforall(f->var, nnf(f->f1));
    case FormulaKind::Exists: return fexists(f->var, nnf(f->f1));
    case FormulaKind::Box: return fbox(f->prog, nnf(f->f1));
    case FormulaKind::Diamond: return fdiamond(f->prog, nnf(f->f1));
    default: return f;
  }
}

static FormulaPtr nnf_neg(const FormulaPtr& f) {
  switch (f->kind) {
    case FormulaKind::True: return ffalse();
    case FormulaKind::False: return ftrue();
    case FormulaKind::Cmp: return fcmp(cmp_negate(f->op), f->t1, f->t2);
    case FormulaKind::Not: return nnf(f->f1);
    case FormulaKind::And: return f_or(nnf_neg(f->f1), nnf_neg(f->f2));
    case FormulaKind::Or: return fand(nnf_neg(f->f1), nnf_neg(f->f2));
    case FormulaKind::Imply: return fand(nnf(f->f1), nnf_neg(f->f2));
    case FormulaKind::Equiv:
      return f_or(fand(nnf(f->f1), nnf_neg(f->f2)),
                  fand(nnf_neg(f->f1), nnf(f->f2)));
    case FormulaKind::Forall: return fexists(f->var, nnf_neg(f->f1));
    case FormulaKind::Exists: return fforall(f->var, nnf_neg(f->f1));
    case FormulaKind::Box: return fdiamond(f->prog, nnf_neg(f->f1));
    case FormulaKind::Diamond: return fbox(f->prog, nnf_neg(f->f1));
    case FormulaKind::NominalF:
    case FormulaKind::AbbrevF: return fnot(f);
  }
  return fnot(f);
}

// -- freshness --------------------------------------------------------------

Variable fresh_var(const std::string& base, const VarSet& used) {
  for (int i = 0;; ++i) {
    Variable v(base, i);
    if (!used.count(v) && !used.count(v.prime())) return v;
  }
}

// -- differentials ----------------------------------------------------------

TermDifferential term_differential(const TermPtr& t) {
  switch (t->kind) {
    case TermKind::Var:
      if (t->var.primed)
        throw DifferentialError("no differential of differential symbol " +
                                t->var.str());
      return {tvar(t->var.prime()), {}};
    case TermKind::Lit: return {tlit(0), {}};
    case TermKind::Plus: {
      auto a = term_differential(t->a), b = term_differential(t->b);
      a.side.insert(a.side.end(), b.side.begin(), b.side.end());
      return {tplus(a.d, b.d), a.side};
    }
    case TermKind::Minus: {
      auto a = term_differential(t->a), b = term_differential(t->b);
      a.side.insert(a.side.end(), b.side.begin(), b.side.end());
      return {tminus(a.d, b.d), a.side};
    }
    case TermKind::Neg: {
      auto a = term_differential(t->a);
      return {tneg(a.d), a.side};
    }
    case TermKind::Times: {
      auto a = term_differential(t->a), b = term_differential(t->b);
      a.side.insert(a.side.end(), b.side.begin(), b.side.end());
      return {tplus(ttimes(a.d, t->b), ttimes(t->a, b.d)), a.side};
    }
    case TermKind::Divide: {
      auto a = term_differential(t->a), b = term_differential(t->b);
      a.side.insert(a.side.end(), b.side.begin(), b.side.end());
      a.side.push_back(fcmp(CmpOp::Ne, t->b, tlit(0)));
      TermPtr num = tminus(ttimes(a.d, t->b), ttimes(t->a, b.d));
      return {tdivide(num, tpower(t->b, 2)), a.side};
    }
    case TermKind::Power: {
      auto a = term_differential(t->a);
      const Rational& q = t->lit;
      if (is_integer(q) && q >= 1) {
        // q * a^(q-1) * a'
        TermPtr pow = q == 1 ? tlit(1) : tpower(t->a, q - 1);
        return {ttimes(ttimes(tlit(q), pow), a.d), a.side};
      }
      // negative or fractional exponent: base must stay away from zero
      a.side.push_back(fcmp(is_integer(q) ? CmpOp::Ne : CmpOp::Gt, t->a,
                            tlit(0)));
      return {ttimes(ttimes(tlit(q), tpower(t->a, q - 1)), a.d), a.side};
    }
    case TermKind::App: {
      if (t->name == "sqrt") {
        auto a = term_differential(t->a);
        a.side.push_back(fcmp(CmpOp::Gt, t->a, tlit(0)));
        return {tdivide(a.d, ttimes(tlit(2), tapp("sqrt", t->a))), a.side};
      }
      throw DifferentialError("no differential of " + t->name);
    }
    default:
      throw DifferentialError("no differential of extended term " + print(t));
  }
}

FormulaDifferential formula_differential(const FormulaPtr& f) {
  switch (f->kind) {
    case FormulaKind::True: return {ftrue(), {}};
    case FormulaKind::Cmp: {
      if (f->op == CmpOp::Ne)
        throw DifferentialError("no differential invariant for !=");
      auto a = term_differential(f->t1), b = term_differential(f->t2);
      a.side.insert(a.side.end(), b.side.begin(), b.side.end());
      CmpOp op;
      switch (f->op) {
        case CmpOp::Lt:
        case CmpOp::Le: op = CmpOp::Le; break;
        case CmpOp::Eq: op = CmpOp::Eq; break;
        default: op = CmpOp::Ge; break;
      }
      return {fcmp(op, a.d, b.d), a.side};
    }
    case FormulaKind::And:
    case FormulaKind::Or: {
      auto a = formula_differential(f->f1), b = formula_differential(f->f2);
      a.side.insert(a.side.end(), b.side.begin(), b.side.end());
      return {fand(a.d, b.d), a.side};
    }
    default:
      throw DifferentialError(
          "differential invariants must be arithmetic conjunctions/"
          "disjunctions");
  }
}

}  // namespace kaisar
