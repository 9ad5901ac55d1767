#include "kaisar/patterns.hpp"

#include <algorithm>

namespace kaisar {

// ---------------------------------------------------------------------------
// Expr.

Expr expr_of(TermPtr t) { return Expr{std::move(t), nullptr, nullptr}; }
Expr expr_of(FormulaPtr f) { return Expr{nullptr, std::move(f), nullptr}; }
Expr expr_of(ProgramPtr p) { return Expr{nullptr, nullptr, std::move(p)}; }

bool equal(const Expr& a, const Expr& b) {
  if (a.term && b.term) return equal(a.term, b.term);
  if (a.fml && b.fml) return equal(a.fml, b.fml);
  if (a.prog && b.prog) return equal(a.prog, b.prog);
  return false;
}

std::string print(const Expr& e) {
  if (e.term) return print(e.term);
  if (e.fml) return print(e.fml);
  if (e.prog) return print(e.prog);
  return "<empty>";
}

VarSet free_vars(const Expr& e) {
  if (e.term) return free_vars(e.term);
  if (e.fml) return free_vars(e.fml);
  if (e.prog) return free_vars(e.prog);
  return {};
}

// ---------------------------------------------------------------------------
// Pattern constructors and printing.

static PatternPtr mkp(Pattern p) {
  return std::make_shared<const Pattern>(std::move(p));
}

PatternPtr pat_any() { return mkp({PatKind::Any}); }
PatternPtr pat_ident(const std::string& name) {
  if (name == "_") return pat_any();
  Pattern p{PatKind::Ident};
  p.name = name;
  return mkp(std::move(p));
}
PatternPtr pat_occurs(std::vector<Variable> vars, bool negated) {
  Pattern p{negated ? PatKind::NotOccurs : PatKind::Occurs};
  p.vars = std::move(vars);
  return mkp(std::move(p));
}
PatternPtr pat_union(PatternPtr a, PatternPtr b) {
  Pattern p{PatKind::Union};
  p.a = std::move(a);
  p.b = std::move(b);
  return mkp(std::move(p));
}
PatternPtr pat_inter(PatternPtr a, PatternPtr b) {
  Pattern p{PatKind::Inter};
  p.a = std::move(a);
  p.b = std::move(b);
  return mkp(std::move(p));
}
PatternPtr pat_neg(PatternPtr a) {
  Pattern p{PatKind::Neg};
  p.a = std::move(a);
  return mkp(std::move(p));
}
PatternPtr pat_struct(Expr skeleton) {
  Pattern p{PatKind::Struct};
  p.skel = std::move(skeleton);
  return mkp(std::move(p));
}

std::string print(const PatternPtr& p) {
  switch (p->kind) {
    case PatKind::Any: return "_";
    case PatKind::Ident: return p->name;
    case PatKind::Occurs:
    case PatKind::NotOccurs: {
      std::string s = "{";
      if (p->kind == PatKind::NotOccurs) s += "!";
      bool first = true;
      for (auto& v : p->vars) {
        if (!first) s += ",";
        first = false;
        s += v.str();
      }
      return s + "}";
    }
    case PatKind::Union: return print(p->a) + " \\/ " + print(p->b);
    case PatKind::Inter: return print(p->a) + " /\\ " + print(p->b);
    case PatKind::Neg: return "~(" + print(p->a) + ")";
    case PatKind::Struct: return print(p->skel);
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Context.

const ContextEntry* Context::lookup(const std::string& name) const {
  for (auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

Context Context::with_fact(const std::string& name, FormulaPtr f) const {
  Context g = *this;
  ContextEntry e;
  e.name = name;
  e.is_fact = true;
  e.fact = std::move(f);
  for (auto& old : g.entries_)
    if (old.name == name) {
      old = std::move(e);
      return g;
    }
  g.entries_.push_back(std::move(e));
  return g;
}

Context Context::with_abbrev(const std::string& name, Expr v) const {
  Context g = *this;
  ContextEntry e;
  e.name = name;
  e.value = std::move(v);
  for (auto& old : g.entries_)
    if (old.name == name) {
      old = std::move(e);
      return g;
    }
  g.entries_.push_back(std::move(e));
  return g;
}

Context Context::without(const std::string& name) const {
  Context g = *this;
  g.entries_.erase(
      std::remove_if(g.entries_.begin(), g.entries_.end(),
                     [&](const ContextEntry& e) { return e.name == name; }),
      g.entries_.end());
  return g;
}

Context Context::renamed(const RenameMap& m) const {
  Context g = *this;
  for (auto& e : g.entries_) {
    if (e.fact) e.fact = rename_free(e.fact, m);
    if (e.value.term) e.value.term = rename_free(e.value.term, m);
    if (e.value.fml) e.value.fml = rename_free(e.value.fml, m);
    // programs as stored values are matched verbatim; no renaming
  }
  return g;
}

std::vector<FormulaPtr> Context::fact_formulas() const {
  std::vector<FormulaPtr> out;
  for (auto& e : entries_)
    if (e.is_fact) out.push_back(e.fact);
  return out;
}

// ---------------------------------------------------------------------------
// Matching.

namespace {

using MaybeCtx = std::optional<Context>;

// The two ident rules: unknown names bind, known names compare.
MaybeCtx ident_match(const Context& g, const std::string& name,
                     const Expr& e) {
  if (name == "_") return g;
  if (const ContextEntry* ent = g.lookup(name)) {
    Expr stored = ent->is_fact ? expr_of(ent->fact) : ent->value;
    if (equal(stored, e)) return g;
    return std::nullopt;
  }
  return g.with_abbrev(name, e);
}

MaybeCtx match_term(const Context& g, const TermPtr& s, const TermPtr& e) {
  if (!s || !e) return (!s && !e) ? MaybeCtx(g) : std::nullopt;
  if (s->kind == TermKind::Abbrev) return ident_match(g, s->name, expr_of(e));
  if (s->kind != e->kind) return std::nullopt;
  switch (s->kind) {
    case TermKind::Var: return s->var == e->var ? MaybeCtx(g) : std::nullopt;
    case TermKind::Lit: return s->lit == e->lit ? MaybeCtx(g) : std::nullopt;
    case TermKind::Power:
      if (s->lit != e->lit) return std::nullopt;
      return match_term(g, s->a, e->a);
    case TermKind::App:
    case TermKind::Nominal:
      if (s->name != e->name) return std::nullopt;
      [[fallthrough]];
    default: {
      MaybeCtx r = match_term(g, s->a, e->a);
      if (!r) return std::nullopt;
      return match_term(*r, s->b, e->b);
    }
  }
}

MaybeCtx match_formula(const Context& g, const FormulaPtr& s,
                       const FormulaPtr& e);

// Programs carry no pattern identifiers of their own, but their embedded
// formulas and terms may (test conditions, assignment and ODE right-hand
// sides, domains); structure and assigned variables compare exactly.
MaybeCtx match_prog(const Context& g, const ProgramPtr& s,
                    const ProgramPtr& e) {
  if (!s || !e) return (!s && !e) ? MaybeCtx(g) : std::nullopt;
  if (s->kind != e->kind) return std::nullopt;
  switch (s->kind) {
    case ProgramKind::Assign:
      if (!(s->var == e->var)) return std::nullopt;
      return match_term(g, s->term, e->term);
    case ProgramKind::AssignAny:
      return s->var == e->var ? MaybeCtx(g) : std::nullopt;
    case ProgramKind::Test: return match_formula(g, s->fml, e->fml);
    case ProgramKind::Seq:
    case ProgramKind::Choice: {
      MaybeCtx r = match_prog(g, s->a, e->a);
      if (!r) return std::nullopt;
      return match_prog(*r, s->b, e->b);
    }
    case ProgramKind::Loop: return match_prog(g, s->a, e->a);
    case ProgramKind::ODE: {
      if (s->odes.size() != e->odes.size()) return std::nullopt;
      MaybeCtx r = g;
      for (size_t k = 0; k < s->odes.size(); ++k) {
        if (!(s->odes[k].var == e->odes[k].var)) return std::nullopt;
        r = match_term(*r, s->odes[k].rhs, e->odes[k].rhs);
        if (!r) return std::nullopt;
      }
      return match_formula(*r, s->fml, e->fml);
    }
  }
  return std::nullopt;
}

MaybeCtx match_formula(const Context& g, const FormulaPtr& s,
                       const FormulaPtr& e) {
  if (!s || !e) return (!s && !e) ? MaybeCtx(g) : std::nullopt;
  if (s->kind == FormulaKind::AbbrevF)
    return ident_match(g, s->name, expr_of(e));
  if (s->kind != e->kind) return std::nullopt;
  switch (s->kind) {
    case FormulaKind::True:
    case FormulaKind::False: return g;
    case FormulaKind::NominalF:
      return s->name == e->name ? MaybeCtx(g) : std::nullopt;
    case FormulaKind::Cmp: {
      if (s->op != e->op) return std::nullopt;
      MaybeCtx r = match_term(g, s->t1, e->t1);
      if (!r) return std::nullopt;
      return match_term(*r, s->t2, e->t2);
    }
    case FormulaKind::Forall:
    case FormulaKind::Exists:
      if (!(s->var == e->var)) return std::nullopt;
      return match_formula(g, s->f1, e->f1);
    case FormulaKind::Box:
    case FormulaKind::Diamond: {
      MaybeCtx r = match_prog(g, s->prog, e->prog);
      if (!r) return std::nullopt;
      return match_formula(*r, s->f1, e->f1);
    }
    default: {
      MaybeCtx r = match_formula(g, s->f1, e->f1);
      if (!r) return std::nullopt;
      return match_formula(*r, s->f2, e->f2);
    }
  }
}

void collect_idents(const TermPtr& t, std::vector<std::string>& out) {
  if (!t) return;
  if (t->kind == TermKind::Abbrev) out.push_back(t->name);
  collect_idents(t->a, out);
  collect_idents(t->b, out);
}
void collect_idents(const FormulaPtr& f, std::vector<std::string>& out);

void collect_idents(const ProgramPtr& p, std::vector<std::string>& out) {
  if (!p) return;
  collect_idents(p->term, out);
  collect_idents(p->fml, out);
  collect_idents(p->a, out);
  collect_idents(p->b, out);
  for (auto& e : p->odes) collect_idents(e.rhs, out);
}

void collect_idents(const FormulaPtr& f, std::vector<std::string>& out) {
  if (!f) return;
  if (f->kind == FormulaKind::AbbrevF) out.push_back(f->name);
  if (f->kind == FormulaKind::Cmp) {
    collect_idents(f->t1, out);
    collect_idents(f->t2, out);
    return;
  }
  collect_idents(f->prog, out);
  collect_idents(f->f1, out);
  collect_idents(f->f2, out);
}

void collect_idents(const PatternPtr& p, std::vector<std::string>& out) {
  switch (p->kind) {
    case PatKind::Ident: out.push_back(p->name); return;
    case PatKind::Union:
    case PatKind::Inter:
      collect_idents(p->a, out);
      collect_idents(p->b, out);
      return;
    case PatKind::Neg: collect_idents(p->a, out); return;
    case PatKind::Struct:
      collect_idents(p->skel.term, out);
      collect_idents(p->skel.fml, out);
      collect_idents(p->skel.prog, out);
      return;
    default: return;
  }
}

}  // namespace

std::optional<Context> match(const Context& g, const PatternPtr& p,
                             const Expr& e) {
  switch (p->kind) {
    case PatKind::Any: return g;
    case PatKind::Ident: return ident_match(g, p->name, e);
    case PatKind::Occurs: {
      VarSet fv = free_vars(e);
      for (auto& v : p->vars)
        if (!fv.count(v)) return std::nullopt;
      return g;
    }
    case PatKind::NotOccurs: {
      VarSet fv = free_vars(e);
      for (auto& v : p->vars)
        if (fv.count(v)) return std::nullopt;
      return g;
    }
    case PatKind::Union: {
      auto r = match(g, p->a, e);
      if (r) return r;
      return match(g, p->b, e);  // rollback: retry on the original context
    }
    case PatKind::Inter: {
      auto r = match(g, p->a, e);
      if (!r) return std::nullopt;
      return match(*r, p->b, e);
    }
    case PatKind::Neg: {
      std::vector<std::string> names;
      collect_idents(p->a, names);
      for (auto& n : names)
        if (n != "_" && !g.lookup(n))
          throw PatternError("negated pattern must bind nothing: " + n);
      if (match(g, p->a, e)) return std::nullopt;
      return g;
    }
    case PatKind::Struct:
      if (p->skel.term && e.term) return match_term(g, p->skel.term, e.term);
      if (p->skel.fml && e.fml) return match_formula(g, p->skel.fml, e.fml);
      if (p->skel.prog && e.prog) return match_prog(g, p->skel.prog, e.prog);
      return std::nullopt;
  }
  return std::nullopt;
}

std::vector<FormulaPtr> facts(const Context& g,
                              const std::vector<PatternPtr>& selectors) {
  std::vector<FormulaPtr> out;
  for (auto& e : g.entries()) {
    if (!e.is_fact) continue;
    if (selectors.empty()) {
      out.push_back(e.fact);
      continue;
    }
    for (auto& p : selectors)
      if (match(g, p, expr_of(e.fact))) {
        out.push_back(e.fact);
        break;
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Expansion.

namespace {

struct ExpCtx {
  const Context& g;
  const StaticTrace& h;
  std::optional<std::string> entry;  // state of the whole expansion
  std::set<std::string> active;     // abbreviation cycle detection
};

TermPtr resolve_var(const ExpCtx& c, const std::optional<std::string>& scope,
                    const Variable& v) {
  return scope ? nom_var(c.h, *scope, v) : now_var(c.h, v);
}

// `frozen`: inside a stored abbreviation value, whose plain variables are
// already sequent-frame terms and must not re-resolve.
TermPtr ex_term(const TermPtr& t, ExpCtx& c,
                const std::optional<std::string>& scope, bool frozen,
                const VarSet& shadow);
FormulaPtr ex_formula(const FormulaPtr& f, ExpCtx& c,
                      const std::optional<std::string>& scope, bool frozen,
                      VarSet shadow);

TermPtr ex_term(const TermPtr& t, ExpCtx& c,
                const std::optional<std::string>& scope, bool frozen,
                const VarSet& shadow) {
  switch (t->kind) {
    case TermKind::Var:
      if (frozen || shadow.count(t->var)) return t;
      return resolve_var(c, scope, t->var);
    case TermKind::Lit: return t;
    case TermKind::Plus:
      return tplus(ex_term(t->a, c, scope, frozen, shadow),
                   ex_term(t->b, c, scope, frozen, shadow));
    case TermKind::Minus:
      return tminus(ex_term(t->a, c, scope, frozen, shadow),
                    ex_term(t->b, c, scope, frozen, shadow));
    case TermKind::Times:
      return ttimes(ex_term(t->a, c, scope, frozen, shadow),
                    ex_term(t->b, c, scope, frozen, shadow));
    case TermKind::Divide:
      return tdivide(ex_term(t->a, c, scope, frozen, shadow),
                     ex_term(t->b, c, scope, frozen, shadow));
    case TermKind::Neg:
      return tneg(ex_term(t->a, c, scope, frozen, shadow));
    case TermKind::Power:
      return tpower(ex_term(t->a, c, scope, frozen, shadow), t->lit);
    case TermKind::Differential:
      return tdifferential(ex_term(t->a, c, scope, frozen, shadow));
    case TermKind::App:
      return tapp(t->name, ex_term(t->a, c, scope, frozen, shadow),
                  t->b ? ex_term(t->b, c, scope, frozen, shadow) : nullptr);
    case TermKind::Nominal: {
      if (!c.h.has_mark(t->name))
        throw ExpandError("unknown state " + t->name);
      return ex_term(t->a, c, t->name, false, shadow);
    }
    case TermKind::Now:
      return ex_term(t->a, c, c.entry, false, shadow);
    case TermKind::Abbrev: {
      const ContextEntry* ent = c.g.lookup(t->name);
      if (!ent || ent->is_fact || !ent->value.term)
        throw ExpandError("unknown abbreviation " + t->name);
      if (!c.active.insert(t->name).second)
        throw ExpandError("cyclic abbreviation " + t->name);
      TermPtr r = ex_term(ent->value.term, c, scope, true, shadow);
      c.active.erase(t->name);
      return r;
    }
  }
  return t;
}

FormulaPtr ex_formula(const FormulaPtr& f, ExpCtx& c,
                      const std::optional<std::string>& scope, bool frozen,
                      VarSet shadow) {
  switch (f->kind) {
    case FormulaKind::True:
    case FormulaKind::False:
    case FormulaKind::NominalF: return f;
    case FormulaKind::Cmp:
      return fcmp(f->op, ex_term(f->t1, c, scope, frozen, shadow),
                  ex_term(f->t2, c, scope, frozen, shadow));
    case FormulaKind::And:
      return fand(ex_formula(f->f1, c, scope, frozen, shadow),
                  ex_formula(f->f2, c, scope, frozen, shadow));
    case FormulaKind::Or:
      return f_or(ex_formula(f->f1, c, scope, frozen, shadow),
                  ex_formula(f->f2, c, scope, frozen, shadow));
    case FormulaKind::Imply:
      return fimply(ex_formula(f->f1, c, scope, frozen, shadow),
                    ex_formula(f->f2, c, scope, frozen, shadow));
    case FormulaKind::Equiv:
      return fequiv(ex_formula(f->f1, c, scope, frozen, shadow),
                    ex_formula(f->f2, c, scope, frozen, shadow));
    case FormulaKind::Not:
      return fnot(ex_formula(f->f1, c, scope, frozen, shadow));
    case FormulaKind::Forall:
    case FormulaKind::Exists: {
      shadow.insert(f->var);
      FormulaPtr body = ex_formula(f->f1, c, scope, frozen, shadow);
      return f->kind == FormulaKind::Forall ? fforall(f->var, body)
                                            : fexists(f->var, body);
    }
    case FormulaKind::Box:
    case FormulaKind::Diamond: {
      // Modal subformulas must already be core; resolution then goes through
      // capture-aware substitution so program-bound occurrences stay put.
      if (!is_core(f))
        throw ExpandError("abbreviation under a modality is not supported");
      if (frozen) return f;
      SubstMap m;
      for (auto& v : free_vars(f)) {
        if (shadow.count(v)) continue;
        TermPtr r = resolve_var(c, scope, v);
        if (!(r->kind == TermKind::Var && r->var == v)) m.emplace(v, r);
      }
      if (m.empty()) return f;
      try {
        return substitute(f, m);
      } catch (const CaptureError& e) {
        throw ExpandError(std::string("state resolution under a modality: ") +
                          e.what());
      }
    }
    case FormulaKind::AbbrevF: {
      const ContextEntry* ent = c.g.lookup(f->name);
      if (!ent) throw ExpandError("unknown abbreviation " + f->name);
      FormulaPtr val = ent->is_fact ? ent->fact : ent->value.fml;
      if (!val) throw ExpandError("abbreviation " + f->name + " is not a formula");
      if (!c.active.insert(f->name).second)
        throw ExpandError("cyclic abbreviation " + f->name);
      FormulaPtr r = ex_formula(val, c, scope, true, shadow);
      c.active.erase(f->name);
      return r;
    }
  }
  return f;
}

}  // namespace

TermPtr expand(const Context& g, const StaticTrace& h, const TermPtr& e,
               const std::optional<std::string>& at) {
  if (at && !h.has_mark(*at)) throw ExpandError("unknown state " + *at);
  ExpCtx c{g, h, at, {}};
  return ex_term(e, c, at, false, {});
}

FormulaPtr expand(const Context& g, const StaticTrace& h, const FormulaPtr& e,
                  const std::optional<std::string>& at) {
  if (at && !h.has_mark(*at)) throw ExpandError("unknown state " + *at);
  ExpCtx c{g, h, at, {}};
  return ex_formula(e, c, at, false, {});
}

// ---------------------------------------------------------------------------
// Functional-let mobilization.

namespace {

TermPtr mob_term(const StaticTrace& h, const TermPtr& t, const std::string& st,
                 const VarSet& shadow) {
  switch (t->kind) {
    case TermKind::Var:
      if (shadow.count(t->var)) return t;
      return now_var(h, t->var);  // freeze to the bind-time frame
    case TermKind::Lit:
    case TermKind::Abbrev:
    case TermKind::Now: return t;
    case TermKind::Nominal: {
      if (t->name == st) return tnow(t->a);  // expand-time part
      if (!h.has_mark(t->name)) throw ExpandError("unknown state " + t->name);
      if (!is_core(t->a))
        throw ExpandError("extended term under state " + t->name);
      return nom_term(h, t->name, t->a);
    }
    case TermKind::Plus:
      return tplus(mob_term(h, t->a, st, shadow), mob_term(h, t->b, st, shadow));
    case TermKind::Minus:
      return tminus(mob_term(h, t->a, st, shadow),
                    mob_term(h, t->b, st, shadow));
    case TermKind::Times:
      return ttimes(mob_term(h, t->a, st, shadow),
                    mob_term(h, t->b, st, shadow));
    case TermKind::Divide:
      return tdivide(mob_term(h, t->a, st, shadow),
                     mob_term(h, t->b, st, shadow));
    case TermKind::Neg: return tneg(mob_term(h, t->a, st, shadow));
    case TermKind::Power: return tpower(mob_term(h, t->a, st, shadow), t->lit);
    case TermKind::Differential:
      return tdifferential(mob_term(h, t->a, st, shadow));
    case TermKind::App:
      return tapp(t->name, mob_term(h, t->a, st, shadow),
                  t->b ? mob_term(h, t->b, st, shadow) : nullptr);
  }
  return t;
}

FormulaPtr mob_formula(const StaticTrace& h, const FormulaPtr& f,
                       const std::string& st, VarSet shadow) {
  switch (f->kind) {
    case FormulaKind::True:
    case FormulaKind::False:
    case FormulaKind::NominalF:
    case FormulaKind::AbbrevF: return f;
    case FormulaKind::Cmp:
      return fcmp(f->op, mob_term(h, f->t1, st, shadow),
                  mob_term(h, f->t2, st, shadow));
    case FormulaKind::And:
      return fand(mob_formula(h, f->f1, st, shadow),
                  mob_formula(h, f->f2, st, shadow));
    case FormulaKind::Or:
      return f_or(mob_formula(h, f->f1, st, shadow),
                  mob_formula(h, f->f2, st, shadow));
    case FormulaKind::Imply:
      return fimply(mob_formula(h, f->f1, st, shadow),
                    mob_formula(h, f->f2, st, shadow));
    case FormulaKind::Equiv:
      return fequiv(mob_formula(h, f->f1, st, shadow),
                    mob_formula(h, f->f2, st, shadow));
    case FormulaKind::Not:
      return fnot(mob_formula(h, f->f1, st, shadow));
    case FormulaKind::Forall:
    case FormulaKind::Exists: {
      shadow.insert(f->var);
      FormulaPtr body = mob_formula(h, f->f1, st, shadow);
      return f->kind == FormulaKind::Forall ? fforall(f->var, body)
                                            : fexists(f->var, body);
    }
    case FormulaKind::Box:
    case FormulaKind::Diamond: {
      if (!is_core(f))
        throw ExpandError("extended expression under a modality");
      SubstMap m;
      for (auto& v : free_vars(f)) {
        if (shadow.count(v)) continue;
        TermPtr r = now_var(h, v);
        if (!(r->kind == TermKind::Var && r->var == v)) m.emplace(v, r);
      }
      if (m.empty()) return f;
      try {
        return substitute(f, m);
      } catch (const CaptureError& e) {
        throw ExpandError(std::string("bind-time resolution under modality: ") +
                          e.what());
      }
    }
  }
  return f;
}

}  // namespace

TermPtr mobilize(const StaticTrace& h, const TermPtr& e, const std::string& t) {
  return mob_term(h, e, t, {});
}
FormulaPtr mobilize(const StaticTrace& h, const FormulaPtr& e,
                    const std::string& t) {
  return mob_formula(h, e, t, {});
}

}  // namespace kaisar
