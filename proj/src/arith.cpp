#include "kaisar/arith.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <unistd.h>

#include "kaisar/analysis.hpp"

namespace kaisar {

namespace {

struct NotArithmetic : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonLinear : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct Blowup : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace

// ---------------------------------------------------------------------------
// Sequent image.

FormulaPtr sequent_image(const Sequent& s) {
  FormulaPtr ante = nullptr;
  for (auto& f : s.ante) ante = ante ? fand(ante, f) : f;
  FormulaPtr succ = nullptr;
  for (auto& f : s.succ) succ = succ ? f_or(succ, f) : f;
  FormulaPtr body;
  if (ante && succ) body = fimply(ante, succ);
  else if (succ) body = succ;
  else if (ante) body = fimply(ante, ffalse());
  else body = ffalse();
  VarSet fv = free_vars(body);
  for (auto it = fv.rbegin(); it != fv.rend(); ++it)
    body = fforall(*it, body);
  return body;
}

// ---------------------------------------------------------------------------
// Elaboration: replace division, fractional/negative powers and interpreted
// functions with fresh definition variables guarded by defining constraints.

namespace {

struct ElabState {
  VarSet used;
  std::vector<ElabDef>* defs;
};

struct AtomDef {
  Variable var;
  FormulaPtr constraint;
};

// Rewrites a term; interpreted nodes become fresh variables whose defining
// constraints are appended to `local` (and sources to the query defs).
TermPtr elab_term(const TermPtr& t, ElabState& st, std::vector<AtomDef>& local) {
  auto fresh = [&](const TermPtr& source) {
    Variable w = fresh_var("d", st.used);
    st.used.insert(w);
    st.defs->push_back({w, source});
    return w;
  };
  switch (t->kind) {
    case TermKind::Var:
    case TermKind::Lit:
      return t;
    case TermKind::Plus:
      return tplus(elab_term(t->a, st, local), elab_term(t->b, st, local));
    case TermKind::Minus:
      return tminus(elab_term(t->a, st, local), elab_term(t->b, st, local));
    case TermKind::Times:
      return ttimes(elab_term(t->a, st, local), elab_term(t->b, st, local));
    case TermKind::Neg:
      return tneg(elab_term(t->a, st, local));
    case TermKind::Divide: {
      TermPtr a = elab_term(t->a, st, local);
      TermPtr b = elab_term(t->b, st, local);
      Variable w = fresh(t);
      local.push_back({w, fand(fcmp(CmpOp::Eq, ttimes(tvar(w), b), a),
                               fcmp(CmpOp::Ne, b, tlit(0)))});
      return tvar(w);
    }
    case TermKind::Power: {
      TermPtr a = elab_term(t->a, st, local);
      const Rational& e = t->lit;
      if (is_integer(e) && e >= 0) return tpower(a, e);
      if (is_integer(e)) {  // negative integer: w * a^n = 1
        Rational n = -e;
        Variable w = fresh(t);
        local.push_back(
            {w, fcmp(CmpOp::Eq, ttimes(tvar(w), tpower(a, n)), tlit(1))});
        return tvar(w);
      }
      // fractional p/q in lowest terms, q >= 2
      Rational num(boost::multiprecision::numerator(e));
      Rational den(boost::multiprecision::denominator(e));
      Variable w = fresh(t);
      FormulaPtr d;
      if (num > 0)
        d = fcmp(CmpOp::Eq, tpower(tvar(w), den), tpower(a, num));
      else
        d = fcmp(CmpOp::Eq, ttimes(tpower(tvar(w), den), tpower(a, -num)),
                 tlit(1));
      bool even = (boost::multiprecision::numerator(den) % 2) == 0;
      if (even) d = fand(d, fcmp(CmpOp::Ge, tvar(w), tlit(0)));
      local.push_back({w, d});
      return tvar(w);
    }
    case TermKind::App: {
      TermPtr a = elab_term(t->a, st, local);
      Variable w = fresh(t);
      if (t->name == "abs") {
        local.push_back(
            {w, fand(fimply(fcmp(CmpOp::Ge, a, tlit(0)),
                            fcmp(CmpOp::Eq, tvar(w), a)),
                     fimply(fcmp(CmpOp::Lt, a, tlit(0)),
                            fcmp(CmpOp::Eq, tvar(w), tneg(a))))});
      } else if (t->name == "sqrt") {
        local.push_back({w, fand(fcmp(CmpOp::Eq, ttimes(tvar(w), tvar(w)), a),
                                 fcmp(CmpOp::Ge, tvar(w), tlit(0)))});
      } else if (t->name == "min" || t->name == "max") {
        TermPtr b = elab_term(t->b, st, local);
        CmpOp keep_a = t->name == "min" ? CmpOp::Le : CmpOp::Ge;
        local.push_back(
            {w, fand(fimply(fcmp(keep_a, a, b), fcmp(CmpOp::Eq, tvar(w), a)),
                     fimply(fcmp(cmp_negate(keep_a), a, b),
                            fcmp(CmpOp::Eq, tvar(w), b)))});
      } else {
        throw NotArithmetic("unknown function " + t->name);
      }
      return tvar(w);
    }
    default:
      throw NotArithmetic("non-arithmetic term " + print(t));
  }
}

FormulaPtr elab_formula(const FormulaPtr& f, bool pos, ElabState& st) {
  switch (f->kind) {
    case FormulaKind::True:
    case FormulaKind::False:
      return f;
    case FormulaKind::And:
      return fand(elab_formula(f->f1, pos, st), elab_formula(f->f2, pos, st));
    case FormulaKind::Or:
      return f_or(elab_formula(f->f1, pos, st), elab_formula(f->f2, pos, st));
    case FormulaKind::Imply:
      return fimply(elab_formula(f->f1, !pos, st),
                    elab_formula(f->f2, pos, st));
    case FormulaKind::Equiv:
      return fand(
          elab_formula(fimply(f->f1, f->f2), pos, st),
          elab_formula(fimply(f->f2, f->f1), pos, st));
    case FormulaKind::Not:
      return fnot(elab_formula(f->f1, !pos, st));
    case FormulaKind::Forall:
      return fforall(f->var, elab_formula(f->f1, pos, st));
    case FormulaKind::Exists:
      return fexists(f->var, elab_formula(f->f1, pos, st));
    case FormulaKind::Cmp: {
      std::vector<AtomDef> local;
      TermPtr a = elab_term(f->t1, st, local);
      TermPtr b = elab_term(f->t2, st, local);
      FormulaPtr atom = fcmp(f->op, a, b);
      if (local.empty()) return atom;
      if (pos) {
        // forall d. (defs -> atom)
        FormulaPtr defs = nullptr;
        for (auto& d : local) defs = defs ? fand(defs, d.constraint) : d.constraint;
        FormulaPtr body = fimply(defs, atom);
        for (auto it = local.rbegin(); it != local.rend(); ++it)
          body = fforall(it->var, body);
        return body;
      }
      // exists d. (defs /\ atom)
      FormulaPtr body = atom;
      for (auto it = local.rbegin(); it != local.rend(); ++it)
        body = fexists(it->var, fand(it->constraint, body));
      return body;
    }
    default:
      throw NotArithmetic("non-arithmetic formula");
  }
}

}  // namespace

ArithQuery elaborate(const FormulaPtr& closed_formula) {
  ArithQuery q;
  q.original = closed_formula;
  ElabState st{all_vars(closed_formula), &q.defs};
  q.elaborated = elab_formula(closed_formula, true, st);
  q.hash = fnv1a(print(q.elaborated));
  return q;
}

// ---------------------------------------------------------------------------
// Numeric falsification.

namespace {

// Peel the outermost universal quantifiers; returns binder order.
FormulaPtr peel_foralls(const FormulaPtr& f, std::vector<Variable>& vars) {
  FormulaPtr g = f;
  while (g->kind == FormulaKind::Forall) {
    vars.push_back(g->var);
    g = g->f1;
  }
  return g;
}

ArithEvidence counterexample(const ArithQuery& q, const State& s, bool exact,
                             const std::string& method) {
  // Re-check: the original matrix must be definitely false at s.
  std::vector<Variable> vars;
  FormulaPtr matrix = peel_foralls(q.original, vars);
  Budget b;
  b.seed = 9001;
  std::mt19937_64 rng(b.seed);
  TV tv;
  try {
    tv = eval_formula(matrix, s, b, {}, &rng);
  } catch (const EvalError&) {
    tv = TV::Unknown;
  }
  ArithEvidence e;
  e.query_hash = q.hash;
  if (tv != TV::False) {
    e.verdict = Verdict::Unknown;
    e.method = method;
    e.detail = "counterexample failed re-check";
    return e;
  }
  e.verdict = Verdict::CounterExample;
  e.method = method;
  e.cex = s;
  e.cex_exact = exact;
  return e;
}

}  // namespace

namespace {

int quant_depth(const FormulaPtr& f) {
  if (!f) return 0;
  int d = std::max(quant_depth(f->f1), quant_depth(f->f2));
  if (f->kind == FormulaKind::Forall || f->kind == FormulaKind::Exists) ++d;
  return d;
}

}  // namespace

ArithEvidence falsify(const ArithQuery& q, int samples, std::uint64_t seed) {
  std::vector<Variable> vars;
  FormulaPtr matrix = peel_foralls(q.original, vars);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  Budget b;
  b.seed = seed;
  // Each residual quantifier multiplies the cost of one matrix evaluation
  // by the per-binder sample count; shrink the outer sample budget so the
  // total work stays bounded (and deterministic).
  {
    long cost = 1;
    for (int d = quant_depth(matrix); d > 0 && cost < (1L << 30); --d)
      cost *= b.reals;
    long max_outer = std::max<long>(1, 16L * samples / cost);
    samples = static_cast<int>(std::min<long>(samples, max_outer));
  }

  static const Rational grid[] = {Rational(-10), Rational(-1),
                                  Rational(-1, 2), Rational(0),
                                  Rational(1, 2), Rational(1), Rational(10)};
  const int g = 7;
  auto try_state = [&](const State& s) -> bool {
    TV tv;
    try {
      tv = eval_formula(matrix, s, b, {}, &rng);
    } catch (const EvalError&) {
      // fall back to floating point
      State a(Mode::Approx);
      for (auto& [v, val] : s.exact_map()) a.set(v, to_double(val));
      try {
        tv = eval_formula(matrix, a, b, {}, &rng);
      } catch (const EvalError&) {
        return false;
      }
      return tv == TV::False;
    }
    return tv == TV::False;
  };

  int used = 0;
  // Grid pass (full product only for few variables).
  if ((int)vars.size() <= 3) {
    long combos = 1;
    for (size_t i = 0; i < vars.size(); ++i) combos *= g;
    for (long c = 0; c < combos && used < samples; ++c, ++used) {
      State s(Mode::Exact);
      long rest = c;
      for (auto& v : vars) {
        s.set(v, grid[rest % g]);
        rest /= g;
      }
      if (try_state(s)) return counterexample(q, s, true, "falsify");
    }
  }
  for (; used < samples; ++used) {
    State s(Mode::Exact);
    for (auto& v : vars) s.set(v, sample_rational(rng));
    if (try_state(s)) return counterexample(q, s, true, "falsify");
  }
  ArithEvidence e;
  e.verdict = Verdict::Unknown;
  e.method = "falsify";
  e.query_hash = q.hash;
  return e;
}

// ---------------------------------------------------------------------------
// Polynomials over exact rationals.

namespace {

using Monomial = std::map<Variable, int>;
using Poly = std::map<Monomial, Rational>;

constexpr size_t kPolyCap = 5000;

void poly_add_term(Poly& p, const Monomial& m, const Rational& c) {
  if (c == 0) return;
  auto it = p.find(m);
  if (it == p.end()) {
    p.emplace(m, c);
    if (p.size() > kPolyCap) throw Blowup("polynomial too large");
  } else {
    it->second += c;
    if (it->second == 0) p.erase(it);
  }
}

Poly poly_add(const Poly& a, const Poly& b) {
  Poly r = a;
  for (auto& [m, c] : b) poly_add_term(r, m, c);
  return r;
}

Poly poly_neg(const Poly& a) {
  Poly r;
  for (auto& [m, c] : a) r.emplace(m, -c);
  return r;
}

Poly poly_mul(const Poly& a, const Poly& b) {
  Poly r;
  for (auto& [ma, ca] : a)
    for (auto& [mb, cb] : b) {
      Monomial m = ma;
      for (auto& [v, d] : mb) m[v] += d;
      poly_add_term(r, m, ca * cb);
    }
  return r;
}

Poly poly_of(const TermPtr& t) {
  switch (t->kind) {
    case TermKind::Var:
      return {{Monomial{{t->var, 1}}, Rational(1)}};
    case TermKind::Lit:
      return t->lit == 0 ? Poly{} : Poly{{Monomial{}, t->lit}};
    case TermKind::Plus:
      return poly_add(poly_of(t->a), poly_of(t->b));
    case TermKind::Minus:
      return poly_add(poly_of(t->a), poly_neg(poly_of(t->b)));
    case TermKind::Neg:
      return poly_neg(poly_of(t->a));
    case TermKind::Times:
      return poly_mul(poly_of(t->a), poly_of(t->b));
    case TermKind::Divide: {
      Poly b = poly_of(t->b);
      if (b.size() == 1 && b.begin()->first.empty()) {
        Rational d = b.begin()->second;
        Poly a = poly_of(t->a);
        Poly r;
        for (auto& [m, c] : a) r.emplace(m, c / d);
        return r;
      }
      if (b.empty()) throw NonLinear("division by zero polynomial");
      throw NonLinear("division by non-constant");
    }
    case TermKind::Power: {
      if (!is_integer(t->lit) || t->lit < 0 || t->lit > 64)
        throw NonLinear("non-polynomial power");
      long n = (long)to_double(t->lit);
      Poly r{{Monomial{}, Rational(1)}};
      Poly a = poly_of(t->a);
      for (long i = 0; i < n; ++i) r = poly_mul(r, a);
      return r;
    }
    default:
      throw NonLinear("non-polynomial term " + print(t));
  }
}

bool cmp_holds(CmpOp op, const Rational& c) {
  switch (op) {
    case CmpOp::Lt: return c < 0;
    case CmpOp::Le: return c <= 0;
    case CmpOp::Eq: return c == 0;
    case CmpOp::Ge: return c >= 0;
    case CmpOp::Gt: return c > 0;
    case CmpOp::Ne: return c != 0;
  }
  return false;
}

// Three-valued evaluation deciding atoms whose polynomial normal form is
// constant (including identically zero).
std::optional<bool> peval(const FormulaPtr& f) {
  switch (f->kind) {
    case FormulaKind::True: return true;
    case FormulaKind::False: return false;
    case FormulaKind::Cmp: {
      Poly p;
      try {
        p = poly_add(poly_of(f->t1), poly_neg(poly_of(f->t2)));
      } catch (const NonLinear&) {
        return std::nullopt;
      }
      if (p.empty()) return cmp_holds(f->op, Rational(0));
      if (p.size() == 1 && p.begin()->first.empty())
        return cmp_holds(f->op, p.begin()->second);
      return std::nullopt;
    }
    case FormulaKind::And: {
      auto a = peval(f->f1), b = peval(f->f2);
      if (a == false || b == false) return false;
      if (a == true && b == true) return true;
      return std::nullopt;
    }
    case FormulaKind::Or: {
      auto a = peval(f->f1), b = peval(f->f2);
      if (a == true || b == true) return true;
      if (a == false && b == false) return false;
      return std::nullopt;
    }
    case FormulaKind::Imply: {
      auto a = peval(f->f1), b = peval(f->f2);
      if (a == false || b == true) return true;
      if (a == true && b == false) return false;
      return std::nullopt;
    }
    case FormulaKind::Equiv: {
      auto a = peval(f->f1), b = peval(f->f2);
      if (a && b) return *a == *b;
      return std::nullopt;
    }
    case FormulaKind::Not: {
      auto a = peval(f->f1);
      if (a) return !*a;
      return std::nullopt;
    }
    case FormulaKind::Forall:
    case FormulaKind::Exists:
      return peval(f->f1);
    default:
      return std::nullopt;
  }
}

}  // namespace

ArithEvidence decide_poly(const ArithQuery& q) {
  ArithEvidence e;
  e.method = "poly";
  e.query_hash = q.hash;
  // Works on the un-elaborated form: constant-by-normalization atoms keep
  // their shape there (poly_of divides by constant denominators exactly).
  std::optional<bool> r;
  try {
    r = peval(q.original);
  } catch (const Blowup&) {
    r = std::nullopt;
  }
  e.verdict = (r == true) ? Verdict::Valid : Verdict::Unknown;
  return e;
}

// ---------------------------------------------------------------------------
// Fourier-Motzkin elimination over exact rationals.

namespace {

struct Lin {
  std::map<Variable, Rational> c;
  Rational k;
  bool is_const() const { return c.empty(); }
};

enum class LOp { Lt, Le, Eq };  // lin (op) 0

struct LAtom {
  Lin l;
  LOp op;
};

using Conj = std::vector<LAtom>;
using Dnf = std::vector<Conj>;

struct FmCtx {
  size_t atoms_left = 1000000;
  std::chrono::steady_clock::time_point deadline;
  void charge(size_t n) {
    if (n > atoms_left) throw Blowup("too many atoms");
    atoms_left -= n;
    if (std::chrono::steady_clock::now() > deadline)
      throw Blowup("deadline exceeded");
  }
};

Lin lin_of_poly(const Poly& p) {
  Lin l;
  for (auto& [m, c] : p) {
    if (m.empty()) {
      l.k = c;
    } else if (m.size() == 1 && m.begin()->second == 1) {
      l.c[m.begin()->first] = c;
    } else {
      throw NonLinear("nonlinear atom");
    }
  }
  return l;
}

Lin lin_neg(const Lin& a) {
  Lin r;
  r.k = -a.k;
  for (auto& [v, c] : a.c) r.c.emplace(v, -c);
  return r;
}

Lin lin_sub(const Lin& a, const Lin& b) {
  Lin r = a;
  r.k -= b.k;
  for (auto& [v, c] : b.c) {
    r.c[v] -= c;
    if (r.c[v] == 0) r.c.erase(v);
  }
  return r;
}

Lin lin_scale(const Lin& a, const Rational& s) {
  Lin r;
  r.k = a.k * s;
  for (auto& [v, c] : a.c) if (c * s != 0) r.c.emplace(v, c * s);
  return r;
}

// nullopt: undetermined; otherwise truth of a constant atom.
std::optional<bool> atom_const(const LAtom& a) {
  if (!a.l.is_const()) return std::nullopt;
  switch (a.op) {
    case LOp::Lt: return a.l.k < 0;
    case LOp::Le: return a.l.k <= 0;
    case LOp::Eq: return a.l.k == 0;
  }
  return std::nullopt;
}

// Drops true constants; returns false if the conjunct is unsatisfiable.
bool simplify_conj(Conj& c) {
  Conj out;
  for (auto& a : c) {
    auto t = atom_const(a);
    if (t == false) return false;
    if (t == true) continue;
    out.push_back(a);
  }
  c = std::move(out);
  return true;
}

Dnf dnf_and(const Dnf& a, const Dnf& b, FmCtx& ctx) {
  Dnf r;
  for (auto& ca : a)
    for (auto& cb : b) {
      ctx.charge(ca.size() + cb.size());
      Conj c = ca;
      c.insert(c.end(), cb.begin(), cb.end());
      if (simplify_conj(c)) r.push_back(std::move(c));
    }
  return r;
}

// Negation of a single atom as a (1- or 2-way) disjunction of atoms.
std::vector<LAtom> atom_negs(const LAtom& a) {
  switch (a.op) {
    case LOp::Lt: return {{lin_neg(a.l), LOp::Le}};
    case LOp::Le: return {{lin_neg(a.l), LOp::Lt}};
    case LOp::Eq: return {{a.l, LOp::Lt}, {lin_neg(a.l), LOp::Lt}};
  }
  return {};
}

Dnf dnf_neg(const Dnf& d, FmCtx& ctx) {
  Dnf acc{{}};  // neutral: single empty conjunct
  for (auto& conj : d) {
    // ¬conj = \/ of negated literals; distribute into acc.
    Dnf next;
    for (auto& acc_c : acc)
      for (auto& lit : conj)
        for (auto& na : atom_negs(lit)) {
          ctx.charge(acc_c.size() + 1);
          Conj c = acc_c;
          c.push_back(na);
          if (simplify_conj(c)) next.push_back(std::move(c));
        }
    acc = std::move(next);
    if (acc.empty()) break;  // already unsatisfiable
  }
  return acc;
}

void elim_var_conj(const Variable& x, Conj& c, FmCtx& ctx) {
  // An equality involving x pins it: substitute and drop.
  for (size_t i = 0; i < c.size(); ++i) {
    if (c[i].op != LOp::Eq) continue;
    auto it = c[i].l.c.find(x);
    if (it == c[i].l.c.end()) continue;
    Rational coef = it->second;
    Lin rest = c[i].l;
    rest.c.erase(x);
    Lin sol = lin_scale(rest, Rational(-1) / coef);  // x = sol
    Conj out;
    for (size_t j = 0; j < c.size(); ++j) {
      if (j == i) continue;
      LAtom a = c[j];
      auto jx = a.l.c.find(x);
      if (jx != a.l.c.end()) {
        Rational cx = jx->second;
        a.l.c.erase(x);
        Lin sub = lin_scale(sol, cx);
        a.l.k += sub.k;
        for (auto& [v, cv] : sub.c) {
          a.l.c[v] += cv;
          if (a.l.c[v] == 0) a.l.c.erase(v);
        }
      }
      out.push_back(std::move(a));
    }
    c = std::move(out);
    return;
  }
  // Partition inequalities into lower/upper bounds on x.
  std::vector<std::pair<Lin, bool>> lowers, uppers;  // bound term, strict
  Conj rest;
  for (auto& a : c) {
    auto it = a.l.c.find(x);
    if (it == a.l.c.end()) {
      rest.push_back(a);
      continue;
    }
    Rational coef = it->second;
    Lin b = a.l;
    b.c.erase(x);
    b = lin_scale(b, Rational(-1) / coef);  // x (op) b after dividing
    bool strict = a.op == LOp::Lt;
    if (coef > 0) uppers.push_back({b, strict});  // x < / <= b
    else lowers.push_back({b, strict});           // x > / >= b
  }
  for (auto& [lo, lo_s] : lowers)
    for (auto& [hi, hi_s] : uppers) {
      ctx.charge(1);
      rest.push_back({lin_sub(lo, hi), (lo_s || hi_s) ? LOp::Lt : LOp::Le});
    }
  c = std::move(rest);
}

Dnf elim_exists(const Variable& x, Dnf d, FmCtx& ctx) {
  Dnf r;
  for (auto& c : d) {
    elim_var_conj(x, c, ctx);
    if (simplify_conj(c)) r.push_back(std::move(c));
  }
  return r;
}

// DNF of an NNF formula with quantifiers eliminated on the way.
Dnf dnf_of(const FormulaPtr& f, FmCtx& ctx) {
  switch (f->kind) {
    case FormulaKind::True: return {{}};
    case FormulaKind::False: return {};
    case FormulaKind::Cmp: {
      Lin l = lin_of_poly(
          poly_add(poly_of(f->t1), poly_neg(poly_of(f->t2))));
      ctx.charge(2);
      Dnf r;
      auto push1 = [&](LAtom a) {
        Conj c{std::move(a)};
        if (simplify_conj(c)) r.push_back(std::move(c));
      };
      switch (f->op) {
        case CmpOp::Lt: push1({l, LOp::Lt}); break;
        case CmpOp::Le: push1({l, LOp::Le}); break;
        case CmpOp::Eq: push1({l, LOp::Eq}); break;
        case CmpOp::Ge: push1({lin_neg(l), LOp::Le}); break;
        case CmpOp::Gt: push1({lin_neg(l), LOp::Lt}); break;
        case CmpOp::Ne:
          push1({l, LOp::Lt});
          push1({lin_neg(l), LOp::Lt});
          break;
      }
      return r;
    }
    case FormulaKind::And:
      return dnf_and(dnf_of(f->f1, ctx), dnf_of(f->f2, ctx), ctx);
    case FormulaKind::Or: {
      Dnf a = dnf_of(f->f1, ctx);
      Dnf b = dnf_of(f->f2, ctx);
      a.insert(a.end(), b.begin(), b.end());
      return a;
    }
    case FormulaKind::Exists:
      return elim_exists(f->var, dnf_of(f->f1, ctx), ctx);
    case FormulaKind::Forall: {
      // forall x g = ¬ exists x ¬g
      Dnf ng = dnf_of(nnf(fnot(f->f1)), ctx);
      return dnf_neg(elim_exists(f->var, std::move(ng), ctx), ctx);
    }
    case FormulaKind::Not: {
      // NNF leaves negation only over atoms; normalize and recurse.
      if (f->f1->kind == FormulaKind::Cmp)
        return dnf_of(fcmp(cmp_negate(f->f1->op), f->f1->t1, f->f1->t2), ctx);
      FormulaPtr n = nnf(f);
      if (n->kind == FormulaKind::Not)
        throw NonLinear("non-arithmetic negation");
      return dnf_of(n, ctx);
    }
    default:
      throw NonLinear("non-arithmetic formula in linear decision");
  }
}

// Substitute known values into a linear form.
Lin lin_subst(const Lin& l, const std::map<Variable, Rational>& vals) {
  Lin r;
  r.k = l.k;
  for (auto& [v, c] : l.c) {
    auto it = vals.find(v);
    if (it != vals.end()) r.k += c * it->second;
    else r.c.emplace(v, c);
  }
  return r;
}

bool atom_sat_at(const LAtom& a, const std::map<Variable, Rational>& vals) {
  LAtom s{lin_subst(a.l, vals), a.op};
  auto t = atom_const(s);
  return t == true;
}

// Pick a value for the only remaining variable `x` of a one-variable
// conjunct (other variables already substituted away by `vals`).
std::optional<Rational> choose_value(const Variable& x, const Conj& conj,
                                     const std::map<Variable, Rational>& vals) {
  std::optional<Rational> eq;
  std::optional<std::pair<Rational, bool>> lo, hi;  // value, strict
  for (auto& a0 : conj) {
    LAtom a{lin_subst(a0.l, vals), a0.op};
    auto it = a.l.c.find(x);
    if (it == a.l.c.end()) {
      if (atom_const(a) == false) return std::nullopt;
      continue;
    }
    Rational coef = it->second;
    Rational bound = -(a.l.k) / coef;
    if (a.op == LOp::Eq) {
      if (eq && *eq != bound) return std::nullopt;
      eq = bound;
      continue;
    }
    bool strict = a.op == LOp::Lt;
    if (coef > 0) {  // x </<= bound
      if (!hi || bound < hi->first || (bound == hi->first && strict))
        hi = {bound, strict};
    } else {  // x >/>= bound
      if (!lo || bound > lo->first || (bound == lo->first && strict))
        lo = {bound, strict};
    }
  }
  Rational v;
  if (eq) v = *eq;
  else if (lo && hi) {
    if (lo->first < hi->first) v = (lo->first + hi->first) / 2;
    else if (lo->first == hi->first && !lo->second && !hi->second) v = lo->first;
    else return std::nullopt;
  } else if (lo) {
    v = lo->first + 1;
  } else if (hi) {
    v = hi->first - 1;
  } else {
    v = 0;
  }
  // verify the full conjunct
  std::map<Variable, Rational> all = vals;
  all.emplace(x, v);
  for (auto& a : conj)
    if (!atom_sat_at(a, all)) return std::nullopt;
  return v;
}

}  // namespace

ArithEvidence decide_linear(const ArithQuery& q, double deadline_sec) {
  ArithEvidence e;
  e.method = "linear";
  e.query_hash = q.hash;
  e.verdict = Verdict::Unknown;

  FmCtx ctx;
  ctx.deadline = std::chrono::steady_clock::now() +
                 std::chrono::microseconds((long)(deadline_sec * 1e6));
  try {
    // Validity of forall v. M  <=>  unsat of exists v. ¬M.
    std::vector<Variable> vars;
    FormulaPtr matrix = peel_foralls(q.elaborated, vars);
    for (auto& v : free_vars(matrix))
      if (std::find(vars.begin(), vars.end(), v) == vars.end())
        vars.push_back(v);
    Dnf d0 = dnf_of(nnf(fnot(matrix)), ctx);

    // Elimination order: innermost binder first.
    std::vector<Variable> order(vars.rbegin(), vars.rend());
    bool any_sat = false;
    for (auto& conj0 : d0) {
      // Chain of conjuncts: chain[j] has order[j..] still free.
      std::vector<Conj> chain{conj0};
      bool dead = false;
      for (auto& x : order) {
        Conj c = chain.back();
        elim_var_conj(x, c, ctx);
        if (!simplify_conj(c)) {
          dead = true;
          break;
        }
        chain.push_back(std::move(c));
      }
      if (dead) continue;
      any_sat = true;  // the negation is satisfiable: not Valid
      // Back-substitute a witness for the negation.
      std::map<Variable, Rational> vals;
      bool ok = true;
      for (size_t j = order.size(); j-- > 0;) {
        auto v = choose_value(order[j], chain[j], vals);
        if (!v) {
          ok = false;
          break;
        }
        vals.emplace(order[j], *v);
      }
      if (!ok) continue;  // witness extraction failed; try other conjuncts
      State s(Mode::Exact);
      for (auto& [v, val] : vals) s.set(v, val);
      ArithEvidence cex = counterexample(q, s, true, "linear");
      if (cex.verdict == Verdict::CounterExample) return cex;
      return e;  // inconsistent witness: stay Unknown rather than guess
    }
    e.verdict = any_sat ? Verdict::Unknown : Verdict::Valid;
    return e;
  } catch (const NonLinear&) {
    e.detail = "nonlinear";
    return e;
  } catch (const Blowup& b) {
    e.detail = b.what();
    return e;
  }
}

// ---------------------------------------------------------------------------
// SMT-LIB oracle.

namespace {

std::string smt_sym(const Variable& v) {
  std::string s = v.base;
  if (v.index) s += std::to_string(*v.index);
  if (v.primed) s += "_p";
  return s;
}

std::string smt_rat(const Rational& q) {
  auto num = boost::multiprecision::numerator(q);
  auto den = boost::multiprecision::denominator(q);
  std::ostringstream o;
  if (den == 1) {
    if (num < 0) o << "(- " << -num << ")";
    else o << num;
  } else {
    o << "(/ ";
    if (num < 0) o << "(- " << -num << ")";
    else o << num;
    o << " " << den << ")";
  }
  return o.str();
}

void smt_term(std::ostream& o, const TermPtr& t) {
  switch (t->kind) {
    case TermKind::Var: o << smt_sym(t->var); return;
    case TermKind::Lit: o << smt_rat(t->lit); return;
    case TermKind::Plus:
      o << "(+ "; smt_term(o, t->a); o << " "; smt_term(o, t->b); o << ")";
      return;
    case TermKind::Minus:
      o << "(- "; smt_term(o, t->a); o << " "; smt_term(o, t->b); o << ")";
      return;
    case TermKind::Times:
      o << "(* "; smt_term(o, t->a); o << " "; smt_term(o, t->b); o << ")";
      return;
    case TermKind::Divide:
      o << "(/ "; smt_term(o, t->a); o << " "; smt_term(o, t->b); o << ")";
      return;
    case TermKind::Neg:
      o << "(- "; smt_term(o, t->a); o << ")";
      return;
    case TermKind::Power: {
      if (!is_integer(t->lit) || t->lit < 0)
        throw NotArithmetic("non-integer power in oracle query");
      long n = (long)to_double(t->lit);
      if (n == 0) { o << "1"; return; }
      if (n == 1) { smt_term(o, t->a); return; }
      o << "(*";
      for (long i = 0; i < n; ++i) { o << " "; smt_term(o, t->a); }
      o << ")";
      return;
    }
    case TermKind::App:
      if (t->name == "abs") {
        o << "(abs "; smt_term(o, t->a); o << ")";
        return;
      }
      throw NotArithmetic("function in oracle query: " + t->name);
    default:
      throw NotArithmetic("non-arithmetic term in oracle query");
  }
}

void smt_formula(std::ostream& o, const FormulaPtr& f) {
  switch (f->kind) {
    case FormulaKind::True: o << "true"; return;
    case FormulaKind::False: o << "false"; return;
    case FormulaKind::Cmp: {
      if (f->op == CmpOp::Ne) {
        o << "(not (= ";
        smt_term(o, f->t1); o << " "; smt_term(o, f->t2);
        o << "))";
        return;
      }
      const char* op = "=";
      switch (f->op) {
        case CmpOp::Lt: op = "<"; break;
        case CmpOp::Le: op = "<="; break;
        case CmpOp::Eq: op = "="; break;
        case CmpOp::Ge: op = ">="; break;
        case CmpOp::Gt: op = ">"; break;
        default: break;
      }
      o << "(" << op << " ";
      smt_term(o, f->t1); o << " "; smt_term(o, f->t2);
      o << ")";
      return;
    }
    case FormulaKind::And:
      o << "(and "; smt_formula(o, f->f1); o << " "; smt_formula(o, f->f2);
      o << ")";
      return;
    case FormulaKind::Or:
      o << "(or "; smt_formula(o, f->f1); o << " "; smt_formula(o, f->f2);
      o << ")";
      return;
    case FormulaKind::Imply:
      o << "(=> "; smt_formula(o, f->f1); o << " "; smt_formula(o, f->f2);
      o << ")";
      return;
    case FormulaKind::Equiv:
      o << "(= "; smt_formula(o, f->f1); o << " "; smt_formula(o, f->f2);
      o << ")";
      return;
    case FormulaKind::Not:
      o << "(not "; smt_formula(o, f->f1); o << ")";
      return;
    case FormulaKind::Forall:
      o << "(forall ((" << smt_sym(f->var) << " Real)) ";
      smt_formula(o, f->f1);
      o << ")";
      return;
    case FormulaKind::Exists:
      o << "(exists ((" << smt_sym(f->var) << " Real)) ";
      smt_formula(o, f->f1);
      o << ")";
      return;
    default:
      throw NotArithmetic("non-arithmetic formula in oracle query");
  }
}

}  // namespace

std::string smtlib_text(const ArithQuery& q) {
  std::vector<Variable> vars;
  FormulaPtr matrix = peel_foralls(q.elaborated, vars);
  std::ostringstream o;
  o << "(set-logic NRA)\n";
  for (auto& v : vars) o << "(declare-const " << smt_sym(v) << " Real)\n";
  o << "(assert (not ";
  smt_formula(o, matrix);
  o << "))\n(check-sat)\n(get-model)\n";
  return o.str();
}

namespace {

std::vector<std::string> sexp_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == '(' || ch == ')') {
      if (!cur.empty()) { out.push_back(cur); cur.clear(); }
      out.push_back(std::string(1, ch));
    } else if (isspace((unsigned char)ch)) {
      if (!cur.empty()) { out.push_back(cur); cur.clear(); }
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// Parse a numeric value expression: num | (- v) | (/ a b).
std::optional<Rational> sexp_value(const std::vector<std::string>& tok,
                                   size_t& i) {
  if (i >= tok.size()) return std::nullopt;
  if (tok[i] == "(") {
    ++i;
    if (i >= tok.size()) return std::nullopt;
    std::string op = tok[i++];
    if (op == "-") {
      auto v = sexp_value(tok, i);
      if (!v || i >= tok.size() || tok[i] != ")") return std::nullopt;
      ++i;
      return -*v;
    }
    if (op == "/") {
      auto a = sexp_value(tok, i);
      auto b = sexp_value(tok, i);
      if (!a || !b || *b == 0 || i >= tok.size() || tok[i] != ")")
        return std::nullopt;
      ++i;
      return *a / *b;
    }
    return std::nullopt;
  }
  try {
    Rational q = rational_of(tok[i]);
    ++i;
    return q;
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

}  // namespace

ArithEvidence oracle_query(const ArithQuery& q, const std::string& cmd,
                           double timeout_sec) {
  ArithEvidence e;
  e.method = "oracle";
  e.query_hash = q.hash;
  e.verdict = Verdict::Unknown;

  std::string text;
  try {
    text = smtlib_text(q);
  } catch (const NotArithmetic& x) {
    e.detail = x.what();
    return e;
  }
  char path[] = "/tmp/kaisar_query_XXXXXX.smt2";
  int fd = mkstemps(path, 5);
  if (fd < 0) {
    e.detail = "cannot create query file";
    return e;
  }
  FILE* out = fdopen(fd, "w");
  fputs(text.c_str(), out);
  fclose(out);

  std::ostringstream cmdline;
  cmdline << "timeout " << (long)(timeout_sec + 0.999) << " " << cmd << " "
          << path << " 2>/dev/null";
  FILE* pipe = popen(cmdline.str().c_str(), "r");
  std::string output;
  if (pipe) {
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) output.append(buf, n);
    int status = pclose(pipe);
    if (status != 0 && output.find("sat") == std::string::npos) {
      e.detail = "oracle exited with status " + std::to_string(status);
      std::remove(path);
      return e;
    }
  } else {
    e.detail = "cannot run oracle";
    std::remove(path);
    return e;
  }
  std::remove(path);

  std::istringstream lines(output);
  std::string first;
  while (std::getline(lines, first) && first.empty()) {}
  if (first == "unsat") {
    e.verdict = Verdict::Valid;
    return e;
  }
  if (first != "sat") {
    e.detail = "oracle answered: " + (first.empty() ? "<nothing>" : first);
    return e;
  }
  // sat: scan the model for define-fun entries and re-validate.
  auto tok = sexp_tokens(output);
  State s(Mode::Exact);
  for (size_t i = 0; i + 1 < tok.size(); ++i) {
    if (tok[i] != "define-fun") continue;
    std::string name = tok[i + 1];
    size_t j = i + 2;
    // skip "( )" parameter list and the sort
    while (j < tok.size() && (tok[j] == "(" || tok[j] == ")")) ++j;
    if (j < tok.size() && tok[j] == "Real") ++j;
    auto v = sexp_value(tok, j);
    if (!v) continue;
    // map the sanitized symbol back to a variable
    std::vector<Variable> vars;
    peel_foralls(q.elaborated, vars);
    for (auto& var : vars)
      if (smt_sym(var) == name) s.set(var, *v);
  }
  return counterexample(q, s, true, "oracle");
}

// ---------------------------------------------------------------------------
// Pipeline.

ArithEvidence decide(const FormulaPtr& closed_formula,
                     const DecideOptions& opt) {
  ArithQuery q;
  try {
    q = elaborate(closed_formula);
  } catch (const std::exception& x) {
    ArithEvidence e;
    e.method = "elaborate";
    e.detail = x.what();
    return e;
  }
  ArithEvidence e = falsify(q, opt.falsify_samples, opt.seed);
  if (e.verdict == Verdict::CounterExample) return e;
  e = decide_poly(q);
  if (e.verdict == Verdict::Valid) return e;
  e = decide_linear(q, opt.linear_deadline);
  if (e.verdict != Verdict::Unknown) return e;
  if (!opt.oracle_cmd.empty())
    return oracle_query(q, opt.oracle_cmd, opt.oracle_timeout);
  return e;
}

ArithEvidence decide(const Sequent& goal, const DecideOptions& opt) {
  return decide(sequent_image(goal), opt);
}

}  // namespace kaisar
