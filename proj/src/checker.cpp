#include "kaisar/checker.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "kaisar/parser.hpp"

namespace kaisar {

// ---------------------------------------------------------------------------
// Node constructors.

FPPtr fp_fact(PatternPtr pat, TermPtr term_reading) {
  ForwardProof fp;
  fp.kind = FPKind::Fact;
  fp.pat = std::move(pat);
  fp.term = std::move(term_reading);
  return std::make_shared<const ForwardProof>(std::move(fp));
}

FPPtr fp_app(FPPtr fn, FPPtr arg) {
  ForwardProof fp;
  fp.kind = FPKind::App;
  fp.fn = std::move(fn);
  fp.arg = std::move(arg);
  return std::make_shared<const ForwardProof>(std::move(fp));
}

FPPtr fp_inst(FPPtr fn, TermPtr t) {
  ForwardProof fp;
  fp.kind = FPKind::Inst;
  fp.fn = std::move(fn);
  fp.term = std::move(t);
  return std::make_shared<const ForwardProof>(std::move(fp));
}

SPPtr sp_node(StructuredProof sp) {
  return std::make_shared<const StructuredProof>(std::move(sp));
}

// ---------------------------------------------------------------------------
// Surface identifiers naming abbreviations.

static bool is_abbrev_ident(const Variable& v) {
  if (v.primed || v.index) return false;
  return v.base == "_" || (v.base.size() > 1 && v.base.back() == '_');
}

TermPtr as_proof_term(const TermPtr& t) {
  if (!t) return t;
  switch (t->kind) {
    case TermKind::Var:
      return is_abbrev_ident(t->var) ? tabbrev(t->var.str()) : t;
    case TermKind::Lit:
    case TermKind::Abbrev:
      return t;
    case TermKind::Power:
      return tpower(as_proof_term(t->a), t->lit);
    case TermKind::App:
      return tapp(t->name, as_proof_term(t->a), as_proof_term(t->b));
    case TermKind::Nominal:
      return tnominal(t->name, as_proof_term(t->a));
    case TermKind::Now:
      return tnow(as_proof_term(t->a));
    default: {
      Term copy = *t;
      copy.a = as_proof_term(t->a);
      copy.b = as_proof_term(t->b);
      return std::make_shared<const Term>(std::move(copy));
    }
  }
}

FormulaPtr as_proof_formula(const FormulaPtr& f) {
  if (!f) return f;
  switch (f->kind) {
    case FormulaKind::True:
    case FormulaKind::False:
    case FormulaKind::NominalF:
    case FormulaKind::AbbrevF:
      return f;
    case FormulaKind::Cmp:
      return fcmp(f->op, as_proof_term(f->t1), as_proof_term(f->t2));
    case FormulaKind::And:
      return fand(as_proof_formula(f->f1), as_proof_formula(f->f2));
    case FormulaKind::Or:
      return f_or(as_proof_formula(f->f1), as_proof_formula(f->f2));
    case FormulaKind::Imply:
      return fimply(as_proof_formula(f->f1), as_proof_formula(f->f2));
    case FormulaKind::Equiv:
      return fequiv(as_proof_formula(f->f1), as_proof_formula(f->f2));
    case FormulaKind::Not:
      return fnot(as_proof_formula(f->f1));
    case FormulaKind::Forall:
      return fforall(f->var, as_proof_formula(f->f1));
    case FormulaKind::Exists:
      return fexists(f->var, as_proof_formula(f->f1));
    case FormulaKind::Box:
      return fbox(as_proof_program(f->prog), as_proof_formula(f->f1));
    case FormulaKind::Diamond:
      return fdiamond(as_proof_program(f->prog), as_proof_formula(f->f1));
  }
  return f;
}

ProgramPtr as_proof_program(const ProgramPtr& p) {
  if (!p) return p;
  switch (p->kind) {
    case ProgramKind::Assign:
      return passign(p->var, as_proof_term(p->term));
    case ProgramKind::AssignAny:
      return p;
    case ProgramKind::Test:
      return ptest(as_proof_formula(p->fml));
    case ProgramKind::Seq:
      return pseq(as_proof_program(p->a), as_proof_program(p->b));
    case ProgramKind::Choice:
      return pchoice(as_proof_program(p->a), as_proof_program(p->b));
    case ProgramKind::Loop:
      return ploop(as_proof_program(p->a));
    case ProgramKind::ODE: {
      std::vector<ODEEq> eqs;
      for (auto& e : p->odes) eqs.push_back({e.var, as_proof_term(e.rhs)});
      return pode(std::move(eqs), as_proof_formula(p->fml));
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Builtin fact library.

const std::vector<std::pair<std::string, FormulaPtr>>& fact_library() {
  static const std::vector<std::pair<std::string, FormulaPtr>> lib = [] {
    std::vector<std::pair<std::string, FormulaPtr>> v;
    auto add = [&](const char* n, const char* f) {
      v.emplace_back(n, parse_formula(f));
    };
    add("eqRefl", "\\forall x x = x");
    add("eqSym", "\\forall x \\forall y (x = y -> y = x)");
    add("eqTrans",
        "\\forall x \\forall y \\forall z (x = y -> (y = z -> x = z))");
    add("leRefl", "\\forall x x <= x");
    add("leTrans",
        "\\forall x \\forall y \\forall z (x <= y -> (y <= z -> x <= z))");
    add("ltTrans",
        "\\forall x \\forall y \\forall z (x < y -> (y < z -> x < z))");
    add("leLtTrans",
        "\\forall x \\forall y \\forall z (x <= y -> (y < z -> x < z))");
    add("ltLeTrans",
        "\\forall x \\forall y \\forall z (x < y -> (y <= z -> x < z))");
    return v;
  }();
  return lib;
}

// ---------------------------------------------------------------------------
// Symbolic ODE solving (nilpotent linear systems).

namespace {

bool is_lit(const TermPtr& t, const Rational& q) {
  return t && t->kind == TermKind::Lit && t->lit == q;
}

TermPtr simp(const TermPtr& t) {
  if (!t) return t;
  auto lit = [](const TermPtr& x) { return x->kind == TermKind::Lit; };
  switch (t->kind) {
    case TermKind::Var:
    case TermKind::Lit:
    case TermKind::Abbrev:
      return t;
    case TermKind::Plus: {
      TermPtr a = simp(t->a), b = simp(t->b);
      if (lit(a) && lit(b)) return tlit(a->lit + b->lit);
      if (is_lit(a, 0)) return b;
      if (is_lit(b, 0)) return a;
      return tplus(a, b);
    }
    case TermKind::Minus: {
      TermPtr a = simp(t->a), b = simp(t->b);
      if (lit(a) && lit(b)) return tlit(a->lit - b->lit);
      if (is_lit(b, 0)) return a;
      if (is_lit(a, 0)) return simp(tneg(b));
      return tminus(a, b);
    }
    case TermKind::Times: {
      TermPtr a = simp(t->a), b = simp(t->b);
      if (lit(a) && lit(b)) return tlit(a->lit * b->lit);
      if (is_lit(a, 0) || is_lit(b, 0)) return tlit(0);
      if (is_lit(a, 1)) return b;
      if (is_lit(b, 1)) return a;
      return ttimes(a, b);
    }
    case TermKind::Divide: {
      TermPtr a = simp(t->a), b = simp(t->b);
      if (lit(a) && lit(b) && b->lit != 0) return tlit(a->lit / b->lit);
      if (is_lit(a, 0)) return tlit(0);
      if (is_lit(b, 1)) return a;
      return tdivide(a, b);
    }
    case TermKind::Neg: {
      TermPtr a = simp(t->a);
      if (lit(a)) return tlit(-a->lit);
      return tneg(a);
    }
    case TermKind::Power: {
      TermPtr a = simp(t->a);
      if (is_lit(a, 0) && t->lit > 0) return tlit(0);
      if (t->lit == 1) return a;
      return tpower(a, t->lit);
    }
    default: {
      Term copy = *t;
      copy.a = simp(t->a);
      copy.b = simp(t->b);
      return std::make_shared<const Term>(std::move(copy));
    }
  }
}

// One Lie derivative step along the system.
TermPtr lie(const TermPtr& t, const std::map<Variable, TermPtr>& rhs) {
  TermDifferential td;
  try {
    td = term_differential(t);
  } catch (const DifferentialError& e) {
    throw NotNilpotent(std::string("not differentiable: ") + e.what());
  }
  if (!td.side.empty())
    throw NotNilpotent("derivative has side conditions: " + print(t));
  SubstMap m;
  for (auto& v : free_vars(td.d)) {
    if (!v.primed) continue;
    auto it = rhs.find(v.unprime());
    m.emplace(v, it != rhs.end() ? it->second : tlit(0));
  }
  return simp(substitute(td.d, m));
}

}  // namespace

std::map<Variable, TermPtr> symbolic_solve(const std::vector<ODEEq>& odes,
                                           const Variable& clock) {
  std::map<Variable, TermPtr> rhs;
  for (auto& e : odes) rhs[e.var] = e.rhs;
  std::map<Variable, TermPtr> sols;
  int limit = static_cast<int>(odes.size()) + 2;
  for (auto& e : odes) {
    TermPtr d = tvar(e.var);
    TermPtr sol = d;
    Rational fact = 1;
    for (int k = 1;; ++k) {
      d = lie(d, rhs);
      if (is_lit(simp(d), 0)) break;
      if (k > limit)
        throw NotNilpotent("no polynomial solution for " + e.var.str() +
                           "' = " + print(e.rhs));
      fact *= k;
      TermPtr power = k == 1 ? tvar(clock) : tpower(tvar(clock), k);
      TermPtr coeff =
          fact == 1 ? d : ttimes(tlit(Rational(1) / fact), d);
      sol = tplus(sol, simp(ttimes(coeff, power)));
    }
    sols[e.var] = sol;
  }
  return sols;
}

// ---------------------------------------------------------------------------
// Forward-proof conclusions.

namespace {

FormulaPtr inst_forall(const FormulaPtr& all, const TermPtr& t) {
  try {
    return substitute(all->f1, SubstMap{{all->var, t}});
  } catch (const CaptureError& e) {
    throw CheckError(std::string("instantiation of ") + print(all) +
                     " not admissible: " + e.what());
  }
}

void push_unique(std::vector<FormulaPtr>& v, const FormulaPtr& f) {
  for (auto& g : v)
    if (equal(g, f)) return;
  v.push_back(f);
}

}  // namespace

FormulaPtr check_fp(const Context& g, const StaticTrace& h, const FPPtr& fp) {
  if (!fp) throw CheckError("missing forward proof");
  switch (fp->kind) {
    case FPKind::Fact: {
      if (!fp->pat && fp->term)
        throw CheckError("term `" + print(fp->term) + "` used as a fact");
      if (fp->pat && fp->pat->kind == PatKind::Ident) {
        const std::string& name = fp->pat->name;
        if (const ContextEntry* e = g.lookup(name)) {
          if (e->is_fact) return e->fact;
          throw CheckError("`" + name + "` names an abbreviation, not a fact");
        }
        for (auto& [n, f] : fact_library())
          if (n == name) return f;
        throw CheckError("unknown fact `" + name + "`");
      }
      std::vector<FormulaPtr> ms;
      std::vector<PatternPtr> sel{fp->pat ? fp->pat : pat_any()};
      for (auto& f : facts(g, sel)) push_unique(ms, f);
      for (auto& [n, f] : fact_library())
        if (fp->pat && match(g, fp->pat, expr_of(f))) push_unique(ms, f);
      if (ms.empty())
        throw CheckError("no fact matches pattern " + print(fp->pat));
      if (ms.size() > 1) {
        std::string d;
        for (auto& f : ms) d += "\n  " + print(f);
        throw AmbiguityError("pattern " + print(fp->pat) +
                             " matches several facts:" + d);
      }
      return ms[0];
    }
    case FPKind::App: {
      FormulaPtr cf = check_fp(g, h, fp->fn);
      if (cf->kind == FormulaKind::Forall) {
        // Juxtaposed term argument: the identifier must read as a term.
        if (!fp->arg || fp->arg->kind != FPKind::Fact || !fp->arg->term)
          throw CheckError("universal fact applied to a non-term argument");
        TermPtr t = expand(g, h, fp->arg->term);
        return inst_forall(cf, t);
      }
      if (cf->kind != FormulaKind::Imply)
        throw CheckError("forward proof applies non-implication " + print(cf));
      FormulaPtr ca = check_fp(g, h, fp->arg);
      if (!equal(cf->f1, ca))
        throw CheckError("forward proof argument mismatch: expected " +
                         print(cf->f1) + ", got " + print(ca));
      return cf->f2;
    }
    case FPKind::Inst: {
      FormulaPtr cf = check_fp(g, h, fp->fn);
      if (cf->kind != FormulaKind::Forall)
        throw CheckError("instantiation of non-universal " + print(cf));
      return inst_forall(cf, expand(g, h, fp->term));
    }
  }
  throw CheckError("malformed forward proof");
}

// ---------------------------------------------------------------------------
// The checker proper.

namespace {

[[noreturn]] void fail(const std::string& msg) { throw CheckError(msg); }

// RuleApp builder.
struct RA : RuleApp {
  RA(RuleId id, int g) {
    rule = id;
    goal = g;
  }
  RA& I(int v) { i = v; return *this; }
  RA& J(int v) { j = v; return *this; }
  RA& L() { left = true; return *this; }
  RA& V(const Variable& v) { var = v; return *this; }
  RA& V2(const Variable& v) { var2 = v; return *this; }
  RA& T(TermPtr t) { term = std::move(t); return *this; }
  RA& T2(TermPtr t) { term2 = std::move(t); return *this; }
  RA& F(FormulaPtr f) { fml = std::move(f); return *this; }
  RA& S(std::vector<TermPtr> s) { sols = std::move(s); return *this; }
};

struct Env {
  Context g;
  StaticTrace h;
};

struct Chk {
  ProofState ps = ProofState::init(Sequent{});
  const CheckOptions* opt = nullptr;
  std::map<std::string, ArithEvidence> cache;
  std::vector<std::string> errors;
  int oracle_fails = 0;
  int hard_fails = 0;
  int anon_count = 0;

  std::string anon() { return "#" + std::to_string(anon_count++); }
};

void note_trace(Chk& c, const StaticTrace& h) {
  if (c.opt->trace_hook) c.opt->trace_hook(h);
}

const Sequent& gseq(Chk& c, int goal) {
  const Goal* g = c.ps.find(goal);
  if (!g) fail("internal: goal vanished");
  return g->seq;
}

// Applies a rule; returns the new goal ids in premise order.
std::vector<int> step(Chk& c, const RuleApp& r) {
  std::set<int> before;
  for (auto& g : c.ps.goals()) before.insert(g.id);
  try {
    c.ps = c.ps.apply(r);
  } catch (const KernelError& e) {
    fail(std::string(e.what()));
  }
  std::vector<int> out;
  for (auto& g : c.ps.goals())
    if (!before.count(g.id)) out.push_back(g.id);
  return out;
}

int step1(Chk& c, const RuleApp& r) {
  auto v = step(c, r);
  if (v.size() != 1)
    fail("internal: " + rule_name(r.rule) + " yielded " +
         std::to_string(v.size()) + " premises");
  return v[0];
}

std::optional<int> try_step1(Chk& c, const RuleApp& r) {
  try {
    return step1(c, r);
  } catch (const CheckError&) {
    return std::nullopt;
  }
}

// Index of the last antecedent (succedent) formula equal to f, or -1.
int ante_index(const Sequent& s, const FormulaPtr& f) {
  for (int i = static_cast<int>(s.ante.size()) - 1; i >= 0; --i)
    if (equal(s.ante[i], f)) return i;
  return -1;
}

int move_succ_front(Chk& c, int goal, int j) {
  if (j == 0) return goal;
  return step1(c, RA(RuleId::MoveR, goal).J(j));
}

int move_last_succ_front(Chk& c, int goal) {
  return move_succ_front(c, goal,
                         static_cast<int>(gseq(c, goal).succ.size()) - 1);
}

// Keeps only succedent j (moved to the front).
int keep_only_succ(Chk& c, int goal, int j) {
  goal = move_succ_front(c, goal, j);
  while (gseq(c, goal).succ.size() > 1)
    goal = step1(c, RA(RuleId::WeakenR, goal).J(1));
  return goal;
}

int weaken_all_ante(Chk& c, int goal) {
  while (!gseq(c, goal).ante.empty())
    goal = step1(c, RA(RuleId::WeakenL, goal).I(0));
  return goal;
}

bool is_fol(const FormulaPtr& f);

// First-order and free of nominal/abbreviation terms: a candidate fact for
// the arithmetic backends.
bool is_arith(const FormulaPtr& f) { return is_fol(f) && is_core(f); }

bool is_fol(const FormulaPtr& f) {
  if (!f) return false;
  switch (f->kind) {
    case FormulaKind::Box:
    case FormulaKind::Diamond:
    case FormulaKind::NominalF:
    case FormulaKind::AbbrevF:
      return false;
    case FormulaKind::True:
    case FormulaKind::False:
    case FormulaKind::Cmp:
      return true;
    case FormulaKind::Not:
    case FormulaKind::Forall:
    case FormulaKind::Exists:
      return is_fol(f->f1);
    default:
      return is_fol(f->f1) && is_fol(f->f2);
  }
}

VarSet seq_vars(const Sequent& s) {
  VarSet u;
  for (auto& f : s.ante) {
    VarSet a = all_vars(f);
    u.insert(a.begin(), a.end());
  }
  for (auto& f : s.succ) {
    VarSet a = all_vars(f);
    u.insert(a.begin(), a.end());
  }
  return u;
}

VarSet seq_fvars(const Sequent& s) {
  VarSet u;
  for (auto& f : s.ante) {
    VarSet a = free_vars(f);
    u.insert(a.begin(), a.end());
  }
  for (auto& f : s.succ) {
    VarSet a = free_vars(f);
    u.insert(a.begin(), a.end());
  }
  return u;
}

VarSet expr_all_vars(const Expr& e) {
  if (e.term) return all_vars(e.term);
  if (e.fml) return all_vars(e.fml);
  if (e.prog) return all_vars(e.prog);
  return {};
}

// Everything the goal, the trace and the context mention: the pool fresh
// variables must avoid.
VarSet used_vars(Chk& c, int goal, const Env& env) {
  VarSet u = seq_vars(gseq(c, goal));
  VarSet hv = env.h.vars();
  u.insert(hv.begin(), hv.end());
  for (auto& e : env.g.entries()) {
    VarSet a = e.is_fact ? all_vars(e.fact) : expr_all_vars(e.value);
    u.insert(a.begin(), a.end());
  }
  return u;
}

Variable take_fresh(const std::string& base, VarSet& used) {
  Variable v = fresh_var(base, used);
  used.insert(v);
  return v;
}

// Unprimed bound variables of a program, in canonical order.
std::vector<Variable> unprimed_bound(const ProgramPtr& p) {
  std::vector<Variable> out;
  for (auto& v : bound_vars(p))
    if (!v.primed) out.push_back(v);
  return out;
}

// Closes an arithmetic goal through the decision pipeline; caches by the
// printed sequent image.
void close_arith(Chk& c, int goal) {
  const Sequent s = gseq(c, goal);
  std::string key;
  ArithEvidence ev;
  try {
    key = print(sequent_image(s));
    auto it = c.cache.find(key);
    if (it != c.cache.end()) {
      ev = it->second;
    } else {
      ev = decide(s, c.opt->arith);
      c.cache.emplace(key, ev);
    }
  } catch (const std::exception& e) {
    fail("not an arithmetic goal: " + print(s) + " (" + e.what() + ")");
  }
  if (ev.verdict == Verdict::Valid) {
    try {
      c.ps = c.ps.close_qe(goal, ev);
    } catch (const KernelError& e) {
      fail(std::string(e.what()));
    }
    return;
  }
  if (ev.verdict == Verdict::CounterExample)
    fail("arithmetic goal is falsifiable: " + print(s) +
         (ev.detail.empty() ? "" : " [" + ev.detail + "]"));
  throw NeedsOracle("arithmetic goal undecided by builtin backends: " +
                    print(s));
}

// Weakens to a pure arithmetic leaf keeping only succedent j, then decides.
void close_pure_arith(Chk& c, int goal, int j) {
  goal = keep_only_succ(c, goal, j);
  goal = weaken_all_ante(c, goal);
  close_arith(c, goal);
}

// Decides with the current antecedent; if that fails and the goal stands on
// its own, retries without hypotheses (irrelevant nonlinear or extended
// facts must not block a self-contained goal).
void close_arith_retry(Chk& c, int goal) {
  try {
    close_arith(c, goal);
    return;
  } catch (const CheckError&) {
    if (gseq(c, goal).ante.empty()) throw;
    std::exception_ptr first = std::current_exception();
    try {
      close_arith(c, weaken_all_ante(c, goal));
    } catch (const CheckError&) {
      std::rethrow_exception(first);
    }
  }
}

// Normalization: peel sequencing, tests and top-level negations off the
// first succedent formula.
int normalize(Chk& c, int goal) {
  for (;;) {
    const Sequent& s = gseq(c, goal);
    if (s.succ.empty()) return goal;
    const FormulaPtr& f = s.succ[0];
    RuleId id;
    if (f->kind == FormulaKind::Not) {
      id = RuleId::PushNeg;
    } else if (f->kind == FormulaKind::Box &&
               f->prog->kind == ProgramKind::Seq) {
      id = RuleId::BoxSeq;
    } else if (f->kind == FormulaKind::Diamond &&
               f->prog->kind == ProgramKind::Seq) {
      id = RuleId::DiaSeq;
    } else if (f->kind == FormulaKind::Box &&
               f->prog->kind == ProgramKind::Test) {
      id = RuleId::BoxTest;
    } else if (f->kind == FormulaKind::Diamond &&
               f->prog->kind == ProgramKind::Test) {
      id = RuleId::DiaTest;
    } else {
      return goal;
    }
    goal = step1(c, RA(id, goal).J(0));
  }
}

FormulaPtr exf(const Env& env, const FormulaPtr& f,
               const std::optional<std::string>& at = {}) {
  if (!f) fail("expected a formula");
  try {
    return expand(env.g, env.h, f, at);
  } catch (const std::exception& e) {
    fail(std::string(e.what()));
  }
}

TermPtr ext(const Env& env, const TermPtr& t) {
  if (!t) fail("expected a term");
  try {
    return expand(env.g, env.h, t);
  } catch (const std::exception& e) {
    fail(std::string(e.what()));
  }
}

FormulaPtr want_fml(const Expr& e, const char* what) {
  if (!e.fml) fail(std::string(what) + ": expected a formula");
  return e.fml;
}

Context match_or_fail(const Context& g, const PatternPtr& p, const Expr& e,
                      const char* what) {
  if (!p) return g;
  std::optional<Context> r = match(g, p, e);
  if (!r)
    fail(std::string(what) + ": pattern " + print(p) + " does not match " +
         print(e));
  return *r;
}

std::string loc(int line) {
  return line > 0 ? "line " + std::to_string(line) + ": " : "";
}

void record_failure(Chk& c, int line, const std::exception& e, bool oracle) {
  if (oracle)
    c.oracle_fails++;
  else
    c.hard_fails++;
  std::string msg = e.what();
  c.errors.push_back(msg.rfind("line ", 0) == 0 ? msg : loc(line) + msg);
}

template <class F>
void guarded(Chk& c, int line, F&& body) {
  try {
    body();
  } catch (const NeedsOracle& e) {
    record_failure(c, line, e, true);
  } catch (const std::exception& e) {
    record_failure(c, line, e, false);
  }
}

// ---------------------------------------------------------------------------
// Forward-proof derivation inside the kernel: proves a goal whose first
// succedent formula is the conclusion of `fp`.

FormulaPtr fp_concl(const Env& env, const FPPtr& fp) {
  return check_fp(env.g, env.h, fp);
}

void derive_fact(Chk& c, const Env& env, int goal, const FPPtr& fp,
                 const FormulaPtr& concl);

void derive_inst(Chk& c, const Env& env, int goal, const FPPtr& fn,
                 const FormulaPtr& cf, const TermPtr& t) {
  auto pr = step(c, RA(RuleId::Cut, goal).F(cf));
  derive_fact(c, env, move_last_succ_front(c, pr[0]), fn, cf);
  int g2 = pr[1];
  int icf = ante_index(gseq(c, g2), cf);
  g2 = step1(c, RA(RuleId::AllL, g2).I(icf).T(t));
  const Sequent& s = gseq(c, g2);
  step(c, RA(RuleId::Id, g2)
              .I(static_cast<int>(s.ante.size()) - 1)
              .J(0));
}

void derive_fact(Chk& c, const Env& env, int goal, const FPPtr& fp,
                 const FormulaPtr& concl) {
  switch (fp->kind) {
    case FPKind::Fact: {
      int ia = ante_index(gseq(c, goal), concl);
      if (ia >= 0) {
        step(c, RA(RuleId::Id, goal).I(ia).J(0));
        return;
      }
      // Library fact: decided arithmetically.
      close_pure_arith(c, goal, 0);
      return;
    }
    case FPKind::App: {
      FormulaPtr cf = fp_concl(env, fp->fn);
      if (cf->kind == FormulaKind::Forall) {
        TermPtr t = expand(env.g, env.h, fp->arg->term);
        derive_inst(c, env, goal, fp->fn, cf, t);
        return;
      }
      FormulaPtr ca = fp_concl(env, fp->arg);
      auto pr = step(c, RA(RuleId::Cut, goal).F(cf));
      derive_fact(c, env, move_last_succ_front(c, pr[0]), fp->fn, cf);
      auto pr2 = step(c, RA(RuleId::Cut, pr[1]).F(ca));
      derive_fact(c, env, move_last_succ_front(c, pr2[0]), fp->arg, ca);
      int g2 = pr2[1];
      int icf = ante_index(gseq(c, g2), cf);
      auto pr3 = step(c, RA(RuleId::ImplyL, g2).I(icf));
      {
        const Sequent& s1 = gseq(c, pr3[0]);
        int i1 = ante_index(s1, ca);
        step(c, RA(RuleId::Id, pr3[0])
                    .I(i1)
                    .J(static_cast<int>(s1.succ.size()) - 1));
      }
      {
        const Sequent& s2 = gseq(c, pr3[1]);
        int i2 = ante_index(s2, concl);
        step(c, RA(RuleId::Id, pr3[1]).I(i2).J(0));
      }
      return;
    }
    case FPKind::Inst: {
      FormulaPtr cf = fp_concl(env, fp->fn);
      derive_inst(c, env, goal, fp->fn, cf,
                  expand(env.g, env.h, fp->term));
      return;
    }
  }
  fail("malformed forward proof");
}

// Materializes the conclusions of the method's forward proofs into the
// antecedent; returns the continuation goal and the conclusions.
int materialize_fps(Chk& c, const Env& env, int goal, const Method& m,
                    std::vector<FormulaPtr>& concls) {
  for (auto& fp : m.use_fps) {
    FormulaPtr f = fp_concl(env, fp);
    concls.push_back(f);
    if (ante_index(gseq(c, goal), f) >= 0) continue;
    auto pr = step(c, RA(RuleId::Cut, goal).F(f));
    derive_fact(c, env, move_last_succ_front(c, pr[0]), fp, f);
    goal = pr[1];
  }
  return goal;
}

// ---------------------------------------------------------------------------
// Assignments.

int do_assign(Chk& c, Env& env, int goal);
int do_assign_any(Chk& c, Env& env, int goal);

// ---------------------------------------------------------------------------
// The `auto` method: conversions, structural execution, arithmetic leaves.

bool try_id_close(Chk& c, int goal) {
  const Sequent& s = gseq(c, goal);
  for (int j = 0; j < static_cast<int>(s.succ.size()); ++j) {
    if (s.succ[j]->kind == FormulaKind::True) {
      step(c, RA(RuleId::CloseTrue, goal).J(j));
      return true;
    }
    for (int i = 0; i < static_cast<int>(s.ante.size()); ++i)
      if (equal(s.ante[i], s.succ[j])) {
        step(c, RA(RuleId::Id, goal).I(i).J(j));
        return true;
      }
  }
  for (int i = 0; i < static_cast<int>(s.ante.size()); ++i)
    if (s.ante[i]->kind == FormulaKind::False) {
      step(c, RA(RuleId::CloseFalse, goal).I(i));
      return true;
    }
  return false;
}

void close_leaf(Chk& c, int goal) {
  if (try_id_close(c, goal)) return;
  for (int i = static_cast<int>(gseq(c, goal).ante.size()) - 1; i >= 0; --i)
    if (!is_arith(gseq(c, goal).ante[i]))
      goal = step1(c, RA(RuleId::WeakenL, goal).I(i));
  bool any_fol = false;
  for (auto& f : gseq(c, goal).succ) any_fol = any_fol || is_fol(f);
  if (!any_fol)
    fail("auto: stuck at non-arithmetic goal " + print(gseq(c, goal)));
  for (int j = static_cast<int>(gseq(c, goal).succ.size()) - 1; j >= 0; --j)
    if (!is_fol(gseq(c, goal).succ[j]))
      goal = step1(c, RA(RuleId::WeakenR, goal).J(j));
  close_arith_retry(c, goal);
}

void auto_run(Chk& c, Env env, int goal, int& budget) {
  for (;;) {
    goal = normalize(c, goal);
    if (try_id_close(c, goal)) return;
    const Sequent s = gseq(c, goal);
    if (s.succ.empty()) fail("auto: no goal formula");
    const FormulaPtr f = s.succ[0];
    if (budget <= 0) {
      close_leaf(c, goal);
      return;
    }
    --budget;
    switch (f->kind) {
      case FormulaKind::Imply:
        goal = step1(c, RA(RuleId::ImplyR, goal).J(0));
        continue;
      case FormulaKind::And: {
        auto pr = step(c, RA(RuleId::AndR, goal).J(0));
        auto_run(c, env, pr[0], budget);
        goal = pr[1];
        continue;
      }
      case FormulaKind::Or:
        goal = step1(c, RA(RuleId::OrR, goal).J(0));
        continue;
      case FormulaKind::Equiv: {
        auto pr = step(c, RA(RuleId::EquivR, goal).J(0));
        auto_run(c, env, pr[0], budget);
        goal = pr[1];
        continue;
      }
      case FormulaKind::Forall: {
        Variable v = f->var;
        if (seq_fvars(s).count(v)) {
          VarSet used = used_vars(c, goal, env);
          v = fresh_var(v.base, used);
        }
        goal = step1(c, RA(RuleId::AllR, goal).J(0).V(v));
        continue;
      }
      case FormulaKind::Box:
      case FormulaKind::Diamond: {
        bool dia = f->kind == FormulaKind::Diamond;
        switch (f->prog->kind) {
          case ProgramKind::Choice:
            goal = step1(
                c, RA(dia ? RuleId::DiaChoice : RuleId::BoxChoice, goal).J(0));
            continue;
          case ProgramKind::Assign:
            goal = do_assign(c, env, goal);
            continue;
          case ProgramKind::AssignAny:
            if (dia) break;
            goal = do_assign_any(c, env, goal);
            continue;
          case ProgramKind::ODE: {
            if (dia) break;
            // Differential weakening: the only ODE step that needs no
            // user-supplied invariant.
            std::vector<Variable> bnd = unprimed_bound(f->prog);
            VarSet used = used_vars(c, goal, env);
            std::vector<TermPtr> sols;
            RenameMap ren;
            for (auto& x : bnd) {
              Variable gk = take_fresh(x.base, used);
              sols.push_back(tvar(gk));
              ren[x] = gk;
            }
            goal = step1(c, RA(RuleId::DW, goal).J(0).S(sols));
            env.g = env.g.renamed(ren);
            continue;
          }
          default:
            break;
        }
        close_leaf(c, goal);
        return;
      }
      default:
        close_leaf(c, goal);
        return;
    }
  }
}

void run_or_auto(Chk& c, const Env& env, int goal, const SPPtr& sp);

// ---------------------------------------------------------------------------
// Assignment execution. `env` is threaded: the context is renamed and the
// trace records the step.

int do_assign(Chk& c, Env& env, int goal) {
  const Sequent s0 = gseq(c, goal);
  FormulaPtr f = s0.succ[0];
  bool dia = f->kind == FormulaKind::Diamond;
  if ((f->kind != FormulaKind::Box && !dia) ||
      f->prog->kind != ProgramKind::Assign)
    fail("assign: goal is not an assignment modality: " + print(f));
  const Variable x = f->prog->var;
  if (!c.opt->eq_always) {
    auto sub = try_step1(
        c, RA(dia ? RuleId::DiaAssign : RuleId::BoxAssign, goal).J(0));
    if (sub) {
      env.h.push_sub(x, f->prog->term);
      note_trace(c, env.h);
      return *sub;
    }
  }
  // Equality route: rename the frame occurrences of x to a ghost, then
  // unfold the assignment with its own variable as the binder.
  VarSet used = used_vars(c, goal, env);
  Variable xi = take_fresh(x.base, used);
  goal = step1(c, RA(RuleId::Rename, goal).V(x).V2(xi));
  TermPtr tr = rename_free(f->prog->term, RenameMap{{x, xi}});
  FormulaPtr eqf = fcmp(CmpOp::Eq, tvar(x), tr);
  env.g = env.g.renamed(RenameMap{{x, xi}});
  int cont;
  if (!dia) {
    goal = step1(c, RA(RuleId::BoxAssignEq, goal).J(0).V(x));
    goal = step1(c, RA(RuleId::AllR, goal).J(0).V(x));
    cont = step1(c, RA(RuleId::ImplyR, goal).J(0));
  } else {
    FormulaPtr body = gseq(c, goal).succ[0]->f1;
    ProgramPtr asg = passign(x, tr);
    // <x:=e>P follows from totality (<x:=e>(x=e)) and \forall x (x=e -> P).
    FormulaPtr tot = fdiamond(asg, eqf);
    auto pr = step(c, RA(RuleId::Cut, goal).F(tot));
    {
      int g1 = keep_only_succ(c, pr[0],
                              static_cast<int>(gseq(c, pr[0]).succ.size()) - 1);
      g1 = step1(c, RA(RuleId::DiaAssignEq, g1).J(0).V(x));
      g1 = step1(c, RA(RuleId::ExistsR, g1).J(0).T(tr));
      g1 = step1(c, RA(RuleId::WeakenR, g1).J(0));
      auto pa = step(c, RA(RuleId::AndR, g1).J(0));
      close_pure_arith(c, pa[0], 0);
      close_pure_arith(c, pa[1], 0);
    }
    int g2 = pr[1];
    FormulaPtr all = fforall(x, fimply(eqf, body));
    auto prB = step(c, RA(RuleId::Cut, g2).F(all));
    {
      int gu = step1(c, RA(RuleId::WeakenR, prB[0]).J(0));
      int ia = ante_index(gseq(c, gu), tot);
      gu = step1(c, RA(RuleId::WeakenL, gu).I(ia));
      gu = move_last_succ_front(c, gu);
      gu = step1(c, RA(RuleId::AllR, gu).J(0).V(x));
      cont = step1(c, RA(RuleId::ImplyR, gu).J(0));
    }
    {
      int gm = prB[1];
      int ia = ante_index(gseq(c, gm), tot);
      VarSet um = seq_vars(gseq(c, gm));
      Variable gx = fresh_var(x.base, um);
      gm = step1(c, RA(RuleId::MonDia, gm).I(ia).J(0).S({tvar(gx)}));
      int ib = ante_index(gseq(c, gm), all);
      gm = step1(c, RA(RuleId::AllL, gm).I(ib).T(tvar(x)));
      const Sequent& sm = gseq(c, gm);
      auto prI =
          step(c, RA(RuleId::ImplyL, gm)
                      .I(static_cast<int>(sm.ante.size()) - 1));
      {
        const Sequent& s1 = gseq(c, prI[0]);
        step(c, RA(RuleId::Id, prI[0])
                    .I(ante_index(s1, eqf))
                    .J(static_cast<int>(s1.succ.size()) - 1));
      }
      {
        const Sequent& s2 = gseq(c, prI[1]);
        step(c, RA(RuleId::Id, prI[1]).I(ante_index(s2, body)).J(0));
      }
    }
  }
  env.g = env.g.with_fact(c.anon(), eqf);
  env.h.push_eq(x, xi, tr);
  note_trace(c, env.h);
  return cont;
}

int do_assign_any(Chk& c, Env& env, int goal) {
  const Sequent s0 = gseq(c, goal);
  FormulaPtr f = s0.succ[0];
  if (f->kind != FormulaKind::Box || f->prog->kind != ProgramKind::AssignAny)
    fail("assign *: goal is not a nondeterministic assignment box: " +
         print(f));
  const Variable x = f->prog->var;
  VarSet used = used_vars(c, goal, env);
  Variable xi = take_fresh(x.base, used);
  goal = step1(c, RA(RuleId::Rename, goal).V(x).V2(xi));
  goal = step1(c, RA(RuleId::BoxAssignAny, goal).J(0));
  goal = step1(c, RA(RuleId::AllR, goal).J(0).V(x));
  env.g = env.g.renamed(RenameMap{{x, xi}});
  env.h.push_any(x, xi);
  note_trace(c, env.h);
  return goal;
}

// ---------------------------------------------------------------------------
// Main dispatcher.

StaticTrace run(Chk& c, Env env, int goal, const SPPtr& sp);

void run_or_auto(Chk& c, const Env& env, int goal, const SPPtr& sp) {
  if (sp) {
    run(c, env, goal, sp);
  } else {
    int budget = c.opt->auto_steps;
    auto_run(c, env, goal, budget);
  }
}

// -- show -------------------------------------------------------------------

void run_show(Chk& c, Env env, int goal, const StructuredProof& sp) {
  goal = normalize(c, goal);
  const Sequent s = gseq(c, goal);
  if (s.succ.empty()) fail("show: no goal formula");
  env.g = match_or_fail(env.g, sp.pat, expr_of(s.succ[0]), "show");
  std::vector<FormulaPtr> fpc;
  goal = materialize_fps(c, env, goal, sp.method, fpc);
  bool default_all = sp.method.use_pats.empty() && sp.method.use_fps.empty();
  std::vector<FormulaPtr> keep = fpc;
  if (default_all) {
    for (auto& f : env.g.fact_formulas()) push_unique(keep, f);
  } else if (!sp.method.use_pats.empty()) {
    for (auto& f : facts(env.g, sp.method.use_pats)) push_unique(keep, f);
  }
  switch (sp.method.kind) {
    case MethodKind::Id: {
      const Sequent& s2 = gseq(c, goal);
      for (int i = static_cast<int>(s2.ante.size()) - 1; i >= 0; --i) {
        if (!equal(s2.ante[i], s2.succ[0])) continue;
        bool allowed = false;
        for (auto& f : keep) allowed = allowed || equal(f, s2.ante[i]);
        if (!allowed && default_all) allowed = true;
        if (!allowed) continue;
        step(c, RA(RuleId::Id, goal).I(i).J(0));
        return;
      }
      fail("show by id: no selected fact equals " + print(s2.succ[0]));
    }
    case MethodKind::R: {
      for (int i = static_cast<int>(gseq(c, goal).ante.size()) - 1; i >= 0;
           --i) {
        const FormulaPtr& a = gseq(c, goal).ante[i];
        bool k = is_arith(a);
        if (k) {
          bool sel = false;
          for (auto& f : keep) sel = sel || equal(f, a);
          k = sel;
        }
        if (!k) goal = step1(c, RA(RuleId::WeakenL, goal).I(i));
      }
      while (gseq(c, goal).succ.size() > 1)
        goal = step1(c, RA(RuleId::WeakenR, goal).J(1));
      close_arith_retry(c, goal);
      return;
    }
    case MethodKind::Auto: {
      // Non-selected modal facts are harmless to auto; selection only
      // materialized forward proofs above.
      int budget = c.opt->auto_steps;
      auto_run(c, env, goal, budget);
      return;
    }
  }
}

// -- case -------------------------------------------------------------------

StaticTrace run_case(Chk& c, Env env, int goal, const StructuredProof& sp) {
  goal = normalize(c, goal);
  const Sequent s = gseq(c, goal);
  if (s.succ.empty()) fail("case: no goal formula");
  FormulaPtr f = s.succ[0];
  auto need = [&](size_t n) {
    if (sp.branches.size() != n)
      fail("case: expected " + std::to_string(n) + " branches, got " +
           std::to_string(sp.branches.size()));
  };
  auto run_branch = [&](int g, const CaseBranch& br, const Expr& target) {
    guarded(c, sp.line, [&] {
      Env e = env;
      e.g = match_or_fail(e.g, br.pat, target, "case");
      run(c, e, g, br.sp);
    });
  };
  bool dia = f->kind == FormulaKind::Diamond;
  if (f->kind == FormulaKind::Box && f->prog->kind == ProgramKind::Choice) {
    need(2);
    goal = step1(c, RA(RuleId::BoxChoice, goal).J(0));
    auto pr = step(c, RA(RuleId::AndR, goal).J(0));
    run_branch(pr[0], sp.branches[0], expr_of(f->prog->a));
    run_branch(pr[1], sp.branches[1], expr_of(f->prog->b));
    return env.h;
  }
  if (f->kind == FormulaKind::Box && f->prog->kind == ProgramKind::Loop) {
    need(2);
    goal = step1(c, RA(RuleId::BoxUnroll, goal).J(0));
    auto pr = step(c, RA(RuleId::AndR, goal).J(0));
    run_branch(pr[0], sp.branches[0], expr_of(f->f1));
    run_branch(pr[1], sp.branches[1], expr_of(f->prog->a));
    return env.h;
  }
  if (f->kind == FormulaKind::Box && f->f1->kind == FormulaKind::And) {
    need(2);
    goal = step1(c, RA(RuleId::BoxSplit, goal).J(0));
    auto pr = step(c, RA(RuleId::AndR, goal).J(0));
    run_branch(pr[0], sp.branches[0], expr_of(f->f1->f1));
    run_branch(pr[1], sp.branches[1], expr_of(f->f1->f2));
    return env.h;
  }
  if (f->kind == FormulaKind::And) {
    need(2);
    auto pr = step(c, RA(RuleId::AndR, goal).J(0));
    run_branch(pr[0], sp.branches[0], expr_of(f->f1));
    run_branch(pr[1], sp.branches[1], expr_of(f->f2));
    return env.h;
  }
  if (f->kind == FormulaKind::Equiv) {
    need(2);
    auto pr = step(c, RA(RuleId::EquivR, goal).J(0));
    for (int k = 0; k < 2; ++k) {
      FormulaPtr hyp = k == 0 ? f->f1 : f->f2;
      guarded(c, sp.line, [&] {
        Env e = env;
        const PatternPtr& p = sp.branches[k].pat;
        if (p && p->kind == PatKind::Ident && p->name != "_" &&
            !e.g.lookup(p->name)) {
          e.g = e.g.with_fact(p->name, hyp);
        } else {
          e.g = match_or_fail(e.g, p, expr_of(hyp), "case");
        }
        run(c, e, pr[k], sp.branches[k].sp);
      });
    }
    return env.h;
  }
  if (f->kind == FormulaKind::Or) {
    need(1);
    Env e = env;
    e.g = match_or_fail(e.g, sp.branches[0].pat, expr_of(f), "case");
    goal = step1(c, RA(RuleId::OrR, goal).J(0));
    guarded(c, sp.line, [&] { run(c, e, goal, sp.branches[0].sp); });
    return env.h;
  }
  if (dia && f->prog->kind == ProgramKind::Choice) {
    need(1);
    goal = step1(c, RA(RuleId::DiaChoice, goal).J(0));
    goal = step1(c, RA(RuleId::OrR, goal).J(0));
    guarded(c, sp.line, [&] {
      Env e = env;
      e.g = match_or_fail(e.g, sp.branches[0].pat, expr_of(f->prog), "case");
      run(c, e, goal, sp.branches[0].sp);
    });
    return env.h;
  }
  if (dia && f->prog->kind == ProgramKind::Loop) {
    need(1);
    goal = step1(c, RA(RuleId::DiaUnroll, goal).J(0));
    goal = step1(c, RA(RuleId::OrR, goal).J(0));
    guarded(c, sp.line, [&] { run(c, env, goal, sp.branches[0].sp); });
    return env.h;
  }
  fail("case: goal " + print(f) + " offers no branching");
}

// -- after ------------------------------------------------------------------

StaticTrace run_after(Chk& c, Env env, int goal, const StructuredProof& sp) {
  goal = normalize(c, goal);
  const Sequent s = gseq(c, goal);
  if (s.succ.empty()) fail("after: no goal formula");
  FormulaPtr f = s.succ[0];
  bool dia = f->kind == FormulaKind::Diamond;
  if (f->kind != FormulaKind::Box && !dia)
    fail("after: goal is not a modality: " + print(f));
  FormulaPtr psi = exf(env, want_fml(sp.expr, "after"));
  FormulaPtr cutf = dia ? fdiamond(f->prog, psi) : fbox(f->prog, psi);
  auto pr = step(c, RA(RuleId::Cut, goal).F(cutf));
  StaticTrace hout = env.h;
  {
    int g1 = step1(c, RA(RuleId::WeakenR, pr[0]).J(0));
    g1 = move_last_succ_front(c, g1);
    try {
      hout = run(c, env, g1, sp.sp1);
    } catch (const NeedsOracle& e) {
      record_failure(c, sp.line, e, true);
      hout = env.h;
    } catch (const std::exception& e) {
      record_failure(c, sp.line, e, false);
      hout = env.h;
    }
  }
  int g2 = pr[1];
  VarSet bound;
  for (auto& v : unprimed_bound(f->prog)) bound.insert(v);
  VarSet used = used_vars(c, g2, env);
  {
    VarSet pv = all_vars(psi);
    used.insert(pv.begin(), pv.end());
    VarSet hv = hout.vars();
    used.insert(hv.begin(), hv.end());
  }
  Abstraction a = abstract_trace(hout, bound, used);
  std::vector<TermPtr> sols;
  for (auto& x : bound) sols.push_back(tvar(a.renaming.at(x)));
  int ia = ante_index(gseq(c, g2), cutf);
  g2 = step1(c, RA(dia ? RuleId::MonDia : RuleId::MonBox, g2)
                    .I(ia)
                    .J(0)
                    .S(sols));
  Env e2;
  e2.g = env.g.renamed(a.renaming)
             .with_fact(sp.name.empty() ? c.anon() : sp.name, psi);
  e2.h = a.trace;
  note_trace(c, e2.h);
  return run(c, e2, g2, sp.sp2);
}

// -- loop and ODE invariant chains ------------------------------------------

struct InvItem {
  std::string name;
  FormulaPtr raw;
  SPPtr pre, ind;
  int line = 0;
};

void apply_ctx_op(Chk& c, Env& env, const StructuredProof& sp);

// Cuts a defining fact ghost = x for each bound variable so invariants may
// refer to pre-loop values through the abstracted trace's ghosts.
int introduce_defs(Chk& c, Env& env, int goal, const Abstraction& abs,
                   const std::vector<Variable>& bound) {
  for (auto& x : bound) {
    Variable gx = abs.renaming.at(x);
    FormulaPtr def = fcmp(CmpOp::Eq, tvar(gx), tvar(x));
    FormulaPtr ex = fexists(gx, def);
    auto pr = step(c, RA(RuleId::Cut, goal).F(ex));
    {
      int g1 = pr[0];
      g1 = step1(c, RA(RuleId::ExistsR, g1)
                        .J(static_cast<int>(gseq(c, g1).succ.size()) - 1)
                        .T(tvar(x)));
      close_pure_arith(c, g1,
                       static_cast<int>(gseq(c, g1).succ.size()) - 1);
    }
    goal = pr[1];
    goal = step1(c, RA(RuleId::ExistsL, goal)
                      .I(static_cast<int>(gseq(c, goal).ante.size()) - 1)
                      .V(gx));
    env.g = env.g.with_fact(c.anon(), def);
  }
  return goal;
}

// Splits a right-nested conjunction at the last antecedent position into its
// n parts (in order, at the end of the antecedent).
int expose_right_conj(Chk& c, int goal, int n) {
  int idx = static_cast<int>(gseq(c, goal).ante.size()) - 1;
  for (int k = 0; k < n - 1; ++k) {
    goal = step1(c, RA(RuleId::AndL, goal).I(idx));
    ++idx;
  }
  return goal;
}

// Splits a left-nested conjunction ((q /\ a) /\ b)... at antecedent position
// i exactly `times` times, leaving q, a, b, ... at i, i+1, ...
int expose_left_conj(Chk& c, int goal, int i, int times) {
  for (int k = 0; k < times; ++k)
    goal = step1(c, RA(RuleId::AndL, goal).I(i));
  return goal;
}

// Proves a goal whose only succedent is the right-nested conjunction of J
// from antecedent copies of the parts.
void close_conj(Chk& c, int goal, const std::vector<FormulaPtr>& J,
                size_t k = 0) {
  if (k + 1 == J.size()) {
    int i = ante_index(gseq(c, goal), J[k]);
    step(c, RA(RuleId::Id, goal).I(i).J(0));
    return;
  }
  auto pr = step(c, RA(RuleId::AndR, goal).J(0));
  {
    int i = ante_index(gseq(c, pr[0]), J[k]);
    step(c, RA(RuleId::Id, pr[0]).I(i).J(0));
  }
  close_conj(c, pr[1], J, k + 1);
}

StaticTrace run_loop_chain(Chk& c, Env env, int goal, SPPtr node) {
  const Sequent s0 = gseq(c, goal);
  FormulaPtr f = s0.succ[0];
  ProgramPtr loop = f->prog;
  ProgramPtr body = loop->a;
  // Collect the chain.
  std::vector<InvItem> items;
  SPPtr fin;
  while (node) {
    if (node->kind == SPKind::Inv) {
      items.push_back({node->name, want_fml(node->expr, "inv"), node->sp1,
                       node->sp2, node->line});
      node = node->tail;
    } else if (node->kind == SPKind::Let || node->kind == SPKind::FunLet ||
               node->kind == SPKind::Note) {
      apply_ctx_op(c, env, *node);
      node = node->sp1;
    } else if (node->kind == SPKind::Finally) {
      fin = node->sp1;
      break;
    } else {
      fin = node;
      break;
    }
  }
  if (items.empty()) fail("inv: no invariants before the loop");
  if (!fin) fail("inv: missing finally proof");
  // Defining facts + abstracted trace.
  std::vector<Variable> bound = unprimed_bound(body);
  VarSet bset(bound.begin(), bound.end());
  VarSet used = used_vars(c, goal, env);
  Abstraction abs = abstract_trace(env.h, bset, used);
  goal = introduce_defs(c, env, goal, abs, bound);
  StaticTrace Hind = abs.trace;
  // Expanded invariants and their conjunction.
  std::vector<FormulaPtr> J;
  for (auto& it : items) J.push_back(exf({env.g, Hind}, it.raw));
  FormulaPtr Jall = J.back();
  for (int k = static_cast<int>(J.size()) - 2; k >= 0; --k)
    Jall = fand(J[k], Jall);
  FormulaPtr boxJ = fbox(loop, Jall);
  auto pr = step(c, RA(RuleId::Cut, goal).F(boxJ));
  // ---- premise A: |- [loop] Jall -----------------------------------------
  {
    int g = step1(c, RA(RuleId::WeakenR, pr[0]).J(0));
    g = move_last_succ_front(c, g);
    Env envA = env;
    // Initial validity of each invariant.
    for (size_t k = 0; k < items.size(); ++k) {
      auto prk = step(c, RA(RuleId::Cut, g).F(J[k]));
      {
        int g1 = step1(c, RA(RuleId::WeakenR, prk[0]).J(0));
        g1 = move_last_succ_front(c, g1);
        Env ek = envA;
        guarded(c, items[k].line,
                [&] { run_or_auto(c, ek, g1, items[k].pre); });
      }
      g = prk[1];
      envA.g = envA.g.with_fact(items[k].name, J[k]);
    }
    if (items.size() > 1) {
      auto prJ = step(c, RA(RuleId::Cut, g).F(Jall));
      {
        int g1 = keep_only_succ(
            c, prJ[0], static_cast<int>(gseq(c, prJ[0]).succ.size()) - 1);
        close_conj(c, g1, J);
      }
      g = prJ[1];
      for (int k = static_cast<int>(items.size()) - 1; k >= 0; --k) {
        // Drop the single-invariant cuts; the conjunction carries them.
        const Sequent& sg = gseq(c, g);
        int idx = -1;
        for (int i = static_cast<int>(sg.ante.size()) - 2; i >= 0; --i)
          if (equal(sg.ante[i], J[k])) {
            idx = i;
            break;
          }
        if (idx >= 0) g = step1(c, RA(RuleId::WeakenL, g).I(idx));
      }
    }
    // Induction.
    int iJ = ante_index(gseq(c, g), Jall);
    VarSet usedA = used_vars(c, g, envA);
    {
      VarSet hv = Hind.vars();
      usedA.insert(hv.begin(), hv.end());
    }
    std::vector<TermPtr> solsI;
    RenameMap renI;
    for (auto& x : bound) {
      Variable gk = take_fresh(x.base, usedA);
      solsI.push_back(tvar(gk));
      renI[x] = gk;
    }
    g = step1(c, RA(RuleId::LoopInd, g).I(iJ).J(0).S(solsI));
    g = expose_right_conj(c, g, static_cast<int>(J.size()));
    Env envInd;
    envInd.g = envA.g.renamed(renI);
    envInd.h = Hind;
    int n = static_cast<int>(items.size());
    for (int k = 0; k < n; ++k) {
      int gk;
      if (k < n - 1) {
        g = step1(c, RA(RuleId::BoxSplit, g).J(0));
        auto p2 = step(c, RA(RuleId::AndR, g).J(0));
        gk = p2[0];
        g = p2[1];
      } else {
        gk = g;
      }
      // Later invariants are not available when proving step k.
      for (int m = n - 1; m > k; --m) {
        int idx = ante_index(gseq(c, gk), J[m]);
        if (idx >= 0) gk = step1(c, RA(RuleId::WeakenL, gk).I(idx));
      }
      Env ek = envInd;
      for (int m = 0; m <= k; ++m)
        ek.g = ek.g.with_fact(items[m].name, J[m]);
      guarded(c, items[k].line, [&] { run_or_auto(c, ek, gk, items[k].ind); });
    }
  }
  // ---- premise B: finally -------------------------------------------------
  {
    int g = pr[1];
    VarSet usedB = used_vars(c, g, env);
    {
      VarSet hv = Hind.vars();
      usedB.insert(hv.begin(), hv.end());
    }
    std::vector<TermPtr> sols2;
    RenameMap ren2;
    for (auto& x : bound) {
      Variable gk = take_fresh(x.base, usedB);
      sols2.push_back(tvar(gk));
      ren2[x] = gk;
    }
    int ib = ante_index(gseq(c, g), boxJ);
    g = step1(c, RA(RuleId::MonBox, g).I(ib).J(0).S(sols2));
    g = expose_right_conj(c, g, static_cast<int>(J.size()));
    Env envF;
    envF.g = env.g.renamed(ren2);
    for (size_t k = 0; k < items.size(); ++k)
      envF.g = envF.g.with_fact(items[k].name, J[k]);
    envF.h = Hind;
    note_trace(c, envF.h);
    return run(c, envF, g, fin);
  }
}

StaticTrace run_ode_chain(Chk& c, Env env, int goal, SPPtr node) {
  std::vector<Variable> bound0 =
      unprimed_bound(gseq(c, goal).succ[0]->prog);
  VarSet bset(bound0.begin(), bound0.end());
  VarSet used = used_vars(c, goal, env);
  Abstraction abs = abstract_trace(env.h, bset, used);
  goal = introduce_defs(c, env, goal, abs, bound0);
  StaticTrace Hind = abs.trace;
  int ndc = 0;
  std::vector<std::pair<std::string, FormulaPtr>> invs;
  // Names the components of the (strengthened) evolution domain sitting at
  // antecedent positions i .. i+ndc: the base domain, then the cut
  // invariants in order.
  auto name_dom = [&](Env e, int g, int i) {
    const Sequent& s = gseq(c, g);
    e.g = e.g.with_fact(c.anon(), s.ante[i]);
    for (int m = 0; m < static_cast<int>(invs.size()); ++m)
      e.g = e.g.with_fact(invs[m].first, s.ante[i + 1 + m]);
    return e;
  };
  while (node) {
    switch (node->kind) {
      case SPKind::Let:
      case SPKind::FunLet:
      case SPKind::Note:
        apply_ctx_op(c, env, *node);
        node = node->sp1;
        break;
      case SPKind::Ghost: {
        TermPtr rhs = ext(env, node->term);
        TermPtr init = ext(env, node->term2);
        goal = step1(c, RA(RuleId::DG, goal).J(0).V(node->var).T(rhs).T2(init));
        env.g =
            env.g.with_fact(c.anon(), fcmp(CmpOp::Eq, tvar(node->var), init));
        node = node->tail;
        break;
      }
      case SPKind::Inv: {
        FormulaPtr psi = exf({env.g, Hind}, want_fml(node->expr, "inv"));
        auto prdc = step(c, RA(RuleId::DC, goal).J(0).F(psi));
        goal = prdc[1];
        guarded(c, node->line, [&] {
          int gInv = prdc[0];
          ProgramPtr ode = gseq(c, gInv).succ[0]->prog;
          std::vector<Variable> bnd = unprimed_bound(ode);
          VarSet u2 = used_vars(c, gInv, env);
          {
            VarSet hv = Hind.vars();
            u2.insert(hv.begin(), hv.end());
          }
          std::vector<TermPtr> sols;
          RenameMap ren;
          for (auto& x : bnd) {
            Variable gk = take_fresh(x.base, u2);
            sols.push_back(tvar(gk));
            ren[x] = gk;
          }
          auto prdi = step(c, RA(RuleId::DI, gInv).J(0).S(sols));
          {
            int gPre = prdi[0];
            int i = static_cast<int>(gseq(c, gPre).ante.size()) - 1;
            gPre = expose_left_conj(c, gPre, i, ndc);
            Env ePre = name_dom(env, gPre, i);
            guarded(c, node->line,
                    [&] { run_or_auto(c, ePre, gPre, node->sp1); });
          }
          {
            int gInd = prdi[1];
            int i = static_cast<int>(gseq(c, gInd).ante.size()) - 1;
            gInd = expose_left_conj(c, gInd, i, ndc);
            Env eInd;
            eInd.g = env.g.renamed(ren);
            eInd.h = Hind;
            eInd = name_dom(eInd, gInd, i);
            guarded(c, node->line,
                    [&] { run_or_auto(c, eInd, gInd, node->sp2); });
          }
        });
        invs.emplace_back(node->name, psi);
        ++ndc;
        node = node->tail;
        break;
      }
      default: {
        SPPtr fin = node->kind == SPKind::Finally ? node->sp1 : node;
        ProgramPtr ode = gseq(c, goal).succ[0]->prog;
        std::vector<Variable> bnd = unprimed_bound(ode);
        VarSet u2 = used_vars(c, goal, env);
        {
          VarSet hv = Hind.vars();
          u2.insert(hv.begin(), hv.end());
        }
        std::vector<TermPtr> sols;
        RenameMap ren;
        for (auto& x : bnd) {
          Variable gk = take_fresh(x.base, u2);
          sols.push_back(tvar(gk));
          ren[x] = gk;
        }
        goal = step1(c, RA(RuleId::DW, goal).J(0).S(sols));
        int i = static_cast<int>(gseq(c, goal).ante.size()) - 1;
        goal = expose_left_conj(c, goal, i, ndc);
        Env eF;
        eF.g = env.g.renamed(ren);
        eF.h = Hind;
        eF = name_dom(eF, goal, i);
        note_trace(c, eF.h);
        return run(c, eF, goal, fin);
      }
    }
  }
  fail("inv: unterminated differential invariant chain");
}

// -- solve ------------------------------------------------------------------

StaticTrace run_solve(Chk& c, Env env, int goal, const StructuredProof& sp) {
  goal = normalize(c, goal);
  const Sequent s0 = gseq(c, goal);
  if (s0.succ.empty()) fail("solve: no goal formula");
  FormulaPtr f = s0.succ[0];
  bool dia = f->kind == FormulaKind::Diamond;
  if ((f->kind != FormulaKind::Box && !dia) ||
      f->prog->kind != ProgramKind::ODE)
    fail("solve: goal is not an ODE modality: " + print(f));
  env.g = match_or_fail(env.g, sp.pat, expr_of(f->prog), "solve");
  const std::vector<ODEEq>& odes = f->prog->odes;
  VarSet used = used_vars(c, goal, env);
  Variable clock = take_fresh("t", used);
  std::map<Variable, TermPtr> smap = symbolic_solve(odes, clock);
  std::vector<TermPtr> sols;
  for (auto& e : odes) sols.push_back(smap.at(e.var));
  TermPtr dur;
  if (dia) {
    if (!sp.term) fail("solve: diamond solving needs a duration");
    dur = ext(env, sp.term);
  }
  RA ra(dia ? RuleId::DiaSolve : RuleId::Solve, goal);
  ra.J(0).V(clock).S(sols);
  if (dia) ra.T(dur);
  auto prem = step(c, ra);
  // 2 side goals (derivative, initial value) per equation, then the main
  // premise last.
  for (size_t k = 0; k + 1 < prem.size(); ++k) close_arith(c, prem[k]);
  int g = prem.back();
  if (!dia) {
    const Sequent& sm = gseq(c, g);
    int na = static_cast<int>(sm.ante.size());
    FormulaPtr tfact = sm.ante[na - 2];
    FormulaPtr dfact = sm.ante[na - 1];
    env.g = match_or_fail(env.g, sp.pat2, expr_of(tfact), "solve t:");
    env.g = match_or_fail(env.g, sp.pat3, expr_of(f->prog->fml), "solve dom:");
    env.g = env.g.with_fact("t", tfact).with_fact("dom", dfact);
    for (auto& e : odes) env.h.push_sub(e.var, smap.at(e.var));
    note_trace(c, env.h);
    return run(c, env, g, sp.sp1);
  }
  // Diamond: succ[0] = dur>=0 /\ (domain-check /\ post[sol(dur)]).
  FormulaPtr top = gseq(c, g).succ[0];
  FormulaPtr A = top->f1;
  FormulaPtr B = top->f2->f1;
  FormulaPtr AB = fand(A, B);
  auto pr = step(c, RA(RuleId::Cut, g).F(AB));
  {
    int g1 = step1(c, RA(RuleId::WeakenR, pr[0]).J(0));
    g1 = move_last_succ_front(c, g1);
    guarded(c, sp.line, [&] { run_or_auto(c, env, g1, sp.sp2); });
  }
  int g2 = pr[1];
  g2 = step1(c, RA(RuleId::AndL, g2)
                    .I(static_cast<int>(gseq(c, g2).ante.size()) - 1));
  auto p1 = step(c, RA(RuleId::AndR, g2).J(0));
  {
    const Sequent& sa = gseq(c, p1[0]);
    step(c, RA(RuleId::Id, p1[0]).I(ante_index(sa, A)).J(0));
  }
  auto p2 = step(c, RA(RuleId::AndR, p1[1]).J(0));
  {
    const Sequent& sb = gseq(c, p2[0]);
    step(c, RA(RuleId::Id, p2[0]).I(ante_index(sb, B)).J(0));
  }
  int gc = p2[1];
  env.g = match_or_fail(env.g, sp.pat2, expr_of(A), "solve t:");
  env.g = match_or_fail(env.g, sp.pat3, expr_of(f->prog->fml), "solve dom:");
  env.g = env.g.with_fact("t", A).with_fact("dom", B);
  for (auto& e : odes)
    env.h.push_sub(e.var, substitute(smap.at(e.var), SubstMap{{clock, dur}}));
  note_trace(c, env.h);
  return run(c, env, gc, sp.sp1);
}

// -- con --------------------------------------------------------------------

StaticTrace run_con(Chk& c, Env env, int goal, const StructuredProof& sp) {
  goal = normalize(c, goal);
  const Sequent s0 = gseq(c, goal);
  if (s0.succ.empty()) fail("con: no goal formula");
  FormulaPtr f = s0.succ[0];
  if (f->kind != FormulaKind::Diamond || f->prog->kind != ProgramKind::Loop)
    fail("con: goal is not a diamond loop: " + print(f));
  const Variable v = sp.var;
  FormulaPtr phi = exf(env, want_fml(sp.expr, "con"));
  FormulaPtr exv = fexists(v, phi);
  auto pr1 = step(c, RA(RuleId::Cut, goal).F(exv));
  {
    int g1 = step1(c, RA(RuleId::WeakenR, pr1[0]).J(0));
    g1 = move_last_succ_front(c, g1);
    guarded(c, sp.line, [&] { run_or_auto(c, env, g1, sp.sp1); });
  }
  int g = pr1[1];
  FormulaPtr target =
      fexists(v, fand(fcmp(CmpOp::Le, tvar(v), tlit(0)), phi));
  FormulaPtr dtgt = fdiamond(f->prog, target);
  auto pr2 = step(c, RA(RuleId::Cut, g).F(dtgt));
  VarSet bound;
  for (auto& x : unprimed_bound(f->prog->a)) bound.insert(x);
  {
    int ga = step1(c, RA(RuleId::WeakenR, pr2[0]).J(0));
    ga = move_last_succ_front(c, ga);
    guarded(c, sp.line, [&] {
      VarSet u = used_vars(c, ga, env);
      Abstraction absI = abstract_trace(env.h, bound, u);
      std::vector<TermPtr> sols;
      for (auto& x : bound) sols.push_back(tvar(absI.renaming.at(x)));
      int ie = ante_index(gseq(c, ga), exv);
      int gi = step1(c, RA(RuleId::Con, ga).I(ie).J(0).S(sols));
      Env eI;
      eI.g = env.g.renamed(absI.renaming)
                 .with_fact(c.anon(), fcmp(CmpOp::Gt, tvar(v), tlit(0)))
                 .with_fact(sp.name.empty() ? c.anon() : sp.name, phi);
      eI.h = absI.trace;
      note_trace(c, eI.h);
      run(c, eI, gi, sp.sp2);
    });
  }
  int gb = pr2[1];
  VarSet u2 = used_vars(c, gb, env);
  Abstraction abs2 = abstract_trace(env.h, bound, u2);
  std::vector<TermPtr> sols2;
  for (auto& x : bound) sols2.push_back(tvar(abs2.renaming.at(x)));
  int id = ante_index(gseq(c, gb), dtgt);
  gb = step1(c, RA(RuleId::MonDia, gb).I(id).J(0).S(sols2));
  gb = step1(c, RA(RuleId::ExistsL, gb)
                    .I(static_cast<int>(gseq(c, gb).ante.size()) - 1)
                    .V(v));
  int il = static_cast<int>(gseq(c, gb).ante.size()) - 1;
  gb = step1(c, RA(RuleId::AndL, gb).I(il));
  Env eP;
  eP.g = abs2.renaming.empty() ? env.g : env.g.renamed(abs2.renaming);
  eP.g = eP.g.with_fact(c.anon(), fcmp(CmpOp::Le, tvar(v), tlit(0)))
             .with_fact(sp.name.empty() ? c.anon() : sp.name, phi);
  eP.h = abs2.trace;
  note_trace(c, eP.h);
  return run(c, eP, gb, sp.tail);
}

// -- context-only operations ------------------------------------------------

void apply_ctx_op(Chk& c, Env& env, const StructuredProof& sp) {
  switch (sp.kind) {
    case SPKind::Let: {
      Expr v;
      if (sp.expr.term)
        v = expr_of(ext(env, sp.expr.term));
      else if (sp.expr.fml)
        v = expr_of(exf(env, sp.expr.fml));
      else
        v = sp.expr;
      env.g = match_or_fail(env.g, sp.pat, v, "let");
      return;
    }
    case SPKind::FunLet: {
      Expr mob;
      try {
        if (sp.expr.term)
          mob = expr_of(mobilize(env.h, sp.expr.term, sp.arg));
        else
          mob = expr_of(
              mobilize(env.h, want_fml(sp.expr, "let f(s)"), sp.arg));
      } catch (const std::exception& e) {
        fail(std::string(e.what()));
      }
      env.g = env.g.with_abbrev(sp.name, mob);
      return;
    }
    default:
      fail("internal: not a context operation");
  }
}

// -- dispatcher -------------------------------------------------------------

StaticTrace run(Chk& c, Env env, int goal, const SPPtr& sp) {
  if (!sp) fail("incomplete proof: missing subproof");
  try {
    switch (sp->kind) {
      case SPKind::Show:
        run_show(c, env, goal, *sp);
        return env.h;
      case SPKind::Assume: {
        goal = normalize(c, goal);
        const Sequent& s = gseq(c, goal);
        if (s.succ.empty() || s.succ[0]->kind != FormulaKind::Imply)
          fail("assume: goal is not an implication: " +
               (s.succ.empty() ? std::string("<empty>") : print(s.succ[0])));
        FormulaPtr hyp = s.succ[0]->f1;
        goal = step1(c, RA(RuleId::ImplyR, goal).J(0));
        env.g = match_or_fail(env.g, sp->pat, expr_of(hyp), "assume");
        env.g = env.g.with_fact(sp->name.empty() ? c.anon() : sp->name, hyp);
        return run(c, env, goal, sp->sp1);
      }
      case SPKind::Let:
      case SPKind::FunLet:
        apply_ctx_op(c, env, *sp);
        return run(c, env, goal, sp->sp1);
      case SPKind::Note: {
        FormulaPtr psi = fp_concl(env, sp->fp);
        auto pr = step(c, RA(RuleId::Cut, goal).F(psi));
        guarded(c, sp->line, [&] {
          derive_fact(c, env, move_last_succ_front(c, pr[0]), sp->fp, psi);
        });
        env.g = env.g.with_fact(sp->name.empty() ? c.anon() : sp->name, psi);
        return run(c, env, pr[1], sp->sp1);
      }
      case SPKind::Have: {
        FormulaPtr psi = exf(env, want_fml(sp->expr, "have"));
        auto pr = step(c, RA(RuleId::Cut, goal).F(psi));
        guarded(c, sp->line, [&] {
          int g1 = keep_only_succ(
              c, pr[0], static_cast<int>(gseq(c, pr[0]).succ.size()) - 1);
          run(c, env, g1, sp->sp1);
        });
        env.g = env.g.with_fact(sp->name.empty() ? c.anon() : sp->name, psi);
        return run(c, env, pr[1], sp->sp2);
      }
      case SPKind::Case:
        return run_case(c, env, goal, *sp);
      case SPKind::Assign: {
        goal = normalize(c, goal);
        const Sequent& s = gseq(c, goal);
        if (s.succ.empty()) fail("assign: no goal formula");
        FormulaPtr f = s.succ[0];
        if ((f->kind != FormulaKind::Box &&
             f->kind != FormulaKind::Diamond) ||
            f->prog->kind != ProgramKind::Assign)
          fail("assign: goal is not an assignment modality: " + print(f));
        if (!(f->prog->var == sp->var))
          fail("assign: goal assigns " + f->prog->var.str() + ", proof says " +
               sp->var.str());
        if (sp->term) {
          TermPtr want = ext(env, sp->term);
          if (!equal(want, f->prog->term))
            fail("assign: goal value " + print(f->prog->term) +
                 " differs from " + print(want));
        }
        goal = do_assign(c, env, goal);
        return run(c, env, goal, sp->sp1);
      }
      case SPKind::AssignAny: {
        goal = normalize(c, goal);
        const Sequent& s = gseq(c, goal);
        if (s.succ.empty()) fail("assign *: no goal formula");
        if (!(s.succ[0]->prog && s.succ[0]->prog->var == sp->var))
          fail("assign *: variable mismatch");
        goal = do_assign_any(c, env, goal);
        return run(c, env, goal, sp->sp1);
      }
      case SPKind::After:
        return run_after(c, env, goal, *sp);
      case SPKind::State: {
        if (env.h.has_mark(sp->name))
          fail("state: duplicate mark `" + sp->name + "`");
        env.h.push_mark(sp->name);
        note_trace(c, env.h);
        return run(c, env, goal, sp->sp1);
      }
      case SPKind::Focus: {
        const Sequent s = gseq(c, goal);
        for (int j = 0; j < static_cast<int>(s.succ.size()); ++j) {
          std::optional<Context> m = match(env.g, sp->pat, expr_of(s.succ[j]));
          if (!m) continue;
          Env e = env;
          e.g = *m;
          run(c, e, move_succ_front(c, goal, j), sp->sp1);
          return env.h;
        }
        for (int i = 0; i < static_cast<int>(s.ante.size()); ++i) {
          std::optional<Context> m = match(env.g, sp->pat, expr_of(s.ante[i]));
          if (!m) continue;
          Env e = env;
          e.g = *m;
          run(c, e, step1(c, RA(RuleId::FlipL, goal).I(i)), sp->sp1);
          return env.h;
        }
        fail("focus: no formula matches " + print(sp->pat));
      }
      case SPKind::Solve:
        return run_solve(c, env, goal, *sp);
      case SPKind::Inv:
      case SPKind::Ghost: {
        goal = normalize(c, goal);
        const Sequent& s = gseq(c, goal);
        if (s.succ.empty()) fail("inv: no goal formula");
        FormulaPtr f = s.succ[0];
        if (f->kind == FormulaKind::Box &&
            f->prog->kind == ProgramKind::Loop)
          return run_loop_chain(c, env, goal, sp);
        if (f->kind == FormulaKind::Box && f->prog->kind == ProgramKind::ODE)
          return run_ode_chain(c, env, goal, sp);
        fail("inv: goal is neither a loop nor an ODE box: " + print(f));
      }
      case SPKind::Finally: {
        goal = normalize(c, goal);
        const Sequent& sf = gseq(c, goal);
        if (!sf.succ.empty() && sf.succ[0]->kind == FormulaKind::Box &&
            sf.succ[0]->prog->kind == ProgramKind::ODE)
          return run_ode_chain(c, env, goal, sp);
        fail("finally: no invariant chain to conclude");
      }
      case SPKind::Con:
        return run_con(c, env, goal, *sp);
    }
    fail("internal: unknown proof node");
  } catch (const NeedsOracle& e) {
    std::string msg = e.what();
    if (msg.rfind("line ", 0) == 0 || sp->line <= 0) throw;
    throw NeedsOracle(loc(sp->line) + msg);
  } catch (const AmbiguityError& e) {
    std::string msg = e.what();
    if (msg.rfind("line ", 0) == 0 || sp->line <= 0) throw;
    throw AmbiguityError(loc(sp->line) + msg);
  } catch (const CheckError& e) {
    std::string msg = e.what();
    if (msg.rfind("line ", 0) == 0 || sp->line <= 0) throw;
    throw CheckError(loc(sp->line) + msg);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Entry points.

CheckResult check(const Context& gamma, const StaticTrace& h, const SPPtr& sp,
                  const std::vector<FormulaPtr>& delta,
                  const CheckOptions& opt) {
  Chk c;
  c.opt = &opt;
  Sequent root;
  root.ante = gamma.fact_formulas();
  root.succ = delta;
  c.ps = ProofState::init(root);
  CheckResult res;
  res.trace = h;
  Env env{gamma, h};
  int root_goal = c.ps.goals().empty() ? 0 : c.ps.goals()[0].id;
  guarded(c, 0, [&] { res.trace = run(c, env, root_goal, sp); });
  if (!c.ps.proved() && c.errors.empty()) {
    c.errors.push_back("open goals remain");
    c.hard_fails++;
  }
  res.errors = c.errors;
  res.ok = c.hard_fails == 0 && c.oracle_fails == 0 && c.ps.proved();
  res.needs_oracle = c.oracle_fails > 0 && c.hard_fails == 0;
  res.cert = certificate_of(c.ps);
  return res;
}

CheckResult check_theorem(const FormulaPtr& theorem, const SPPtr& sp,
                          const CheckOptions& opt) {
  return check(Context{}, StaticTrace{}, sp, {theorem}, opt);
}

// ---------------------------------------------------------------------------
// Nominalization: insert `?t` marker tests following the proof's states.

namespace {

bool sp_has_mark(const SPPtr& sp) {
  if (!sp) return false;
  if (sp->kind == SPKind::State) return true;
  for (auto& b : sp->branches)
    if (sp_has_mark(b.sp)) return true;
  return sp_has_mark(sp->sp1) || sp_has_mark(sp->sp2) || sp_has_mark(sp->tail);
}

bool is_seq_of(const ProgramPtr& p, ProgramKind head) {
  return p && p->kind == ProgramKind::Seq && p->a->kind == head;
}

}  // namespace

ProgramPtr nominalize(const ProgramPtr& alpha, const SPPtr& sp) {
  if (!sp) return alpha;
  auto fallback = [&]() -> ProgramPtr {
    if (!sp_has_mark(sp)) return alpha;
    throw CheckError("nominalization: proof states do not fit the program");
  };
  switch (sp->kind) {
    case SPKind::State:
      return pseq(ptest(fnominal(sp->name)), nominalize(alpha, sp->sp1));
    case SPKind::Let:
    case SPKind::FunLet:
    case SPKind::Note:
      return nominalize(alpha, sp->sp1);
    case SPKind::Have:
      return nominalize(alpha, sp->sp2);
    case SPKind::Show:
    case SPKind::Focus:
    case SPKind::Case:
    case SPKind::Con:
      return alpha;
    case SPKind::Assume:
      if (is_seq_of(alpha, ProgramKind::Test))
        return pseq(alpha->a, nominalize(alpha->b, sp->sp1));
      return fallback();
    case SPKind::Assign:
      if (is_seq_of(alpha, ProgramKind::Assign) && alpha->a->var == sp->var)
        return pseq(alpha->a, nominalize(alpha->b, sp->sp1));
      return fallback();
    case SPKind::AssignAny:
      if (is_seq_of(alpha, ProgramKind::AssignAny) && alpha->a->var == sp->var)
        return pseq(alpha->a, nominalize(alpha->b, sp->sp1));
      return fallback();
    case SPKind::Solve:
      if (is_seq_of(alpha, ProgramKind::ODE))
        return pseq(alpha->a, nominalize(alpha->b, sp->sp1));
      return fallback();
    case SPKind::Inv:
    case SPKind::Ghost:
      return nominalize(alpha, sp->tail);
    case SPKind::Finally:
      if (is_seq_of(alpha, ProgramKind::Loop) ||
          is_seq_of(alpha, ProgramKind::ODE))
        return pseq(alpha->a, nominalize(alpha->b, sp->sp1));
      return fallback();
    case SPKind::After:
      if (alpha && alpha->kind == ProgramKind::Seq)
        return pseq(nominalize(alpha->a, sp->sp1),
                    nominalize(alpha->b, sp->sp2));
      return fallback();
  }
  return alpha;
}

}  // namespace kaisar
