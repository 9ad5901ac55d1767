#include "kaisar/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kaisar/analysis.hpp"

namespace kaisar {

std::function<void(const std::string&)> State::warn_sink;

static void warn(const std::string& msg) {
  if (State::warn_sink) State::warn_sink(msg);
}

void State::set(const Variable& v, const Rational& q) {
  if (mode_ != Mode::Exact) throw EvalError("exact write to approx state");
  qs_[v] = q;
}
void State::set(const Variable& v, double d) {
  if (mode_ != Mode::Approx) throw EvalError("approx write to exact state");
  ds_[v] = d;
}
Rational State::get_exact(const Variable& v) const {
  if (mode_ != Mode::Exact) throw EvalError("exact read of approx state");
  auto it = qs_.find(v);
  if (it == qs_.end()) {
    warn("variable " + v.str() + " unset, defaulting to 0");
    return Rational(0);
  }
  return it->second;
}
double State::get_approx(const Variable& v) const {
  if (mode_ != Mode::Approx) throw EvalError("approx read of exact state");
  auto it = ds_.find(v);
  if (it == ds_.end()) {
    warn("variable " + v.str() + " unset, defaulting to 0");
    return 0.0;
  }
  return it->second;
}
bool State::has(const Variable& v) const {
  return mode_ == Mode::Exact ? qs_.count(v) > 0 : ds_.count(v) > 0;
}
bool State::agrees_exact(const State& o, const VarSet& vars) const {
  for (auto& v : vars) {
    if (v.primed) continue;
    if (get_exact(v) != o.get_exact(v)) return false;
  }
  return true;
}

const State& DynamicTrace::last_state() const {
  for (auto it = entries.rbegin(); it != entries.rend(); ++it)
    if (!it->is_mark) return it->state;
  throw EvalError("empty dynamic trace");
}

std::string DynamicTrace::dump() const {
  std::ostringstream os;
  int k = 0;
  for (auto& e : entries) {
    if (e.is_mark) {
      os << "MARK " << e.mark << "\n";
      continue;
    }
    os << "STATE " << k++ << ":";
    bool first = true;
    if (e.state.mode() == Mode::Exact) {
      for (auto& [v, q] : e.state.exact_map()) {
        os << (first ? " " : ", ") << v.str() << "=" << rational_str(q);
        first = false;
      }
    } else {
      for (auto& [v, d] : e.state.approx_map()) {
        os << (first ? " " : ", ") << v.str() << "=" << d;
        first = false;
      }
    }
    os << "\n";
  }
  return os.str();
}

Interpretation interpretation_of(const DynamicTrace& trace) {
  Interpretation interp;
  const State* cur = nullptr;
  for (auto& e : trace.entries) {
    if (e.is_mark) {
      if (cur) interp.emplace(e.mark, *cur);
    } else {
      cur = &e.state;
    }
  }
  return interp;
}

const char* tv_str(TV v) {
  switch (v) {
    case TV::True: return "true";
    case TV::False: return "false";
    default: return "unknown";
  }
}

// -- exact term evaluation --------------------------------------------------

// q-th root of a rational, exact or EvalError.
static Rational exact_root(const Rational& base, const Integer& q) {
  if (q == 1) return base;
  if (base < 0) throw EvalError("root of negative value");
  auto iroot = [&](const Integer& n) {
    if (n == 0 || n == 1) return n;
    Integer lo = 0, hi = n;
    while (lo < hi) {
      Integer mid = (lo + hi + 1) / 2;
      Integer p = 1;
      bool over = false;
      for (Integer i = 0; i < q; ++i) {
        p *= mid;
        if (p > n) { over = true; break; }
      }
      if (over) hi = mid - 1; else lo = mid;
    }
    Integer p = 1;
    for (Integer i = 0; i < q; ++i) p *= lo;
    if (p != n) throw EvalError("irrational root in exact mode");
    return lo;
  };
  return Rational(iroot(numerator(base)), iroot(denominator(base)));
}

static Rational exact_pow(const Rational& base, const Rational& e) {
  Integer num = numerator(e), den = denominator(e);
  Rational root = exact_root(base, den);
  bool neg = num < 0;
  Integer n = neg ? Integer(-num) : num;
  if (neg && root == 0) throw EvalError("zero to negative power");
  Rational r = 1;
  for (Integer i = 0; i < n; ++i) r *= root;
  return neg ? Rational(1) / r : r;
}

Rational eval_term_exact(const TermPtr& t, const State& s,
                         const Interpretation& interp) {
  switch (t->kind) {
    case TermKind::Var: return s.get_exact(t->var);
    case TermKind::Lit: return t->lit;
    case TermKind::Plus:
      return eval_term_exact(t->a, s, interp) + eval_term_exact(t->b, s, interp);
    case TermKind::Minus:
      return eval_term_exact(t->a, s, interp) - eval_term_exact(t->b, s, interp);
    case TermKind::Times:
      return eval_term_exact(t->a, s, interp) * eval_term_exact(t->b, s, interp);
    case TermKind::Divide: {
      Rational d = eval_term_exact(t->b, s, interp);
      if (d == 0) throw EvalError("division by zero");
      return eval_term_exact(t->a, s, interp) / d;
    }
    case TermKind::Neg: return -eval_term_exact(t->a, s, interp);
    case TermKind::Power:
      return exact_pow(eval_term_exact(t->a, s, interp), t->lit);
    case TermKind::Differential: {
      auto d = term_differential(t->a);
      return eval_term_exact(d.d, s, interp);
    }
    case TermKind::App: {
      Rational a = eval_term_exact(t->a, s, interp);
      if (t->name == "abs") return a < 0 ? Rational(-a) : a;
      if (t->name == "sqrt") return exact_root(a, 2);
      Rational b = eval_term_exact(t->b, s, interp);
      if (t->name == "min") return std::min(a, b);
      if (t->name == "max") return std::max(a, b);
      throw EvalError("unknown function " + t->name);
    }
    case TermKind::Nominal: {
      auto it = interp.find(t->name);
      if (it == interp.end())
        throw EvalError("uninterpreted state " + t->name);
      return eval_term_exact(t->a, it->second, interp);
    }
    case TermKind::Now: return eval_term_exact(t->a, s, interp);
    case TermKind::Abbrev:
      throw EvalError("cannot evaluate abbreviation " + t->name);
  }
  throw EvalError("bad term");
}

double eval_term_approx(const TermPtr& t, const State& s,
                        const Interpretation& interp) {
  switch (t->kind) {
    case TermKind::Var: return s.get_approx(t->var);
    case TermKind::Lit: return to_double(t->lit);
    case TermKind::Plus:
      return eval_term_approx(t->a, s, interp) +
             eval_term_approx(t->b, s, interp);
    case TermKind::Minus:
      return eval_term_approx(t->a, s, interp) -
             eval_term_approx(t->b, s, interp);
    case TermKind::Times:
      return eval_term_approx(t->a, s, interp) *
             eval_term_approx(t->b, s, interp);
    case TermKind::Divide: {
      double d = eval_term_approx(t->b, s, interp);
      if (std::fabs(d) < 1e-300) throw EvalError("division by zero");
      return eval_term_approx(t->a, s, interp) / d;
    }
    case TermKind::Neg: return -eval_term_approx(t->a, s, interp);
    case TermKind::Power: {
      double base = eval_term_approx(t->a, s, interp);
      double e = to_double(t->lit);
      if (is_integer(t->lit)) {
        double r = std::pow(base, e);
        if (!std::isfinite(r)) throw EvalError("power overflow");
        return r;
      }
      if (base < 0) throw EvalError("fractional power of negative value");
      return std::pow(base, e);
    }
    case TermKind::Differential: {
      auto d = term_differential(t->a);
      return eval_term_approx(d.d, s, interp);
    }
    case TermKind::App: {
      double a = eval_term_approx(t->a, s, interp);
      if (t->name == "abs") return std::fabs(a);
      if (t->name == "sqrt") {
        if (a < 0) throw EvalError("sqrt of negative value");
        return std::sqrt(a);
      }
      double b = eval_term_approx(t->b, s, interp);
      if (t->name == "min") return std::min(a, b);
      if (t->name == "max") return std::max(a, b);
      throw EvalError("unknown function " + t->name);
    }
    case TermKind::Nominal: {
      auto it = interp.find(t->name);
      if (it == interp.end())
        throw EvalError("uninterpreted state " + t->name);
      return eval_term_approx(t->a, it->second, interp);
    }
    case TermKind::Now: return eval_term_approx(t->a, s, interp);
    case TermKind::Abbrev:
      throw EvalError("cannot evaluate abbreviation " + t->name);
  }
  throw EvalError("bad term");
}

// -- sampling ---------------------------------------------------------------

Rational sample_rational(std::mt19937_64& rng) {
  static const int dens[] = {1, 1, 2, 4};
  std::uniform_int_distribution<int> num(-40, 40);
  std::uniform_int_distribution<int> den(0, 3);
  return Rational(num(rng), dens[den(rng)]);
}
double sample_real(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-100.0, 100.0);
  return d(rng);
}

static const double kGrid[] = {-10, -1, -0.5, 0, 0.5, 1, 10};

// Comparison margins in approximate mode: results within the confirmation
// band count as definite, the gray zone in between is Unknown.
static const double kTolTrue = 1e-9;
static const double kTolFalse = 1e-6;

// -- formula evaluation -----------------------------------------------------

static TV tv_not(TV v) {
  if (v == TV::True) return TV::False;
  if (v == TV::False) return TV::True;
  return TV::Unknown;
}
static TV tv_and(TV a, TV b) {
  if (a == TV::False || b == TV::False) return TV::False;
  if (a == TV::True && b == TV::True) return TV::True;
  return TV::Unknown;
}
static TV tv_or(TV a, TV b) { return tv_not(tv_and(tv_not(a), tv_not(b))); }

static TV eval_cmp_exact(CmpOp op, const Rational& a, const Rational& b) {
  bool r;
  switch (op) {
    case CmpOp::Lt: r = a < b; break;
    case CmpOp::Le: r = a <= b; break;
    case CmpOp::Eq: r = a == b; break;
    case CmpOp::Ge: r = a >= b; break;
    case CmpOp::Gt: r = a > b; break;
    case CmpOp::Ne: r = a != b; break;
  }
  return r ? TV::True : TV::False;
}

static TV eval_cmp_approx(CmpOp op, double a, double b) {
  double d = a - b;
  switch (op) {
    case CmpOp::Lt:
      if (d < -kTolTrue) return TV::True;
      if (d > kTolFalse) return TV::False;
      return TV::Unknown;
    case CmpOp::Le:
      if (d <= kTolTrue) return TV::True;
      if (d > kTolFalse) return TV::False;
      return TV::Unknown;
    case CmpOp::Ge: return eval_cmp_approx(CmpOp::Le, b, a);
    case CmpOp::Gt: return eval_cmp_approx(CmpOp::Lt, b, a);
    case CmpOp::Eq:
      if (std::fabs(d) <= kTolTrue) return TV::True;
      if (std::fabs(d) > kTolFalse) return TV::False;
      return TV::Unknown;
    case CmpOp::Ne: return tv_not(eval_cmp_approx(CmpOp::Eq, a, b));
  }
  return TV::Unknown;
}

TV eval_formula(const FormulaPtr& f, const State& s, const Budget& budget,
                const Interpretation& interp, std::mt19937_64* rng) {
  std::mt19937_64 local(budget.seed);
  if (!rng) rng = &local;
  switch (f->kind) {
    case FormulaKind::True: return TV::True;
    case FormulaKind::False: return TV::False;
    case FormulaKind::Cmp: {
      try {
        if (s.mode() == Mode::Exact)
          return eval_cmp_exact(f->op, eval_term_exact(f->t1, s, interp),
                                eval_term_exact(f->t2, s, interp));
        return eval_cmp_approx(f->op, eval_term_approx(f->t1, s, interp),
                               eval_term_approx(f->t2, s, interp));
      } catch (const EvalError&) {
        return TV::Unknown;
      } catch (const DifferentialError&) {
        return TV::Unknown;
      }
    }
    case FormulaKind::Not:
      return tv_not(eval_formula(f->f1, s, budget, interp, rng));
    case FormulaKind::And:
      return tv_and(eval_formula(f->f1, s, budget, interp, rng),
                    eval_formula(f->f2, s, budget, interp, rng));
    case FormulaKind::Or:
      return tv_or(eval_formula(f->f1, s, budget, interp, rng),
                   eval_formula(f->f2, s, budget, interp, rng));
    case FormulaKind::Imply:
      return tv_or(tv_not(eval_formula(f->f1, s, budget, interp, rng)),
                   eval_formula(f->f2, s, budget, interp, rng));
    case FormulaKind::Equiv: {
      TV a = eval_formula(f->f1, s, budget, interp, rng);
      TV b = eval_formula(f->f2, s, budget, interp, rng);
      if (a == TV::Unknown || b == TV::Unknown) return TV::Unknown;
      return a == b ? TV::True : TV::False;
    }
    case FormulaKind::Forall:
    case FormulaKind::Exists: {
      bool uni = f->kind == FormulaKind::Forall;
      for (int i = 0; i < budget.reals; ++i) {
        State s2 = s;
        if (s.mode() == Mode::Exact) {
          Rational v = i < 7 ? Rational(kGrid[i] * 2) / 2
                             : sample_rational(*rng);
          s2.set(f->var, v);
        } else {
          double v = i < 7 ? kGrid[i] : sample_real(*rng);
          s2.set(f->var, v);
        }
        TV r = eval_formula(f->f1, s2, budget, interp, rng);
        if (uni && r == TV::False) return TV::False;
        if (!uni && r == TV::True) return TV::True;
      }
      return TV::Unknown;  // sampling cannot certify a quantifier over R
    }
    case FormulaKind::Box:
    case FormulaKind::Diamond: {
      RunResult rr;
      try {
        rr = run_program(f->prog, s, budget, interp);
      } catch (const EvalError&) {
        return TV::Unknown;
      }
      bool box = f->kind == FormulaKind::Box;
      bool all_true = true, all_false = true;
      for (auto& run : rr.runs) {
        TV r = eval_formula(f->f1, run.end, budget, interp, rng);
        if (r != TV::True) all_true = false;
        if (r != TV::False) all_false = false;
        if (box && r == TV::False) return TV::False;
        if (!box && r == TV::True) return TV::True;
      }
      if (box && all_true && rr.exhaustive) return TV::True;
      if (!box && all_false && rr.exhaustive) return TV::False;
      return TV::Unknown;
    }
    case FormulaKind::NominalF: {
      auto it = interp.find(f->name);
      if (it == interp.end()) return TV::Unknown;
      const State& target = it->second;
      if (s.mode() == Mode::Exact) {
        for (auto& [v, q] : target.exact_map()) {
          if (v.primed) continue;
          if (s.get_exact(v) != q) return TV::False;
        }
        return TV::True;
      }
      TV acc = TV::True;
      for (auto& [v, d] : target.approx_map()) {
        if (v.primed) continue;
        TV r = eval_cmp_approx(CmpOp::Eq, s.get_approx(v), d);
        acc = tv_and(acc, r);
      }
      return acc;
    }
  }
  return TV::Unknown;
}

// -- program execution ------------------------------------------------------

namespace {

struct Cfg {
  State s;
  DynamicTrace tr;
};

struct Exec {
  const Budget& budget;
  const Interpretation& interp;
  std::mt19937_64 rng;
  bool exhaustive = true;

  explicit Exec(const Budget& b, const Interpretation& i)
      : budget(b), interp(i), rng(b.seed) {}

  void cap(std::vector<Cfg>& cfgs) {
    if (static_cast<int>(cfgs.size()) > budget.paths) {
      cfgs.resize(budget.paths);
      exhaustive = false;
    }
  }

  std::vector<Cfg> run(const ProgramPtr& p, std::vector<Cfg> in);
  std::vector<Cfg> run_ode(const ProgramPtr& p, const Cfg& c);
};

static Cfg with_state(Cfg c, State s) {
  TraceEntry e;
  e.state = s;
  c.tr.entries.push_back(std::move(e));
  c.s = std::move(s);
  return c;
}

std::vector<Cfg> Exec::run(const ProgramPtr& p, std::vector<Cfg> in) {
  std::vector<Cfg> out;
  switch (p->kind) {
    case ProgramKind::Assign:
      for (auto& c : in) {
        State s2 = c.s;
        try {
          if (s2.mode() == Mode::Exact)
            s2.set(p->var, eval_term_exact(p->term, c.s, interp));
          else
            s2.set(p->var, eval_term_approx(p->term, c.s, interp));
        } catch (const EvalError&) {
          exhaustive = false;
          continue;  // undefined rhs: path dies
        }
        out.push_back(with_state(c, std::move(s2)));
      }
      break;
    case ProgramKind::AssignAny: {
      exhaustive = false;  // cannot enumerate all reals
      for (auto& c : in) {
        for (int i = 0; i < budget.reals; ++i) {
          State s2 = c.s;
          if (s2.mode() == Mode::Exact)
            s2.set(p->var,
                   i < 7 ? Rational(kGrid[i] * 2) / 2 : sample_rational(rng));
          else
            s2.set(p->var, i < 7 ? kGrid[i] : sample_real(rng));
          out.push_back(with_state(c, std::move(s2)));
        }
      }
      break;
    }
    case ProgramKind::Test: {
      for (auto& c : in) {
        if (budget.record_nominals && p->fml->kind == FormulaKind::NominalF) {
          Cfg c2 = c;
          TraceEntry e;
          e.is_mark = true;
          e.mark = p->fml->name;
          c2.tr.entries.push_back(std::move(e));
          out.push_back(std::move(c2));
          continue;
        }
        TV r = eval_formula(p->fml, c.s, budget, interp, &rng);
        if (r == TV::True) out.push_back(c);
        else if (r == TV::Unknown) exhaustive = false;
      }
      break;
    }
    case ProgramKind::Seq:
      out = run(p->b, run(p->a, std::move(in)));
      break;
    case ProgramKind::Choice: {
      std::vector<Cfg> copy = in;
      out = run(p->a, std::move(copy));
      auto r2 = run(p->b, std::move(in));
      out.insert(out.end(), r2.begin(), r2.end());
      break;
    }
    case ProgramKind::Loop: {
      exhaustive = false;  // unbounded iteration
      std::vector<Cfg> cur = in;
      out = in;  // zero iterations
      for (int i = 0; i < budget.iterations; ++i) {
        cur = run(p->a, std::move(cur));
        if (cur.empty()) break;
        out.insert(out.end(), cur.begin(), cur.end());
        cap(out);
        if (static_cast<int>(out.size()) >= budget.paths) break;
      }
      break;
    }
    case ProgramKind::ODE:
      for (auto& c : in) {
        auto r = run_ode(p, c);
        out.insert(out.end(), r.begin(), r.end());
      }
      break;
  }
  cap(out);
  return out;
}

std::vector<Cfg> Exec::run_ode(const ProgramPtr& p, const Cfg& c) {
  if (c.s.mode() == Mode::Exact)
    throw EvalError("ODE execution requires approximate mode");
  exhaustive = false;  // continuous duration is sampled
  TV at0 = eval_formula(p->fml, c.s, budget, interp, &rng);
  if (at0 != TV::True) return {};

  std::vector<Variable> vars;
  for (auto& e : p->odes) vars.push_back(e.var);
  auto deriv = [&](const State& s) {
    std::vector<double> d;
    d.reserve(vars.size());
    for (auto& e : p->odes) d.push_back(eval_term_approx(e.rhs, s, interp));
    return d;
  };
  auto step_from = [&](const State& s, double h) {
    // classical RK4
    auto add = [&](const State& base, const std::vector<double>& k,
                   double scale) {
      State r = base;
      for (size_t i = 0; i < vars.size(); ++i)
        r.set(vars[i], base.get_approx(vars[i]) + scale * k[i]);
      return r;
    };
    std::vector<double> k1 = deriv(s);
    std::vector<double> k2 = deriv(add(s, k1, h / 2));
    std::vector<double> k3 = deriv(add(s, k2, h / 2));
    std::vector<double> k4 = deriv(add(s, k3, h));
    State r = s;
    for (size_t i = 0; i < vars.size(); ++i)
      r.set(vars[i], s.get_approx(vars[i]) +
                         h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]));
    return r;
  };

  std::vector<State> traj{c.s};
  State cur = c.s;
  double t = 0;
  while (t < budget.ode_time) {
    double h = std::min(budget.step, budget.ode_time - t);
    State nxt;
    try {
      nxt = step_from(cur, h);
    } catch (const EvalError&) {
      break;
    }
    TV dom = eval_formula(p->fml, nxt, budget, interp, &rng);
    if (dom == TV::True) {
      cur = nxt;
      t += h;
      traj.push_back(cur);
      continue;
    }
    // The domain fails (or is uncertain) within this step: bisect to the
    // boundary, keeping the last state still inside the domain.
    double lo = 0, hi = h;
    State inside = cur;
    while (hi - lo > 1e-9) {
      double mid = (lo + hi) / 2;
      State m;
      try {
        m = step_from(cur, mid);
      } catch (const EvalError&) {
        break;
      }
      if (eval_formula(p->fml, m, budget, interp, &rng) == TV::True) {
        lo = mid;
        inside = m;
      } else {
        hi = mid;
      }
    }
    traj.push_back(inside);
    break;
  }

  // Any prefix duration is a legal run: sample a few stopping points,
  // always including duration 0 and the final reachable state.
  std::vector<size_t> stops{0, traj.size() - 1};
  for (int i = 1; i < budget.ode_stops; ++i)
    stops.push_back(traj.size() * i / (budget.ode_stops + 1));
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

  std::vector<Cfg> out;
  for (size_t idx : stops) {
    if (idx == 0) {
      out.push_back(c);  // duration-0 run keeps the state
    } else {
      out.push_back(with_state(c, traj[idx]));
    }
  }
  return out;
}

}  // namespace

RunResult run_program(const ProgramPtr& p, const State& init,
                      const Budget& budget, const Interpretation& interp) {
  Exec ex(budget, interp);
  Cfg c0;
  c0.s = init;
  TraceEntry e;
  e.state = init;
  c0.tr.entries.push_back(std::move(e));
  auto cfgs = ex.run(p, {c0});
  RunResult rr;
  rr.exhaustive = ex.exhaustive;
  for (auto& c : cfgs) {
    Run r;
    r.trace = std::move(c.tr);
    r.end = std::move(c.s);
    rr.runs.push_back(std::move(r));
  }
  return rr;
}

}  // namespace kaisar
