#pragma once

// Random generators shared by unit and acceptance tests: correlated
// dynamic/static trace pairs built the same way the proof checker builds
// them (value-correct by construction), plus random polynomial terms.

#include <random>

#include "kaisar/patterns.hpp"
#include "kaisar/semantics.hpp"
#include "kaisar/traces.hpp"

namespace kaisar::testgen {

inline const std::vector<Variable>& pool() {
  static std::vector<Variable> p{Variable("x"), Variable("y"), Variable("z"),
                                 Variable("v")};
  return p;
}

// Random polynomial over the program variables (depth-bounded).
inline TermPtr random_term(std::mt19937_64& rng, int depth = 3) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 4);
  switch (pick(rng)) {
    case 0: {
      std::uniform_int_distribution<int> v(0, (int)pool().size() - 1);
      return tvar(pool()[v(rng)]);
    }
    case 1: return tlit(sample_rational(rng));
    case 2: return tplus(random_term(rng, depth - 1), random_term(rng, depth - 1));
    case 3: return tminus(random_term(rng, depth - 1), random_term(rng, depth - 1));
    default: return ttimes(random_term(rng, depth - 1), random_term(rng, depth - 1));
  }
}

struct TracePair {
  DynamicTrace eta;       // program-level run
  StaticTrace h;          // checker-level record of the same run
  std::vector<std::string> marks;
  // program states at each mark, for nominal-correspondence checks
  std::map<std::string, State> mark_states;
};

// Build a correlated (eta, H) pair by simulating a random sequence of
// assignments (Sub or Eq style), havocs and marks, recording both views.
inline TracePair random_trace_pair(std::mt19937_64& rng, int steps = 8) {
  TracePair tp;
  State omega(Mode::Exact);
  for (auto& v : pool()) omega.set(v, sample_rational(rng));
  TraceEntry e0;
  e0.state = omega;
  tp.eta.entries.push_back(e0);

  VarSet used;
  for (auto& v : pool()) used.insert(v);
  int mark_no = 0;
  std::uniform_int_distribution<int> kind(0, 3);
  std::uniform_int_distribution<int> vi(0, (int)pool().size() - 1);
  for (int i = 0; i < steps; ++i) {
    switch (kind(rng)) {
      case 0: {  // substitution-style assignment x := theta
        Variable x = pool()[vi(rng)];
        TermPtr theta = random_term(rng);
        Rational val = eval_term_exact(theta, omega);
        TermPtr composed = now_term(tp.h, theta);  // sequent frame
        omega.set(x, val);
        tp.h.push_sub(x, composed);
        TraceEntry e;
        e.state = omega;
        tp.eta.entries.push_back(e);
        break;
      }
      case 1: {  // equality-style assignment: frame renamed to a ghost
        Variable x = pool()[vi(rng)];
        TermPtr theta = random_term(rng);
        Rational val = eval_term_exact(theta, omega);
        Variable ghost = fresh_var(x.base, used);
        used.insert(ghost);
        TermPtr composed =
            rename_free(now_term(tp.h, theta), RenameMap{{x, ghost}});
        omega.set(x, val);
        tp.h.push_eq(x, ghost, composed);
        TraceEntry e;
        e.state = omega;
        tp.eta.entries.push_back(e);
        break;
      }
      case 2: {  // havoc x := *
        Variable x = pool()[vi(rng)];
        Variable ghost = fresh_var(x.base, used);
        used.insert(ghost);
        omega.set(x, sample_rational(rng));
        tp.h.push_any(x, ghost);
        TraceEntry e;
        e.state = omega;
        tp.eta.entries.push_back(e);
        break;
      }
      default: {  // mark a state
        std::string name = "t" + std::to_string(mark_no++);
        tp.h.push_mark(name);
        TraceEntry e;
        e.is_mark = true;
        e.mark = name;
        tp.eta.entries.push_back(e);
        tp.marks.push_back(name);
        tp.mark_states.emplace(name, omega);
        break;
      }
    }
  }
  return tp;
}

// ---------------------------------------------------------------------------
// Random contexts, patterns and expressions (for match soundness tests).

inline FormulaPtr random_atom(std::mt19937_64& rng) {
  static const CmpOp ops[] = {CmpOp::Lt, CmpOp::Le, CmpOp::Eq,
                              CmpOp::Ge, CmpOp::Gt, CmpOp::Ne};
  std::uniform_int_distribution<int> op(0, 5);
  return fcmp(ops[op(rng)], random_term(rng, 2), random_term(rng, 2));
}

inline FormulaPtr random_formula(std::mt19937_64& rng, int depth = 2) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 0 : 4);
  switch (pick(rng)) {
    case 1: return fand(random_formula(rng, depth - 1),
                        random_formula(rng, depth - 1));
    case 2: return f_or(random_formula(rng, depth - 1),
                        random_formula(rng, depth - 1));
    case 3: return fimply(random_formula(rng, depth - 1),
                          random_formula(rng, depth - 1));
    case 4: return fnot(random_formula(rng, depth - 1));
    default: return random_atom(rng);
  }
}

inline Expr random_expr(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coin(0, 1);
  if (coin(rng)) return expr_of(random_term(rng));
  return expr_of(random_formula(rng));
}

inline Context random_context(std::mt19937_64& rng) {
  Context g;
  std::uniform_int_distribution<int> nf(0, 3), na(0, 2);
  int facts = nf(rng), abbrevs = na(rng);
  for (int i = 0; i < facts; ++i)
    g = g.with_fact("h" + std::to_string(i), random_formula(rng));
  for (int i = 0; i < abbrevs; ++i)
    g = g.with_abbrev("a" + std::to_string(i) + "_",
                      expr_of(random_term(rng)));
  return g;
}

// Random term skeleton: like random_term but with ident holes at leaves.
inline TermPtr random_skeleton(std::mt19937_64& rng, int depth = 2) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 4);
  switch (pick(rng)) {
    case 0: {
      std::uniform_int_distribution<int> v(0, (int)pool().size() - 1);
      return tvar(pool()[v(rng)]);
    }
    case 1: return tlit(sample_rational(rng));
    case 2: {
      std::uniform_int_distribution<int> n(0, 3);
      static const char* holes[] = {"p_", "q_", "a0_", "_"};
      return tabbrev(holes[n(rng)]);
    }
    case 3: return tplus(random_skeleton(rng, depth - 1),
                         random_skeleton(rng, depth - 1));
    default: return ttimes(random_skeleton(rng, depth - 1),
                           random_skeleton(rng, depth - 1));
  }
}

inline PatternPtr random_pattern(std::mt19937_64& rng, int depth = 2) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 4 : 7);
  std::uniform_int_distribution<int> v(0, (int)pool().size() - 1);
  switch (pick(rng)) {
    case 0: return pat_any();
    case 1: {
      static const char* names[] = {"p_", "q_", "h0", "a0_"};
      std::uniform_int_distribution<int> n(0, 3);
      return pat_ident(names[n(rng)]);
    }
    case 2: return pat_occurs({pool()[v(rng)]}, false);
    case 3: return pat_occurs({pool()[v(rng)]}, true);
    case 4: return pat_struct(expr_of(random_skeleton(rng)));
    case 5: return pat_union(random_pattern(rng, depth - 1),
                             random_pattern(rng, depth - 1));
    case 6: return pat_inter(random_pattern(rng, depth - 1),
                             random_pattern(rng, depth - 1));
    default: return pat_neg(random_pattern(rng, depth - 1));
  }
}

// ---------------------------------------------------------------------------
// Random linear sequents (for cross-checking the linear decision procedure).

inline TermPtr linear_combo(std::mt19937_64& rng,
                            const std::vector<Variable>& vars) {
  std::uniform_int_distribution<int> num(-5, 5);
  std::uniform_int_distribution<int> den(1, 2);
  TermPtr t = tlit(Rational(num(rng), den(rng)));
  for (auto& v : vars) {
    Rational c(num(rng), den(rng));
    if (c == 0) continue;
    t = tplus(t, ttimes(tlit(c), tvar(v)));
  }
  return t;
}

inline FormulaPtr random_linear_atom(std::mt19937_64& rng,
                                     const std::vector<Variable>& vars) {
  static const CmpOp ops[] = {CmpOp::Lt, CmpOp::Le, CmpOp::Eq,
                              CmpOp::Ge, CmpOp::Gt, CmpOp::Ne};
  std::uniform_int_distribution<int> op(0, 5);
  return fcmp(ops[op(rng)], linear_combo(rng, vars), tlit(0));
}

// Mixes fully random sequents with Farkas-style valid ones (the succedent a
// nonnegative combination of <=-antecedents, so validity cases occur often).
inline Sequent random_linear_sequent(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nv(1, 3), na(1, 4), coin(0, 1);
  std::vector<Variable> vars(pool().begin(), pool().begin() + nv(rng));
  Sequent s;
  int n = na(rng);
  if (coin(rng)) {
    for (int i = 0; i < n; ++i) s.ante.push_back(random_linear_atom(rng, vars));
    s.succ.push_back(random_linear_atom(rng, vars));
    return s;
  }
  std::uniform_int_distribution<int> lam(0, 3), slack(0, 4);
  TermPtr sum = tlit(Rational(-slack(rng)));
  for (int i = 0; i < n; ++i) {
    TermPtr l = linear_combo(rng, vars);
    s.ante.push_back(fcmp(CmpOp::Le, l, tlit(0)));
    int k = lam(rng);
    if (k > 0) sum = tplus(sum, ttimes(tlit(Rational(k)), l));
  }
  s.succ.push_back(fcmp(CmpOp::Le, sum, tlit(0)));
  return s;
}

}  // namespace kaisar::testgen
