#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "generators.hpp"
#include "kaisar/parser.hpp"
#include "kaisar/traces.hpp"

using namespace kaisar;

TEST_CASE("now resolution") {
  StaticTrace h;
  CHECK(equal(now_var(h, Variable("x")), parse_term("x")));
  h.push_sub(Variable("x"), parse_term("x + 1"));
  CHECK(equal(now_var(h, Variable("x")), parse_term("x + 1")));
  // composition: a second assignment records the composed frame term
  h.push_sub(Variable("x"), parse_term("2*(x + 1)"));
  CHECK(equal(now_var(h, Variable("x")), parse_term("2*(x + 1)")));
  // rebinding resets to the frame variable
  h.push_eq(Variable("x"), Variable("x", 0), parse_term("5"));
  CHECK(equal(now_var(h, Variable("x")), parse_term("x")));
  CHECK(equal(now_term(h, parse_term("x*y")), parse_term("x*y")));
}

TEST_CASE("rebinding renames recorded frame terms") {
  StaticTrace h;
  h.push_sub(Variable("x"), parse_term("x + 1"));
  h.push_mark("t");
  h.push_eq(Variable("x"), Variable("x", 0), parse_term("5"));
  // the earlier Sub record now reads x0 + 1
  CHECK(equal(h.records[0].term, parse_term("x0 + 1")));
  // the value of x at state t is the renamed frame term
  CHECK(equal(nom_var(h, "t", Variable("x")), parse_term("x0 + 1")));
}

TEST_CASE("nom resolution") {
  StaticTrace h;
  h.push_mark("init");
  h.push_eq(Variable("x"), Variable("x", 0), parse_term("5"));
  CHECK(equal(nom_var(h, "init", Variable("x")), parse_term("x0")));
  // an untouched variable at the mark resolves to itself
  CHECK(equal(nom_var(h, "init", Variable("y")), parse_term("y")));
  // nominal of a compound term
  CHECK(equal(nom_term(h, "init", parse_term("x + y")), parse_term("x0 + y")));
  // now still sees the current frame
  CHECK(equal(now_var(h, Variable("x")), parse_term("x")));
  CHECK_THROWS_AS(nom_var(h, "missing", Variable("x")), TraceError);
}

TEST_CASE("nom through repeated rebinding") {
  StaticTrace h;
  h.push_mark("a");
  h.push_any(Variable("x"), Variable("x", 0));
  h.push_mark("b");
  h.push_any(Variable("x"), Variable("x", 1));
  // at a: the oldest ghost; at b: the middle one; now: the frame var
  CHECK(equal(nom_var(h, "a", Variable("x")), parse_term("x0")));
  CHECK(equal(nom_var(h, "b", Variable("x")), parse_term("x1")));
  CHECK(equal(now_var(h, Variable("x")), parse_term("x")));
}

TEST_CASE("prefix") {
  StaticTrace h;
  h.push_sub(Variable("x"), parse_term("1"));
  h.push_mark("t");
  h.push_sub(Variable("y"), parse_term("2"));
  CHECK(h.prefix("t").records.size() == 1);
  CHECK_THROWS_AS(h.prefix("u"), TraceError);
  CHECK(h.has_mark("t"));
  CHECK(!h.has_mark("u"));
}

TEST_CASE("abstraction appends Any records deterministically") {
  StaticTrace h;
  h.push_sub(Variable("x"), parse_term("x + 1"));
  VarSet bound{Variable("x"), Variable("v"), Variable("x").prime()};
  VarSet used = h.vars();
  used.insert(Variable("v"));
  Abstraction a = abstract_trace(h, bound, used);
  REQUIRE(a.renaming.size() == 2);  // primed variable not ghosted
  CHECK(a.renaming.at(Variable("v")) == Variable("v", 0));
  CHECK(a.renaming.at(Variable("x")) == Variable("x", 0));
  // record term renamed into the ghost frame
  CHECK(equal(a.trace.records[0].term, parse_term("x0 + 1")));
  // determinism
  Abstraction b = abstract_trace(h, bound, used);
  CHECK(b.renaming == a.renaming);
}

TEST_CASE("sequent state of a worked trace") {
  // x := x + 1 (sub), mark t, x := 5 (eq)
  StaticTrace h;
  h.push_sub(Variable("x"), parse_term("x + 1"));
  h.push_mark("t");
  h.push_eq(Variable("x"), Variable("x", 0), parse_term("5"));

  DynamicTrace eta;
  State s0(Mode::Exact);
  s0.set(Variable("x"), Rational(10));
  TraceEntry e0; e0.state = s0; eta.entries.push_back(e0);
  State s1 = s0; s1.set(Variable("x"), Rational(11));
  TraceEntry e1; e1.state = s1; eta.entries.push_back(e1);
  TraceEntry em; em.is_mark = true; em.mark = "t"; eta.entries.push_back(em);
  State s2 = s1; s2.set(Variable("x"), Rational(5));
  TraceEntry e2; e2.state = s2; eta.entries.push_back(e2);

  State seq = sequent_state(eta, h);
  CHECK(seq.get_exact(Variable("x")) == Rational(5));    // current frame
  CHECK(seq.get_exact(Variable("x", 0)) == Rational(10)); // pre-rebind frame
  // now-correspondence: now(x) = x evaluates to the last dynamic value
  CHECK(eval_term_exact(now_var(h, Variable("x")), seq) == Rational(5));
  // nominal correspondence at t: x0 + 1 evaluates to 11
  CHECK(eval_term_exact(nom_var(h, "t", Variable("x")), seq) == Rational(11));
}

TEST_CASE("now/nom correspondence on random traces") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    auto tp = testgen::random_trace_pair(rng);
    State seq = sequent_state(tp.eta, tp.h);
    const State& last = tp.eta.last_state();
    // Lemma-style now-correspondence for every program variable
    for (auto& v : testgen::pool()) {
      CHECK(eval_term_exact(now_var(tp.h, v), seq) == last.get_exact(v));
    }
    // nominal-correspondence at every mark, for random terms
    for (auto& m : tp.marks) {
      TermPtr theta = testgen::random_term(rng);
      Rational expect = eval_term_exact(theta, tp.mark_states.at(m));
      CHECK(eval_term_exact(nom_term(tp.h, m, theta), seq) == expect);
    }
  }
}
