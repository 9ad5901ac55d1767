#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "generators.hpp"
#include "kaisar/parser.hpp"
#include "kaisar/patterns.hpp"

using namespace kaisar;

TEST_CASE("ident patterns bind and wildcard does not") {
  Context empty;
  // x_ & y_ against P & Q binds both conjuncts
  PatternPtr p = pat_struct(expr_of(fand(fabbrev("x_"), fabbrev("y_"))));
  FormulaPtr e = parse_formula("a > 0 & b > 0");
  auto r = match(empty, p, expr_of(e));
  REQUIRE(r.has_value());
  REQUIRE(r->lookup("x_"));
  CHECK(equal(r->lookup("x_")->value.fml, parse_formula("a > 0")));
  CHECK(equal(r->lookup("y_")->value.fml, parse_formula("b > 0")));

  auto w = match(empty, pat_any(), expr_of(e));
  REQUIRE(w.has_value());
  CHECK(w->entries().empty());
}

TEST_CASE("bound idents compare; union rolls back") {
  Context g;
  g = g.with_abbrev("v_", expr_of(parse_formula("a > 0")));
  // v_ against a different formula fails
  CHECK(!match(g, pat_ident("v_"), expr_of(parse_formula("b > 0"))));
  // v_ \/ w_ : left fails, right binds on the original context
  auto r = match(g, pat_union(pat_ident("v_"), pat_ident("w_")),
                 expr_of(parse_formula("b > 0")));
  REQUIRE(r.has_value());
  CHECK(equal(r->lookup("v_")->value.fml, parse_formula("a > 0")));
  CHECK(equal(r->lookup("w_")->value.fml, parse_formula("b > 0")));
  // union short-circuits on left success
  auto l = match(g, pat_union(pat_ident("v_"), pat_ident("w_")),
                 expr_of(parse_formula("a > 0")));
  REQUIRE(l.has_value());
  CHECK(!l->lookup("w_"));
}

TEST_CASE("occurrence patterns") {
  Context g;
  Expr e = expr_of(parse_formula("x + y > 0"));
  CHECK(match(g, pat_occurs({Variable("x")}, false), e));
  CHECK(match(g, pat_occurs({Variable("x"), Variable("y")}, false), e));
  CHECK(!match(g, pat_occurs({Variable("z")}, false), e));
  CHECK(match(g, pat_occurs({Variable("z")}, true), e));
  CHECK(!match(g, pat_occurs({Variable("x")}, true), e));
  // bound occurrences do not count as free
  Expr q = expr_of(parse_formula("\\forall x x > 0"));
  CHECK(match(g, pat_occurs({Variable("x")}, true), q));
}

TEST_CASE("intersection threads, negation guards") {
  Context g;
  Expr e = expr_of(parse_formula("x > 0"));
  auto r = match(
      g, pat_inter(pat_ident("p_"), pat_occurs({Variable("x")}, false)), e);
  REQUIRE(r.has_value());
  CHECK(equal(r->lookup("p_")->value.fml, parse_formula("x > 0")));

  CHECK(match(g, pat_neg(pat_occurs({Variable("y")}, false)), e));
  CHECK(!match(g, pat_neg(pat_occurs({Variable("x")}, false)), e));
  // negation over a binding pattern is a static error
  CHECK_THROWS_AS(match(g, pat_neg(pat_ident("fresh_")), e), PatternError);
  // ... but negation over a *bound* ident is fine
  Context g2 = g.with_abbrev("v_", expr_of(parse_formula("a = 1")));
  CHECK(match(g2, pat_neg(pat_ident("v_")), e));
}

TEST_CASE("structural term patterns and round-trip") {
  Context g;
  PatternPtr p = pat_struct(expr_of(tplus(tabbrev("l_"), tabbrev("r_"))));
  TermPtr e = parse_term("x*2 + 5");
  auto r = match(g, p, expr_of(e));
  REQUIRE(r.has_value());
  TermPtr l = r->lookup("l_")->value.term;
  TermPtr rr = r->lookup("r_")->value.term;
  CHECK(equal(l, parse_term("x*2")));
  CHECK(equal(rr, parse_term("5")));
  // substituting the bindings back into the skeleton reconstructs e
  CHECK(equal(tplus(l, rr), e));
  // mismatched operator
  CHECK(!match(g, p, expr_of(parse_term("x*2 - 5"))));
  // literal leaves must be exactly equal
  PatternPtr q = pat_struct(expr_of(tplus(tabbrev("l_"), tlit(Rational(6)))));
  CHECK(!match(g, q, expr_of(e)));
}

TEST_CASE("match soundness: facts never change") {
  std::mt19937_64 rng(11);
  int successes = 0;
  for (int i = 0; i < 1000; ++i) {
    Context g = testgen::random_context(rng);
    PatternPtr p = testgen::random_pattern(rng);
    Expr e = testgen::random_expr(rng);
    std::optional<Context> r;
    try {
      r = match(g, p, e);
    } catch (const PatternError&) {
      continue;
    }
    if (!r) continue;
    ++successes;
    auto before = g.fact_formulas();
    auto after = r->fact_formulas();
    REQUIRE(before.size() == after.size());
    for (size_t j = 0; j < before.size(); ++j)
      CHECK(equal(before[j], after[j]));
    // determinism
    auto r2 = match(g, p, e);
    REQUIRE(r2.has_value());
    CHECK(r2->entries().size() == r->entries().size());
  }
  CHECK(successes > 100);
}

TEST_CASE("context operations") {
  Context g;
  g = g.with_fact("h", parse_formula("x > 0"));
  g = g.with_abbrev("a_", expr_of(parse_term("x + 1")));
  CHECK(g.lookup("h")->is_fact);
  CHECK(!g.lookup("a_")->is_fact);
  // replacement keeps the name unique
  Context g2 = g.with_fact("h", parse_formula("x > 1"));
  CHECK(g2.entries().size() == 2);
  CHECK(equal(g2.lookup("h")->fact, parse_formula("x > 1")));
  // renaming reaches facts and abbreviation values
  Context g3 = g.renamed({{Variable("x"), Variable("x", 0)}});
  CHECK(equal(g3.lookup("h")->fact, parse_formula("x0 > 0")));
  CHECK(equal(g3.lookup("a_")->value.term, parse_term("x0 + 1")));
  CHECK(g.without("h").entries().size() == 1);
}

TEST_CASE("fact selection") {
  Context g;
  g = g.with_fact("hx", parse_formula("x > 0"));
  g = g.with_fact("hy", parse_formula("y > 0"));
  g = g.with_abbrev("a_", expr_of(parse_term("1")));
  CHECK(facts(g, {}).size() == 2);  // default: every fact, no abbreviations
  auto sel = facts(g, {pat_occurs({Variable("x")}, true)});
  REQUIRE(sel.size() == 1);
  CHECK(equal(sel[0], parse_formula("y > 0")));
  // selecting by fact name
  auto byname = facts(g, {pat_ident("hx")});
  REQUIRE(byname.size() == 1);
  CHECK(equal(byname[0], parse_formula("x > 0")));
}

TEST_CASE("expansion of abbreviations") {
  StaticTrace h;
  Context g;
  g = g.with_abbrev("vBound_", expr_of(parse_term("sqrt(g/p)")));
  FormulaPtr f = fcmp(CmpOp::Lt, tapp("abs", tvar("v")), tabbrev("vBound_"));
  CHECK(equal(expand(g, h, f), parse_formula("abs(v) < sqrt(g/p)")));
  CHECK_THROWS_AS(expand(g, h, TermPtr(tabbrev("missing_"))), ExpandError);

  Context cyc;
  cyc = cyc.with_abbrev("a_", expr_of(TermPtr(tabbrev("b_"))));
  cyc = cyc.with_abbrev("b_", expr_of(TermPtr(tabbrev("a_"))));
  CHECK_THROWS_AS(expand(cyc, h, TermPtr(tabbrev("a_"))), ExpandError);
}

TEST_CASE("expansion resolves variables through the trace") {
  StaticTrace h;
  h.push_sub(Variable("x"), parse_term("x + 5"));
  Context g;
  CHECK(equal(expand(g, h, parse_term("x^2")), parse_term("(x + 5)^2")));
  // idempotence where now is the identity (ghost-only trace)
  StaticTrace h2;
  h2.push_any(Variable("x"), Variable("x", 0));
  g = g.with_abbrev("a_", expr_of(parse_term("x + 1")));
  TermPtr once = expand(g, h2, TermPtr(tabbrev("a_")));
  CHECK(equal(once, expand(g, h2, once)));
}

TEST_CASE("expansion at states and of now/nominal terms") {
  StaticTrace h;
  h.push_mark("t");
  h.push_eq(Variable("x"), Variable("x", 0), parse_term("5"));
  Context g;
  CHECK(equal(expand(g, h, TermPtr(tnominal("t", parse_term("x")))),
              parse_term("x0")));
  CHECK(equal(expand(g, h, TermPtr(tnow(parse_term("x")))), parse_term("x")));
  CHECK(equal(expand(g, h, parse_term("x"), std::optional<std::string>("t")),
              parse_term("x0")));
  CHECK_THROWS_AS(expand(g, h, TermPtr(tnominal("u", parse_term("x")))),
                  ExpandError);
  // binders shadow resolution
  CHECK(equal(expand(g, h, parse_formula("\\forall x x > 0"),
                     std::optional<std::string>("t")),
              parse_formula("\\forall x x > 0")));
}

TEST_CASE("mobilize") {
  StaticTrace h;
  CHECK(equal(mobilize(h, parse_term("5"), "t"), parse_term("5")));
  // references under the formal state become expand-time markers
  TermPtr body = tnominal("t", parse_term("v^2/2 + w"));
  CHECK(equal(mobilize(h, body, "t"), TermPtr(tnow(parse_term("v^2/2 + w")))));
  // plain variables freeze to the bind-time frame
  StaticTrace h2;
  h2.push_sub(Variable("x"), parse_term("x + 1"));
  TermPtr mixed = tplus(tvar("x"), tnominal("t", parse_term("x")));
  TermPtr m = mobilize(h2, mixed, "t");
  CHECK(equal(m, tplus(parse_term("x + 1"), tnow(parse_term("x")))));
  // evaluate the two halves against expansion: bind-time part constant,
  // expand-time part tracks the later frame
  h2.push_mark("u");
  h2.push_sub(Variable("x"), parse_term("(x + 1) * 2"));
  Context g = Context().with_abbrev("f_", expr_of(m));
  TermPtr used = expand(g, h2, TermPtr(tabbrev("f_")));
  CHECK(equal(used, tplus(parse_term("x + 1"), parse_term("(x + 1) * 2"))));
}

TEST_CASE("pattern printing") {
  CHECK(print(pat_union(pat_ident("p_"), pat_any())) == "p_ \\/ _");
  CHECK(print(pat_neg(pat_occurs({Variable("x")}, true))) == "~({!x})");
  CHECK(print(pat_inter(pat_occurs({Variable("x"), Variable("y")}, false),
                        pat_any())) == "{x,y} /\\ _");
}
