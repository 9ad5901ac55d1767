#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kaisar/analysis.hpp"
#include "kaisar/parser.hpp"
#include "kaisar/syntax.hpp"

using namespace kaisar;

TEST_CASE("rational parsing and printing") {
  CHECK(rational_of("3") == Rational(3));
  CHECK(rational_of("3.25") == Rational(13, 4));
  CHECK(rational_of("7/2") == Rational(7, 2));
  CHECK(rational_str(Rational(13, 4)) == "3.25");
  CHECK(rational_str(Rational(1, 3)) == "1/3");
  CHECK(rational_str(Rational(-5)) == "-5");
  CHECK(rational_of(rational_str(Rational(-9, 8))) == Rational(-9, 8));
}

TEST_CASE("variable ghost-index splitting") {
  Variable v = variable_of_ident("x12");
  CHECK(v.base == "x");
  CHECK(v.index == 12);
  CHECK(v.str() == "x12");
  CHECK(variable_of_ident("vt_").base == "vt_");
  CHECK(variable_of_ident("vt_").index == std::nullopt);
}

static void roundtrip_t(const std::string& s) {
  TermPtr t = parse_term(s);
  CHECK(equal(parse_term(print(t)), t));
}
static void roundtrip_f(const std::string& s) {
  FormulaPtr f = parse_formula(s);
  INFO(s, " printed as ", print(f));
  CHECK(equal(parse_formula(print(f)), f));
}
static void roundtrip_p(const std::string& s) {
  ProgramPtr p = parse_program(s);
  INFO(s, " printed as ", print(p));
  CHECK(equal(parse_program(print(p)), p));
}

TEST_CASE("parse/print round trips") {
  roundtrip_t("x + y*z");
  roundtrip_t("(x + y)*z - -w");
  roundtrip_t("x^2 + v^(1/2) + w^(-2)");
  roundtrip_t("abs(v) + sqrt(g/p) + min(x, y) + max(x, 1/3)");
  roundtrip_t("(x*y)' + x'");
  roundtrip_t("init(v) + now(x + 1)");
  roundtrip_t("3.5*x - 0.25");
  roundtrip_f("x = 1 & y < 2 | !z >= 3 -> w != 4 <-> x <= y");
  roundtrip_f(
      "\\forall w \\forall x \\forall y \\forall z "
      "(w <= x -> x <= y -> y < z -> w < z)");
  // multi-binder sugar: further idents are binders while an ident follows
  CHECK(print(parse_formula("\\forall x y x <= y")) ==
        "\\forall x \\forall y x <= y");
  roundtrip_f("\\forall x x > 0");
  roundtrip_f("[x := 1; y := *]x = y");
  roundtrip_f("<{x := 1 ++ ?y > 0}>x = 1");
  roundtrip_f("[{x' = v, v' = -g & x >= 0 & v < 0}](x = 0 -> v >= -m)");
  roundtrip_f("[{x := x + 1}*]x >= 0");
  roundtrip_f("true & false | @init");
  roundtrip_p("x := 2; {x := x + 1}*; ?x > 0");
  roundtrip_p("{x := 1 ++ x := *}; {x' = v}");
}

TEST_CASE("operator precedence") {
  CHECK(equal(parse_term("a - b - c"), parse_term("(a - b) - c")));
  CHECK(equal(parse_term("a - b*c^2"), parse_term("a - (b*(c^2))")));
  CHECK(equal(parse_formula("p = 1 -> q = 1 -> r = 1"),
              parse_formula("p = 1 -> (q = 1 -> r = 1)")));
  CHECK(equal(parse_formula("a = 1 & b = 1 | c = 1"),
              parse_formula("(a = 1 & b = 1) | c = 1")));
  CHECK(equal(parse_formula("[x := 1]x = 1 & y = 2"),
              parse_formula("([x := 1]x = 1) & y = 2")));
  CHECK(equal(parse_program("a := 1; b := 2 ++ c := 3"),
              parse_program("{a := 1; b := 2} ++ c := 3")));
}

TEST_CASE("free and bound variables") {
  FormulaPtr f = parse_formula("[x := y + 1]x > z");
  VarSet fv = free_vars(f);
  CHECK(fv.count(Variable("y")));
  CHECK(fv.count(Variable("z")));
  CHECK(!fv.count(Variable("x")));  // must-bound by the assignment
  CHECK(bound_vars(f).count(Variable("x")));

  FormulaPtr g = parse_formula("[{x := 1 ++ y := 2}]x > 0");
  CHECK(free_vars(g).count(Variable("x")));  // only may-bound

  FormulaPtr q = parse_formula("\\forall x x > y");
  CHECK(!free_vars(q).count(Variable("x")));
  CHECK(free_vars(q).count(Variable("y")));

  FormulaPtr ode = parse_formula("[{x' = v & x >= 0}]x >= 0");
  VarSet bv = bound_vars(ode);
  CHECK(bv.count(Variable("x")));
  CHECK(bv.count(Variable("x").prime()));
  CHECK(free_vars(ode).count(Variable("v")));
}

TEST_CASE("substitution") {
  SubstMap m;
  m.emplace(Variable("x"), parse_term("y + 1"));
  CHECK(equal(substitute(parse_term("x*x"), m), parse_term("(y + 1)*(y + 1)")));
  CHECK(equal(substitute(parse_formula("x > 0 & z = x"), m),
              parse_formula("y + 1 > 0 & z = y + 1")));
  // Binder shadows the substituted variable.
  CHECK(equal(substitute(parse_formula("\\forall x x > 0"), m),
              parse_formula("\\forall x x > 0")));
  // Capture is rejected.
  SubstMap cap;
  cap.emplace(Variable("z"), parse_term("x"));
  CHECK_THROWS_AS(substitute(parse_formula("\\forall x x > z"), cap),
                  CaptureError);
  CHECK_THROWS_AS(substitute(parse_formula("[x := 0]x >= z"), cap),
                  CaptureError);
  // Assignments bind sequentially: the rhs is substituted, the
  // postcondition's occurrences are bound and stay.
  CHECK(equal(substitute(parse_formula("[x := x + 1]x > 0"), m),
              parse_formula("[x := y + 1 + 1]x > 0")));
  // Substitution through a program that does not touch the key.
  CHECK(equal(substitute(parse_formula("[y := x]y > 0"),
                         SubstMap{{Variable("x"), parse_term("2")}}),
              parse_formula("[y := 2]y > 0")));
}

TEST_CASE("negation normal form") {
  CHECK(equal(nnf(parse_formula("!(x > 0 & y <= 1)")),
              parse_formula("x <= 0 | y > 1")));
  CHECK(equal(nnf(parse_formula("!(x = 1 -> y = 2)")),
              parse_formula("x = 1 & y != 2")));
  CHECK(equal(nnf(parse_formula("!\\forall x x > 0")),
              parse_formula("\\exists x x <= 0")));
  CHECK(equal(nnf(parse_formula("![x := 1]x = 1")),
              parse_formula("<x := 1>x != 1")));
  CHECK(equal(nnf(parse_formula("!<{x' = 1}>x = 1")),
              parse_formula("[{x' = 1}]x != 1")));
}

TEST_CASE("term differentials") {
  auto d = term_differential(parse_term("x*x + 2*y"));
  CHECK(equal(d.d, parse_term("x'*x + x*x' + (0*y + 2*y')")));
  CHECK(d.side.empty());

  auto q = term_differential(parse_term("a/b"));
  CHECK(q.side.size() == 1);
  CHECK(equal(q.side[0], parse_formula("b != 0")));

  auto s = term_differential(parse_term("sqrt(x)"));
  CHECK(equal(s.side[0], parse_formula("x > 0")));

  CHECK_THROWS_AS(term_differential(parse_term("abs(x)")), DifferentialError);
}

TEST_CASE("formula differentials") {
  auto d = formula_differential(parse_formula("x < y & v = w"));
  CHECK(equal(d.d, parse_formula("x' <= y' & v' = w'")));
  CHECK_THROWS_AS(formula_differential(parse_formula("x != y")),
                  DifferentialError);
  // Disjunction differentiates to a conjunction.
  auto o = formula_differential(parse_formula("x < y | x > y"));
  CHECK(equal(o.d, parse_formula("x' <= y' & x' >= y'")));
}

TEST_CASE("fresh variables") {
  VarSet used{Variable("x"), Variable("x", 0), Variable("x", 1)};
  CHECK(fresh_var("x", used) == Variable("x", 2));
  CHECK(fresh_var("y", used) == Variable("y", 0));
}

TEST_CASE("core check") {
  CHECK(is_core(parse_formula("[x := 1]x = 1")));
  CHECK(!is_core(parse_formula("init(v) = v")));
  CHECK(!is_core(parse_formula("now(x) = 1")));
  CHECK(!is_core(parse_formula("@init")));
}
