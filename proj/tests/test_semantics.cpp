#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kaisar/parser.hpp"
#include "kaisar/semantics.hpp"

using namespace kaisar;

static State exact_state(std::initializer_list<std::pair<const char*, Rational>> kv) {
  State s(Mode::Exact);
  for (auto& [k, v] : kv) s.set(Variable(k), v);
  return s;
}
static State approx_state(std::initializer_list<std::pair<const char*, double>> kv) {
  State s(Mode::Approx);
  for (auto& [k, v] : kv) s.set(Variable(k), v);
  return s;
}

TEST_CASE("exact term evaluation") {
  State s = exact_state({{"x", Rational(3)}, {"y", Rational(1, 2)}});
  CHECK(eval_term_exact(parse_term("x + 2*y"), s) == Rational(4));
  CHECK(eval_term_exact(parse_term("x^2"), s) == Rational(9));
  CHECK(eval_term_exact(parse_term("y^(-1)"), s) == Rational(2));
  CHECK(eval_term_exact(parse_term("abs(0 - x)"), s) == Rational(3));
  CHECK(eval_term_exact(parse_term("min(x, y)"), s) == Rational(1, 2));
  CHECK(eval_term_exact(parse_term("sqrt(x*x)"), s) == Rational(3));
  // 9/4 has an exact square root
  CHECK(eval_term_exact(parse_term("(9/4)^(1/2)"), s) == Rational(3, 2));
  CHECK_THROWS_AS(eval_term_exact(parse_term("sqrt(x)"), s), EvalError);
  CHECK_THROWS_AS(eval_term_exact(parse_term("x/(y - y)"), s), EvalError);
}

TEST_CASE("unset variables default to zero with a warning") {
  int warnings = 0;
  State::warn_sink = [&](const std::string&) { ++warnings; };
  State s = exact_state({});
  CHECK(eval_term_exact(parse_term("q + 1"), s) == Rational(1));
  CHECK(warnings == 1);
  State::warn_sink = nullptr;
}

TEST_CASE("approx term evaluation") {
  State s = approx_state({{"x", 2.0}, {"g", 9.8}});
  CHECK(eval_term_approx(parse_term("sqrt(x)"), s) ==
        doctest::Approx(std::sqrt(2.0)));
  CHECK(eval_term_approx(parse_term("x^(1/2)"), s) ==
        doctest::Approx(std::sqrt(2.0)));
  CHECK(eval_term_approx(parse_term("g*x - 1"), s) == doctest::Approx(18.6));
}

TEST_CASE("nominal terms read the interpretation") {
  Interpretation interp;
  interp.emplace("init", exact_state({{"v", Rational(7)}}));
  State s = exact_state({{"v", Rational(1)}});
  CHECK(eval_term_exact(parse_term("init(v) - v"), s, interp) == Rational(6));
  CHECK(eval_term_exact(parse_term("now(v)"), s, interp) == Rational(1));
  CHECK_THROWS_AS(eval_term_exact(parse_term("other(v)"), s, interp),
                  EvalError);
}

TEST_CASE("three-valued formula evaluation") {
  Budget b;
  State s = exact_state({{"x", Rational(3)}});
  CHECK(eval_formula(parse_formula("x > 2"), s, b) == TV::True);
  CHECK(eval_formula(parse_formula("x > 2 & x < 3"), s, b) == TV::False);
  CHECK(eval_formula(parse_formula("\\forall y y > x"), s, b) == TV::False);
  CHECK(eval_formula(parse_formula("\\forall y y*y >= 0"), s, b) ==
        TV::Unknown);  // sampling cannot certify
  CHECK(eval_formula(parse_formula("\\exists y y > x"), s, b) == TV::True);
  CHECK(eval_formula(parse_formula("[x := x + 1]x = 4"), s, b) == TV::True);
  CHECK(eval_formula(parse_formula("[x := *]x = 4"), s, b) == TV::False);
  CHECK(eval_formula(parse_formula("[x := *]x*x >= 0"), s, b) == TV::Unknown);
  CHECK(eval_formula(parse_formula("<x := *>x = 1"), s, b) == TV::True);
  CHECK(eval_formula(parse_formula("[?x > 5]x = 99"), s, b) == TV::True);
}

TEST_CASE("discrete program execution is exact") {
  Budget b;
  State s = exact_state({{"x", Rational(1, 3)}});
  auto rr = run_program(parse_program("x := x + 1/3; x := 3*x"), s, b);
  REQUIRE(rr.runs.size() == 1);
  CHECK(rr.runs[0].end.get_exact(Variable("x")) == Rational(2));
  CHECK(rr.exhaustive);
  // three states on the trace: initial, after each assignment
  CHECK(rr.runs[0].trace.entries.size() == 3);
}

TEST_CASE("choice and loop produce multiple runs") {
  Budget b;
  b.iterations = 3;
  State s = exact_state({{"x", Rational(0)}});
  auto rr = run_program(parse_program("{x := x + 1}*"), s, b);
  std::set<Rational> ends;
  for (auto& r : rr.runs) ends.insert(r.end.get_exact(Variable("x")));
  CHECK(ends == std::set<Rational>{0, 1, 2, 3});
  CHECK(!rr.exhaustive);

  auto cc = run_program(parse_program("x := 1 ++ x := 2"), s, b);
  CHECK(cc.runs.size() == 2);
  CHECK(cc.exhaustive);
}

TEST_CASE("tests prune paths") {
  Budget b;
  State s = exact_state({{"x", Rational(0)}});
  auto rr = run_program(parse_program("{x := 1 ++ x := 2}; ?x = 2"), s, b);
  REQUIRE(rr.runs.size() == 1);
  CHECK(rr.runs[0].end.get_exact(Variable("x")) == Rational(2));
}

TEST_CASE("ODE integration matches the closed-form solution") {
  Budget b;
  b.step = 0.001;
  b.ode_time = 1.0;
  State s = approx_state({{"x", 0.0}, {"v", 5.0}, {"g", 2.0}});
  // x' = v, v' = -g for exactly 1 second (no domain constraint)
  auto rr = run_program(parse_program("{x' = v, v' = -g}"), s, b);
  REQUIRE(!rr.runs.empty());
  // the longest run goes the full second: x = 5t - t^2, v = 5 - 2t
  double best_x = -1, best_v = 0;
  for (auto& r : rr.runs) {
    double x = r.end.get_approx(Variable("x"));
    if (x > best_x) {
      best_x = x;
      best_v = r.end.get_approx(Variable("v"));
    }
  }
  CHECK(best_x == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(best_v == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("ODE stops at the domain boundary") {
  Budget b;
  b.step = 0.01;
  b.ode_time = 10.0;
  State s = approx_state({{"y", 1.0}, {"v", 0.0}, {"g", 1.0}});
  // falling ball: leaves y >= 0 at t = sqrt(2)
  auto rr = run_program(parse_program("{y' = v, v' = -g & y >= 0}"), s, b);
  REQUIRE(!rr.runs.empty());
  double min_y = 1e9, at_v = 0;
  for (auto& r : rr.runs) {
    double y = r.end.get_approx(Variable("y"));
    if (y < min_y) {
      min_y = y;
      at_v = r.end.get_approx(Variable("v"));
    }
  }
  CHECK(min_y == doctest::Approx(0.0).epsilon(1e-4));
  CHECK(std::fabs(min_y) < 1e-4);
  CHECK(at_v == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-3));
}

TEST_CASE("domain false at start yields no runs") {
  Budget b;
  State s = approx_state({{"y", -1.0}});
  auto rr = run_program(parse_program("{y' = 1 & y >= 0}"), s, b);
  CHECK(rr.runs.empty());
}

TEST_CASE("interpretation_of collects marked states") {
  Budget b;
  b.record_nominals = true;
  State s = exact_state({{"x", Rational(5)}});
  auto rr = run_program(parse_program("?@init; x := x + 1; ?@mid; x := 2*x"),
                        s, b);
  REQUIRE(rr.runs.size() == 1);
  Interpretation interp = interpretation_of(rr.runs[0].trace);
  REQUIRE(interp.count("init"));
  REQUIRE(interp.count("mid"));
  CHECK(interp.at("init").get_exact(Variable("x")) == Rational(5));
  CHECK(interp.at("mid").get_exact(Variable("x")) == Rational(6));
  CHECK(rr.runs[0].end.get_exact(Variable("x")) == Rational(12));
  // and replaying under that interpretation passes the tests
  Budget b2;
  auto rr2 = run_program(parse_program("?@init; x := x + 1; ?@mid; x := 2*x"),
                         s, b2, interp);
  REQUIRE(rr2.runs.size() == 1);
  CHECK(rr2.runs[0].end.get_exact(Variable("x")) == Rational(12));
}

TEST_CASE("trace dump format") {
  Budget b;
  b.record_nominals = true;
  State s = exact_state({{"x", Rational(1)}});
  auto rr = run_program(parse_program("?@t0; x := 2"), s, b);
  REQUIRE(rr.runs.size() == 1);
  std::string d = rr.runs[0].trace.dump();
  CHECK(d.find("STATE 0: x=1") != std::string::npos);
  CHECK(d.find("MARK t0") != std::string::npos);
  CHECK(d.find("STATE 1: x=2") != std::string::npos);
}
