#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sys/stat.h>

#include "generators.hpp"
#include "kaisar/arith.hpp"
#include "kaisar/parser.hpp"
#include "linear_oracle.hpp"

using namespace kaisar;

TEST_CASE("sequent image") {
  Sequent s = parse_sequent("x > 0 |- x >= 0");
  FormulaPtr img = sequent_image(s);
  CHECK(print(img) == "\\forall x (x > 0 -> x >= 0)");
  Sequent empty;
  CHECK(sequent_image(empty)->kind == FormulaKind::False);
}

TEST_CASE("elaborate division") {
  ArithQuery q = elaborate(parse_formula("\\forall x x/1 = x"));
  REQUIRE(q.defs.size() == 1);
  CHECK(equal(q.defs[0].source, parse_term("x/1")));
  // forall x forall d (d*1 = x & 1 != 0 -> d = x)
  REQUIRE(q.elaborated->kind == FormulaKind::Forall);
  const FormulaPtr& inner = q.elaborated->f1;
  REQUIRE(inner->kind == FormulaKind::Forall);
  CHECK(inner->var == q.defs[0].var);
  CHECK(inner->f1->kind == FormulaKind::Imply);
  CHECK(q.hash == fnv1a(print(q.elaborated)));
}

TEST_CASE("elaborate polarity") {
  // A definition on the assumption side becomes existential.
  ArithQuery q = elaborate(parse_formula("\\forall x (x/2 = 1 -> x = 2)"));
  REQUIRE(q.elaborated->kind == FormulaKind::Forall);
  REQUIRE(q.elaborated->f1->kind == FormulaKind::Imply);
  CHECK(q.elaborated->f1->f1->kind == FormulaKind::Exists);
}

TEST_CASE("polynomial identities") {
  auto valid = [](const char* s) {
    return decide_poly(elaborate(parse_formula(s))).verdict;
  };
  CHECK(valid("\\forall x \\forall y (x+y)^2 = x^2 + 2*x*y + y^2") ==
        Verdict::Valid);
  CHECK(valid("\\forall x x*(x+1) - x^2 - x = 0") == Verdict::Valid);
  CHECK(valid("\\forall x x^2 >= 0") == Verdict::Unknown);
  CHECK(valid("\\forall x x >= 0") == Verdict::Unknown);
  // constants decide directly
  CHECK(valid("1 + 1 = 2") == Verdict::Valid);
}

TEST_CASE("linear decision") {
  DecideOptions opt;
  auto run = [&](const char* s) { return decide(parse_formula(s), opt); };

  ArithEvidence e = run("\\forall x \\forall y (x < y -> x < (x+y)/2)");
  CHECK(e.verdict == Verdict::Valid);
  CHECK(e.method == "linear");

  e = run("\\forall x \\exists y x < y");
  CHECK(e.verdict == Verdict::Valid);

  e = run("\\forall x (x != 0 -> x < 0 | x > 0)");
  CHECK(e.verdict == Verdict::Valid);

  // invalid: the falsifier or FM must produce a checked counterexample
  e = run("\\forall x x >= 0");
  REQUIRE(e.verdict == Verdict::CounterExample);
  CHECK(e.cex.get_exact(Variable("x")) < 0);

  // FM's own witness path (no falsify stage)
  ArithEvidence lin = decide_linear(elaborate(parse_formula(
      "\\forall x \\forall y (x < y & y < x -> 0 = 1)")));
  CHECK(lin.verdict == Verdict::Valid);
  lin = decide_linear(elaborate(parse_formula("\\forall x x < 5")));
  REQUIRE(lin.verdict == Verdict::CounterExample);
  CHECK(lin.cex.get_exact(Variable("x")) >= 5);
}

TEST_CASE("interpreted functions through elaboration") {
  DecideOptions opt;
  auto run = [&](const char* s) { return decide(parse_formula(s), opt); };
  CHECK(run("\\forall x abs(x) >= x").verdict == Verdict::Valid);
  CHECK(run("\\forall x abs(x) >= 0").verdict == Verdict::Valid);
  CHECK(run("\\forall x \\forall y min(x, y) <= x").verdict == Verdict::Valid);
  CHECK(run("\\forall x \\forall y max(x, y) >= y").verdict == Verdict::Valid);
  ArithEvidence e = run("\\forall x abs(x) = x");
  REQUIRE(e.verdict == Verdict::CounterExample);
  CHECK(e.cex.get_exact(Variable("x")) < 0);
}

TEST_CASE("falsification of nonlinear goals") {
  DecideOptions opt;
  ArithEvidence e = decide(parse_formula("\\forall x \\forall y x*y >= 0"), opt);
  REQUIRE(e.verdict == Verdict::CounterExample);
  CHECK(e.method == "falsify");
  Rational prod = e.cex.get_exact(Variable("x")) * e.cex.get_exact(Variable("y"));
  CHECK(prod < 0);

  e = decide(parse_formula("\\forall x sqrt(x^2) = x"), opt);
  REQUIRE(e.verdict == Verdict::CounterExample);
  CHECK(e.cex.get_exact(Variable("x")) < 0);

  // valid nonlinear without an oracle stays Unknown (no false verdicts)
  e = decide(parse_formula("\\forall x x^2 >= 0"), opt);
  CHECK(e.verdict != Verdict::CounterExample);
}

TEST_CASE("non-arithmetic input is rejected gracefully") {
  DecideOptions opt;
  ArithEvidence e = decide(parse_formula("[x := 1]x = 1"), opt);
  CHECK(e.verdict == Verdict::Unknown);
}

namespace {

std::string write_script(const std::string& name, const std::string& body) {
  std::string path = "/tmp/kaisar_oracle_" + name + ".sh";
  std::ofstream f(path);
  f << "#!/bin/sh\n" << body;
  f.close();
  chmod(path.c_str(), 0755);
  return path;
}

}  // namespace

TEST_CASE("smtlib emission is deterministic") {
  ArithQuery q = elaborate(parse_formula("\\forall x x^2 >= 0"));
  std::string a = smtlib_text(q);
  std::string b = smtlib_text(elaborate(parse_formula("\\forall x x^2 >= 0")));
  CHECK(a == b);
  CHECK(a.find("(set-logic NRA)") == 0);
  CHECK(a.find("(declare-const x Real)") != std::string::npos);
  CHECK(a.find("(assert (not (>= (* x x)") != std::string::npos);
  CHECK(q.hash == elaborate(parse_formula("\\forall x x^2 >= 0")).hash);
}

TEST_CASE("oracle subprocess protocol") {
  ArithQuery valid_q = elaborate(parse_formula("\\forall x x^2 >= 0"));
  std::string yes = write_script("unsat", "echo unsat\n");
  ArithEvidence e = oracle_query(valid_q, yes, 5);
  CHECK(e.verdict == Verdict::Valid);
  CHECK(e.method == "oracle");
  CHECK(e.query_hash == valid_q.hash);

  // sat with a model that really falsifies the goal
  ArithQuery bad_q = elaborate(parse_formula("\\forall x x >= 1"));
  std::string sat = write_script(
      "sat", "echo sat\necho '('\necho '  (define-fun x () Real 0.0)'\necho ')'\n");
  e = oracle_query(bad_q, sat, 5);
  REQUIRE(e.verdict == Verdict::CounterExample);
  CHECK(e.cex.get_exact(Variable("x")) == 0);

  // sat with a bogus model must not produce evidence
  e = oracle_query(valid_q, sat, 5);
  CHECK(e.verdict == Verdict::Unknown);

  std::string unk = write_script("unknown", "echo unknown\n");
  CHECK(oracle_query(valid_q, unk, 5).verdict == Verdict::Unknown);
  std::string junk = write_script("junk", "echo whatever\n");
  CHECK(oracle_query(valid_q, junk, 5).verdict == Verdict::Unknown);
  CHECK(oracle_query(valid_q, "/nonexistent/solver", 5).verdict ==
        Verdict::Unknown);
}

TEST_CASE("vertex oracle sanity") {
  using testgen::oracle_valid;
  Sequent s = parse_sequent("x > 0, y > x |- y > 0");
  CHECK(oracle_valid(s.ante, s.succ[0]) == true);
  s = parse_sequent("x > 0 |- x > 1");
  CHECK(oracle_valid(s.ante, s.succ[0]) == false);
  s = parse_sequent("x >= 0, x <= 0 |- x = 0");
  CHECK(oracle_valid(s.ante, s.succ[0]) == true);
  s = parse_sequent("x < y, y < z |- x < z");
  CHECK(oracle_valid(s.ante, s.succ[0]) == true);
  s = parse_sequent("x != 0 |- x > 0");
  CHECK(oracle_valid(s.ante, s.succ[0]) == false);
}

TEST_CASE("linear decision agrees with the vertex oracle") {
  std::mt19937_64 rng(42);
  int valid_seen = 0, invalid_seen = 0;
  for (int i = 0; i < 200; ++i) {
    Sequent s = testgen::random_linear_sequent(rng);
    auto expect = testgen::oracle_valid(s.ante, s.succ[0]);
    REQUIRE(expect.has_value());
    ArithEvidence e = decide_linear(elaborate(sequent_image(s)), 10.0);
    if (*expect) {
      ++valid_seen;
      CHECK(e.verdict == Verdict::Valid);
    } else {
      ++invalid_seen;
      CHECK(e.verdict == Verdict::CounterExample);
    }
  }
  CHECK(valid_seen > 20);
  CHECK(invalid_seen > 20);
}
