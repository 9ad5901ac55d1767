#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "generators.hpp"
#include "kaisar/kernel.hpp"
#include "kaisar/parser.hpp"

using namespace kaisar;

namespace {

RuleApp app(RuleId rule, int goal, int i = -1, int j = -1) {
  RuleApp r;
  r.rule = rule;
  r.goal = goal;
  r.i = i;
  r.j = j;
  return r;
}

// Closes one goal through the arithmetic backend (no oracle).
ProofState qe(const ProofState& ps, int goal) {
  const Goal* g = ps.find(goal);
  REQUIRE(g);
  ArithEvidence ev = decide(g->seq);
  REQUIRE(ev.verdict == Verdict::Valid);
  return ps.close_qe(goal, ev);
}

Sequent seq(const std::string& s) { return parse_sequent(s); }

}  // namespace

TEST_CASE("id, closeTrue, closeFalse") {
  ProofState ps = ProofState::init(seq("x > 0 |- x > 0"));
  ps = ps.apply(app(RuleId::Id, 0, 0, 0));
  CHECK(ps.proved());

  ProofState pt = ProofState::init(seq("|- true"));
  CHECK(pt.apply(app(RuleId::CloseTrue, 0, -1, 0)).proved());
  ProofState pf = ProofState::init(seq("false |- x = 1"));
  CHECK(pf.apply(app(RuleId::CloseFalse, 0, 0)).proved());

  CHECK_THROWS_AS(
      ProofState::init(seq("x > 0 |- x >= 0")).apply(app(RuleId::Id, 0, 0, 0)),
      SideConditionViolation);
  CHECK_THROWS_AS(ps.apply(app(RuleId::Id, 5, 0, 0)), NoSuchGoal);
}

TEST_CASE("propositional derivation closes by id") {
  // (p -> q) -> ((q -> r) -> (p -> r)) over atomic inequalities
  Sequent root = seq(
      "|- (x > 0 -> y > 0) -> ((y > 0 -> z > 0) -> (x > 0 -> z > 0))");
  ProofState ps = ProofState::init(root);
  ps = ps.apply(app(RuleId::ImplyR, 0, -1, 0));  // goal 1
  ps = ps.apply(app(RuleId::ImplyR, 1, -1, 0));  // goal 2
  ps = ps.apply(app(RuleId::ImplyR, 2, -1, 0));  // goal 3
  // ante: x>0->y>0, y>0->z>0, x>0 |- z>0
  ps = ps.apply(app(RuleId::ImplyL, 3, 0));  // goals 4 (|- x>0) and 5
  ps = ps.apply(app(RuleId::Id, 4, 1, 1));   // x>0 matches
  ps = ps.apply(app(RuleId::ImplyL, 5, 1));
  ps = ps.apply(app(RuleId::Id, 6, 0, 1));
  ps = ps.apply(app(RuleId::Id, 7, 1, 0));
  CHECK(ps.proved());
  CHECK(ps.log().size() == 8);
}

TEST_CASE("and/or/not/equiv premises") {
  ProofState ps = ProofState::init(seq("x > 0 & y > 0 |- y > 0 & x > 0"));
  ps = ps.apply(app(RuleId::AndL, 0, 0));
  ps = ps.apply(app(RuleId::AndR, 1, -1, 0));
  ps = ps.apply(app(RuleId::Id, 2, 1, 0));
  ps = ps.apply(app(RuleId::Id, 3, 0, 0));
  CHECK(ps.proved());

  ProofState po = ProofState::init(seq("x > 0 | y > 0 |- y > 0 | x > 0"));
  po = po.apply(app(RuleId::OrR, 0, -1, 0));
  po = po.apply(app(RuleId::OrL, 1, 0));
  po = po.apply(app(RuleId::Id, 2, 0, 1));
  po = po.apply(app(RuleId::Id, 3, 0, 0));
  CHECK(po.proved());

  ProofState pn = ProofState::init(seq("!(x > 0) |- !(x > 0)"));
  pn = pn.apply(app(RuleId::NotR, 0, -1, 0));
  pn = pn.apply(app(RuleId::NotL, 1, 0));
  pn = pn.apply(app(RuleId::Id, 2, 0, 0));
  CHECK(pn.proved());

  ProofState pe = ProofState::init(seq("x > 0 <-> y > 0, x > 0 |- y > 0"));
  pe = pe.apply(app(RuleId::EquivL, 0, 0));
  pe = pe.apply(app(RuleId::ImplyL, 1, 0));
  pe = pe.apply(app(RuleId::Id, 2, 1, 1));
  pe = pe.apply(app(RuleId::Id, 3, 0, 0));
  CHECK(pe.proved());
}

TEST_CASE("cut and weakening") {
  ProofState ps = ProofState::init(seq("x > 1 |- x > 0"));
  RuleApp c = app(RuleId::Cut, 0);
  c.fml = parse_formula("x > 1/2");
  ps = ps.apply(c);
  REQUIRE(ps.goals().size() == 2);
  ps = qe(ps, 1);  // x>1 |- x>0, x>1/2
  ps = ps.apply(app(RuleId::WeakenL, 2, 0));
  ps = qe(ps, 3);  // x>1/2 |- x>0
  CHECK(ps.proved());

  RuleApp bad = app(RuleId::Cut, 0);
  bad.fml = fabbrev("undefined_");
  CHECK_THROWS_AS(ProofState::init(seq("|- x = x")).apply(bad), MalformedArgs);
}

TEST_CASE("structural moves and flip") {
  ProofState ps = ProofState::init(seq("x > 0, y > 0 |- z > 0, y > 0"));
  ps = ps.apply(app(RuleId::MoveR, 0, -1, 1));
  CHECK(equal(ps.goals()[0].seq.succ[0], parse_formula("y > 0")));
  ps = ps.apply(app(RuleId::MoveL, 1, 1));
  CHECK(equal(ps.goals()[0].seq.ante[0], parse_formula("y > 0")));
  ps = ps.apply(app(RuleId::FlipL, 2, 1));
  CHECK(equal(ps.goals()[0].seq.succ[0], parse_formula("!(x > 0)")));
  CHECK(ps.goals()[0].seq.ante.size() == 1);
}

TEST_CASE("rename requires a fresh target") {
  ProofState ps = ProofState::init(seq("x > 0 |- x >= 0"));
  RuleApp r = app(RuleId::Rename, 0);
  r.var = Variable("x");
  r.var2 = Variable("x", 0);
  ps = ps.apply(r);
  CHECK(equal(ps.goals()[0].seq.ante[0], parse_formula("x0 > 0")));
  CHECK(equal(ps.goals()[0].seq.succ[0], parse_formula("x0 >= 0")));

  RuleApp clash = app(RuleId::Rename, 0);
  clash.var = Variable("x");
  clash.var2 = Variable("x");
  CHECK_THROWS_AS(ProofState::init(seq("x > 0 |- x >= 0")).apply(clash),
                  SideConditionViolation);
}

TEST_CASE("quantifier rules and freshness") {
  // forall intro with the bound name itself (nothing else mentions x)
  ProofState ps = ProofState::init(seq("|- \\forall x (x > 0 -> x >= 0)"));
  RuleApp ar = app(RuleId::AllR, 0, -1, 0);
  ar.var = Variable("x");
  ps = ps.apply(ar);
  ps = qe(ps, 1);
  CHECK(ps.proved());

  // freshness violation: the chosen witness is free in the context
  ProofState pv = ProofState::init(seq("y > 0 |- \\forall x x > 0"));
  RuleApp bad = app(RuleId::AllR, 0, -1, 0);
  bad.var = Variable("y");
  CHECK_THROWS_AS(pv.apply(bad), SideConditionViolation);

  // allL keeps the universal and appends the instance
  ProofState pl =
      ProofState::init(seq("\\forall x x^2 >= 0 |- (y + 1)^2 >= 0"));
  RuleApp al = app(RuleId::AllL, 0, 0);
  al.term = parse_term("y + 1");
  pl = pl.apply(al);
  REQUIRE(pl.goals()[0].seq.ante.size() == 2);
  pl = pl.apply(app(RuleId::Id, 1, 1, 0));
  CHECK(pl.proved());

  // existsR / existsL round trip
  ProofState pr = ProofState::init(seq("\\exists x x > y |- \\exists z z > y"));
  RuleApp el = app(RuleId::ExistsL, 0, 0);
  el.var = Variable("x");
  pr = pr.apply(el);
  RuleApp er = app(RuleId::ExistsR, 1, -1, 0);
  er.term = parse_term("x");
  pr = pr.apply(er);
  pr = pr.apply(app(RuleId::Id, 2, 0, 1));
  CHECK(pr.proved());

  // capture: instantiating with a variable that the body would bind
  ProofState pc =
      ProofState::init(seq("\\forall x \\exists y x < y |- \\exists y y > y"));
  RuleApp cap = app(RuleId::AllL, 0, 0);
  cap.term = parse_term("y");
  CHECK_THROWS_AS(pc.apply(cap), SideConditionViolation);
}

TEST_CASE("freshness property: capture scenarios are always rejected") {
  std::mt19937_64 rng(77);
  int tried = 0;
  for (int k = 0; k < 300; ++k) {
    // goal: random fact mentioning a pool variable |- forall x phi
    FormulaPtr fact = testgen::random_formula(rng);
    VarSet fv = free_vars(fact);
    if (fv.empty()) continue;
    Sequent s;
    s.ante.push_back(fact);
    s.succ.push_back(fforall(Variable("q"), testgen::random_formula(rng)));
    // every witness that is free in the context must be rejected
    for (auto& v : fv) {
      ++tried;
      RuleApp r = app(RuleId::AllR, 0, -1, 0);
      r.var = v;
      CHECK_THROWS_AS(ProofState::init(s).apply(r), SideConditionViolation);
    }
  }
  CHECK(tried > 100);
}

TEST_CASE("assignment rules") {
  // substitution style, twice, then arithmetic
  ProofState ps = ProofState::init(seq("|- [x := 2][x := x + 1] x = 3"));
  ps = ps.apply(app(RuleId::BoxAssign, 0, -1, 0));
  CHECK(equal(ps.goals()[0].seq.succ[0], parse_formula("[x := 2 + 1] x = 3")));
  ps = ps.apply(app(RuleId::BoxAssign, 1, -1, 0));
  ps = qe(ps, 2);
  CHECK(ps.proved());

  // equality style with a fresh ghost
  ProofState pe = ProofState::init(seq("x > 0 |- [x := x + 1] x > 1"));
  RuleApp eq = app(RuleId::BoxAssignEq, 0, -1, 0);
  eq.var = Variable("x", 0);
  pe = pe.apply(eq);
  CHECK(equal(pe.goals()[0].seq.succ[0],
              parse_formula("\\forall x0 (x0 = x + 1 -> x0 > 1)")));
  RuleApp ar = app(RuleId::AllR, 1, -1, 0);
  ar.var = Variable("x", 0);
  pe = pe.apply(ar);
  pe = pe.apply(app(RuleId::ImplyR, 2, -1, 0));
  pe = qe(pe, 3);
  CHECK(pe.proved());

  // the ghost must be fresh for the assignment formula
  RuleApp stale = app(RuleId::BoxAssignEq, 0, -1, 0);
  stale.var = Variable("x");
  CHECK_THROWS_AS(ProofState::init(seq("|- [x := x + 1] x > 1")).apply(stale),
                  SideConditionViolation);

  // havoc
  ProofState ph = ProofState::init(seq("|- [x := *] x^2 >= 0"));
  ph = ph.apply(app(RuleId::BoxAssignAny, 0, -1, 0));
  CHECK(equal(ph.goals()[0].seq.succ[0],
              parse_formula("\\forall x x^2 >= 0")));

  // diamond assignment
  ProofState pd = ProofState::init(seq("x = 1 |- <x := x + 1> x = 2"));
  pd = pd.apply(app(RuleId::DiaAssign, 0, -1, 0));
  pd = qe(pd, 1);
  CHECK(pd.proved());
}

TEST_CASE("sequencing, test, choice, unrolling") {
  ProofState ps = ProofState::init(
      seq("x > 0 |- [?x > 0; {x := x + 1 ++ x := x + 2}] x > 1"));
  ps = ps.apply(app(RuleId::BoxSeq, 0, -1, 0));
  ps = ps.apply(app(RuleId::BoxTest, 1, -1, 0));
  ps = ps.apply(app(RuleId::ImplyR, 2, -1, 0));
  ps = ps.apply(app(RuleId::BoxChoice, 3, -1, 0));
  ps = ps.apply(app(RuleId::AndR, 4, -1, 0));
  ps = ps.apply(app(RuleId::BoxAssign, 5, -1, 0));
  ps = qe(ps, 7);
  ps = ps.apply(app(RuleId::BoxAssign, 6, -1, 0));
  ps = qe(ps, 8);
  CHECK(ps.proved());

  // one loop unrolling proves the 0-iteration case
  ProofState pu = ProofState::init(seq("x > 0 |- [{x := x - 1}*] x > 0 | x <= 0"));
  pu = pu.apply(app(RuleId::OrR, 0, -1, 0));
  pu = pu.apply(app(RuleId::BoxUnroll, 1, -1, 0));
  CHECK(pu.goals()[0].seq.succ[0]->kind == FormulaKind::And);

  // diamond duals
  ProofState pq = ProofState::init(seq("x = 1 |- <?x > 0; x := 2*x> x = 2"));
  pq = pq.apply(app(RuleId::DiaSeq, 0, -1, 0));
  pq = pq.apply(app(RuleId::DiaTest, 1, -1, 0));
  pq = pq.apply(app(RuleId::AndR, 2, -1, 0));
  pq = qe(pq, 3);
  pq = pq.apply(app(RuleId::DiaAssign, 4, -1, 0));
  pq = qe(pq, 5);
  CHECK(pq.proved());

  ProofState pdu = ProofState::init(seq("x = 5 |- <{x := x - 1}*> x = 5"));
  pdu = pdu.apply(app(RuleId::DiaUnroll, 0, -1, 0));
  pdu = pdu.apply(app(RuleId::OrR, 1, -1, 0));
  pdu = pdu.apply(app(RuleId::Id, 2, 0, 0));
  CHECK(pdu.proved());
}

TEST_CASE("rewrites apply on the antecedent side too") {
  ProofState ps = ProofState::init(seq("[x := 1] x > 0 |- x = x"));
  RuleApp r = app(RuleId::BoxAssign, 0, 0, -1);
  r.left = true;
  ps = ps.apply(r);
  CHECK(equal(ps.goals()[0].seq.ante[0], parse_formula("1 > 0")));
}

TEST_CASE("loop induction ghost-abstracts the context") {
  ProofState ps = ProofState::init(seq("x >= 1, y = 2 |- [{x := x + 1}*] x >= 1"));
  ps = ps.apply(app(RuleId::LoopInd, 0, 0, 0));
  REQUIRE(ps.goals().size() == 1);
  const Sequent& p = ps.goals()[0].seq;
  // y = 2 does not mention x: survives unrenamed; the invariant is re-added
  REQUIRE(p.ante.size() == 2);
  CHECK(equal(p.ante[0], parse_formula("y = 2")));
  CHECK(equal(p.ante[1], parse_formula("x >= 1")));
  CHECK(equal(p.succ[0], parse_formula("[x := x + 1] x >= 1")));
  ps = ps.apply(app(RuleId::BoxAssign, 1, -1, 0));
  ps = qe(ps, 2);
  CHECK(ps.proved());

  // a context fact about the bound variable is renamed to a ghost
  ProofState pg = ProofState::init(seq("x >= 1, x <= 5 |- [{x := x + 1}*] x >= 1"));
  pg = pg.apply(app(RuleId::LoopInd, 0, 0, 0));
  CHECK(equal(pg.goals()[0].seq.ante[0], parse_formula("x0 <= 5")));

  // the named antecedent must equal the loop postcondition
  CHECK_THROWS_AS(ProofState::init(seq("x >= 2 |- [{x := x + 1}*] x >= 1"))
                      .apply(app(RuleId::LoopInd, 0, 0, 0)),
                  SideConditionViolation);
}

TEST_CASE("convergence rule for diamond loops") {
  Sequent root;
  root.ante.push_back(parse_formula("\\exists v x = v"));
  root.succ.push_back(
      parse_formula("<{x := x - 1}*> \\exists v (v <= 0 & x = v)"));
  ProofState ps = ProofState::init(root);
  ps = ps.apply(app(RuleId::Con, 0, 0, 0));
  REQUIRE(ps.goals().size() == 1);
  const Sequent& p = ps.goals()[0].seq;
  REQUIRE(p.ante.size() == 2);
  CHECK(equal(p.ante[0], parse_formula("v > 0")));
  CHECK(equal(p.ante[1], parse_formula("x = v")));
  CHECK(equal(p.succ[0], parse_formula("<x := x - 1> x = v - 1")));
  ps = ps.apply(app(RuleId::DiaAssign, 1, -1, 0));
  ps = qe(ps, 2);
  CHECK(ps.proved());

  // variant variable clashing with the context is rejected
  Sequent clash = root;
  clash.ante.push_back(parse_formula("v = 3"));
  CHECK_THROWS_AS(ProofState::init(clash).apply(app(RuleId::Con, 0, 0, 0)),
                  SideConditionViolation);
}

TEST_CASE("monotonicity abstracts written variables") {
  ProofState ps =
      ProofState::init(seq("x = 7, [x := *] x >= 5 |- [x := *] x >= 0"));
  ps = ps.apply(app(RuleId::MonBox, 0, 1, 0));
  REQUIRE(ps.goals().size() == 1);
  const Sequent& p = ps.goals()[0].seq;
  // x = 7 talks about the overwritten x: it is ghost-renamed in the premise
  CHECK(equal(p.ante[0], parse_formula("x0 = 7")));
  CHECK(equal(p.ante[1], parse_formula("x >= 5")));
  CHECK(equal(p.succ[0], parse_formula("x >= 0")));
  ps = qe(ps, 1);
  CHECK(ps.proved());

  CHECK_THROWS_AS(
      ProofState::init(seq("[x := 1] x = 1 |- [x := 2] x = 2"))
          .apply(app(RuleId::MonBox, 0, 0, 0)),
      SideConditionViolation);

  ProofState pd =
      ProofState::init(seq("<x := *> x > 3 |- <x := *> x > 1"));
  pd = pd.apply(app(RuleId::MonDia, 0, 0, 0));
  pd = qe(pd, 1);
  CHECK(pd.proved());
}

TEST_CASE("differential weakening") {
  ProofState ps =
      ProofState::init(seq("v < 0 |- [{x' = v & x >= 0}] x >= 0"));
  ps = ps.apply(app(RuleId::DW, 0, -1, 0));
  const Sequent& p = ps.goals()[0].seq;
  // v is not written by the ODE and stays; the domain becomes an assumption
  CHECK(equal(p.ante[0], parse_formula("v < 0")));
  CHECK(equal(p.ante[1], parse_formula("x >= 0")));
  ps = ps.apply(app(RuleId::Id, 1, 1, 0));
  CHECK(ps.proved());

  // context facts about written variables are renamed
  ProofState pg = ProofState::init(seq("x = 1 |- [{x' = 2 & x > 0}] x > 0"));
  pg = pg.apply(app(RuleId::DW, 0, -1, 0));
  CHECK(equal(pg.goals()[0].seq.ante[0], parse_formula("x0 = 1")));
}

TEST_CASE("differential invariant") {
  ProofState ps = ProofState::init(seq("x >= 0, v >= 0 |- [{x' = v & true}] x >= 0"));
  ps = ps.apply(app(RuleId::DI, 0, -1, 0));
  REQUIRE(ps.goals().size() == 2);
  // premise 1: initial truth
  CHECK(equal(ps.goals()[0].seq.succ[0], parse_formula("x >= 0")));
  // premise 2: derivative condition with x' replaced by the rhs
  CHECK(equal(ps.goals()[1].seq.succ[0], parse_formula("v >= 0")));
  ps = qe(ps, 1);
  ps = qe(ps, 2);
  CHECK(ps.proved());

  // equality invariants differentiate to equalities (conserved energy)
  ProofState pe = ProofState::init(
      seq("v^2/2 + 10*y = e |- [{y' = v, v' = -(10) & true}] v^2/2 + 10*y = e"));
  pe = pe.apply(app(RuleId::DI, 0, -1, 0));
  REQUIRE(pe.goals().size() == 2);
  // initial truth is the assumption verbatim; the derivative goal cancels
  pe = pe.apply(app(RuleId::Id, 1, 0, 0));
  pe = qe(pe, 2);
  CHECK(pe.proved());

  // a != invariant has no differential
  CHECK_THROWS_AS(
      ProofState::init(seq("|- [{x' = 1 & true}] x != 5"))
          .apply(app(RuleId::DI, 0, -1, 0)),
      SideConditionViolation);
}

TEST_CASE("differential cut") {
  ProofState ps =
      ProofState::init(seq("x >= 0, v >= 0 |- [{x' = v & true}] x >= 0"));
  RuleApp dc = app(RuleId::DC, 0, -1, 0);
  dc.fml = parse_formula("v >= 0");
  ps = ps.apply(dc);
  REQUIRE(ps.goals().size() == 2);
  CHECK(equal(ps.goals()[0].seq.succ[0],
              parse_formula("[{x' = v & true}] v >= 0")));
  CHECK(equal(ps.goals()[1].seq.succ[0],
              parse_formula("[{x' = v & true & v >= 0}] x >= 0")));
  // close the cut by DI (v is constant), then the main branch by DI using
  // the strengthened domain
  ps = ps.apply(app(RuleId::DI, 1, -1, 0));
  ps = qe(ps, 3);
  ps = qe(ps, 4);
  ps = ps.apply(app(RuleId::DI, 2, -1, 0));
  ps = qe(ps, 5);
  ps = qe(ps, 6);
  CHECK(ps.proved());
}

TEST_CASE("differential ghost") {
  ProofState ps = ProofState::init(seq("x > 0 |- [{x' = -x & true}] x > 0"));
  RuleApp dg = app(RuleId::DG, 0, -1, 0);
  dg.var = Variable("y");
  dg.term = parse_term("(1/2) * y");
  dg.term2 = parse_term("2");
  ps = ps.apply(dg);
  REQUIRE(ps.goals().size() == 1);
  const Sequent& p = ps.goals()[0].seq;
  CHECK(equal(p.ante[1], parse_formula("y = 2")));
  CHECK(equal(p.succ[0],
              parse_formula("[{x' = -x, y' = (1/2) * y & true}] x > 0")));

  // nonlinear ghost dynamics are rejected
  RuleApp bad = dg;
  bad.term = parse_term("y * y");
  CHECK_THROWS_AS(
      ProofState::init(seq("x > 0 |- [{x' = -x & true}] x > 0")).apply(bad),
      SideConditionViolation);

  // the ghost must be fresh
  RuleApp stale = dg;
  stale.var = Variable("x");
  CHECK_THROWS_AS(
      ProofState::init(seq("x > 0 |- [{x' = -x & true}] x > 0")).apply(stale),
      SideConditionViolation);
}

TEST_CASE("solve emits identity side-goals and closes linearly") {
  ProofState ps = ProofState::init(seq("x >= 0 |- [{x' = 2 & true}] x >= 0"));
  RuleApp so = app(RuleId::Solve, 0, -1, 0);
  so.var = Variable("t");
  so.sols = {parse_term("x + 2 * t")};
  ps = ps.apply(so);
  REQUIRE(ps.goals().size() == 3);
  // derivative identity: d/dt (x + 2 t) = 2, decidable polynomially
  CHECK(decide(ps.goals()[0].seq).verdict == Verdict::Valid);
  // initial identity
  CHECK(equal(ps.goals()[1].seq.succ[0], parse_formula("x + 2 * 0 = x")));
  for (int g = 1; g <= 3; ++g) ps = qe(ps, g);
  CHECK(ps.proved());

  // wrong claimed solution: the identity goal is falsifiable
  ProofState pw = ProofState::init(seq("x >= 0 |- [{x' = 2 & true}] x >= 0"));
  RuleApp wrong = so;
  wrong.sols = {parse_term("x + 3 * t")};
  pw = pw.apply(wrong);
  ArithEvidence ev = decide(pw.goals()[0].seq);
  CHECK(ev.verdict == Verdict::CounterExample);

  // the clock must be fresh
  RuleApp clash = so;
  clash.var = Variable("x");
  CHECK_THROWS_AS(
      ProofState::init(seq("x >= 0 |- [{x' = 2 & true}] x >= 0")).apply(clash),
      SideConditionViolation);
}

TEST_CASE("solve threads the domain constraint") {
  // under domain x <= 5 the endpoint satisfies x <= 5
  ProofState ps = ProofState::init(seq("x = 0 |- [{x' = 1 & x <= 5}] x <= 5"));
  RuleApp so = app(RuleId::Solve, 0, -1, 0);
  so.var = Variable("t");
  so.sols = {parse_term("x + t")};
  ps = ps.apply(so);
  REQUIRE(ps.goals().size() == 3);
  const Sequent& main = ps.goals()[2].seq;
  // domain assumption quantifies over intermediate times
  CHECK(print(main.ante[2]) ==
        "\\forall s0 (0 <= s0 & s0 <= t -> x + s0 <= 5)");
  for (int g = 1; g <= 3; ++g) ps = qe(ps, g);
  CHECK(ps.proved());
}

TEST_CASE("diamond solve with explicit duration") {
  ProofState ps = ProofState::init(seq("x = 0 |- <{x' = 1 & true}> x = 5"));
  RuleApp so = app(RuleId::DiaSolve, 0, -1, 0);
  so.var = Variable("t");
  so.term = parse_term("5");
  so.sols = {parse_term("x + t")};
  ps = ps.apply(so);
  REQUIRE(ps.goals().size() == 3);
  for (int g = 1; g <= 3; ++g) ps = qe(ps, g);
  CHECK(ps.proved());
}

TEST_CASE("rule locality and stable ids") {
  ProofState ps = ProofState::init(seq("x = 1 |- x = 1 & x >= 1"));
  ps = ps.apply(app(RuleId::AndR, 0, -1, 0));
  REQUIRE(ps.goals().size() == 2);
  CHECK(ps.goals()[0].id == 1);
  CHECK(ps.goals()[1].id == 2);
  FormulaPtr before = ps.goals()[1].seq.succ[0];
  ProofState ps2 = ps.apply(app(RuleId::Id, 1, 0, 0));
  // goal 2 survives with identical identity and structure (shared nodes)
  REQUIRE(ps2.goals().size() == 1);
  CHECK(ps2.goals()[0].id == 2);
  CHECK(ps2.goals()[0].seq.succ[0].get() == before.get());
}

TEST_CASE("qe evidence must match the goal") {
  Sequent g1 = seq("x > 0 |- x >= 0");
  Sequent g2 = seq("x > 1 |- x >= 0");
  ArithEvidence ev = decide(g2);
  REQUIRE(ev.verdict == Verdict::Valid);
  ProofState ps = ProofState::init(g1);
  CHECK_THROWS_AS(ps.close_qe(0, ev), EvidenceMismatch);

  ArithEvidence unknown;  // not Valid
  CHECK_THROWS_AS(ps.close_qe(0, unknown), EvidenceMismatch);

  // non-arithmetic goals cannot close by qe
  ProofState pm = ProofState::init(seq("|- [x := 1] x = 1"));
  ArithEvidence fake;
  fake.verdict = Verdict::Valid;
  CHECK_THROWS_AS(pm.close_qe(0, fake), EvidenceMismatch);
}

namespace {

// A small finished derivation used by the certificate tests.
ProofState proved_example() {
  ProofState ps = ProofState::init(
      seq("x > 0 |- [?x > 0; {x := x + 1 ++ x := x + 2}] x > 1"));
  ps = ps.apply(app(RuleId::BoxSeq, 0, -1, 0));
  ps = ps.apply(app(RuleId::BoxTest, 1, -1, 0));
  ps = ps.apply(app(RuleId::ImplyR, 2, -1, 0));
  ps = ps.apply(app(RuleId::BoxChoice, 3, -1, 0));
  ps = ps.apply(app(RuleId::AndR, 4, -1, 0));
  ps = ps.apply(app(RuleId::BoxAssign, 5, -1, 0));
  ps = qe(ps, 7);
  ps = ps.apply(app(RuleId::BoxAssign, 6, -1, 0));
  ps = qe(ps, 8);
  return ps;
}

}  // namespace

TEST_CASE("certificate round-trip and replay") {
  ProofState ps = proved_example();
  REQUIRE(ps.proved());
  Certificate c = certificate_of(ps);
  std::string text = serialize(c);
  Certificate back = parse_certificate(text);
  CHECK(equal(back.root, c.root));
  REQUIRE(back.steps.size() == c.steps.size());
  ReplayResult r = replay(back);
  CHECK(r.valid);

  // replay with arithmetic re-verification
  DecideOptions opt;
  ReplayOptions ro;
  ro.recheck_arith = &opt;
  CHECK(replay(back, ro).valid);

  // serialization is deterministic
  CHECK(serialize(back) == text);
}

TEST_CASE("tampered certificates are rejected") {
  Certificate c = certificate_of(proved_example());
  std::string text = serialize(c);

  auto tamper = [&](const std::string& from, const std::string& to) {
    std::string t = text;
    size_t p = t.find(from);
    REQUIRE(p != std::string::npos);
    t.replace(p, from.size(), to);
    return t;
  };

  // swapped rule
  {
    Certificate bad = parse_certificate(tamper("boxSeq", "boxChoice"));
    ReplayResult r = replay(bad);
    CHECK(!r.valid);
    CHECK(r.failed_step == 0);
  }
  // weakened root: the qe hash no longer matches
  {
    Certificate bad = parse_certificate(tamper("x > 0 |-", "x > -1 |-"));
    CHECK(!replay(bad).valid);
  }
  // corrupted evidence hash
  {
    Certificate bad = c;
    for (auto& st : bad.steps)
      if (st.rule == RuleId::CloseQE) st.evidence_hash ^= 1;
    CHECK(!replay(bad).valid);
  }
  // truncated derivation leaves open goals
  {
    Certificate bad = c;
    bad.steps.pop_back();
    ReplayResult r = replay(bad);
    CHECK(!r.valid);
    CHECK(r.failed_step == (int)bad.steps.size());
  }
  // retargeted goal id
  {
    Certificate bad = c;
    bad.steps[1].goal = 99;
    CHECK(!replay(bad).valid);
  }
  // junk text
  CHECK_THROWS_AS(parse_certificate("derivation 2\n"), MalformedArgs);
  CHECK_THROWS_AS(parse_certificate("derivation 1\nroot x |-\nsteps 1\n"),
                  KernelError);
}

TEST_CASE("negation pushing rewrites one connective at a time") {
  ProofState ps = ProofState::init(seq("|- !(x > 0 & y > 0)"));
  ps = ps.apply(app(RuleId::PushNeg, 0, -1, 0));
  CHECK(print(ps.goals()[0].seq.succ[0]) == "!x > 0 | !y > 0");

  ProofState pb = ProofState::init(seq("|- ![x := 1]x = 1"));
  pb = pb.apply(app(RuleId::PushNeg, 0, -1, 0));
  CHECK(print(pb.goals()[0].seq.succ[0]) == "<x := 1>!x = 1");

  ProofState pc = ProofState::init(seq("!(x = 1) |- x != 1"));
  pc = pc.apply(RuleApp{RuleId::PushNeg, 0, 0, -1, true});
  pc = pc.apply(app(RuleId::Id, 1, 0, 0));
  CHECK(pc.proved());

  CHECK_THROWS_AS(
      ProofState::init(seq("|- x = 1")).apply(app(RuleId::PushNeg, 0, -1, 0)),
      MalformedArgs);
}

TEST_CASE("box and diamond split over their junctions") {
  ProofState ps = ProofState::init(seq("[x := 1](x = 1 & x > 0) |- x = 1"));
  // splitting applies on either side since it rewrites to an equivalent
  RuleApp r = app(RuleId::BoxSplit, 0, 0, -1);
  r.left = true;
  ps = ps.apply(r);
  CHECK(print(ps.goals()[0].seq.ante[0]) ==
        "[x := 1]x = 1 & [x := 1]x > 0");

  ProofState pd = ProofState::init(seq("|- <x := 2>(x = 1 | x = 2)"));
  pd = pd.apply(app(RuleId::DiaSplit, 0, -1, 0));
  CHECK(print(pd.goals()[0].seq.succ[0]) ==
        "<x := 2>x = 1 | <x := 2>x = 2");
  pd = pd.apply(app(RuleId::OrR, 1, -1, 0));
  pd = pd.apply(app(RuleId::DiaAssign, 2, -1, 1));
  pd = pd.apply(app(RuleId::WeakenR, 3, -1, 0));
  pd = qe(pd, 4);
  CHECK(pd.proved());

  CHECK_THROWS_AS(ProofState::init(seq("|- [x := 1](x = 1 | x > 0)"))
                      .apply(app(RuleId::BoxSplit, 0, -1, 0)),
                  MalformedArgs);
}

TEST_CASE("abstraction rules accept caller-chosen ghosts") {
  // monBox abstracts over bound(x := 2); an explicit fresh ghost is used
  Sequent root = seq("x = 1, [x := 2]x > 1 |- [x := 2]x > 1");
  RuleApp r = app(RuleId::MonBox, 0, 1, 0);
  r.sols.push_back(parse_term("x7"));
  ProofState ps = ProofState::init(root).apply(r);
  CHECK(print(ps.goals()[0].seq) == "x7 = 1, x > 1 |- x > 1");

  // non-fresh or miscounted ghosts are rejected
  RuleApp bad = app(RuleId::MonBox, 0, 1, 0);
  bad.sols.push_back(parse_term("x"));
  CHECK_THROWS_AS(ProofState::init(root).apply(bad), SideConditionViolation);
  RuleApp two = app(RuleId::MonBox, 0, 1, 0);
  two.sols.push_back(parse_term("x7"));
  two.sols.push_back(parse_term("x8"));
  CHECK_THROWS_AS(ProofState::init(root).apply(two), MalformedArgs);

  // ghost choices survive the certificate round trip
  ProofState done = ps.apply(app(RuleId::Id, 1, 1, 0));
  REQUIRE(done.proved());
  Certificate c = certificate_of(done);
  ReplayResult rr = replay(parse_certificate(serialize(c)));
  CHECK(rr.valid);
}
