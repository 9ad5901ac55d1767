#include "kaisar/kernel.hpp"

#include <algorithm>
#include <sstream>

#include "kaisar/parser.hpp"

namespace kaisar {

namespace {

// ---------------------------------------------------------------------------
// Small sequent helpers.

VarSet seq_free_vars(const Sequent& s) {
  VarSet out;
  for (auto& f : s.ante) { auto v = free_vars(f); out.insert(v.begin(), v.end()); }
  for (auto& f : s.succ) { auto v = free_vars(f); out.insert(v.begin(), v.end()); }
  return out;
}

VarSet seq_all_vars(const Sequent& s) {
  VarSet out;
  for (auto& f : s.ante) { auto v = all_vars(f); out.insert(v.begin(), v.end()); }
  for (auto& f : s.succ) { auto v = all_vars(f); out.insert(v.begin(), v.end()); }
  return out;
}

const FormulaPtr& at(const std::vector<FormulaPtr>& fs, int idx,
                     const char* side) {
  if (idx < 0 || idx >= (int)fs.size())
    throw MalformedArgs(std::string("no ") + side + " formula at index " +
                        std::to_string(idx));
  return fs[idx];
}

std::vector<FormulaPtr> erased(std::vector<FormulaPtr> fs, int idx) {
  fs.erase(fs.begin() + idx);
  return fs;
}

bool has_primed(const VarSet& vs) {
  return std::any_of(vs.begin(), vs.end(),
                     [](const Variable& v) { return v.primed; });
}

void require_core_plain(const FormulaPtr& f, const char* what) {
  if (!is_core(f))
    throw MalformedArgs(std::string(what) + " is not a core formula");
  if (has_primed(free_vars(f)))
    throw SideConditionViolation(std::string(what) +
                                 " mentions a primed variable");
}

// Ghost abstraction of a goal over the bound variables of a program: frame
// occurrences of bound variables are renamed to fresh ghosts (universally
// free in the premise), and formulas mentioning the program's primed symbols
// are dropped. One shared renaming covers both sides. The formulas at
// skip_i / skip_j are omitted (the rule re-adds its own).
struct AbsGoal {
  std::vector<FormulaPtr> ante, succ;
  RenameMap ren;
};

AbsGoal abstract_goal(const Sequent& s, int skip_i, int skip_j,
                      const VarSet& bound,
                      const std::vector<TermPtr>& ghosts = {}) {
  AbsGoal out;
  VarSet used = seq_all_vars(s);
  VarSet primes;
  size_t next_ghost = 0;
  for (auto& v : bound) {
    if (v.primed) {
      primes.insert(v);
      continue;
    }
    Variable g;
    if (!ghosts.empty()) {
      if (next_ghost >= ghosts.size() || !ghosts[next_ghost] ||
          ghosts[next_ghost]->kind != TermKind::Var)
        throw MalformedArgs("abstraction: one ghost variable per bound "
                            "variable required");
      g = ghosts[next_ghost++]->var;
      if (g.primed || used.count(g) || bound.count(g))
        throw SideConditionViolation("abstraction: ghost is not fresh: " +
                                     g.str());
    } else {
      g = fresh_var(v.base, used);
    }
    used.insert(g);
    out.ren.emplace(v, g);
  }
  if (!ghosts.empty() && next_ghost != ghosts.size())
    throw MalformedArgs("abstraction: ghost count does not match the bound "
                        "variables");
  auto abs_one = [&](const FormulaPtr& f) -> FormulaPtr {
    VarSet fv = free_vars(f);
    for (auto& p : primes)
      if (fv.count(p)) return nullptr;  // dropped
    return rename_free(f, out.ren);
  };
  for (int k = 0; k < (int)s.ante.size(); ++k) {
    if (k == skip_i) continue;
    if (auto g = abs_one(s.ante[k])) out.ante.push_back(g);
  }
  for (int k = 0; k < (int)s.succ.size(); ++k) {
    if (k == skip_j) continue;
    if (auto g = abs_one(s.succ[k])) out.succ.push_back(g);
  }
  return out;
}

FormulaPtr subst_or_violation(const FormulaPtr& f, const SubstMap& m,
                              const char* what) {
  try {
    return substitute(f, m);
  } catch (const CaptureError& e) {
    throw SideConditionViolation(std::string(what) + ": " + e.what());
  }
}

TermPtr subst_or_violation_term(const TermPtr& t, const SubstMap& m) {
  try {
    return substitute(t, m);
  } catch (const CaptureError& e) {
    throw SideConditionViolation(std::string("substitution: ") + e.what());
  }
}

// Derivative of a (polynomial / constant-denominator) term with respect to
// the solution clock; every other variable is an initial-value constant.
TermPtr deriv_clock(const TermPtr& t, const Variable& clk) {
  switch (t->kind) {
    case TermKind::Var:
      return tlit(t->var == clk ? Rational(1) : Rational(0));
    case TermKind::Lit:
      return tlit(Rational(0));
    case TermKind::Plus:
      return tplus(deriv_clock(t->a, clk), deriv_clock(t->b, clk));
    case TermKind::Minus:
      return tminus(deriv_clock(t->a, clk), deriv_clock(t->b, clk));
    case TermKind::Neg:
      return tneg(deriv_clock(t->a, clk));
    case TermKind::Times:
      return tplus(ttimes(deriv_clock(t->a, clk), t->b),
                   ttimes(t->a, deriv_clock(t->b, clk)));
    case TermKind::Divide:
      if (free_vars(t->b).count(clk))
        throw SideConditionViolation(
            "solution denominator depends on the clock");
      return tdivide(deriv_clock(t->a, clk), t->b);
    case TermKind::Power: {
      if (!is_integer(t->lit))
        throw MalformedArgs("solution with fractional power");
      Rational n = t->lit;
      TermPtr da = deriv_clock(t->a, clk);
      if (n == Rational(1)) return da;
      return ttimes(tlit(n), ttimes(tpower(t->a, n - Rational(1)), da));
    }
    default:
      throw MalformedArgs("solution term is not differentiable: " + print(t));
  }
}

bool linear_in(const TermPtr& t, const Variable& y) {
  auto yfree = [&](const TermPtr& u) { return !free_vars(u).count(y); };
  switch (t->kind) {
    case TermKind::Var:
    case TermKind::Lit:
      return true;
    case TermKind::Plus:
    case TermKind::Minus:
      return linear_in(t->a, y) && linear_in(t->b, y);
    case TermKind::Neg:
      return linear_in(t->a, y);
    case TermKind::Times:
      return (yfree(t->a) && linear_in(t->b, y)) ||
             (yfree(t->b) && linear_in(t->a, y));
    case TermKind::Divide:
      return linear_in(t->a, y) && yfree(t->b);
    default:
      return yfree(t);
  }
}

FormulaPtr cmp_le(TermPtr a, TermPtr b) { return fcmp(CmpOp::Le, a, b); }

// One step of pushing a negation inward; the result is equivalent to !f.
FormulaPtr push_neg_once(const FormulaPtr& f) {
  switch (f->kind) {
    case FormulaKind::True: return ffalse();
    case FormulaKind::False: return ftrue();
    case FormulaKind::Cmp: return fcmp(cmp_negate(f->op), f->t1, f->t2);
    case FormulaKind::Not: return f->f1;
    case FormulaKind::And: return f_or(fnot(f->f1), fnot(f->f2));
    case FormulaKind::Or: return fand(fnot(f->f1), fnot(f->f2));
    case FormulaKind::Imply: return fand(f->f1, fnot(f->f2));
    case FormulaKind::Equiv:
      return f_or(fand(f->f1, fnot(f->f2)), fand(fnot(f->f1), f->f2));
    case FormulaKind::Forall: return fexists(f->var, fnot(f->f1));
    case FormulaKind::Exists: return fforall(f->var, fnot(f->f1));
    case FormulaKind::Box: return fdiamond(f->prog, fnot(f->f1));
    case FormulaKind::Diamond: return fbox(f->prog, fnot(f->f1));
    default:
      throw MalformedArgs("pushNeg: negation of a non-core formula");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Rule names.

namespace {
struct RuleName {
  RuleId id;
  const char* name;
};
const RuleName kRuleNames[] = {
    {RuleId::Id, "id"},
    {RuleId::CloseTrue, "closeTrue"},
    {RuleId::CloseFalse, "closeFalse"},
    {RuleId::CloseQE, "qe"},
    {RuleId::Cut, "cut"},
    {RuleId::WeakenL, "weakenL"},
    {RuleId::WeakenR, "weakenR"},
    {RuleId::MoveL, "moveL"},
    {RuleId::MoveR, "moveR"},
    {RuleId::FlipL, "flipL"},
    {RuleId::Rename, "rename"},
    {RuleId::PushNeg, "pushNeg"},
    {RuleId::NotL, "notL"},
    {RuleId::NotR, "notR"},
    {RuleId::AndL, "andL"},
    {RuleId::AndR, "andR"},
    {RuleId::OrL, "orL"},
    {RuleId::OrR, "orR"},
    {RuleId::ImplyL, "implyL"},
    {RuleId::ImplyR, "implyR"},
    {RuleId::EquivL, "equivL"},
    {RuleId::EquivR, "equivR"},
    {RuleId::AllR, "allR"},
    {RuleId::AllL, "allL"},
    {RuleId::ExistsR, "existsR"},
    {RuleId::ExistsL, "existsL"},
    {RuleId::BoxSeq, "boxSeq"},
    {RuleId::BoxChoice, "boxChoice"},
    {RuleId::BoxTest, "boxTest"},
    {RuleId::BoxAssign, "boxAssign"},
    {RuleId::BoxAssignEq, "boxAssignEq"},
    {RuleId::BoxAssignAny, "boxAssignAny"},
    {RuleId::BoxUnroll, "boxUnroll"},
    {RuleId::BoxSplit, "boxSplit"},
    {RuleId::DiaSeq, "diaSeq"},
    {RuleId::DiaChoice, "diaChoice"},
    {RuleId::DiaTest, "diaTest"},
    {RuleId::DiaAssign, "diaAssign"},
    {RuleId::DiaAssignEq, "diaAssignEq"},
    {RuleId::DiaAssignAny, "diaAssignAny"},
    {RuleId::DiaUnroll, "diaUnroll"},
    {RuleId::DiaSplit, "diaSplit"},
    {RuleId::LoopInd, "loopInd"},
    {RuleId::Con, "con"},
    {RuleId::MonBox, "monBox"},
    {RuleId::MonDia, "monDia"},
    {RuleId::DW, "dw"},
    {RuleId::DC, "dc"},
    {RuleId::DI, "di"},
    {RuleId::DG, "dg"},
    {RuleId::Solve, "solve"},
    {RuleId::DiaSolve, "diaSolve"},
};
}  // namespace

std::string rule_name(RuleId r) {
  for (auto& rn : kRuleNames)
    if (rn.id == r) return rn.name;
  return "?";
}

RuleId rule_of_name(const std::string& name) {
  for (auto& rn : kRuleNames)
    if (name == rn.name) return rn.id;
  throw MalformedArgs("unknown rule: " + name);
}

// ---------------------------------------------------------------------------
// ProofState.

ProofState ProofState::init(const Sequent& root) {
  ProofState ps;
  ps.root_ = root;
  ps.goals_.push_back(Goal{0, root});
  ps.next_id_ = 1;
  return ps;
}

const Goal* ProofState::find(int id) const {
  for (auto& g : goals_)
    if (g.id == id) return &g;
  return nullptr;
}

ProofState ProofState::apply(const RuleApp& r) const {
  int pos = -1;
  for (int k = 0; k < (int)goals_.size(); ++k)
    if (goals_[k].id == r.goal) pos = k;
  if (pos < 0) throw NoSuchGoal("no goal with id " + std::to_string(r.goal));
  const Sequent& s = goals_[pos].seq;

  // Premises of the addressed goal; empty means the goal closes.
  std::vector<Sequent> prem;
  auto rewrite = [&](FormulaPtr nf) {
    Sequent n = s;
    (r.left ? n.ante[r.i] : n.succ[r.j]) = nf;
    prem.push_back(n);
  };
  auto focus = [&]() -> const FormulaPtr& {
    return r.left ? at(s.ante, r.i, "antecedent") : at(s.succ, r.j, "succedent");
  };

  switch (r.rule) {
    // ---- closing -----------------------------------------------------------
    case RuleId::Id: {
      if (!equal(at(s.ante, r.i, "antecedent"), at(s.succ, r.j, "succedent")))
        throw SideConditionViolation("id: formulas differ");
      break;
    }
    case RuleId::CloseTrue: {
      if (at(s.succ, r.j, "succedent")->kind != FormulaKind::True)
        throw MalformedArgs("closeTrue: formula is not `true`");
      break;
    }
    case RuleId::CloseFalse: {
      if (at(s.ante, r.i, "antecedent")->kind != FormulaKind::False)
        throw MalformedArgs("closeFalse: formula is not `false`");
      break;
    }
    case RuleId::CloseQE: {
      std::uint64_t h;
      try {
        h = elaborate(sequent_image(s)).hash;
      } catch (const std::exception& e) {
        throw EvidenceMismatch(std::string("goal is not arithmetic: ") +
                               e.what());
      }
      if (h != r.evidence_hash)
        throw EvidenceMismatch("evidence hash does not match the goal");
      break;
    }

    // ---- structural --------------------------------------------------------
    case RuleId::Cut: {
      if (!r.fml) throw MalformedArgs("cut: missing formula");
      if (!is_core(r.fml)) throw MalformedArgs("cut: formula is not core dL");
      Sequent a = s, b = s;
      a.succ.push_back(r.fml);
      b.ante.push_back(r.fml);
      prem.push_back(a);
      prem.push_back(b);
      break;
    }
    case RuleId::WeakenL: {
      at(s.ante, r.i, "antecedent");
      Sequent n = s;
      n.ante = erased(n.ante, r.i);
      prem.push_back(n);
      break;
    }
    case RuleId::WeakenR: {
      at(s.succ, r.j, "succedent");
      Sequent n = s;
      n.succ = erased(n.succ, r.j);
      prem.push_back(n);
      break;
    }
    case RuleId::MoveL: {
      at(s.ante, r.i, "antecedent");
      Sequent n = s;
      std::rotate(n.ante.begin(), n.ante.begin() + r.i, n.ante.begin() + r.i + 1);
      prem.push_back(n);
      break;
    }
    case RuleId::MoveR: {
      at(s.succ, r.j, "succedent");
      Sequent n = s;
      std::rotate(n.succ.begin(), n.succ.begin() + r.j, n.succ.begin() + r.j + 1);
      prem.push_back(n);
      break;
    }
    case RuleId::FlipL: {
      FormulaPtr f = at(s.ante, r.i, "antecedent");
      Sequent n = s;
      n.ante = erased(n.ante, r.i);
      n.succ.insert(n.succ.begin(), fnot(f));
      prem.push_back(n);
      break;
    }
    case RuleId::Rename: {
      if (r.var.base.empty() || r.var2.base.empty())
        throw MalformedArgs("rename: missing variables");
      if (seq_all_vars(s).count(r.var2))
        throw SideConditionViolation("rename: target variable is not fresh");
      RenameMap m{{r.var, r.var2}};
      Sequent n;
      for (auto& f : s.ante) n.ante.push_back(rename_free(f, m));
      for (auto& f : s.succ) n.succ.push_back(rename_free(f, m));
      prem.push_back(n);
      break;
    }
    case RuleId::PushNeg: {
      FormulaPtr f = focus();
      if (f->kind != FormulaKind::Not)
        throw MalformedArgs("pushNeg: formula is not a negation");
      rewrite(push_neg_once(f->f1));
      break;
    }

    // ---- propositional -----------------------------------------------------
    case RuleId::NotR: {
      FormulaPtr f = at(s.succ, r.j, "succedent");
      if (f->kind != FormulaKind::Not) throw MalformedArgs("notR: not a negation");
      Sequent n = s;
      n.succ = erased(n.succ, r.j);
      n.ante.push_back(f->f1);
      prem.push_back(n);
      break;
    }
    case RuleId::NotL: {
      FormulaPtr f = at(s.ante, r.i, "antecedent");
      if (f->kind != FormulaKind::Not) throw MalformedArgs("notL: not a negation");
      Sequent n = s;
      n.ante = erased(n.ante, r.i);
      n.succ.push_back(f->f1);
      prem.push_back(n);
      break;
    }
    case RuleId::AndR: {
      FormulaPtr f = at(s.succ, r.j, "succedent");
      if (f->kind != FormulaKind::And) throw MalformedArgs("andR: not a conjunction");
      Sequent a = s, b = s;
      a.succ[r.j] = f->f1;
      b.succ[r.j] = f->f2;
      prem.push_back(a);
      prem.push_back(b);
      break;
    }
    case RuleId::AndL: {
      FormulaPtr f = at(s.ante, r.i, "antecedent");
      if (f->kind != FormulaKind::And) throw MalformedArgs("andL: not a conjunction");
      Sequent n = s;
      n.ante[r.i] = f->f1;
      n.ante.insert(n.ante.begin() + r.i + 1, f->f2);
      prem.push_back(n);
      break;
    }
    case RuleId::OrR: {
      FormulaPtr f = at(s.succ, r.j, "succedent");
      if (f->kind != FormulaKind::Or) throw MalformedArgs("orR: not a disjunction");
      Sequent n = s;
      n.succ[r.j] = f->f1;
      n.succ.insert(n.succ.begin() + r.j + 1, f->f2);
      prem.push_back(n);
      break;
    }
    case RuleId::OrL: {
      FormulaPtr f = at(s.ante, r.i, "antecedent");
      if (f->kind != FormulaKind::Or) throw MalformedArgs("orL: not a disjunction");
      Sequent a = s, b = s;
      a.ante[r.i] = f->f1;
      b.ante[r.i] = f->f2;
      prem.push_back(a);
      prem.push_back(b);
      break;
    }
    case RuleId::ImplyR: {
      FormulaPtr f = at(s.succ, r.j, "succedent");
      if (f->kind != FormulaKind::Imply)
        throw MalformedArgs("implyR: not an implication");
      Sequent n = s;
      n.succ[r.j] = f->f2;
      n.ante.push_back(f->f1);
      prem.push_back(n);
      break;
    }
    case RuleId::ImplyL: {
      FormulaPtr f = at(s.ante, r.i, "antecedent");
      if (f->kind != FormulaKind::Imply)
        throw MalformedArgs("implyL: not an implication");
      Sequent a = s, b = s;
      a.ante = erased(a.ante, r.i);
      a.succ.push_back(f->f1);
      b.ante[r.i] = f->f2;
      prem.push_back(a);
      prem.push_back(b);
      break;
    }
    case RuleId::EquivR: {
      FormulaPtr f = at(s.succ, r.j, "succedent");
      if (f->kind != FormulaKind::Equiv)
        throw MalformedArgs("equivR: not an equivalence");
      Sequent a = s, b = s;
      a.succ[r.j] = f->f2;
      a.ante.push_back(f->f1);
      b.succ[r.j] = f->f1;
      b.ante.push_back(f->f2);
      prem.push_back(a);
      prem.push_back(b);
      break;
    }
    case RuleId::EquivL: {
      FormulaPtr f = at(s.ante, r.i, "antecedent");
      if (f->kind != FormulaKind::Equiv)
        throw MalformedArgs("equivL: not an equivalence");
      Sequent n = s;
      n.ante[r.i] = fimply(f->f1, f->f2);
      n.ante.insert(n.ante.begin() + r.i + 1, fimply(f->f2, f->f1));
      prem.push_back(n);
      break;
    }

    // ---- quantifiers -------------------------------------------------------
    case RuleId::AllR: {
      FormulaPtr f = at(s.succ, r.j, "succedent");
      if (f->kind != FormulaKind::Forall)
        throw MalformedArgs("allR: not a universal");
      if (r.var.base.empty()) throw MalformedArgs("allR: missing variable");
      if (seq_free_vars(s).count(r.var))
        throw SideConditionViolation("allR: variable is not fresh: " +
                                     r.var.str());
      Sequent n = s;
      n.succ[r.j] =
          subst_or_violation(f->f1, {{f->var, tvar(r.var)}}, "allR");
      prem.push_back(n);
      break;
    }
    case RuleId::ExistsL: {
      FormulaPtr f = at(s.ante, r.i, "antecedent");
      if (f->kind != FormulaKind::Exists)
        throw MalformedArgs("existsL: not an existential");
      if (r.var.base.empty()) throw MalformedArgs("existsL: missing variable");
      if (seq_free_vars(s).count(r.var))
        throw SideConditionViolation("existsL: variable is not fresh: " +
                                     r.var.str());
      Sequent n = s;
      n.ante[r.i] =
          subst_or_violation(f->f1, {{f->var, tvar(r.var)}}, "existsL");
      prem.push_back(n);
      break;
    }
    case RuleId::AllL: {
      FormulaPtr f = at(s.ante, r.i, "antecedent");
      if (f->kind != FormulaKind::Forall)
        throw MalformedArgs("allL: not a universal");
      if (!r.term) throw MalformedArgs("allL: missing instantiation term");
      if (!is_core(r.term)) throw MalformedArgs("allL: term is not core");
      Sequent n = s;
      n.ante.push_back(
          subst_or_violation(f->f1, {{f->var, r.term}}, "allL"));
      prem.push_back(n);
      break;
    }
    case RuleId::ExistsR: {
      FormulaPtr f = at(s.succ, r.j, "succedent");
      if (f->kind != FormulaKind::Exists)
        throw MalformedArgs("existsR: not an existential");
      if (!r.term) throw MalformedArgs("existsR: missing instantiation term");
      if (!is_core(r.term)) throw MalformedArgs("existsR: term is not core");
      Sequent n = s;
      n.succ.push_back(
          subst_or_violation(f->f1, {{f->var, r.term}}, "existsR"));
      prem.push_back(n);
      break;
    }

    // ---- program rewrites --------------------------------------------------
    case RuleId::BoxSeq:
    case RuleId::BoxChoice:
    case RuleId::BoxTest:
    case RuleId::BoxAssign:
    case RuleId::BoxAssignEq:
    case RuleId::BoxAssignAny:
    case RuleId::BoxUnroll:
    case RuleId::BoxSplit:
    case RuleId::DiaSeq:
    case RuleId::DiaChoice:
    case RuleId::DiaTest:
    case RuleId::DiaAssign:
    case RuleId::DiaAssignEq:
    case RuleId::DiaAssignAny:
    case RuleId::DiaUnroll:
    case RuleId::DiaSplit: {
      bool dia = r.rule >= RuleId::DiaSeq && r.rule <= RuleId::DiaSplit;
      FormulaPtr f = focus();
      if (f->kind != (dia ? FormulaKind::Diamond : FormulaKind::Box))
        throw MalformedArgs(rule_name(r.rule) + ": modality mismatch");
      const ProgramPtr& p = f->prog;
      const FormulaPtr& body = f->f1;
      auto remodal = [&](ProgramPtr q, FormulaPtr g) {
        return dia ? fdiamond(q, g) : fbox(q, g);
      };
      switch (r.rule) {
        case RuleId::BoxSeq:
        case RuleId::DiaSeq:
          if (p->kind != ProgramKind::Seq)
            throw MalformedArgs("seq rule: program is not a composition");
          rewrite(remodal(p->a, remodal(p->b, body)));
          break;
        case RuleId::BoxChoice:
          if (p->kind != ProgramKind::Choice)
            throw MalformedArgs("choice rule: program is not a choice");
          rewrite(fand(fbox(p->a, body), fbox(p->b, body)));
          break;
        case RuleId::DiaChoice:
          if (p->kind != ProgramKind::Choice)
            throw MalformedArgs("choice rule: program is not a choice");
          rewrite(f_or(fdiamond(p->a, body), fdiamond(p->b, body)));
          break;
        case RuleId::BoxTest:
          if (p->kind != ProgramKind::Test)
            throw MalformedArgs("test rule: program is not a test");
          rewrite(fimply(p->fml, body));
          break;
        case RuleId::DiaTest:
          if (p->kind != ProgramKind::Test)
            throw MalformedArgs("test rule: program is not a test");
          rewrite(fand(p->fml, body));
          break;
        case RuleId::BoxAssign:
        case RuleId::DiaAssign:
          if (p->kind != ProgramKind::Assign)
            throw MalformedArgs("assign rule: program is not an assignment");
          rewrite(subst_or_violation(body, {{p->var, p->term}},
                                     "assign substitution not admissible"));
          break;
        case RuleId::BoxAssignEq:
        case RuleId::DiaAssignEq: {
          if (p->kind != ProgramKind::Assign)
            throw MalformedArgs("assign rule: program is not an assignment");
          if (r.var.base.empty())
            throw MalformedArgs("assignEq: missing fresh variable");
          FormulaPtr inst;
          if (r.var == p->var) {
            // Same-binder form [x:=e]P <-> \forall x (x=e -> P): no
            // substitution into P, valid whenever x is not free in e.
            if (free_vars(p->term).count(p->var))
              throw SideConditionViolation(
                  "assignEq: assigned variable occurs in its value");
            inst = body;
          } else {
            if (all_vars(f).count(r.var))
              throw SideConditionViolation("assignEq: variable is not fresh: " +
                                           r.var.str());
            inst = subst_or_violation(body, {{p->var, tvar(r.var)}},
                                      "assignEq");
          }
          FormulaPtr eq = fcmp(CmpOp::Eq, tvar(r.var), p->term);
          rewrite(dia ? fexists(r.var, fand(eq, inst))
                      : fforall(r.var, fimply(eq, inst)));
          break;
        }
        case RuleId::BoxAssignAny:
          if (p->kind != ProgramKind::AssignAny)
            throw MalformedArgs("assignAny rule: program is not a havoc");
          rewrite(fforall(p->var, body));
          break;
        case RuleId::DiaAssignAny:
          if (p->kind != ProgramKind::AssignAny)
            throw MalformedArgs("assignAny rule: program is not a havoc");
          rewrite(fexists(p->var, body));
          break;
        case RuleId::BoxUnroll:
          if (p->kind != ProgramKind::Loop)
            throw MalformedArgs("unroll rule: program is not a loop");
          rewrite(fand(body, fbox(p->a, fbox(p, body))));
          break;
        case RuleId::DiaUnroll:
          if (p->kind != ProgramKind::Loop)
            throw MalformedArgs("unroll rule: program is not a loop");
          rewrite(f_or(body, fdiamond(p->a, fdiamond(p, body))));
          break;
        case RuleId::BoxSplit:
          if (body->kind != FormulaKind::And)
            throw MalformedArgs("split rule: body is not a conjunction");
          rewrite(fand(fbox(p, body->f1), fbox(p, body->f2)));
          break;
        case RuleId::DiaSplit:
          if (body->kind != FormulaKind::Or)
            throw MalformedArgs("split rule: body is not a disjunction");
          rewrite(f_or(fdiamond(p, body->f1), fdiamond(p, body->f2)));
          break;
        default:
          break;
      }
      break;
    }

    // ---- asymmetric rules --------------------------------------------------
    case RuleId::LoopInd: {
      FormulaPtr box = at(s.succ, r.j, "succedent");
      if (box->kind != FormulaKind::Box ||
          box->prog->kind != ProgramKind::Loop)
        throw MalformedArgs("loopInd: succedent is not [loop]");
      FormulaPtr inv = at(s.ante, r.i, "antecedent");
      if (!equal(inv, box->f1))
        throw SideConditionViolation(
            "loopInd: antecedent invariant differs from the loop postcondition");
      ProgramPtr body = box->prog->a;
      AbsGoal a = abstract_goal(s, r.i, r.j, bound_vars(body), r.sols);
      Sequent n;
      n.ante = a.ante;
      n.ante.push_back(inv);
      n.succ.push_back(fbox(body, inv));
      n.succ.insert(n.succ.end(), a.succ.begin(), a.succ.end());
      prem.push_back(n);
      break;
    }
    case RuleId::Con: {
      FormulaPtr ex = at(s.ante, r.i, "antecedent");
      if (ex->kind != FormulaKind::Exists)
        throw MalformedArgs("con: antecedent is not an existential variant");
      Variable v = ex->var;
      FormulaPtr phi = ex->f1;
      FormulaPtr dia = at(s.succ, r.j, "succedent");
      if (dia->kind != FormulaKind::Diamond ||
          dia->prog->kind != ProgramKind::Loop)
        throw MalformedArgs("con: succedent is not <loop>");
      FormulaPtr tgt = dia->f1;
      bool shape = tgt->kind == FormulaKind::Exists && tgt->var == v &&
                   tgt->f1->kind == FormulaKind::And &&
                   tgt->f1->f1->kind == FormulaKind::Cmp &&
                   tgt->f1->f1->op == CmpOp::Le &&
                   equal(tgt->f1->f1->t1, tvar(v)) &&
                   equal(tgt->f1->f1->t2, tlit(Rational(0))) &&
                   equal(tgt->f1->f2, phi);
      if (!shape)
        throw MalformedArgs(
            "con: target must be exists v (v <= 0 & variant) for the same "
            "variant");
      ProgramPtr body = dia->prog->a;
      if (all_vars(body).count(v))
        throw SideConditionViolation("con: variant variable occurs in the loop");
      for (int k = 0; k < (int)s.ante.size(); ++k)
        if (k != r.i && free_vars(s.ante[k]).count(v))
          throw SideConditionViolation("con: variant variable occurs in the context");
      for (int k = 0; k < (int)s.succ.size(); ++k)
        if (k != r.j && free_vars(s.succ[k]).count(v))
          throw SideConditionViolation("con: variant variable occurs in the context");
      AbsGoal a = abstract_goal(s, r.i, r.j, bound_vars(body), r.sols);
      FormulaPtr dec = subst_or_violation(
          phi, {{v, tminus(tvar(v), tlit(Rational(1)))}}, "con");
      Sequent n;
      n.ante = a.ante;
      n.ante.push_back(fcmp(CmpOp::Gt, tvar(v), tlit(Rational(0))));
      n.ante.push_back(phi);
      n.succ.push_back(fdiamond(body, dec));
      n.succ.insert(n.succ.end(), a.succ.begin(), a.succ.end());
      prem.push_back(n);
      break;
    }
    case RuleId::MonBox:
    case RuleId::MonDia: {
      bool dia = r.rule == RuleId::MonDia;
      FormulaKind mk = dia ? FormulaKind::Diamond : FormulaKind::Box;
      FormulaPtr l = at(s.ante, r.i, "antecedent");
      FormulaPtr rr = at(s.succ, r.j, "succedent");
      if (l->kind != mk || rr->kind != mk)
        throw MalformedArgs("mon: modality mismatch");
      if (!equal(l->prog, rr->prog))
        throw SideConditionViolation("mon: programs differ");
      AbsGoal a = abstract_goal(s, r.i, r.j, bound_vars(l->prog), r.sols);
      Sequent n;
      n.ante = a.ante;
      n.ante.push_back(l->f1);
      n.succ.push_back(rr->f1);
      n.succ.insert(n.succ.end(), a.succ.begin(), a.succ.end());
      prem.push_back(n);
      break;
    }

    // ---- differential equations -------------------------------------------
    case RuleId::DW:
    case RuleId::DC:
    case RuleId::DI:
    case RuleId::DG:
    case RuleId::Solve:
    case RuleId::DiaSolve: {
      FormulaPtr f = r.rule == RuleId::DiaSolve ? at(s.succ, r.j, "succedent")
                                                : at(s.succ, r.j, "succedent");
      FormulaKind want =
          r.rule == RuleId::DiaSolve ? FormulaKind::Diamond : FormulaKind::Box;
      if (f->kind != want || f->prog->kind != ProgramKind::ODE)
        throw MalformedArgs(rule_name(r.rule) +
                            ": succedent is not an ODE modality");
      const ProgramPtr& ode = f->prog;
      const FormulaPtr& post = f->f1;
      const FormulaPtr& dom = ode->fml;
      VarSet obound = bound_vars(ode);
      switch (r.rule) {
        case RuleId::DW: {
          require_core_plain(post, "dw: postcondition");
          AbsGoal a = abstract_goal(s, -1, r.j, obound, r.sols);
          Sequent n;
          n.ante = a.ante;
          n.ante.push_back(dom);
          n.succ.push_back(post);
          n.succ.insert(n.succ.end(), a.succ.begin(), a.succ.end());
          prem.push_back(n);
          break;
        }
        case RuleId::DC: {
          if (!r.fml) throw MalformedArgs("dc: missing cut invariant");
          require_core_plain(r.fml, "dc: cut invariant");
          Sequent a = s, b = s;
          a.succ[r.j] = fbox(ode, r.fml);
          std::vector<ODEEq> eqs = ode->odes;
          b.succ[r.j] = fbox(pode(eqs, fand(dom, r.fml)), post);
          prem.push_back(a);
          prem.push_back(b);
          break;
        }
        case RuleId::DI: {
          FormulaDifferential fd;
          try {
            fd = formula_differential(post);
          } catch (const DifferentialError& e) {
            throw SideConditionViolation(
                std::string("di: invariant not differentiable: ") + e.what());
          }
          FormulaPtr target = fd.d;
          for (auto& side : fd.side) target = fand(target, side);
          SubstMap primes;
          for (auto& eq : ode->odes) primes[eq.var.prime()] = eq.rhs;
          for (auto& v : free_vars(target))
            if (v.primed && !primes.count(v)) primes[v] = tlit(Rational(0));
          target = subst_or_violation(target, primes, "di");
          Sequent a = s;  // initial truth, under the domain constraint
          a.ante.push_back(dom);
          a.succ[r.j] = post;
          prem.push_back(a);
          AbsGoal ab = abstract_goal(s, -1, r.j, obound, r.sols);
          Sequent b;  // derivative condition along the flow
          b.ante = ab.ante;
          b.ante.push_back(dom);
          b.succ.push_back(target);
          b.succ.insert(b.succ.end(), ab.succ.begin(), ab.succ.end());
          prem.push_back(b);
          break;
        }
        case RuleId::DG: {
          if (r.var.base.empty() || !r.term || !r.term2)
            throw MalformedArgs("dg: needs ghost variable, rhs and initial value");
          if (r.var.primed) throw MalformedArgs("dg: ghost must be unprimed");
          VarSet av = seq_all_vars(s);
          if (av.count(r.var) || av.count(r.var.prime()))
            throw SideConditionViolation("dg: ghost is not fresh: " +
                                         r.var.str());
          if (!is_core(r.term) || has_primed(free_vars(r.term)))
            throw MalformedArgs("dg: rhs must be a core unprimed term");
          if (!linear_in(r.term, r.var))
            throw SideConditionViolation("dg: rhs is not linear in the ghost");
          if (!is_core(r.term2) || has_primed(free_vars(r.term2)) ||
              free_vars(r.term2).count(r.var))
            throw MalformedArgs("dg: bad initial value term");
          std::vector<ODEEq> eqs = ode->odes;
          eqs.push_back(ODEEq{r.var, r.term});
          Sequent n = s;
          n.ante.push_back(fcmp(CmpOp::Eq, tvar(r.var), r.term2));
          n.succ[r.j] = fbox(pode(eqs, dom), post);
          prem.push_back(n);
          break;
        }
        case RuleId::Solve:
        case RuleId::DiaSolve: {
          require_core_plain(post, "solve: postcondition");
          require_core_plain(dom, "solve: domain");
          if (r.var.base.empty() || r.var.primed)
            throw MalformedArgs("solve: missing clock variable");
          if (r.sols.size() != ode->odes.size())
            throw MalformedArgs("solve: one solution term per equation required");
          VarSet used = seq_all_vars(s);
          if (used.count(r.var))
            throw SideConditionViolation("solve: clock is not fresh: " +
                                         r.var.str());
          used.insert(r.var);
          for (auto& y : r.sols) {
            if (!y || !is_core(y) || has_primed(free_vars(y)))
              throw MalformedArgs("solve: solutions must be core unprimed terms");
            auto av = all_vars(y);
            used.insert(av.begin(), av.end());
          }
          TermPtr clk = tvar(r.var);
          SubstMap m_t, m_0;
          for (size_t k = 0; k < r.sols.size(); ++k) {
            m_t[ode->odes[k].var] = r.sols[k];
            m_0[ode->odes[k].var] =
                substitute(r.sols[k], {{r.var, tlit(Rational(0))}});
          }
          // Side goals: the claimed solution differentiates to the rhs and
          // starts at the initial value.
          for (size_t k = 0; k < r.sols.size(); ++k) {
            Sequent dg;
            dg.succ.push_back(
                fcmp(CmpOp::Eq, deriv_clock(r.sols[k], r.var),
                     subst_or_violation_term(ode->odes[k].rhs, m_t)));
            prem.push_back(dg);
            Sequent ig;
            ig.succ.push_back(fcmp(CmpOp::Eq, m_0[ode->odes[k].var],
                                   tvar(ode->odes[k].var)));
            prem.push_back(ig);
          }
          Variable sv = fresh_var("s", used);
          SubstMap m_s;
          for (size_t k = 0; k < r.sols.size(); ++k)
            m_s[ode->odes[k].var] =
                substitute(r.sols[k], {{r.var, tvar(sv)}});
          FormulaPtr dom_all = fforall(
              sv, fimply(fand(cmp_le(tlit(Rational(0)), tvar(sv)),
                              cmp_le(tvar(sv), clk)),
                         subst_or_violation(dom, m_s, "solve domain")));
          if (r.rule == RuleId::Solve) {
            Sequent n = s;
            n.ante.push_back(fcmp(CmpOp::Ge, clk, tlit(Rational(0))));
            n.ante.push_back(dom_all);
            n.succ[r.j] = subst_or_violation(post, m_t, "solve post");
            prem.push_back(n);
          } else {
            if (!r.term || !is_core(r.term) ||
                has_primed(free_vars(r.term)) || free_vars(r.term).count(r.var))
              throw MalformedArgs("diaSolve: bad duration term");
            SubstMap m_d;
            for (size_t k = 0; k < r.sols.size(); ++k)
              m_d[ode->odes[k].var] =
                  substitute(r.sols[k], {{r.var, r.term}});
            FormulaPtr dom_d = fforall(
                sv, fimply(fand(cmp_le(tlit(Rational(0)), tvar(sv)),
                                cmp_le(tvar(sv), r.term)),
                           subst_or_violation(dom, m_s, "solve domain")));
            Sequent n = s;
            n.succ[r.j] =
                fand(fcmp(CmpOp::Ge, r.term, tlit(Rational(0))),
                     fand(dom_d,
                          subst_or_violation(post, m_d, "solve post")));
            prem.push_back(n);
          }
          break;
        }
        default:
          break;
      }
      break;
    }
  }

  ProofState out = *this;
  out.goals_.erase(out.goals_.begin() + pos);
  for (size_t k = 0; k < prem.size(); ++k) {
    out.goals_.insert(out.goals_.begin() + pos + k,
                      Goal{out.next_id_++, prem[k]});
  }
  out.log_.push_back(r);
  return out;
}

ProofState ProofState::close_qe(int goal, const ArithEvidence& ev) const {
  if (ev.verdict != Verdict::Valid)
    throw EvidenceMismatch("arithmetic evidence is not Valid");
  RuleApp r;
  r.rule = RuleId::CloseQE;
  r.goal = goal;
  r.evidence_hash = ev.query_hash;
  r.evidence_method = ev.method;
  return apply(r);
}

// ---------------------------------------------------------------------------
// Certificates.

Certificate certificate_of(const ProofState& ps) {
  return Certificate{ps.root(), ps.log()};
}

namespace {

std::string enc_term(const TermPtr& t) { return t ? print(t) : "-"; }
std::string enc_fml(const FormulaPtr& f) { return f ? print(f) : "-"; }
std::string enc_var(const Variable& v) { return v.base.empty() ? "-" : v.str(); }

TermPtr dec_term(const std::string& s) {
  return s == "-" ? nullptr : parse_term(s);
}
FormulaPtr dec_fml(const std::string& s) {
  return s == "-" ? nullptr : parse_formula(s);
}
Variable dec_var(const std::string& s) {
  if (s == "-") return Variable();
  TermPtr t = parse_term(s);
  if (t->kind != TermKind::Var) throw MalformedArgs("bad variable field: " + s);
  return t->var;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t p = line.find('\t', start);
    if (p == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, p - start));
    start = p + 1;
  }
}

}  // namespace

std::string serialize(const Certificate& c) {
  std::ostringstream os;
  os << "derivation 1\n";
  os << "root " << print(c.root) << "\n";
  os << "steps " << c.steps.size() << "\n";
  for (auto& r : c.steps) {
    os << rule_name(r.rule) << '\t' << r.goal << '\t' << r.i << '\t' << r.j
       << '\t' << (r.left ? 1 : 0) << '\t' << enc_var(r.var) << '\t'
       << enc_var(r.var2) << '\t' << enc_term(r.term) << '\t'
       << enc_term(r.term2) << '\t' << enc_fml(r.fml) << '\t'
       << r.evidence_hash << '\t'
       << (r.evidence_method.empty() ? "-" : r.evidence_method) << '\t'
       << r.sols.size();
    for (auto& t : r.sols) os << '\t' << enc_term(t);
    os << "\n";
  }
  return os.str();
}

Certificate parse_certificate(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  auto need = [&](const char* what) {
    if (!std::getline(is, line))
      throw MalformedArgs(std::string("certificate truncated before ") + what);
  };
  need("header");
  if (line != "derivation 1")
    throw MalformedArgs("not a derivation certificate: " + line);
  need("root");
  if (line.rfind("root ", 0) != 0) throw MalformedArgs("missing root sequent");
  Certificate c;
  try {
    c.root = parse_sequent(line.substr(5));
  } catch (const ParseError& e) {
    throw MalformedArgs(std::string("bad root sequent: ") + e.what());
  }
  need("step count");
  if (line.rfind("steps ", 0) != 0) throw MalformedArgs("missing step count");
  size_t n = std::stoul(line.substr(6));
  for (size_t k = 0; k < n; ++k) {
    need("step");
    auto f = split_tabs(line);
    if (f.size() < 13) throw MalformedArgs("short step line: " + line);
    RuleApp r;
    try {
      r.rule = rule_of_name(f[0]);
      r.goal = std::stoi(f[1]);
      r.i = std::stoi(f[2]);
      r.j = std::stoi(f[3]);
      r.left = f[4] == "1";
      r.var = dec_var(f[5]);
      r.var2 = dec_var(f[6]);
      r.term = dec_term(f[7]);
      r.term2 = dec_term(f[8]);
      r.fml = dec_fml(f[9]);
      r.evidence_hash = std::stoull(f[10]);
      r.evidence_method = f[11] == "-" ? "" : f[11];
      size_t ns = std::stoul(f[12]);
      if (f.size() != 13 + ns) throw MalformedArgs("bad solution count");
      for (size_t m = 0; m < ns; ++m) r.sols.push_back(dec_term(f[13 + m]));
    } catch (const ParseError& e) {
      throw MalformedArgs(std::string("bad step line: ") + e.what());
    } catch (const std::invalid_argument&) {
      throw MalformedArgs("bad numeric field in step line: " + line);
    }
    c.steps.push_back(std::move(r));
  }
  return c;
}

ReplayResult replay(const Certificate& c, const ReplayOptions& opt) {
  ProofState ps = ProofState::init(c.root);
  for (size_t k = 0; k < c.steps.size(); ++k) {
    const RuleApp& r = c.steps[k];
    try {
      if (r.rule == RuleId::CloseQE && opt.recheck_arith) {
        const Goal* g = ps.find(r.goal);
        if (!g) throw NoSuchGoal("no goal with id " + std::to_string(r.goal));
        ArithEvidence ev = decide(g->seq, *opt.recheck_arith);
        if (ev.verdict != Verdict::Valid)
          throw EvidenceMismatch("arithmetic goal did not re-verify");
        if (ev.query_hash != r.evidence_hash)
          throw EvidenceMismatch("re-verified evidence hash differs");
      }
      ps = ps.apply(r);
    } catch (const std::exception& e) {
      return ReplayResult{false, (int)k, e.what()};
    }
  }
  if (!ps.proved())
    return ReplayResult{false, (int)c.steps.size(),
                        std::to_string(ps.goals().size()) +
                            " goal(s) remain open"};
  return ReplayResult{true, -1, ""};
}

}  // namespace kaisar
