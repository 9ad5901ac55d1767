#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kaisar/rational.hpp"

namespace kaisar {

// ---------------------------------------------------------------------------
// Variables. `base` is the user-visible name, `index` a ghost generation
// (x0, x1, ... are ghosts of x), `primed` marks the differential symbol x'.
struct Variable {
  std::string base;
  std::optional<int> index;
  bool primed = false;

  Variable() = default;
  explicit Variable(std::string b, std::optional<int> i = std::nullopt,
                    bool p = false)
      : base(std::move(b)), index(i), primed(p) {}

  std::string str() const;
  bool operator==(const Variable& o) const {
    return base == o.base && index == o.index && primed == o.primed;
  }
  bool operator<(const Variable& o) const {
    if (base != o.base) return base < o.base;
    if (index != o.index) {
      if (!index) return true;
      if (!o.index) return false;
      return *index < *o.index;
    }
    return primed < o.primed;
  }
  Variable prime() const { return Variable(base, index, true); }
  Variable unprime() const { return Variable(base, index, false); }
};

using VarSet = std::set<Variable>;

// ---------------------------------------------------------------------------
// Terms. Core dL terms plus the extended constructors used by proof
// expressions: Nominal("t", e) is t(e), Now(e) is now(e), Abbrev refers to a
// context abbreviation by name.
enum class TermKind {
  Var, Lit, Plus, Minus, Times, Divide, Neg, Power, Differential,
  App,      // interpreted function: abs, sqrt, min, max
  Nominal,  // state(e)
  Now,      // now(e)
  Abbrev,   // context abbreviation reference
};

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Term {
  TermKind kind;
  Variable var;        // Var
  Rational lit;        // Lit; Power exponent
  TermPtr a, b;        // children (b may be null)
  std::string name;    // App function / Nominal state / Abbrev name
};

TermPtr tvar(const Variable& v);
TermPtr tvar(const std::string& name);
TermPtr tlit(const Rational& q);
TermPtr tplus(TermPtr a, TermPtr b);
TermPtr tminus(TermPtr a, TermPtr b);
TermPtr ttimes(TermPtr a, TermPtr b);
TermPtr tdivide(TermPtr a, TermPtr b);
TermPtr tneg(TermPtr a);
TermPtr tpower(TermPtr a, const Rational& exp);
TermPtr tdifferential(TermPtr a);
TermPtr tapp(const std::string& fn, TermPtr a, TermPtr b = nullptr);
TermPtr tnominal(const std::string& state, TermPtr a);
TermPtr tnow(TermPtr a);
TermPtr tabbrev(const std::string& name);

// ---------------------------------------------------------------------------
// Formulas.
enum class CmpOp { Lt, Le, Eq, Ge, Gt, Ne };
CmpOp cmp_negate(CmpOp op);   // < -> >=, etc.
CmpOp cmp_flip(CmpOp op);     // < -> >, arguments swapped
std::string cmp_str(CmpOp op);

enum class FormulaKind {
  True, False, Cmp, And, Or, Imply, Equiv, Not, Forall, Exists, Box, Diamond,
  NominalF,  // state-equality test predicate emitted by nominalization
  AbbrevF,   // context abbreviation reference / pattern ident at formula level
};

struct Program;
using ProgramPtr = std::shared_ptr<const Program>;
struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  FormulaKind kind;
  CmpOp op = CmpOp::Eq;  // Cmp
  TermPtr t1, t2;        // Cmp
  FormulaPtr f1, f2;     // children
  Variable var;          // Forall/Exists binder
  ProgramPtr prog;       // Box/Diamond
  std::string name;      // NominalF state name
};

FormulaPtr ftrue();
FormulaPtr ffalse();
FormulaPtr fcmp(CmpOp op, TermPtr a, TermPtr b);
FormulaPtr fand(FormulaPtr a, FormulaPtr b);
FormulaPtr f_or(FormulaPtr a, FormulaPtr b);
FormulaPtr fimply(FormulaPtr a, FormulaPtr b);
FormulaPtr fequiv(FormulaPtr a, FormulaPtr b);
FormulaPtr fnot(FormulaPtr a);
FormulaPtr fforall(const Variable& v, FormulaPtr a);
FormulaPtr fexists(const Variable& v, FormulaPtr a);
FormulaPtr fbox(ProgramPtr p, FormulaPtr a);
FormulaPtr fdiamond(ProgramPtr p, FormulaPtr a);
FormulaPtr fnominal(const std::string& state);
FormulaPtr fabbrev(const std::string& name);

// ---------------------------------------------------------------------------
// Hybrid programs.
enum class ProgramKind { Assign, AssignAny, Test, Seq, Choice, Loop, ODE };

struct ODEEq {
  Variable var;  // unprimed; the equation is var' = rhs
  TermPtr rhs;
};

struct Program {
  ProgramKind kind;
  Variable var;               // Assign / AssignAny
  TermPtr term;               // Assign rhs
  FormulaPtr fml;             // Test condition / ODE domain
  ProgramPtr a, b;            // Seq/Choice children; Loop body in a
  std::vector<ODEEq> odes;    // ODE system
};

ProgramPtr passign(const Variable& v, TermPtr t);
ProgramPtr passign_any(const Variable& v);
ProgramPtr ptest(FormulaPtr f);
ProgramPtr pseq(ProgramPtr a, ProgramPtr b);
ProgramPtr pchoice(ProgramPtr a, ProgramPtr b);
ProgramPtr ploop(ProgramPtr a);
ProgramPtr pode(std::vector<ODEEq> eqs, FormulaPtr domain);

// ---------------------------------------------------------------------------
// Sequents: Gamma |- Delta, interpreted as /\Gamma -> \/Delta.
struct Sequent {
  std::vector<FormulaPtr> ante;
  std::vector<FormulaPtr> succ;
};

// Structural equality (exact; no alpha conversion).
bool equal(const TermPtr& x, const TermPtr& y);
bool equal(const FormulaPtr& x, const FormulaPtr& y);
bool equal(const ProgramPtr& x, const ProgramPtr& y);
bool equal(const Sequent& x, const Sequent& y);

// Printing. print/parse round-trip: parse(print(e)) == e.
std::string print(const TermPtr& t);
std::string print(const FormulaPtr& f);
std::string print(const ProgramPtr& p);
std::string print(const Sequent& s);

// True if the expression is core dL (no Nominal/Now/Abbrev/NominalF nodes).
bool is_core(const TermPtr& t);
bool is_core(const FormulaPtr& f);

}  // namespace kaisar
