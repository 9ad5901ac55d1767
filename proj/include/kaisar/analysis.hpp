#pragma once

#include <map>
#include <stdexcept>

#include "kaisar/syntax.hpp"

namespace kaisar {

// Raised when a substitution would capture or otherwise cannot be performed
// admissibly (callers fall back to equality-style rules).
struct CaptureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a differential does not exist syntactically (!=, abs, ...).
struct DifferentialError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using SubstMap = std::map<Variable, TermPtr>;
using RenameMap = std::map<Variable, Variable>;

VarSet free_vars(const TermPtr& t);
VarSet free_vars(const FormulaPtr& f);
VarSet free_vars(const ProgramPtr& p);

// Variables written by a program (and their primed symbols for ODEs).
VarSet bound_vars(const ProgramPtr& p);
// Bound variables of a formula: quantifier binders plus program-bound vars.
VarSet bound_vars(const FormulaPtr& f);
// Variables bound on every execution path.
VarSet must_bound_vars(const ProgramPtr& p);

// Every variable occurring anywhere (for freshness).
VarSet all_vars(const TermPtr& t);
VarSet all_vars(const FormulaPtr& f);
VarSet all_vars(const ProgramPtr& p);

// Capture-avoiding substitution of free occurrences. Throws CaptureError.
TermPtr substitute(const TermPtr& t, const SubstMap& m);
FormulaPtr substitute(const FormulaPtr& f, const SubstMap& m);
ProgramPtr substitute(const ProgramPtr& p, const SubstMap& m);

// Renaming of free occurrences (substitution by variables).
FormulaPtr rename_free(const FormulaPtr& f, const RenameMap& m);
TermPtr rename_free(const TermPtr& t, const RenameMap& m);

// Negation normal form; negations pushed down to literals.
FormulaPtr nnf(const FormulaPtr& f);

// Smallest ghost index for `base` not used in `used`; fresh_var returns the
// resulting variable.
Variable fresh_var(const std::string& base, const VarSet& used);

struct TermDifferential {
  TermPtr d;
  std::vector<FormulaPtr> side;  // e.g. denominator-nonzero obligations
};
struct FormulaDifferential {
  FormulaPtr d;
  std::vector<FormulaPtr> side;
};

// Total differential: sum over free variables x of dt/dx * x'.
TermDifferential term_differential(const TermPtr& t);
// Differential formula for induction: <,<= |-> <=; =,>=,> analogous; != and
// non-arithmetic connectives are rejected with DifferentialError.
FormulaDifferential formula_differential(const FormulaPtr& f);

}  // namespace kaisar
