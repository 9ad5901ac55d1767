#pragma once

#include <memory>
#include <optional>

#include "kaisar/traces.hpp"

namespace kaisar {

struct PatternError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ExpandError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Expressions bound by patterns / stored as abbreviations: a term, a formula
// or a program (exactly one set).
struct Expr {
  TermPtr term;
  FormulaPtr fml;
  ProgramPtr prog;
};
Expr expr_of(TermPtr t);
Expr expr_of(FormulaPtr f);
Expr expr_of(ProgramPtr p);
bool equal(const Expr& a, const Expr& b);
std::string print(const Expr& e);
VarSet free_vars(const Expr& e);

// ---------------------------------------------------------------------------
// Patterns. Ident binds when the name is unknown, compares when it is bound
// (by convention pattern names carry a trailing underscore); "_" matches
// without binding. Structural skeletons are expressions whose Abbrev /
// formula-abbreviation leaves act as idents.
enum class PatKind {
  Any,        // _
  Ident,      // name
  Occurs,     // {x,y}: all listed variables occur free
  NotOccurs,  // {!x,y}: none of the listed variables occur free
  Union,      // p \/ q : left first, rollback on failure
  Inter,      // p /\ q : bindings thread left to right
  Neg,        // ~p : succeeds iff p fails; p must bind nothing
  Struct,     // expression skeleton with ident holes
};

struct Pattern;
using PatternPtr = std::shared_ptr<const Pattern>;

struct Pattern {
  PatKind kind;
  std::string name;            // Ident
  std::vector<Variable> vars;  // Occurs / NotOccurs
  PatternPtr a, b;             // Union / Inter / Neg
  Expr skel;                   // Struct
};

PatternPtr pat_any();
PatternPtr pat_ident(const std::string& name);
PatternPtr pat_occurs(std::vector<Variable> vars, bool negated);
PatternPtr pat_union(PatternPtr a, PatternPtr b);
PatternPtr pat_inter(PatternPtr a, PatternPtr b);
PatternPtr pat_neg(PatternPtr a);
PatternPtr pat_struct(Expr skeleton);

std::string print(const PatternPtr& p);

// ---------------------------------------------------------------------------
// Contexts: ordered name -> Fact(formula) | Abbrev(expression); names unique.
struct ContextEntry {
  std::string name;
  bool is_fact = false;
  FormulaPtr fact;  // Fact
  Expr value;       // Abbrev
};

class Context {
 public:
  const std::vector<ContextEntry>& entries() const { return entries_; }
  const ContextEntry* lookup(const std::string& name) const;
  // Adding a present name replaces the entry in place (rebinding).
  Context with_fact(const std::string& name, FormulaPtr f) const;
  Context with_abbrev(const std::string& name, Expr e) const;
  Context without(const std::string& name) const;
  // Rename free variables in every stored fact and abbreviation (applied
  // when an assignment moves a frame variable to a ghost).
  Context renamed(const RenameMap& m) const;
  std::vector<FormulaPtr> fact_formulas() const;

 private:
  std::vector<ContextEntry> entries_;
};

// ---------------------------------------------------------------------------
// Matching judgment. Returns the extended context on success. Pure; a failed
// sub-match never leaks bindings (Union rolls back).
std::optional<Context> match(const Context& g, const PatternPtr& p,
                             const Expr& e);

// Facts of Γ whose formula matches any selector; empty selector list selects
// every fact. (Forward-proof conclusions are appended by the caller.)
std::vector<FormulaPtr> facts(const Context& g,
                              const std::vector<PatternPtr>& selectors);

// ---------------------------------------------------------------------------
// Extended-expression expansion. Plain variables resolve through `now` (or
// `nom` at `at`); Nominal(t,e) re-enters at state t; Now(e) re-enters at the
// original entry state; abbreviation values are already frame-resolved and
// expand without re-resolving their variables (their stored Now markers do
// re-resolve). Results are core dL (NominalF predicates excepted).
TermPtr expand(const Context& g, const StaticTrace& h, const TermPtr& e,
               const std::optional<std::string>& at = {});
FormulaPtr expand(const Context& g, const StaticTrace& h, const FormulaPtr& e,
                  const std::optional<std::string>& at = {});

// Functional-let body preparation: plain variables are frozen to their
// bind-time values; subterms under the formal state argument `t` become
// expand-time Now(θ) markers; other state references resolve at bind time.
TermPtr mobilize(const StaticTrace& h, const TermPtr& e, const std::string& t);
FormulaPtr mobilize(const StaticTrace& h, const FormulaPtr& e,
                    const std::string& t);

}  // namespace kaisar
