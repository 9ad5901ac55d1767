#pragma once

#include <functional>

#include "kaisar/kernel.hpp"
#include "kaisar/patterns.hpp"
#include "kaisar/traces.hpp"

namespace kaisar {

// ---------------------------------------------------------------------------
// Errors. CheckError carries a user-facing diagnostic; NeedsOracle marks an
// arithmetic leaf the builtin backends could not decide (exit code 2 at the
// command line); AmbiguityError flags a fact pattern with several distinct
// matches; NotNilpotent rejects ODE systems without polynomial solutions.
struct CheckError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NeedsOracle : CheckError {
  using CheckError::CheckError;
};
struct AmbiguityError : CheckError {
  using CheckError::CheckError;
};
struct NotNilpotent : CheckError {
  using CheckError::CheckError;
};

// ---------------------------------------------------------------------------
// Forward proofs: fact references, modus ponens and universal instantiation,
// written by juxtaposition in the surface syntax. A Fact whose pattern is a
// bare identifier carries a term reading as well; which one applies is
// decided by the head's conclusion (universal: term argument, implication:
// fact argument).
enum class FPKind { Fact, App, Inst };

struct ForwardProof;
using FPPtr = std::shared_ptr<const ForwardProof>;

struct ForwardProof {
  FPKind kind{};
  PatternPtr pat;  // Fact selector
  TermPtr term;    // Inst argument / term reading of an identifier Fact
  FPPtr fn, arg;   // App
};

FPPtr fp_fact(PatternPtr pat, TermPtr term_reading = nullptr);
FPPtr fp_app(FPPtr fn, FPPtr arg);
FPPtr fp_inst(FPPtr fn, TermPtr t);

// ---------------------------------------------------------------------------
// Proof methods for `show`.
enum class MethodKind { Auto, R, Id };

struct Method {
  MethodKind kind = MethodKind::Auto;
  std::vector<PatternPtr> use_pats;  // `using` fact selectors
  std::vector<FPPtr> use_fps;        // `using` forward proofs
};

// ---------------------------------------------------------------------------
// Structured proofs.
enum class SPKind {
  Let,        // let p = e
  FunLet,     // let f(s) = e   (s a formal state argument)
  Note,       // note x = FP
  Have,       // have x: e { SP1 } SP2
  Show,       // show p [using ...] by method
  Assume,     // assume [x:] p ; SP
  Case,       // case p1 => SP1 | p2 => SP2 | ...  (single branch allowed)
  Assign,     // assign x := e ; SP
  AssignAny,  // assign x := * ; SP
  After,      // after { SP1 } have x: e then { SP2 }
  State,      // state t ; SP
  Focus,      // focus p ; SP
  Solve,      // solve p t: pt dom: pdom ; SP   (diamond form adds a duration)
  Inv,        // inv x: e [{ Pre => SP | Ind => SP }] ; IP
  Ghost,      // ghost y = e0, y' = e ; IP
  Finally,    // finally SP
  Con,        // con x: e { Pre => SP | Inv => SP | Post => SP }
};

struct StructuredProof;
using SPPtr = std::shared_ptr<const StructuredProof>;

struct CaseBranch {
  PatternPtr pat;  // null: match anything
  SPPtr sp;
};

struct StructuredProof {
  SPKind kind{};
  std::string name;     // fact binder / state mark / invariant name
  std::string arg;      // FunLet formal state argument
  PatternPtr pat;       // Let / Assume / Show / Focus target; Solve ODE pattern
  PatternPtr pat2;      // Solve clock pattern
  PatternPtr pat3;      // Solve domain pattern
  Expr expr;            // Let / Have / After / Inv / Con / FunLet body
  FPPtr fp;             // Note
  Method method;        // Show
  std::vector<CaseBranch> branches;
  Variable var;         // Assign / AssignAny target; Ghost / Con variable
  TermPtr term;         // Assign rhs; Ghost rhs; diamond Solve duration
  TermPtr term2;        // Ghost initial value
  SPPtr sp1, sp2;       // children (body / continuation)
  SPPtr tail;           // Inv / Ghost chain continuation
  int line = 0;
};

SPPtr sp_node(StructuredProof sp);

// ---------------------------------------------------------------------------
// Checking.
struct CheckOptions {
  DecideOptions arith;
  bool eq_always = false;  // force equality-style assignments
  int auto_steps = 64;     // structural execution budget of `auto`
  // Observation hook: called with the evolving static trace after each
  // trace-changing step of the main spine (testing / instrumentation).
  std::function<void(const StaticTrace&)> trace_hook;
};

struct CheckResult {
  bool ok = false;
  bool needs_oracle = false;          // some failure was an undecided leaf
  std::vector<std::string> errors;    // one entry per failed branch
  Certificate cert;                   // complete only when ok
  StaticTrace trace;                  // output trace of the proof
};

// Check `sp` against the sequent facts(gamma) |- delta under trace h.
CheckResult check(const Context& gamma, const StaticTrace& h, const SPPtr& sp,
                  const std::vector<FormulaPtr>& delta,
                  const CheckOptions& opt = {});

// Theorem entry point: empty context and trace, single succedent.
CheckResult check_theorem(const FormulaPtr& theorem, const SPPtr& sp,
                          const CheckOptions& opt = {});

// Conclusion of a forward proof (no kernel interaction).
FormulaPtr check_fp(const Context& g, const StaticTrace& h, const FPPtr& fp);

// Builtin first-order fact library (closed, linear-arithmetic valid).
const std::vector<std::pair<std::string, FormulaPtr>>& fact_library();

// Polynomial solutions of a nilpotent linear ODE system as terms over the
// initial values and the clock; throws NotNilpotent otherwise.
std::map<Variable, TermPtr> symbolic_solve(const std::vector<ODEEq>& odes,
                                           const Variable& clock);

// Rewrite surface identifiers that name abbreviations (trailing underscore,
// or the wildcard `_`) from variables into abbreviation references.
TermPtr as_proof_term(const TermPtr& t);
FormulaPtr as_proof_formula(const FormulaPtr& f);
ProgramPtr as_proof_program(const ProgramPtr& p);

// Insert `?t` marker tests into alpha following the proof's named states.
ProgramPtr nominalize(const ProgramPtr& alpha, const SPPtr& sp);

}  // namespace kaisar
