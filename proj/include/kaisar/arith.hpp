#pragma once

#include "kaisar/semantics.hpp"
#include "kaisar/syntax.hpp"

namespace kaisar {

enum class Verdict { Valid, CounterExample, Unknown };

// A decided arithmetic query. CounterExample evidence is re-checked against
// the original formula when constructed; query_hash ties the evidence to the
// exact elaborated query text so the kernel can match it.
struct ArithEvidence {
  Verdict verdict = Verdict::Unknown;
  std::string method;  // "falsify", "poly", "linear", "oracle"
  std::uint64_t query_hash = 0;
  State cex{Mode::Exact};
  bool cex_exact = false;
  std::string detail;
};

struct ElabDef {
  Variable var;    // fresh variable standing for the interpreted term
  TermPtr source;  // the original interpreted term it denotes
};

// An arithmetic validity query: `original` is the closed dL arithmetic
// formula as posed; `elaborated` is interpreted-function-free (division,
// fractional powers, abs/min/max/sqrt replaced by quantified fresh
// variables with defining constraints).
struct ArithQuery {
  FormulaPtr original;
  FormulaPtr elaborated;
  std::vector<ElabDef> defs;
  std::uint64_t hash = 0;  // fnv1a of print(elaborated)
};

// Universal closure of /\ante -> \/succ.
FormulaPtr sequent_image(const Sequent& s);

// Interpreted-function elimination. Fresh definition variables are
// quantified universally in positive positions and existentially in
// negative ones, preserving validity.
ArithQuery elaborate(const FormulaPtr& closed_formula);

// Numeric falsification by grid + random sampling; returns CounterExample
// or Unknown, never Valid.
ArithEvidence falsify(const ArithQuery& q, int samples = 200,
                      std::uint64_t seed = 0);

// Sound polynomial-identity evaluation: decides atoms whose normal form is
// identically zero or constant. Returns Valid or Unknown.
ArithEvidence decide_poly(const ArithQuery& q);

// Complete decision for the linear fragment by Fourier-Motzkin elimination
// over exact rationals. Returns Unknown on nonlinear atoms or blowup
// (beyond ~1e6 atoms) or deadline (default 2s).
ArithEvidence decide_linear(const ArithQuery& q, double deadline_sec = 2.0);

// External SMT oracle over SMT-LIB 2 (logic NRA). `cmd` is invoked with the
// query file as its final argument. Counterexample models are re-validated;
// on mismatch the evidence degrades to Unknown.
ArithEvidence oracle_query(const ArithQuery& q, const std::string& cmd,
                           double timeout_sec = 30.0);

// Deterministic SMT-LIB text for a query (bit-stable across runs).
std::string smtlib_text(const ArithQuery& q);

struct DecideOptions {
  std::string oracle_cmd;  // empty: no oracle stage
  double oracle_timeout = 30.0;
  double linear_deadline = 2.0;
  int falsify_samples = 200;
  std::uint64_t seed = 0;
};

// Pipeline: falsify, then poly, then linear, then (optionally) the oracle.
ArithEvidence decide(const FormulaPtr& closed_formula,
                     const DecideOptions& opt = {});
ArithEvidence decide(const Sequent& goal, const DecideOptions& opt = {});

}  // namespace kaisar
