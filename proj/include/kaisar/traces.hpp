#pragma once

#include "kaisar/analysis.hpp"
#include "kaisar/semantics.hpp"
#include "kaisar/syntax.hpp"

namespace kaisar {

struct TraceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Static trace records. Sub: x was assigned; `term` is its current value in
// the sequent frame. Eq/Any: x was rebound, its old value lives on as the
// ghost; Eq additionally knows the assigned value `term` (sequent frame,
// post-renaming). Mark names a state.
enum class RecordKind { Sub, Eq, Any, Mark };

struct TraceRecord {
  RecordKind kind;
  Variable var;      // Sub/Eq/Any: the program variable
  Variable ghost;    // Eq/Any: ghost holding the old value
  TermPtr term;      // Sub/Eq: sequent-level term
  std::string mark;  // Mark name
};

struct StaticTrace {
  std::vector<TraceRecord> records;

  bool has_mark(const std::string& name) const;
  // Records strictly before Mark `name`; throws TraceError if absent.
  StaticTrace prefix(const std::string& name) const;
  // Frame renaming (applied to the sequent-level terms of the records).
  StaticTrace renamed(const RenameMap& m) const;
  // Every variable mentioned (program vars, ghosts, term vars).
  VarSet vars() const;

  void push_sub(const Variable& x, TermPtr t);
  void push_eq(const Variable& x, const Variable& ghost, TermPtr t);
  void push_any(const Variable& x, const Variable& ghost);
  void push_mark(const std::string& name);
};

// Current-state resolution: the rightmost Sub for x gives its term; any
// rebinding (Eq/Any) or no record at all resolves to x itself.
TermPtr now_var(const StaticTrace& h, const Variable& x);
TermPtr now_term(const StaticTrace& h, const TermPtr& t);
FormulaPtr now_formula(const StaticTrace& h, const FormulaPtr& f);

// Resolution at the named state: rebindings after the mark redirect to their
// ghosts, then `now` over the prefix. Total: unrecorded variables resolve to
// themselves.
TermPtr nom_var(const StaticTrace& h, const std::string& mark,
                const Variable& x);
TermPtr nom_term(const StaticTrace& h, const std::string& mark,
                 const TermPtr& t);
FormulaPtr nom_formula(const StaticTrace& h, const std::string& mark,
                       const FormulaPtr& f);

// The sequent-level state induced by a dynamic trace matched against the
// static trace: ghosts pick up superseded values, the frame survives Sub
// records unchanged. Exact mode only.
State sequent_state(const DynamicTrace& eta, const StaticTrace& h);

// Ghost abstraction: append Any records for each (unprimed) bound variable,
// in canonical order with deterministic fresh ghost indices.
struct Abstraction {
  StaticTrace trace;
  RenameMap renaming;  // x -> ghost
};
Abstraction abstract_trace(const StaticTrace& h, const VarSet& bound,
                           const VarSet& used);

}  // namespace kaisar
