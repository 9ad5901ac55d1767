#include "kaisar/traces.hpp"

namespace kaisar {

bool StaticTrace::has_mark(const std::string& name) const {
  for (auto& r : records)
    if (r.kind == RecordKind::Mark && r.mark == name) return true;
  return false;
}

StaticTrace StaticTrace::prefix(const std::string& name) const {
  StaticTrace h;
  for (auto& r : records) {
    if (r.kind == RecordKind::Mark && r.mark == name) return h;
    h.records.push_back(r);
  }
  throw TraceError("unknown state " + name);
}

StaticTrace StaticTrace::renamed(const RenameMap& m) const {
  StaticTrace h = *this;
  for (auto& r : h.records)
    if (r.term) r.term = rename_free(r.term, m);
  return h;
}

VarSet StaticTrace::vars() const {
  VarSet s;
  for (auto& r : records) {
    if (r.kind == RecordKind::Mark) continue;
    s.insert(r.var);
    if (r.kind != RecordKind::Sub) s.insert(r.ghost);
    if (r.term)
      for (auto& v : free_vars(r.term)) s.insert(v);
  }
  return s;
}

void StaticTrace::push_sub(const Variable& x, TermPtr t) {
  records.push_back({RecordKind::Sub, x, {}, std::move(t), {}});
}
void StaticTrace::push_eq(const Variable& x, const Variable& ghost, TermPtr t) {
  for (auto& r : records)  // the frame variable x moves to its ghost
    if (r.term) r.term = rename_free(r.term, {{x, ghost}});
  records.push_back({RecordKind::Eq, x, ghost, std::move(t), {}});
}
void StaticTrace::push_any(const Variable& x, const Variable& ghost) {
  for (auto& r : records)
    if (r.term) r.term = rename_free(r.term, {{x, ghost}});
  records.push_back({RecordKind::Any, x, ghost, nullptr, {}});
}
void StaticTrace::push_mark(const std::string& name) {
  records.push_back({RecordKind::Mark, {}, {}, nullptr, name});
}

// -- now --------------------------------------------------------------------

TermPtr now_var(const StaticTrace& h, const Variable& x) {
  for (auto it = h.records.rbegin(); it != h.records.rend(); ++it) {
    if (it->kind == RecordKind::Mark || !(it->var == x)) continue;
    if (it->kind == RecordKind::Sub) return it->term;
    return tvar(x);  // Eq/Any rebinding: the frame variable is current
  }
  return tvar(x);
}

static SubstMap resolution_map(const VarSet& fvs,
                               const std::function<TermPtr(const Variable&)>& f) {
  SubstMap m;
  for (auto& v : fvs) {
    TermPtr r = f(v);
    if (!(r->kind == TermKind::Var && r->var == v)) m.emplace(v, r);
  }
  return m;
}

TermPtr now_term(const StaticTrace& h, const TermPtr& t) {
  auto m = resolution_map(free_vars(t),
                          [&](const Variable& v) { return now_var(h, v); });
  return substitute(t, m);
}
FormulaPtr now_formula(const StaticTrace& h, const FormulaPtr& f) {
  auto m = resolution_map(free_vars(f),
                          [&](const Variable& v) { return now_var(h, v); });
  return substitute(f, m);
}

// -- nom --------------------------------------------------------------------

TermPtr nom_var(const StaticTrace& h, const std::string& mark,
                const Variable& x) {
  if (!h.has_mark(mark)) throw TraceError("unknown state " + mark);
  size_t mark_idx = 0;
  for (size_t i = 0; i < h.records.size(); ++i)
    if (h.records[i].kind == RecordKind::Mark && h.records[i].mark == mark) {
      mark_idx = i;
      break;
    }
  // Resolve in the frame at the mark, then replay the frame renamings that
  // later rebindings introduced. (Record terms are kept renamed in place, so
  // they are already invariant under this replay; only bare frame variables
  // actually move to their ghosts.)
  TermPtr t = now_var(h.prefix(mark), x);
  for (size_t i = mark_idx + 1; i < h.records.size(); ++i) {
    const TraceRecord& r = h.records[i];
    if (r.kind == RecordKind::Eq || r.kind == RecordKind::Any)
      t = rename_free(t, {{r.var, r.ghost}});
  }
  return t;
}

TermPtr nom_term(const StaticTrace& h, const std::string& mark,
                 const TermPtr& t) {
  auto m = resolution_map(
      free_vars(t), [&](const Variable& v) { return nom_var(h, mark, v); });
  return substitute(t, m);
}
FormulaPtr nom_formula(const StaticTrace& h, const std::string& mark,
                       const FormulaPtr& f) {
  auto m = resolution_map(
      free_vars(f), [&](const Variable& v) { return nom_var(h, mark, v); });
  return substitute(f, m);
}

// -- dynamic correspondence -------------------------------------------------

State sequent_state(const DynamicTrace& eta, const StaticTrace& h) {
  if (eta.entries.empty() || eta.entries[0].is_mark)
    throw TraceError("dynamic trace must start with a state");
  State seq = eta.entries[0].state;
  if (seq.mode() != Mode::Exact)
    throw TraceError("sequent_state requires exact mode");
  size_t cursor = 1;
  auto next_state = [&]() -> const State& {
    if (cursor >= eta.entries.size())
      throw TraceError("dynamic trace shorter than static trace");
    if (eta.entries[cursor].is_mark)
      throw TraceError("dynamic trace misaligned: unexpected mark");
    return eta.entries[cursor++].state;
  };
  for (auto& r : h.records) {
    switch (r.kind) {
      case RecordKind::Mark: {
        if (cursor >= eta.entries.size() || !eta.entries[cursor].is_mark ||
            eta.entries[cursor].mark != r.mark)
          throw TraceError("dynamic trace misaligned at mark " + r.mark);
        ++cursor;
        break;
      }
      case RecordKind::Sub:
        next_state();  // the sequent frame absorbs the substitution
        break;
      case RecordKind::Eq:
      case RecordKind::Any: {
        const State& nw = next_state();
        seq.set(r.ghost, seq.get_exact(r.var));
        seq.set(r.var, nw.get_exact(r.var));
        break;
      }
    }
  }
  return seq;
}

// -- abstraction ------------------------------------------------------------

Abstraction abstract_trace(const StaticTrace& h, const VarSet& bound,
                           const VarSet& used) {
  Abstraction a;
  VarSet taken = used;
  for (auto& v : h.vars()) taken.insert(v);
  for (auto& x : bound) {  // VarSet is ordered: canonical ghost order
    if (x.primed) continue;
    Variable ghost = fresh_var(x.base, taken);
    taken.insert(ghost);
    a.renaming.emplace(x, ghost);
  }
  a.trace = h;
  for (auto& [x, ghost] : a.renaming) a.trace.push_any(x, ghost);
  return a;
}

}  // namespace kaisar
