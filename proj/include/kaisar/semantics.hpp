#pragma once

#include <functional>
#include <map>
#include <random>
#include <variant>

#include "kaisar/syntax.hpp"

namespace kaisar {

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Mode { Exact, Approx };

// A program state: total map from variables to reals. Reads of unset
// variables default to 0 (and are reported through the warning sink).
class State {
 public:
  explicit State(Mode m = Mode::Exact) : mode_(m) {}
  Mode mode() const { return mode_; }

  void set(const Variable& v, const Rational& q);
  void set(const Variable& v, double d);
  Rational get_exact(const Variable& v) const;
  double get_approx(const Variable& v) const;
  bool has(const Variable& v) const;
  const std::map<Variable, Rational>& exact_map() const { return qs_; }
  const std::map<Variable, double>& approx_map() const { return ds_; }

  // Agreement on unprimed variables of `vars`.
  bool agrees_exact(const State& o, const VarSet& vars) const;

  static std::function<void(const std::string&)> warn_sink;

 private:
  Mode mode_;
  std::map<Variable, Rational> qs_;
  std::map<Variable, double> ds_;
};

// Interpretation of state names, used by nominal terms t(e) and the
// state-equality test predicates @t.
using Interpretation = std::map<std::string, State>;

// Dynamic traces: interleaved states and marks; the first entry is a state.
struct TraceEntry {
  bool is_mark = false;
  std::string mark;
  State state{Mode::Exact};
};
struct DynamicTrace {
  std::vector<TraceEntry> entries;
  const State& last_state() const;
  std::string dump() const;  // "STATE k: x=..." / "MARK t" lines
};

Interpretation interpretation_of(const DynamicTrace& trace);

struct Budget {
  int paths = 64;        // total sampled runs per program
  int iterations = 4;    // loop unrollings
  int reals = 12;        // samples per nondeterministic real
  double step = 0.01;    // RK4 step size
  double ode_time = 5.0; // max ODE duration explored
  int ode_stops = 6;     // intermediate ODE stopping points sampled
  std::uint64_t seed = 0;
  bool record_nominals = false;  // treat ?@t as "record mark t here"
};

// Three-valued truth.
enum class TV { False, Unknown, True };
const char* tv_str(TV v);

// Term evaluation. Throws EvalError on division by zero, non-rational
// results in exact mode, or extended terms with no interpretation.
Rational eval_term_exact(const TermPtr& t, const State& s,
                         const Interpretation& interp = {});
double eval_term_approx(const TermPtr& t, const State& s,
                        const Interpretation& interp = {});

TV eval_formula(const FormulaPtr& f, const State& s, const Budget& budget,
                const Interpretation& interp = {},
                std::mt19937_64* rng = nullptr);

struct Run {
  DynamicTrace trace;
  State end{Mode::Exact};
};
struct RunResult {
  std::vector<Run> runs;
  bool exhaustive = true;  // false if sampling/budget truncated exploration
};

RunResult run_program(const ProgramPtr& p, const State& init,
                      const Budget& budget, const Interpretation& interp = {});

// Random state sampling helpers shared by the test harnesses.
Rational sample_rational(std::mt19937_64& rng);
double sample_real(std::mt19937_64& rng);

}  // namespace kaisar
