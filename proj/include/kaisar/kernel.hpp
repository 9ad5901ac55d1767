#pragma once

#include "kaisar/analysis.hpp"
#include "kaisar/arith.hpp"
#include "kaisar/syntax.hpp"

namespace kaisar {

// ---------------------------------------------------------------------------
// Errors raised by rule application. replay() converts them into an Invalid
// result instead of throwing.
struct KernelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoSuchGoal : KernelError {
  using KernelError::KernelError;
};
struct MalformedArgs : KernelError {
  using KernelError::KernelError;
};
struct SideConditionViolation : KernelError {
  using KernelError::KernelError;
};
struct EvidenceMismatch : KernelError {
  using KernelError::KernelError;
};

// ---------------------------------------------------------------------------
// Rule identifiers. "Rewrite" rules replace one formula of the goal by an
// equivalent one and may be applied on either side (left flag); the
// asymmetric rules (induction, monotonicity, ODE rules) address whole goals.
enum class RuleId {
  // closing
  Id, CloseTrue, CloseFalse, CloseQE,
  // structural
  Cut, WeakenL, WeakenR, MoveL, MoveR, FlipL, Rename, PushNeg,
  // propositional
  NotL, NotR, AndL, AndR, OrL, OrR, ImplyL, ImplyR, EquivL, EquivR,
  // quantifiers
  AllR, AllL, ExistsR, ExistsL,
  // program rewrites (box)
  BoxSeq, BoxChoice, BoxTest, BoxAssign, BoxAssignEq, BoxAssignAny, BoxUnroll,
  BoxSplit,
  // program rewrites (diamond)
  DiaSeq, DiaChoice, DiaTest, DiaAssign, DiaAssignEq, DiaAssignAny, DiaUnroll,
  DiaSplit,
  // asymmetric
  LoopInd, Con, MonBox, MonDia,
  // differential equations
  DW, DC, DI, DG, Solve, DiaSolve,
};

std::string rule_name(RuleId r);
RuleId rule_of_name(const std::string& name);  // throws MalformedArgs

// One rule application. `goal` is a stable goal id; `i` addresses an
// antecedent formula, `j` a succedent formula (where the rule needs one).
struct RuleApp {
  RuleId rule{};
  int goal = 0;
  int i = -1;
  int j = -1;
  bool left = false;          // rewrite applied on the antecedent side
  Variable var;               // fresh variable / binder / ghost / clock
  Variable var2;              // Rename target
  TermPtr term;               // instantiation / ghost rhs / duration
  TermPtr term2;              // ghost initial value
  FormulaPtr fml;             // cut formula / differential cut
  // Solve/DiaSolve: claimed solution terms, one per equation. Abstraction
  // rules (loopInd, con, mon, dw, di): optional explicit ghost variables,
  // one Var term per unprimed bound variable in set order (empty: the rule
  // picks its own); each must be fresh for the goal.
  std::vector<TermPtr> sols;
  std::uint64_t evidence_hash = 0;
  std::string evidence_method;
};

struct Goal {
  int id = 0;
  Sequent seq;
};

// A finished or in-progress derivation: the root sequent, the open goals and
// the log of successful applications (which doubles as the certificate).
class ProofState {
 public:
  static ProofState init(const Sequent& root);

  const Sequent& root() const { return root_; }
  const std::vector<Goal>& goals() const { return goals_; }
  const Goal* find(int id) const;
  bool proved() const { return goals_.empty(); }
  const std::vector<RuleApp>& log() const { return log_; }

  // Applies one rule, checking its side conditions; returns the new state.
  // The addressed goal is replaced in place by the rule's premises (fresh
  // ids); every other goal is untouched.
  ProofState apply(const RuleApp& r) const;

  // Closes a goal whose sequent image the arithmetic backend decided Valid.
  // The evidence hash must match the goal's elaborated image exactly.
  ProofState close_qe(int goal, const ArithEvidence& ev) const;

 private:
  Sequent root_;
  std::vector<Goal> goals_;
  int next_id_ = 1;
  std::vector<RuleApp> log_;
};

// ---------------------------------------------------------------------------
// Certificates: the root sequent plus the application log. Replay re-executes
// every step with full side-condition checking and requires zero open goals.
struct Certificate {
  Sequent root;
  std::vector<RuleApp> steps;
};

Certificate certificate_of(const ProofState& ps);

std::string serialize(const Certificate& c);
Certificate parse_certificate(const std::string& text);  // throws KernelError

struct ReplayResult {
  bool valid = false;
  int failed_step = -1;  // 0-based; steps.size() means "open goals remain"
  std::string detail;
};

struct ReplayOptions {
  // When set, arithmetic leaves are re-decided instead of trusted by hash.
  const DecideOptions* recheck_arith = nullptr;
};

ReplayResult replay(const Certificate& c, const ReplayOptions& opt = {});

}  // namespace kaisar
