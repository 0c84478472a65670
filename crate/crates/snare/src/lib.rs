//! Symbolic analysis of security protocols for a bounded number of sessions.
//!
//! The pipeline: protocol roles and a scenario compile into deducibility
//! constraint systems (one per admissible interleaving); a constraint solver
//! reduces each system to solved forms that finitely represent all attacker
//! strategies; property deciders then check secrecy, key-cycle freeness,
//! equality properties of an authentication logic, and feasibility of linear
//! timing constraints on those solved forms.

pub mod authlogic;
pub mod constraints;
pub mod deduction;
pub mod frontend;
pub mod keycycle;
pub mod solver;
pub mod terms;
pub mod timed;

pub use authlogic::{decide_attack, eval, AuthAttack, AuthError, Formula};
pub use frontend::{analyze_source, FrontendError, RunConfig, StrategyKind};
pub use constraints::{DedConstraint, DedSystem, SystemError, SystemMetrics};
pub use deduction::{deducible, prove, DeductionConfig, ProofRule, ProofTree};
pub use keycycle::{
    encrypts, has_key_cycle, has_strict_key_cycle, hidden_keys, key_cycle_on,
    ordering_violation_on, protects, strict_key_cycle_on, violates_key_ordering, EncryptsGraph,
    KeyCycleConfig, KeyCycleError, KeyCycleVerdict, OrderingVerdict, Rho1, StrictCycleVerdict,
};
pub use solver::{
    applicable_rules, apply_rule, replay, solve_all, RuleApplication, RuleError, SearchState,
    SolveMode, SolveOutcome, SolveRule, SolvedBranch, StepResult, StrategyConfig, TraceStep,
    UnifyScope,
};
pub use terms::{mgu, BinOp, Position, Sort, SortProfile, Subst, TermArena, TermError, TermId};
pub use timed::{
    decide_timed_attack, feasible, parse_rational, satisfies, time_value, LinearAtom, Relation,
    TimeAssignment, TimeDomain, TimedAttack, TimedConstraint, TimedError,
};
