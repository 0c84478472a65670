//! A small logic of term equalities, closed under Boolean connectives,
//! and its joint decision with a constraint system.
//!
//! An attack for a system and a formula is a ground substitution solving
//! the system and satisfying the formula. Deciding one: pick a disjunct of
//! the disjunctive normal form, unify its equalities, solve the system
//! under that unifier, and on each solved branch either reject (some
//! disequality collapsed to an identity) or build a witness, choosing for
//! each variable a deducible term outside the finite set of values that
//! would equate any disequality.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::constraints::{is_solution, DedSystem, SystemError};
use crate::deduction::deducible_subterms;
use crate::solver::{solve_all, StrategyConfig, TraceStep};
use crate::terms::{mgu, Sort, Subst, TermArena, TermId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    Atom(TermId, TermId),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Bottom,
}

impl Formula {
    pub fn eq(a: TermId, b: TermId) -> Formula {
        Formula::Atom(a, b)
    }

    pub fn neq(a: TermId, b: TermId) -> Formula {
        Formula::Atom(a, b).negate()
    }

    pub fn negate(self) -> Formula {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, other: Formula) -> Formula {
        Formula::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Formula) -> Formula {
        Formula::Or(Box::new(self), Box::new(other))
    }

    pub fn vars(&self, arena: &TermArena) -> Vec<TermId> {
        fn collect(f: &Formula, arena: &TermArena, out: &mut BTreeSet<TermId>) {
            match f {
                Formula::Atom(a, b) => {
                    out.extend(arena.vars_of(*a));
                    out.extend(arena.vars_of(*b));
                }
                Formula::Not(g) => collect(g, arena, out),
                Formula::And(g, h) | Formula::Or(g, h) => {
                    collect(g, arena, out);
                    collect(h, arena, out);
                }
                Formula::Bottom => {}
            }
        }
        let mut out = BTreeSet::new();
        collect(self, arena, &mut out);
        out.into_iter().collect()
    }

    pub fn display(&self, arena: &TermArena) -> String {
        match self {
            Formula::Atom(a, b) => {
                format!("{} = {}", arena.display(*a), arena.display(*b))
            }
            Formula::Not(g) => match g.as_ref() {
                Formula::Atom(a, b) => {
                    format!("{} != {}", arena.display(*a), arena.display(*b))
                }
                other => format!("!({})", other.display(arena)),
            },
            Formula::And(g, h) => format!("({} & {})", g.display(arena), h.display(arena)),
            Formula::Or(g, h) => format!("({} | {})", g.display(arena), h.display(arena)),
            Formula::Bottom => "false".to_string(),
        }
    }
}

/// Satisfaction: an atom holds when both sides become the identical term.
pub fn eval(arena: &TermArena, sigma: &Subst, formula: &Formula) -> bool {
    match formula {
        Formula::Atom(a, b) => sigma.apply(arena, *a) == sigma.apply(arena, *b),
        Formula::Not(g) => !eval(arena, sigma, g),
        Formula::And(g, h) => eval(arena, sigma, g) && eval(arena, sigma, h),
        Formula::Or(g, h) => eval(arena, sigma, g) || eval(arena, sigma, h),
        Formula::Bottom => false,
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuthError {
    #[error("formula mentions variables outside the system")]
    UnboundVariables,
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Debug, Clone)]
pub struct AuthAttack {
    /// Ground solution of the system satisfying the formula.
    pub subst: Subst,
    /// Rule trace of the solved branch the witness was built on.
    pub trace: Vec<TraceStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lit {
    Eq(TermId, TermId),
    Neq(TermId, TermId),
}

/// Disjunctive normal form with negation pushed onto atoms.
fn disjuncts(f: &Formula, negated: bool) -> Vec<Vec<Lit>> {
    match (f, negated) {
        (Formula::Atom(a, b), false) => vec![vec![Lit::Eq(*a, *b)]],
        (Formula::Atom(a, b), true) => vec![vec![Lit::Neq(*a, *b)]],
        (Formula::Bottom, false) => vec![],
        (Formula::Bottom, true) => vec![vec![]],
        (Formula::Not(g), n) => disjuncts(g, !n),
        (Formula::And(g, h), false) | (Formula::Or(g, h), true) => {
            let right = disjuncts(h, negated);
            let mut out = Vec::new();
            for l in disjuncts(g, negated) {
                for r in &right {
                    let mut c = l.clone();
                    c.extend(r.iter().copied());
                    out.push(c);
                }
            }
            out
        }
        (Formula::Or(g, h), false) | (Formula::And(g, h), true) => {
            let mut out = disjuncts(g, negated);
            out.extend(disjuncts(h, negated));
            out
        }
    }
}

/// Ground terms deducible from the smallest knowledge set, enumerated as
/// iterated pairings of its first element; used to dodge a finite set of
/// forbidden values. Key-sorted variables draw from deducible key names
/// instead, Time-sorted ones from fresh numeric names.
fn fresh_value(
    arena: &TermArena,
    strategy: &StrategyConfig,
    solved: &DedSystem,
    var: TermId,
    forbidden: &BTreeSet<TermId>,
) -> Option<TermId> {
    let seed_lhs = &solved.constraints.first()?.lhs;
    match arena.sort_of(var) {
        Sort::Key => deducible_subterms(arena, strategy.deduction, seed_lhs, &[])
            .into_iter()
            .find(|&t| {
                arena.is_name(t) && arena.sort_of(t) == Sort::Key && !forbidden.contains(&t)
            }),
        Sort::Time => (0..).map(|i| {
            arena.name(&i.to_string(), Sort::Time).expect("numeric time name")
        })
        .find(|t| !forbidden.contains(t)),
        _ => {
            let seed = seed_lhs[0];
            let mut candidate = seed;
            while forbidden.contains(&candidate) {
                candidate = arena.pair(seed, candidate);
            }
            Some(candidate)
        }
    }
}

/// Completes a solved branch into a ground witness for the remaining
/// disequalities, or rejects the branch.
fn witness_on_branch(
    arena: &TermArena,
    strategy: &StrategyConfig,
    solved: &DedSystem,
    accumulated: &Subst,
    conj: &[Lit],
) -> Option<Subst> {
    let mut pairs: Vec<(TermId, TermId)> = Vec::new();
    for lit in conj {
        if let Lit::Neq(a, b) = lit {
            let ta = accumulated.apply(arena, *a);
            let tb = accumulated.apply(arena, *b);
            if ta == tb {
                return None;
            }
            if mgu(arena, ta, tb).is_some() {
                pairs.push((ta, tb));
            }
        }
    }
    let mut assign = Subst::identity();
    loop {
        let flat: Vec<TermId> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        let free = arena.vars_of_many(&flat);
        let Some(&x) = free.first() else { break };
        let mut forbidden = BTreeSet::new();
        for &(a, b) in &pairs {
            if let Some(tau) = mgu(arena, a, b) {
                if let Some(img) = tau.get(x) {
                    forbidden.insert(img);
                }
            }
        }
        let value = fresh_value(arena, strategy, solved, x, &forbidden)?;
        let step = Subst::singleton(x, value);
        pairs = pairs
            .iter()
            .map(|&(a, b)| (step.apply(arena, a), step.apply(arena, b)))
            .collect();
        debug_assert!(pairs.iter().all(|&(a, b)| a != b), "elimination kept sides distinct");
        assign = assign.compose(arena, &step);
    }
    // ground the solved system's remaining variables with any deducible term
    let mut witness = accumulated.compose(arena, &assign);
    for x in solved.vars(arena) {
        if witness.apply(arena, x) == x {
            let value = fresh_value(arena, strategy, solved, x, &BTreeSet::new())?;
            witness = witness.compose(arena, &Subst::singleton(x, value));
        }
    }
    Some(witness)
}

/// Searches for an attack: a ground substitution solving the system and
/// satisfying the formula. Returns the first witness found.
pub fn decide_attack(
    arena: &TermArena,
    strategy: &StrategyConfig,
    system: &DedSystem,
    formula: &Formula,
) -> Result<Option<AuthAttack>, AuthError> {
    let sys_vars: BTreeSet<TermId> = system.vars(arena).into_iter().collect();
    if !formula.vars(arena).iter().all(|v| sys_vars.contains(v)) {
        return Err(AuthError::UnboundVariables);
    }
    for conj in disjuncts(formula, false) {
        let mut sigma = Subst::identity();
        let mut unifiable = true;
        for lit in &conj {
            if let Lit::Eq(a, b) = lit {
                let sa = sigma.apply(arena, *a);
                let sb = sigma.apply(arena, *b);
                match mgu(arena, sa, sb) {
                    Some(tau) => sigma = sigma.compose(arena, &tau),
                    None => {
                        unifiable = false;
                        break;
                    }
                }
            }
        }
        if !unifiable {
            continue;
        }
        let reduced = system.apply(arena, &sigma);
        let outcome = solve_all(arena, strategy, &reduced)?;
        for branch in &outcome.branches {
            let total = sigma.compose(arena, &branch.subst);
            if let Some(witness) =
                witness_on_branch(arena, strategy, &branch.system, &total, &conj)
            {
                debug_assert!(is_solution(arena, strategy.deduction, system, &witness));
                debug_assert!(eval(arena, &witness, formula));
                return Ok(Some(AuthAttack { subst: witness, trace: branch.trace.clone() }));
            }
        }
    }
    Ok(None)
}
