//! Deducibility constraint systems.
//!
//! A system is a set of constraints `T |- u` whose left-hand sides grow
//! monotonically (total order by inclusion) and where every variable first
//! appears on a right-hand side before it may occur in any left-hand side.
//! Systems are kept in a canonical order (left-hand side size, then term
//! ids) so that value equality, display output and solver traces are
//! deterministic.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::deduction::{deducible, DeductionConfig};
use crate::terms::{Sort, Subst, TermArena, TermId};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DedConstraint {
    /// Sorted, deduplicated set of known terms.
    pub lhs: Vec<TermId>,
    pub rhs: TermId,
}

impl DedConstraint {
    pub fn new(mut lhs: Vec<TermId>, rhs: TermId) -> Self {
        lhs.sort();
        lhs.dedup();
        DedConstraint { lhs, rhs }
    }

    pub fn display(&self, arena: &TermArena) -> String {
        format!("{} |- {}", arena.display_set(&self.lhs), arena.display(self.rhs))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DedSystem {
    /// Canonically ordered constraints.
    pub constraints: Vec<DedConstraint>,
    /// Marks the unsatisfiable system.
    pub bottom: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SystemError {
    #[error("constraint {0} has an empty left-hand side")]
    EmptyLhs(usize),
    #[error("left-hand sides of constraints {0} and {1} are not comparable by inclusion")]
    NotChainOrdered(usize, usize),
    #[error("variable {0} never originates on a right-hand side")]
    NoOrigination(String),
    #[error("system is the unsatisfiable constant")]
    Bottom,
    #[error("system is not solved")]
    NotSolved,
    #[error("no deducible atomic key available to instantiate variable {0}")]
    NoKeyValue(String),
}

impl DedSystem {
    pub fn new(constraints: Vec<DedConstraint>) -> Self {
        let mut system = DedSystem { constraints, bottom: false };
        system.canonicalize();
        system
    }

    pub fn unsat() -> Self {
        DedSystem { constraints: Vec::new(), bottom: true }
    }

    pub fn empty() -> Self {
        DedSystem { constraints: Vec::new(), bottom: false }
    }

    fn canonicalize(&mut self) {
        self.constraints.sort_by(|a, b| {
            (a.lhs.len(), &a.lhs, a.rhs).cmp(&(b.lhs.len(), &b.lhs, b.rhs))
        });
        self.constraints.dedup();
    }

    /// Checks the two defining conditions: inclusion-ordered left-hand sides
    /// and origination of every variable on some right-hand side.
    pub fn validate(&self, arena: &TermArena) -> Result<(), SystemError> {
        if self.bottom {
            return Ok(());
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.lhs.is_empty() {
                return Err(SystemError::EmptyLhs(i));
            }
        }
        // constraints are sorted by lhs size, so inclusion must hold between
        // successive distinct left-hand sides
        for i in 1..self.constraints.len() {
            let small = &self.constraints[i - 1].lhs;
            let big: BTreeSet<TermId> = self.constraints[i].lhs.iter().copied().collect();
            if !small.iter().all(|t| big.contains(t)) {
                return Err(SystemError::NotChainOrdered(i - 1, i));
            }
        }
        for x in self.vars(arena) {
            let originates = self.constraints.iter().any(|c| {
                arena.vars_of(c.rhs).contains(&x)
                    && !arena.vars_of_many(&c.lhs).contains(&x)
            });
            if !originates {
                return Err(SystemError::NoOrigination(arena.display(x)));
            }
        }
        Ok(())
    }

    /// A system is solved when it is the unsatisfiable constant or every
    /// right-hand side is a variable. The empty system is solved.
    pub fn is_solved(&self, arena: &TermArena) -> bool {
        self.bottom || self.constraints.iter().all(|c| arena.is_var(c.rhs))
    }

    pub fn vars(&self, arena: &TermArena) -> Vec<TermId> {
        arena.vars_of_many(&self.all_terms())
    }

    pub fn all_terms(&self) -> Vec<TermId> {
        let mut out: Vec<TermId> = Vec::new();
        for c in &self.constraints {
            out.extend_from_slice(&c.lhs);
            out.push(c.rhs);
        }
        out.sort();
        out.dedup();
        out
    }

    /// The maximal left-hand side.
    pub fn lhs_max(&self) -> &[TermId] {
        self.constraints.last().map(|c| c.lhs.as_slice()).unwrap_or(&[])
    }

    /// Counting helpers for the derivation-length bound: number of distinct
    /// variables, distinct left-hand sides and distinct subterms.
    pub fn metrics(&self, arena: &TermArena) -> SystemMetrics {
        let lhs_sets: BTreeSet<&Vec<TermId>> = self.constraints.iter().map(|c| &c.lhs).collect();
        SystemMetrics {
            var_count: self.vars(arena).len(),
            lhs_count: lhs_sets.len(),
            subterm_count: arena.subterms_many(&self.all_terms()).len(),
        }
    }

    pub fn apply(&self, arena: &TermArena, subst: &Subst) -> DedSystem {
        if self.bottom || subst.is_identity() {
            return self.clone();
        }
        let constraints = self
            .constraints
            .iter()
            .map(|c| DedConstraint::new(subst.apply_many(arena, &c.lhs), subst.apply(arena, c.rhs)))
            .collect();
        DedSystem::new(constraints)
    }

    /// The trivial solution of a solved system over the single sort `Msg`:
    /// every variable is mapped to one fixed element of the minimal
    /// left-hand side.
    pub fn base_solution(&self, arena: &TermArena) -> Result<Subst, SystemError> {
        if self.bottom {
            return Err(SystemError::Bottom);
        }
        if !self.is_solved(arena) {
            return Err(SystemError::NotSolved);
        }
        if self.constraints.is_empty() {
            return Ok(Subst::identity());
        }
        let t = self.constraints[0].lhs[0];
        let mut s = Subst::identity();
        for x in self.vars(arena) {
            s.insert(x, t);
        }
        Ok(s)
    }

    /// The canonical solution used by the key-cycle deciders: after keeping,
    /// for each variable, only the constraint with the minimal left-hand
    /// side, each variable is bound to the pairing of all terms of that
    /// left-hand side (instantiated by the bindings already constructed).
    /// Variables of sort `Key` are bound to a deducible atomic key instead,
    /// and variables of sort `Time` to the zero timestamp; both choices keep
    /// the assignment well-sorted and deducible.
    pub fn tau_solution(
        &self,
        arena: &TermArena,
        config: DeductionConfig,
    ) -> Result<Subst, SystemError> {
        if self.bottom {
            return Err(SystemError::Bottom);
        }
        if !self.is_solved(arena) {
            return Err(SystemError::NotSolved);
        }
        // first (minimal) constraint per variable, in canonical order
        let mut per_var: Vec<(TermId, Vec<TermId>)> = Vec::new();
        let mut seen: BTreeSet<TermId> = BTreeSet::new();
        for c in &self.constraints {
            if seen.insert(c.rhs) {
                per_var.push((c.rhs, c.lhs.clone()));
            }
        }
        let mut tau = Subst::identity();
        for (x, lhs) in per_var {
            let lhs_inst = tau.apply_many(arena, &lhs);
            let value = match arena.sort_of(x) {
                Sort::Key => {
                    let candidates: Vec<TermId> = crate::deduction::deducible_subterms(
                        arena, config, &lhs_inst, &[],
                    )
                    .into_iter()
                    .filter(|&t| arena.is_name(t) && arena.sort_of(t) == Sort::Key)
                    .collect();
                    match candidates.first() {
                        Some(&k) => k,
                        None => return Err(SystemError::NoKeyValue(arena.display(x))),
                    }
                }
                Sort::Time => arena
                    .name("0", Sort::Time)
                    .map_err(|_| SystemError::NoKeyValue(arena.display(x)))?,
                _ => arena.pair_list(&lhs_inst),
            };
            tau = tau.compose(arena, &Subst::singleton(x, value));
        }
        Ok(tau)
    }

    pub fn display(&self, arena: &TermArena) -> String {
        if self.bottom {
            return "unsatisfiable".to_string();
        }
        if self.constraints.is_empty() {
            return "(empty)".to_string();
        }
        self.constraints
            .iter()
            .map(|c| c.display(arena))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemMetrics {
    pub var_count: usize,
    pub lhs_count: usize,
    pub subterm_count: usize,
}

impl SystemMetrics {
    /// Derivation-length bound for memoized solving.
    pub fn step_bound(&self) -> usize {
        self.var_count * self.lhs_count * self.subterm_count + self.var_count + 1
    }
}

/// Is the ground substitution a solution of the system?
pub fn is_solution(
    arena: &TermArena,
    config: DeductionConfig,
    system: &DedSystem,
    subst: &Subst,
) -> bool {
    if system.bottom {
        return false;
    }
    system.constraints.iter().all(|c| {
        let lhs = subst.apply_many(arena, &c.lhs);
        let rhs = subst.apply(arena, c.rhs);
        deducible(arena, config, &lhs, rhs)
    })
}

/// Builds a ground map per variable: substitution plus check that every
/// binding is ground.
pub fn is_ground_for(arena: &TermArena, system: &DedSystem, subst: &Subst) -> bool {
    system.vars(arena).iter().all(|&x| match subst.get(x) {
        Some(t) => arena.is_ground(t),
        None => false,
    })
}

/// Groups constraints by variable right-hand side, keeping the minimal
/// left-hand side for each variable (used by solution enumeration in tests
/// and by the witness builders).
pub fn minimal_lhs_per_var(system: &DedSystem, arena: &TermArena) -> BTreeMap<TermId, Vec<TermId>> {
    let mut map: BTreeMap<TermId, Vec<TermId>> = BTreeMap::new();
    for c in &system.constraints {
        if arena.is_var(c.rhs) {
            map.entry(c.rhs).or_insert_with(|| c.lhs.clone());
        }
    }
    map
}
