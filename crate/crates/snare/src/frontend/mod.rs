//! End-to-end analysis: parse a protocol file, compile the scenario into
//! constraint systems, decide the property on each interleaving, and
//! assemble a report.

pub mod compile;
pub mod parse;
pub mod report;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::authlogic::{decide_attack, AuthError};
use crate::constraints::SystemError;
use crate::deduction::DeductionConfig;
use crate::keycycle::{
    has_key_cycle, has_strict_key_cycle, violates_key_ordering, KeyCycleConfig, KeyCycleError,
    Rho1,
};
use crate::solver::{solve_all, StrategyConfig, TraceStep};
use crate::terms::{SortProfile, Subst, TermArena, TermId};
use crate::timed::{decide_timed_attack, TimedError};

use compile::{Compiled, CompiledSystem, Property};
use report::{AttackReport, Evidence, RunReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StrategyKind {
    #[default]
    Exhaustive,
    Eager,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub strategy: StrategyKind,
    /// Overrides the protection relation named in the property, if any.
    pub rho1: Option<Rho1>,
    /// Enables whole-message recovery from signatures.
    pub unsign: bool,
    /// Reports every attack instead of stopping at the first.
    pub all_witnesses: bool,
    pub max_interleavings: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            strategy: StrategyKind::Exhaustive,
            rho1: None,
            unsign: false,
            all_witnesses: false,
            max_interleavings: 1000,
        }
    }
}

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("parse error: {0}")]
    Parse(#[from] parse::ParseError),
    #[error("compile error: {0}")]
    Compile(#[from] compile::CompileError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error(transparent)]
    Timed(#[from] TimedError),
    #[error("key cycle check failed: {0}")]
    KeyCycle(#[from] KeyCycleError),
}

pub fn analyze_source(source: &str, cfg: &RunConfig) -> Result<RunReport, FrontendError> {
    let file = parse::parse(source)?;
    let arena = TermArena::new(file.profile);
    let compiled = compile::compile(&arena, &file, cfg.max_interleavings)?;
    run(&arena, &compiled, cfg)
}

pub fn run(
    arena: &TermArena,
    compiled: &Compiled,
    cfg: &RunConfig,
) -> Result<RunReport, FrontendError> {
    let deduction = DeductionConfig {
        unsign_enabled: cfg.unsign,
        time_axiom_enabled: compiled.profile == SortProfile::Timed,
    };
    let strategy = match cfg.strategy {
        StrategyKind::Exhaustive => StrategyConfig::default(),
        StrategyKind::Eager => StrategyConfig::eager(),
    }
    .with_deduction(deduction);

    let mut attacks = Vec::new();
    for cs in &compiled.systems {
        collect_attacks(arena, &strategy, deduction, cfg, compiled, cs, &mut attacks)?;
        if !attacks.is_empty() && !cfg.all_witnesses {
            attacks.truncate(1);
            break;
        }
    }

    Ok(RunReport {
        profile: profile_name(compiled.profile).to_string(),
        property: compiled.property_text.clone(),
        strategy: match cfg.strategy {
            StrategyKind::Exhaustive => "exhaustive".to_string(),
            StrategyKind::Eager => "eager".to_string(),
        },
        interleavings: compiled.systems.len(),
        truncated: compiled.truncated,
        attack_found: !attacks.is_empty(),
        attacks,
    })
}

fn profile_name(profile: SortProfile) -> &'static str {
    match profile {
        SortProfile::Untyped => "untyped",
        SortProfile::AtomicKeys => "atomic-keys",
        SortProfile::Timed => "timed",
    }
}

fn witness_map(arena: &TermArena, vars: &[TermId], subst: &Subst) -> BTreeMap<String, String> {
    subst
        .restrict(vars)
        .iter()
        .map(|(x, t)| (arena.display(x), arena.display(t)))
        .collect()
}

fn trace_lines(arena: &TermArena, trace: &[TraceStep]) -> Vec<String> {
    trace.iter().map(|s| s.display(arena)).collect()
}

#[allow(clippy::too_many_arguments)]
fn collect_attacks(
    arena: &TermArena,
    strategy: &StrategyConfig,
    deduction: DeductionConfig,
    cfg: &RunConfig,
    compiled: &Compiled,
    cs: &CompiledSystem,
    attacks: &mut Vec<AttackReport>,
) -> Result<(), FrontendError> {
    let root_vars = cs.system.vars(arena);
    match &compiled.property {
        Property::Secrecy(secret) => {
            let outcome = solve_all(arena, strategy, &cs.system)?;
            for branch in &outcome.branches {
                // a ground witness when the branch admits one, otherwise the
                // most general solution
                let witness = match branch.system.tau_solution(arena, deduction) {
                    Ok(tau) => branch.subst.compose(arena, &tau),
                    Err(_) => branch.subst.clone(),
                };
                attacks.push(AttackReport {
                    interleaving: cs.order.clone(),
                    witness: witness_map(arena, &root_vars, &witness),
                    trace: trace_lines(arena, &branch.trace),
                    evidence: Evidence::Secret { term: arena.display(*secret) },
                });
                if !cfg.all_witnesses {
                    return Ok(());
                }
            }
        }
        Property::KeyCycle { strict, rho1, extra } => {
            let kc = KeyCycleConfig {
                rho1: cfg.rho1.or(*rho1).unwrap_or(Rho1::Guarded),
                deduction,
            };
            let outcome = solve_all(arena, strategy, &cs.system)?;
            for branch in &outcome.branches {
                let mut l = cs.final_knowledge.clone();
                l.extend(extra.iter().copied());
                let l = branch.subst.apply_many(arena, &l);
                if *strict {
                    let verdict = has_strict_key_cycle(arena, kc, &l, &branch.system)?;
                    if !verdict.holds {
                        continue;
                    }
                    let tau = branch.system.tau_solution(arena, deduction)?;
                    attacks.push(AttackReport {
                        interleaving: cs.order.clone(),
                        witness: witness_map(
                            arena,
                            &root_vars,
                            &branch.subst.compose(arena, &tau),
                        ),
                        trace: trace_lines(arena, &branch.trace),
                        evidence: Evidence::KeyCycle {
                            cycle: verdict.cycle.iter().map(|&k| arena.display(k)).collect(),
                        },
                    });
                } else {
                    let verdict = has_key_cycle(arena, kc, &l, &branch.system)?;
                    if !verdict.holds {
                        continue;
                    }
                    let tau = branch.system.tau_solution(arena, deduction)?;
                    attacks.push(AttackReport {
                        interleaving: cs.order.clone(),
                        witness: witness_map(
                            arena,
                            &root_vars,
                            &branch.subst.compose(arena, &tau),
                        ),
                        trace: trace_lines(arena, &branch.trace),
                        evidence: Evidence::UnprotectedKeys {
                            keys: verdict
                                .stuck
                                .iter()
                                .map(|&(k, _)| arena.display(k))
                                .collect(),
                        },
                    });
                }
                if !cfg.all_witnesses {
                    return Ok(());
                }
            }
        }
        Property::Ordering { precedes, extra } => {
            let kc = KeyCycleConfig {
                rho1: cfg.rho1.unwrap_or(Rho1::Guarded),
                deduction,
            };
            let outcome = solve_all(arena, strategy, &cs.system)?;
            for branch in &outcome.branches {
                let mut l = cs.final_knowledge.clone();
                l.extend(extra.iter().copied());
                let l = branch.subst.apply_many(arena, &l);
                let verdict = violates_key_ordering(arena, kc, &l, &branch.system, precedes)?;
                if !verdict.holds {
                    continue;
                }
                let (outer, inner) = verdict.violation.expect("violating edge when holds");
                let tau = branch.system.tau_solution(arena, deduction)?;
                attacks.push(AttackReport {
                    interleaving: cs.order.clone(),
                    witness: witness_map(arena, &root_vars, &branch.subst.compose(arena, &tau)),
                    trace: trace_lines(arena, &branch.trace),
                    evidence: Evidence::OrderingViolation {
                        outer: arena.display(outer),
                        inner: arena.display(inner),
                    },
                });
                if !cfg.all_witnesses {
                    return Ok(());
                }
            }
        }
        Property::Logic(formula) => {
            if let Some(attack) = decide_attack(arena, strategy, &cs.system, formula)? {
                attacks.push(AttackReport {
                    interleaving: cs.order.clone(),
                    witness: witness_map(arena, &root_vars, &attack.subst),
                    trace: trace_lines(arena, &attack.trace),
                    evidence: Evidence::Formula { formula: formula.display(arena) },
                });
            }
        }
        Property::Timed { domain, constraint } => {
            if let Some(attack) =
                decide_timed_attack(arena, strategy, *domain, &cs.system, constraint)?
            {
                attacks.push(AttackReport {
                    interleaving: cs.order.clone(),
                    witness: witness_map(arena, &root_vars, &attack.subst),
                    trace: trace_lines(arena, &attack.trace),
                    evidence: Evidence::Times {
                        assignment: attack
                            .times
                            .iter()
                            .map(|(x, v)| (arena.display(*x), v.to_string()))
                            .collect(),
                    },
                });
            }
        }
    }
    Ok(())
}
