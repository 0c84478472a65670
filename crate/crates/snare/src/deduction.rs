//! Ground intruder deduction.
//!
//! A term is deducible from a knowledge set if it can be derived using
//! compositions (pairing, both encryptions, signing), decompositions
//! (projections, symmetric decryption with a deducible key, asymmetric
//! decryption with the matching private key, optional unsigning) and the
//! axiom. Variables are treated as opaque constants, which is exactly what
//! the solver needs when it checks constraints whose terms are not ground.
//!
//! Deducibility is decided by saturating the set of subterms of the inputs:
//! any derivable goal has a proof in which every intermediate term is a
//! subterm of the hypotheses or of the goal, so the saturation is complete
//! and runs in polynomial time.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::terms::{BinOp, Sort, TermArena, TermId, TermNode};

/// Toggles for the optional deduction rules.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeductionConfig {
    /// Whole-message recovery from signatures.
    pub unsign_enabled: bool,
    /// Every name of sort `Time` is deducible (timed profile).
    pub time_axiom_enabled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProofRule {
    Axiom,
    TimeAxiom,
    Compose(BinOp),
    FirstProjection,
    SecondProjection,
    SymmetricDecryption,
    AsymmetricDecryption,
    Unsign,
}

impl ProofRule {
    pub fn name(self) -> &'static str {
        match self {
            ProofRule::Axiom => "axiom",
            ProofRule::TimeAxiom => "time-axiom",
            ProofRule::Compose(BinOp::Pair) => "pairing",
            ProofRule::Compose(BinOp::Enc) => "symmetric-encryption",
            ProofRule::Compose(BinOp::Enca) => "asymmetric-encryption",
            ProofRule::Compose(BinOp::Sign) => "signing",
            ProofRule::FirstProjection => "first-projection",
            ProofRule::SecondProjection => "second-projection",
            ProofRule::SymmetricDecryption => "symmetric-decryption",
            ProofRule::AsymmetricDecryption => "asymmetric-decryption",
            ProofRule::Unsign => "unsigning",
        }
    }
}

/// Proof tree for a sequent `T |- u`; the hypotheses `T` are fixed by the
/// query and shared by every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofTree {
    pub conclusion: TermId,
    pub rule: ProofRule,
    pub premises: Vec<ProofTree>,
}

impl ProofTree {
    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(|p| p.size()).sum::<usize>()
    }

    pub fn display(&self, arena: &TermArena) -> String {
        let mut out = String::new();
        self.write(arena, 0, &mut out);
        out
    }

    fn write(&self, arena: &TermArena, depth: usize, out: &mut String) {
        out.push_str(&"  ".repeat(depth));
        out.push_str(&format!("{} [{}]\n", arena.display(self.conclusion), self.rule.name()));
        for p in &self.premises {
            p.write(arena, depth + 1, out);
        }
    }
}

/// Saturation result: for each derivable term in the universe, the rule and
/// premises that first derived it. Premises always precede their conclusion
/// in derivation order, so reconstruction terminates.
struct Saturation {
    derived: HashMap<TermId, (ProofRule, Vec<TermId>)>,
}

fn saturate(
    arena: &TermArena,
    config: DeductionConfig,
    hypotheses: &[TermId],
    universe: &[TermId],
) -> Saturation {
    let mut derived: HashMap<TermId, (ProofRule, Vec<TermId>)> = HashMap::new();
    for &t in hypotheses {
        derived.entry(t).or_insert((ProofRule::Axiom, Vec::new()));
    }
    if config.time_axiom_enabled {
        for &t in universe {
            if let TermNode::Name(_) = arena.node(t) {
                if arena.sort_of(t) == Sort::Time {
                    derived.entry(t).or_insert((ProofRule::TimeAxiom, Vec::new()));
                }
            }
        }
    }

    loop {
        let mut added: Vec<(TermId, (ProofRule, Vec<TermId>))> = Vec::new();
        let known: Vec<TermId> = derived.keys().copied().collect();

        // decompositions of known terms
        for &t in &known {
            match arena.node(t) {
                TermNode::App(BinOp::Pair, a, b) => {
                    if !derived.contains_key(&a) {
                        added.push((a, (ProofRule::FirstProjection, vec![t])));
                    }
                    if !derived.contains_key(&b) {
                        added.push((b, (ProofRule::SecondProjection, vec![t])));
                    }
                }
                TermNode::App(BinOp::Enc, m, k) => {
                    if !derived.contains_key(&m) && derived.contains_key(&k) {
                        added.push((m, (ProofRule::SymmetricDecryption, vec![t, k])));
                    }
                }
                TermNode::App(BinOp::Enca, m, agent) => {
                    let pk = arena.privkey(agent);
                    if !derived.contains_key(&m) && derived.contains_key(&pk) {
                        added.push((m, (ProofRule::AsymmetricDecryption, vec![t, pk])));
                    }
                }
                TermNode::App(BinOp::Sign, m, _) if config.unsign_enabled => {
                    if !derived.contains_key(&m) {
                        added.push((m, (ProofRule::Unsign, vec![t])));
                    }
                }
                _ => {}
            }
        }

        // compositions within the universe
        for &t in universe {
            if derived.contains_key(&t) {
                continue;
            }
            if let TermNode::App(op, a, b) = arena.node(t) {
                if derived.contains_key(&a) && derived.contains_key(&b) {
                    added.push((t, (ProofRule::Compose(op), vec![a, b])));
                }
            }
        }

        let mut changed = false;
        for (t, just) in added {
            if !derived.contains_key(&t) {
                derived.insert(t, just);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    Saturation { derived }
}

fn universe_for(arena: &TermArena, hypotheses: &[TermId], goal: TermId) -> Vec<TermId> {
    let mut all: Vec<TermId> = hypotheses.to_vec();
    all.push(goal);
    arena.subterms_many(&all)
}

/// Does `hypotheses |- goal` hold?
pub fn deducible(
    arena: &TermArena,
    config: DeductionConfig,
    hypotheses: &[TermId],
    goal: TermId,
) -> bool {
    let universe = universe_for(arena, hypotheses, goal);
    let sat = saturate(arena, config, hypotheses, &universe);
    derives_goal(arena, config, &sat, goal)
}

/// The goal may be composable from universe members even when it is not in
/// the universe of a sub-derivation; since the goal is included in the
/// universe here, membership suffices.
fn derives_goal(
    _arena: &TermArena,
    _config: DeductionConfig,
    sat: &Saturation,
    goal: TermId,
) -> bool {
    sat.derived.contains_key(&goal)
}

/// Builds a proof tree for `hypotheses |- goal`, or `None` when the goal is
/// not deducible.
pub fn prove(
    arena: &TermArena,
    config: DeductionConfig,
    hypotheses: &[TermId],
    goal: TermId,
) -> Option<ProofTree> {
    let universe = universe_for(arena, hypotheses, goal);
    let sat = saturate(arena, config, hypotheses, &universe);
    if !sat.derived.contains_key(&goal) {
        return None;
    }
    Some(rebuild(&sat, goal))
}

fn rebuild(sat: &Saturation, goal: TermId) -> ProofTree {
    let (rule, premises) = &sat.derived[&goal];
    ProofTree {
        conclusion: goal,
        rule: *rule,
        premises: premises.iter().map(|&p| rebuild(sat, p)).collect(),
    }
}

/// All terms of the universe `St(hypotheses + extra)` deducible from the
/// hypotheses. Used by the property deciders (hidden keys) and by tests.
pub fn deducible_subterms(
    arena: &TermArena,
    config: DeductionConfig,
    hypotheses: &[TermId],
    extra: &[TermId],
) -> Vec<TermId> {
    let mut all: Vec<TermId> = hypotheses.to_vec();
    all.extend_from_slice(extra);
    let universe = arena.subterms_many(&all);
    let sat = saturate(arena, config, hypotheses, &universe);
    let mut out: Vec<TermId> = universe.into_iter().filter(|t| sat.derived.contains_key(t)).collect();
    out.sort();
    out
}
