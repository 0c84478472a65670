//! Analysis reports: what was checked, whether an attack exists, and for
//! each attack the interleaving, witness substitution, solver trace, and
//! property-specific evidence.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Evidence {
    /// The secret is deducible from the final knowledge.
    Secret { term: String },
    /// Nodes of a strict encryption cycle, in edge order.
    KeyCycle { cycle: Vec<String> },
    /// Hidden keys no protection order can rank, each with a plain-text
    /// occurrence none of the ranked keys protects.
    UnprotectedKeys { keys: Vec<String> },
    /// An encrypts edge incompatible with the required key order.
    OrderingViolation { outer: String, inner: String },
    /// The satisfied disequality formula.
    Formula { formula: String },
    /// Numeric timestamps satisfying the timing constraint.
    Times { assignment: BTreeMap<String, String> },
}

#[derive(Debug, Clone, Serialize)]
pub struct AttackReport {
    /// Event labels `session.step` in execution order.
    pub interleaving: Vec<String>,
    pub witness: BTreeMap<String, String>,
    /// Solver rule applications on the branch the witness came from.
    pub trace: Vec<String>,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub profile: String,
    pub property: String,
    pub strategy: String,
    /// Interleavings analyzed; one system per interleaving.
    pub interleavings: usize,
    /// True when the interleaving cap cut the enumeration short.
    pub truncated: bool,
    pub attack_found: bool,
    pub attacks: Vec<AttackReport>,
}

impl RunReport {
    pub fn machine_readable(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "property: {}", self.property);
        let _ = writeln!(out, "profile: {}", self.profile);
        let _ = writeln!(out, "strategy: {}", self.strategy);
        let _ = writeln!(
            out,
            "interleavings analyzed: {}{}",
            self.interleavings,
            if self.truncated { " (capped)" } else { "" }
        );
        if !self.attack_found {
            let _ = writeln!(out, "no attack found");
            return out;
        }
        for (i, attack) in self.attacks.iter().enumerate() {
            let _ = writeln!(out, "attack {}:", i + 1);
            if attack.interleaving.is_empty() {
                let _ = writeln!(out, "  interleaving: (no events)");
            } else {
                let _ = writeln!(out, "  interleaving: {}", attack.interleaving.join(", "));
            }
            if !attack.witness.is_empty() {
                let _ = writeln!(out, "  witness:");
                for (var, term) in &attack.witness {
                    let _ = writeln!(out, "    {} -> {}", var, term);
                }
            }
            match &attack.evidence {
                Evidence::Secret { term } => {
                    let _ = writeln!(out, "  evidence: secret {} is deducible", term);
                }
                Evidence::KeyCycle { cycle } => {
                    let _ =
                        writeln!(out, "  evidence: key cycle {}", cycle.join(" -> "));
                }
                Evidence::UnprotectedKeys { keys } => {
                    let _ = writeln!(
                        out,
                        "  evidence: no protection order ranks {}",
                        keys.join(", ")
                    );
                }
                Evidence::OrderingViolation { outer, inner } => {
                    let _ = writeln!(
                        out,
                        "  evidence: {} encrypts {}, violating the required order",
                        outer, inner
                    );
                }
                Evidence::Formula { formula } => {
                    let _ = writeln!(out, "  evidence: witness satisfies {}", formula);
                }
                Evidence::Times { assignment } => {
                    let _ = writeln!(out, "  evidence: feasible timing");
                    for (var, value) in assignment {
                        let _ = writeln!(out, "    {} = {}", var, value);
                    }
                }
            }
            if !attack.trace.is_empty() {
                let _ = writeln!(out, "  trace:");
                for step in &attack.trace {
                    let _ = writeln!(out, "    {}", step);
                }
            }
        }
        out
    }
}
