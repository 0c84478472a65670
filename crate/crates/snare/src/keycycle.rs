//! Key-cycle and key-ordering properties on solved systems.
//!
//! Keys are atomic names of sort Key. A key is hidden in a ground set when
//! it occurs as a subterm but cannot be deduced. Three properties are
//! decided on the set of messages an attacker can build: a strict key
//! cycle is a cycle in the encrypts relation between hidden keys; the
//! protection-based notion asks for a strict partial order under which
//! every plain-text key occurrence is guarded by a smaller hidden key; and
//! ordering compatibility checks the encrypts relation against a given
//! order. Evaluating any of them on one distinguished solution of the
//! solved system suffices: hidden keys and encrypts edges are the same for
//! every solution.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::constraints::{DedSystem, SystemError};
use crate::deduction::{deducible_subterms, DeductionConfig};
use crate::terms::{BinOp, Position, Sort, TermArena, TermId, TermNode};

/// Relation between a key and the payload under which it counts as
/// encrypted: plain subterm, or reachable through pairs and payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rho1 {
    Subterm,
    Guarded,
}

#[derive(Debug, Clone, Copy)]
pub struct KeyCycleConfig {
    pub rho1: Rho1,
    pub deduction: DeductionConfig,
}

impl Default for KeyCycleConfig {
    fn default() -> Self {
        KeyCycleConfig { rho1: Rho1::Guarded, deduction: DeductionConfig::default() }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyCycleError {
    #[error("message list mentions variables outside the system")]
    UnboundVariables,
    #[error("system knowledge is not contained in the message list")]
    MissingKnowledge,
    #[error("ordering is not a strict partial order")]
    NotStrict,
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptsGraph {
    /// Hidden keys, ascending by identity.
    pub nodes: Vec<TermId>,
    /// Edges k -> k': k is the encryption key of a reachable ciphertext
    /// whose payload contains k'.
    pub edges: Vec<(TermId, TermId)>,
}

impl EncryptsGraph {
    fn successors(&self, k: TermId) -> impl Iterator<Item = TermId> + '_ {
        self.edges.iter().filter(move |(a, _)| *a == k).map(|(_, b)| *b)
    }
}

#[derive(Debug, Clone)]
pub struct StrictCycleVerdict {
    pub holds: bool,
    pub hidden: Vec<TermId>,
    pub graph: EncryptsGraph,
    /// Nodes of one witness cycle, in edge order, when `holds`.
    pub cycle: Vec<TermId>,
    pub ops: usize,
}

#[derive(Debug, Clone)]
pub struct KeyCycleVerdict {
    pub holds: bool,
    pub hidden: Vec<TermId>,
    /// Keys ordered away by the protection fixpoint.
    pub orderable: Vec<TermId>,
    /// Keys the fixpoint cannot order, each with one plain-text occurrence
    /// none of the orderable keys protects.
    pub stuck: Vec<(TermId, Option<(usize, Position)>)>,
    pub ops: usize,
}

#[derive(Debug, Clone)]
pub struct OrderingVerdict {
    pub holds: bool,
    pub hidden: Vec<TermId>,
    pub graph: EncryptsGraph,
    /// An edge k -> k' with k' at or below k in the given order.
    pub violation: Option<(TermId, TermId)>,
    pub ops: usize,
}

/// Keys occurring in the set that the set does not reveal.
pub fn hidden_keys(arena: &TermArena, config: DeductionConfig, s: &[TermId]) -> Vec<TermId> {
    let known: BTreeSet<TermId> =
        deducible_subterms(arena, config, s, &[]).into_iter().collect();
    arena
        .subterms_many(s)
        .into_iter()
        .filter(|&t| arena.is_name(t) && arena.sort_of(t) == Sort::Key && !known.contains(&t))
        .collect()
}

/// Subterms reachable from the roots through pair components and payloads
/// of symmetric encryptions whose key is not blocked.
fn payload_reachable(
    arena: &TermArena,
    roots: &[TermId],
    blocked: &BTreeSet<TermId>,
    ops: &mut usize,
) -> BTreeSet<TermId> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<TermId> = roots.to_vec();
    while let Some(t) = stack.pop() {
        if !seen.insert(t) {
            continue;
        }
        *ops += 1;
        match arena.node(t) {
            TermNode::App(BinOp::Pair, a, b) => {
                stack.push(a);
                stack.push(b);
            }
            TermNode::App(BinOp::Enc, a, k) => {
                if !blocked.contains(&k) {
                    stack.push(a);
                }
            }
            _ => {}
        }
    }
    seen
}

/// Subterm universe members related to `target` by rho1, computed bottom-up
/// (children are interned before parents, so ascending identity order works).
fn rho1_holders(
    arena: &TermArena,
    rho1: Rho1,
    universe: &[TermId],
    target: TermId,
    ops: &mut usize,
) -> BTreeSet<TermId> {
    let mut yes = BTreeSet::new();
    for &u in universe {
        *ops += 1;
        let hit = u == target
            || match (rho1, arena.node(u)) {
                (Rho1::Guarded, TermNode::App(BinOp::Pair, a, b)) => {
                    yes.contains(&a) || yes.contains(&b)
                }
                (Rho1::Guarded, TermNode::App(BinOp::Enc, a, _)) => yes.contains(&a),
                (Rho1::Subterm, TermNode::App(_, a, b)) => yes.contains(&a) || yes.contains(&b),
                (Rho1::Subterm, TermNode::Priv(a)) => yes.contains(&a),
                _ => false,
            };
        if hit {
            yes.insert(u);
        }
    }
    yes
}

fn encrypts_counted(
    arena: &TermArena,
    config: KeyCycleConfig,
    s: &[TermId],
    ops: &mut usize,
) -> EncryptsGraph {
    let hidden = hidden_keys(arena, config.deduction, s);
    *ops += arena.subterms_many(s).len();
    let hidden_set: BTreeSet<TermId> = hidden.iter().copied().collect();
    let reachable = payload_reachable(arena, s, &BTreeSet::new(), ops);
    let universe = arena.subterms_many(s);
    let mut edges = BTreeSet::new();
    for &kp in &hidden {
        let holders = rho1_holders(arena, config.rho1, &universe, kp, ops);
        for &u in &reachable {
            *ops += 1;
            if let TermNode::App(BinOp::Enc, payload, k) = arena.node(u) {
                if hidden_set.contains(&k) && holders.contains(&payload) {
                    edges.insert((k, kp));
                }
            }
        }
    }
    EncryptsGraph { nodes: hidden, edges: edges.into_iter().collect() }
}

/// The encrypts relation of a ground set, restricted to its hidden keys.
pub fn encrypts(arena: &TermArena, config: KeyCycleConfig, s: &[TermId]) -> EncryptsGraph {
    let mut ops = 0;
    encrypts_counted(arena, config, s, &mut ops)
}

/// Whether the occurrence at `q` in `s[index]` sits under the payload of an
/// encryption keyed by `protector`.
pub fn protects(
    arena: &TermArena,
    s: &[TermId],
    index: usize,
    q: &Position,
    protector: TermId,
) -> bool {
    let root = match s.get(index) {
        Some(&t) => t,
        None => return false,
    };
    let mut here = root;
    for (depth, &step) in q.0.iter().enumerate() {
        if step == 1 {
            if let TermNode::App(BinOp::Enc, _, k) = arena.node(here) {
                if k == protector {
                    return true;
                }
            }
        }
        let prefix = Position(q.0[..=depth].to_vec());
        here = match arena.at_position(root, &prefix) {
            Some(t) => t,
            None => return false,
        };
    }
    false
}

fn find_cycle(graph: &EncryptsGraph) -> Option<Vec<TermId>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    fn visit(
        graph: &EncryptsGraph,
        u: TermId,
        color: &mut BTreeMap<TermId, Color>,
        path: &mut Vec<TermId>,
    ) -> Option<Vec<TermId>> {
        color.insert(u, Color::Gray);
        path.push(u);
        for v in graph.successors(u) {
            match color.get(&v).copied().unwrap_or(Color::White) {
                Color::Gray => {
                    let start = path.iter().position(|&n| n == v).unwrap();
                    return Some(path[start..].to_vec());
                }
                Color::White => {
                    if let Some(cycle) = visit(graph, v, color, path) {
                        return Some(cycle);
                    }
                }
                Color::Black => {}
            }
        }
        path.pop();
        color.insert(u, Color::Black);
        None
    }
    let mut color = BTreeMap::new();
    for &n in &graph.nodes {
        if color.get(&n).copied().unwrap_or(Color::White) == Color::White {
            let mut path = Vec::new();
            if let Some(cycle) = visit(graph, n, &mut color, &mut path) {
                return Some(cycle);
            }
        }
    }
    None
}

/// Strict key cycle on a ground set: a cycle among hidden keys in the
/// encrypts relation.
pub fn strict_key_cycle_on(
    arena: &TermArena,
    config: KeyCycleConfig,
    s: &[TermId],
) -> StrictCycleVerdict {
    let mut ops = 0;
    let graph = encrypts_counted(arena, config, s, &mut ops);
    ops += graph.nodes.len() + graph.edges.len();
    let cycle = find_cycle(&graph);
    StrictCycleVerdict {
        holds: cycle.is_some(),
        hidden: graph.nodes.clone(),
        cycle: cycle.unwrap_or_default(),
        graph,
        ops,
    }
}

/// Searches for one plain-text occurrence of `key` no blocked key protects:
/// a payload-descent path crossing only unblocked encryptions.
fn unprotected_occurrence(
    arena: &TermArena,
    s: &[TermId],
    blocked: &BTreeSet<TermId>,
    key: TermId,
) -> Option<(usize, Position)> {
    fn dfs(
        arena: &TermArena,
        t: TermId,
        blocked: &BTreeSet<TermId>,
        key: TermId,
        under_payload: bool,
        path: &mut Vec<u8>,
        seen: &mut BTreeSet<TermId>,
    ) -> bool {
        if t == key && under_payload {
            return true;
        }
        if !seen.insert(t) {
            return false;
        }
        match arena.node(t) {
            TermNode::App(BinOp::Pair, a, b) => {
                path.push(1);
                if dfs(arena, a, blocked, key, under_payload, path, seen) {
                    return true;
                }
                path.pop();
                path.push(2);
                if dfs(arena, b, blocked, key, under_payload, path, seen) {
                    return true;
                }
                path.pop();
                false
            }
            TermNode::App(BinOp::Enc, a, k) if !blocked.contains(&k) => {
                path.push(1);
                if dfs(arena, a, blocked, key, true, path, seen) {
                    return true;
                }
                path.pop();
                false
            }
            _ => false,
        }
    }
    for (i, &root) in s.iter().enumerate() {
        let mut path = Vec::new();
        let mut seen = BTreeSet::new();
        if dfs(arena, root, blocked, key, false, &mut path, &mut seen) {
            return Some((i, Position(path)));
        }
    }
    None
}

/// Protection-based key cycle on a ground set. The fixpoint repeatedly
/// collects the keys whose every plain-text occurrence is protected by an
/// already collected key; a cycle exists iff some hidden key is never
/// collected.
pub fn key_cycle_on(arena: &TermArena, config: KeyCycleConfig, s: &[TermId]) -> KeyCycleVerdict {
    let mut ops = 0;
    let hidden = hidden_keys(arena, config.deduction, s);
    ops += arena.subterms_many(s).len();
    let mut orderable: BTreeSet<TermId> = BTreeSet::new();
    loop {
        let reachable = payload_reachable(arena, s, &orderable, &mut ops);
        let next: BTreeSet<TermId> =
            hidden.iter().copied().filter(|k| !reachable.contains(k)).collect();
        debug_assert!(orderable.is_subset(&next), "protection fixpoint must grow");
        if next == orderable {
            break;
        }
        orderable = next;
    }
    let stuck: Vec<(TermId, Option<(usize, Position)>)> = hidden
        .iter()
        .copied()
        .filter(|k| !orderable.contains(k))
        .map(|k| (k, unprotected_occurrence(arena, s, &orderable, k)))
        .collect();
    KeyCycleVerdict {
        holds: !stuck.is_empty(),
        hidden,
        orderable: orderable.into_iter().collect(),
        stuck,
        ops,
    }
}

/// Transitive closure of the given precedence pairs over the hidden keys,
/// rejecting orders that relate a key to itself.
fn close_order(
    nodes: &[TermId],
    precedes: &[(TermId, TermId)],
) -> Result<BTreeSet<(TermId, TermId)>, KeyCycleError> {
    let mut rel: BTreeSet<(TermId, TermId)> = precedes.iter().copied().collect();
    loop {
        let mut grew = false;
        let pairs: Vec<_> = rel.iter().copied().collect();
        for &(a, b) in &pairs {
            for &(c, d) in &pairs {
                if b == c && rel.insert((a, d)) {
                    grew = true;
                }
            }
        }
        if !grew {
            break;
        }
    }
    for &n in nodes {
        if rel.contains(&(n, n)) {
            return Err(KeyCycleError::NotStrict);
        }
    }
    for &(a, b) in &rel {
        if a == b {
            return Err(KeyCycleError::NotStrict);
        }
    }
    Ok(rel)
}

/// Whether a ground set's encrypts relation breaks the given order: some
/// key encrypts a key at or below it.
pub fn ordering_violation_on(
    arena: &TermArena,
    config: KeyCycleConfig,
    s: &[TermId],
    precedes: &[(TermId, TermId)],
) -> Result<OrderingVerdict, KeyCycleError> {
    let mut ops = 0;
    let graph = encrypts_counted(arena, config, s, &mut ops);
    let order = close_order(&graph.nodes, precedes)?;
    ops += graph.edges.len();
    let violation = graph
        .edges
        .iter()
        .copied()
        .find(|&(k, kp)| kp == k || order.contains(&(kp, k)));
    Ok(OrderingVerdict {
        holds: violation.is_some(),
        hidden: graph.nodes.clone(),
        graph,
        violation,
        ops,
    })
}

fn instantiate(
    arena: &TermArena,
    config: KeyCycleConfig,
    l: &[TermId],
    system: &DedSystem,
) -> Result<Vec<TermId>, KeyCycleError> {
    let sys_vars: BTreeSet<TermId> = system.vars(arena).into_iter().collect();
    if !arena.vars_of_many(l).iter().all(|v| sys_vars.contains(v)) {
        return Err(KeyCycleError::UnboundVariables);
    }
    let l_set: BTreeSet<TermId> = l.iter().copied().collect();
    for c in &system.constraints {
        if !c.lhs.iter().all(|t| l_set.contains(t)) {
            return Err(KeyCycleError::MissingKnowledge);
        }
    }
    let tau = system.tau_solution(arena, config.deduction)?;
    let grounded = tau.apply_many(arena, l);
    debug_assert!(grounded.iter().all(|&t| arena.is_ground(t)));
    Ok(grounded)
}

/// Strict-key-cycle attack for a solved system and message list: some
/// solution makes the attacker-visible messages contain a strict cycle.
pub fn has_strict_key_cycle(
    arena: &TermArena,
    config: KeyCycleConfig,
    l: &[TermId],
    system: &DedSystem,
) -> Result<StrictCycleVerdict, KeyCycleError> {
    let grounded = instantiate(arena, config, l, system)?;
    Ok(strict_key_cycle_on(arena, config, &grounded))
}

/// Protection-based key-cycle attack for a solved system and message list.
pub fn has_key_cycle(
    arena: &TermArena,
    config: KeyCycleConfig,
    l: &[TermId],
    system: &DedSystem,
) -> Result<KeyCycleVerdict, KeyCycleError> {
    let grounded = instantiate(arena, config, l, system)?;
    Ok(key_cycle_on(arena, config, &grounded))
}

/// Key-ordering attack for a solved system and message list: some solution
/// makes the encrypts relation incompatible with the given order.
pub fn violates_key_ordering(
    arena: &TermArena,
    config: KeyCycleConfig,
    l: &[TermId],
    system: &DedSystem,
    precedes: &[(TermId, TermId)],
) -> Result<OrderingVerdict, KeyCycleError> {
    let grounded = instantiate(arena, config, l, system)?;
    ordering_violation_on(arena, config, &grounded, precedes)
}
