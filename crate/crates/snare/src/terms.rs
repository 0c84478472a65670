//! Hash-consed first-order terms over the cryptographic signature.
//!
//! Terms are built from names and variables (both carrying a sort) with the
//! binary constructors `enc`, `enca`, `sign`, `pair` and the unary `priv`.
//! Agent names double as their own public keys, so asymmetric decryption of
//! `enca(m, a)` requires `priv(a)`.
//!
//! All terms live in a [`TermArena`] and are identified by [`TermId`].
//! Structural equality is pointer equality on ids, and the id order is the
//! interning order, which the solver uses as a deterministic tie-breaker.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sorts attached to names and variables. Compound terms always have sort
/// `Msg`. Every sort is a subsort of `Msg`; `Key` and `Time` are atomic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sort {
    Msg,
    Key,
    Time,
    /// User-declared subsort of `Msg`, by index into the arena's sort table.
    Sub(u16),
}

impl Sort {
    /// Subsort check: everything is below `Msg`, otherwise sorts are rigid.
    pub fn subsort_of(self, other: Sort) -> bool {
        self == other || other == Sort::Msg
    }
}

/// Which sort discipline is enforced at construction time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SortProfile {
    /// Single sort `Msg` everywhere (user subsorts of `Msg` are still allowed).
    #[default]
    Untyped,
    /// Symmetric encryption keys are atomic: the second argument of `enc`
    /// must be a name or variable of sort `Key`.
    AtomicKeys,
    /// Sorts `Msg` and `Time`; timestamps may appear wherever a message may.
    Timed,
}

/// Binary constructors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BinOp {
    /// Symmetric encryption.
    Enc,
    /// Asymmetric encryption; the second argument is the recipient agent.
    Enca,
    /// Signature by the private key of the second argument.
    Sign,
    Pair,
}

impl BinOp {
    pub fn name(self) -> &'static str {
        match self {
            BinOp::Enc => "enc",
            BinOp::Enca => "enca",
            BinOp::Sign => "sign",
            BinOp::Pair => "pair",
        }
    }
}

/// Index of an atom (name or variable) in the arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomId(pub u32);

/// Interned term handle. Ordering follows interning order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TermId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TermNode {
    Name(AtomId),
    Var(AtomId),
    Priv(TermId),
    App(BinOp, TermId, TermId),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("sort violation: {0}")]
    SortViolation(String),
    #[error("sort {0:?} is not available under profile {1:?}")]
    SortUnavailable(Sort, SortProfile),
    #[error("unknown sort `{0}`")]
    UnknownSort(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct AtomInfo {
    text: String,
    sort: Sort,
    is_var: bool,
}

#[derive(Debug, Default)]
struct ArenaInner {
    atoms: Vec<AtomInfo>,
    atom_index: HashMap<(String, Sort, bool), AtomId>,
    nodes: Vec<TermNode>,
    node_index: HashMap<TermNode, TermId>,
    sort_names: Vec<String>,
}

/// Interning table for terms. Reads are concurrent, inserts serialize on a
/// write lock, so an arena can be shared across solver branches.
#[derive(Debug)]
pub struct TermArena {
    profile: SortProfile,
    inner: RwLock<ArenaInner>,
}

impl TermArena {
    pub fn new(profile: SortProfile) -> Self {
        TermArena { profile, inner: RwLock::new(ArenaInner::default()) }
    }

    pub fn profile(&self) -> SortProfile {
        self.profile
    }

    /// Declares a user subsort of `Msg` and returns its handle.
    pub fn declare_sort(&self, name: &str) -> Sort {
        let mut inner = self.inner.write().unwrap();
        if let Some(i) = inner.sort_names.iter().position(|s| s == name) {
            return Sort::Sub(i as u16);
        }
        inner.sort_names.push(name.to_string());
        Sort::Sub((inner.sort_names.len() - 1) as u16)
    }

    pub fn sort_name(&self, sort: Sort) -> String {
        match sort {
            Sort::Msg => "msg".into(),
            Sort::Key => "key".into(),
            Sort::Time => "time".into(),
            Sort::Sub(i) => self.inner.read().unwrap().sort_names[i as usize].clone(),
        }
    }

    fn check_sort_available(&self, sort: Sort) -> Result<(), TermError> {
        let ok = match sort {
            Sort::Msg | Sort::Sub(_) => true,
            Sort::Key => self.profile == SortProfile::AtomicKeys,
            Sort::Time => self.profile == SortProfile::Timed,
        };
        if ok {
            Ok(())
        } else {
            Err(TermError::SortUnavailable(sort, self.profile))
        }
    }

    fn atom(&self, text: &str, sort: Sort, is_var: bool) -> Result<TermId, TermError> {
        self.check_sort_available(sort)?;
        let mut inner = self.inner.write().unwrap();
        let key = (text.to_string(), sort, is_var);
        let atom = match inner.atom_index.get(&key) {
            Some(&a) => a,
            None => {
                let a = AtomId(inner.atoms.len() as u32);
                inner.atoms.push(AtomInfo { text: text.to_string(), sort, is_var });
                inner.atom_index.insert(key, a);
                a
            }
        };
        let node = if is_var { TermNode::Var(atom) } else { TermNode::Name(atom) };
        Ok(Self::intern_locked(&mut inner, node))
    }

    /// Interns a name of the given sort. Calling twice with the same text and
    /// sort yields the same term.
    pub fn name(&self, text: &str, sort: Sort) -> Result<TermId, TermError> {
        self.atom(text, sort, false)
    }

    /// Interns a variable of the given sort.
    pub fn var(&self, text: &str, sort: Sort) -> Result<TermId, TermError> {
        self.atom(text, sort, true)
    }

    fn intern_locked(inner: &mut ArenaInner, node: TermNode) -> TermId {
        match inner.node_index.get(&node) {
            Some(&id) => id,
            None => {
                let id = TermId(inner.nodes.len() as u32);
                inner.nodes.push(node);
                inner.node_index.insert(node, id);
                id
            }
        }
    }

    fn intern(&self, node: TermNode) -> TermId {
        if let Some(&id) = self.inner.read().unwrap().node_index.get(&node) {
            return id;
        }
        Self::intern_locked(&mut self.inner.write().unwrap(), node)
    }

    pub fn app(&self, op: BinOp, left: TermId, right: TermId) -> Result<TermId, TermError> {
        if op == BinOp::Enc && self.profile == SortProfile::AtomicKeys {
            let key_sort = self.sort_of(right);
            if key_sort != Sort::Key {
                return Err(TermError::SortViolation(format!(
                    "enc requires a key of sort key in this profile, got sort {}",
                    self.sort_name(key_sort)
                )));
            }
        }
        Ok(self.intern(TermNode::App(op, left, right)))
    }

    /// Rebuild constructor used on paths that preserve well-sortedness by
    /// construction (substitution application), bypassing profile checks.
    pub(crate) fn app_unchecked(&self, op: BinOp, left: TermId, right: TermId) -> TermId {
        self.intern(TermNode::App(op, left, right))
    }

    pub fn pair(&self, a: TermId, b: TermId) -> TermId {
        self.intern(TermNode::App(BinOp::Pair, a, b))
    }

    pub fn enc(&self, m: TermId, k: TermId) -> Result<TermId, TermError> {
        self.app(BinOp::Enc, m, k)
    }

    pub fn enca(&self, m: TermId, agent: TermId) -> Result<TermId, TermError> {
        self.app(BinOp::Enca, m, agent)
    }

    pub fn sign(&self, m: TermId, agent: TermId) -> Result<TermId, TermError> {
        self.app(BinOp::Sign, m, agent)
    }

    pub fn privkey(&self, agent: TermId) -> TermId {
        self.intern(TermNode::Priv(agent))
    }

    /// Right-assoc pairing of a non-empty list: `<a, <b, c>>`.
    pub fn pair_list(&self, items: &[TermId]) -> TermId {
        assert!(!items.is_empty(), "pair_list needs at least one term");
        let mut acc = *items.last().unwrap();
        for &t in items[..items.len() - 1].iter().rev() {
            acc = self.pair(t, acc);
        }
        acc
    }

    pub fn node(&self, id: TermId) -> TermNode {
        self.inner.read().unwrap().nodes[id.0 as usize]
    }

    pub fn is_var(&self, id: TermId) -> bool {
        matches!(self.node(id), TermNode::Var(_))
    }

    pub fn is_name(&self, id: TermId) -> bool {
        matches!(self.node(id), TermNode::Name(_))
    }

    pub fn sort_of(&self, id: TermId) -> Sort {
        match self.node(id) {
            TermNode::Name(a) | TermNode::Var(a) => {
                self.inner.read().unwrap().atoms[a.0 as usize].sort
            }
            _ => Sort::Msg,
        }
    }

    pub fn atom_text(&self, id: TermId) -> Option<String> {
        match self.node(id) {
            TermNode::Name(a) | TermNode::Var(a) => {
                Some(self.inner.read().unwrap().atoms[a.0 as usize].text.clone())
            }
            _ => None,
        }
    }

    /// All subterms of `t`, including `t`, in ascending id order.
    pub fn subterms(&self, t: TermId) -> Vec<TermId> {
        self.subterms_many(std::slice::from_ref(&t))
    }

    /// Union of subterms of the given terms, deduplicated, ascending id order.
    pub fn subterms_many(&self, ts: &[TermId]) -> Vec<TermId> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<TermId> = ts.to_vec();
        while let Some(t) = stack.pop() {
            if !seen.insert(t) {
                continue;
            }
            match self.node(t) {
                TermNode::Name(_) | TermNode::Var(_) => {}
                TermNode::Priv(a) => stack.push(a),
                TermNode::App(_, a, b) => {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
        seen.into_iter().collect()
    }

    /// Variables occurring in `t`, ascending id order.
    pub fn vars_of(&self, t: TermId) -> Vec<TermId> {
        self.subterms(t).into_iter().filter(|&s| self.is_var(s)).collect()
    }

    pub fn vars_of_many(&self, ts: &[TermId]) -> Vec<TermId> {
        self.subterms_many(ts).into_iter().filter(|&s| self.is_var(s)).collect()
    }

    pub fn is_ground(&self, t: TermId) -> bool {
        self.vars_of(t).is_empty()
    }

    /// Tree size (number of symbol occurrences).
    pub fn tree_size(&self, t: TermId) -> usize {
        let mut memo: HashMap<TermId, usize> = HashMap::new();
        self.tree_size_memo(t, &mut memo)
    }

    fn tree_size_memo(&self, t: TermId, memo: &mut HashMap<TermId, usize>) -> usize {
        if let Some(&n) = memo.get(&t) {
            return n;
        }
        let n = match self.node(t) {
            TermNode::Name(_) | TermNode::Var(_) => 1,
            TermNode::Priv(a) => 1 + self.tree_size_memo(a, memo),
            TermNode::App(_, a, b) => {
                1 + self.tree_size_memo(a, memo) + self.tree_size_memo(b, memo)
            }
        };
        memo.insert(t, n);
        n
    }

    /// All occurrences (tree positions) of `target` within `t`.
    pub fn occurrences(&self, t: TermId, target: TermId) -> Vec<Position> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.walk_occurrences(t, target, &mut path, &mut out);
        out
    }

    fn walk_occurrences(
        &self,
        t: TermId,
        target: TermId,
        path: &mut Vec<u8>,
        out: &mut Vec<Position>,
    ) {
        if t == target {
            out.push(Position(path.clone()));
        }
        match self.node(t) {
            TermNode::Name(_) | TermNode::Var(_) => {}
            TermNode::Priv(a) => {
                path.push(1);
                self.walk_occurrences(a, target, path, out);
                path.pop();
            }
            TermNode::App(_, a, b) => {
                path.push(1);
                self.walk_occurrences(a, target, path, out);
                path.pop();
                path.push(2);
                self.walk_occurrences(b, target, path, out);
                path.pop();
            }
        }
    }

    pub fn at_position(&self, t: TermId, pos: &Position) -> Option<TermId> {
        let mut cur = t;
        for &step in &pos.0 {
            cur = match (self.node(cur), step) {
                (TermNode::Priv(a), 1) => a,
                (TermNode::App(_, a, _), 1) => a,
                (TermNode::App(_, _, b), 2) => b,
                _ => return None,
            };
        }
        Some(cur)
    }

    /// Occurrences of `target` in plain-text position within `t`: positions
    /// reached by descending only through pair components and symmetric
    /// encryption payloads, with at least one payload step. Encryption keys
    /// and asymmetric or signature contents are opaque to this descent.
    pub fn plaintext_occurrences(&self, target: TermId, t: TermId) -> Vec<Position> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.walk_plaintext(t, target, false, &mut path, &mut out);
        out
    }

    /// Set-level variant: pairs of (list index, position within that term).
    pub fn plaintext_occurrences_in_set(
        &self,
        target: TermId,
        terms: &[TermId],
    ) -> Vec<(usize, Position)> {
        let mut out = Vec::new();
        for (i, &t) in terms.iter().enumerate() {
            for p in self.plaintext_occurrences(target, t) {
                out.push((i, p));
            }
        }
        out
    }

    fn walk_plaintext(
        &self,
        t: TermId,
        target: TermId,
        under_enc_payload: bool,
        path: &mut Vec<u8>,
        out: &mut Vec<Position>,
    ) {
        if t == target && under_enc_payload {
            out.push(Position(path.clone()));
        }
        match self.node(t) {
            TermNode::App(BinOp::Pair, a, b) => {
                path.push(1);
                self.walk_plaintext(a, target, under_enc_payload, path, out);
                path.pop();
                path.push(2);
                self.walk_plaintext(b, target, under_enc_payload, path, out);
                path.pop();
            }
            TermNode::App(BinOp::Enc, a, _) => {
                path.push(1);
                self.walk_plaintext(a, target, true, path, out);
                path.pop();
            }
            _ => {}
        }
    }

    /// The guarded subterm relation: the least reflexive-transitive relation
    /// closed under `s <| pair(s, t)`, `s <| pair(t, s)` and
    /// `s <| t  =>  s <| enc(t, k)`. Key positions and the payloads of
    /// `enca`/`sign`/`priv` are not guarded.
    pub fn guarded_subterm(&self, s: TermId, t: TermId) -> bool {
        if s == t {
            return true;
        }
        match self.node(t) {
            TermNode::App(BinOp::Pair, a, b) => {
                self.guarded_subterm(s, a) || self.guarded_subterm(s, b)
            }
            TermNode::App(BinOp::Enc, a, _) => self.guarded_subterm(s, a),
            _ => false,
        }
    }

    /// Renders a term using the canonical surface syntax.
    pub fn display(&self, t: TermId) -> String {
        let mut s = String::new();
        self.write_term(t, &mut s);
        s
    }

    fn write_term(&self, t: TermId, out: &mut String) {
        match self.node(t) {
            TermNode::Name(a) | TermNode::Var(a) => {
                let inner = self.inner.read().unwrap();
                out.push_str(&inner.atoms[a.0 as usize].text);
            }
            TermNode::Priv(a) => {
                out.push_str("priv(");
                self.write_term(a, out);
                out.push(')');
            }
            TermNode::App(BinOp::Pair, a, b) => {
                out.push('<');
                self.write_term(a, out);
                out.push_str(", ");
                self.write_term(b, out);
                out.push('>');
            }
            TermNode::App(op, a, b) => {
                let _ = write!(out, "{}(", op.name());
                self.write_term(a, out);
                out.push_str(", ");
                self.write_term(b, out);
                out.push(')');
            }
        }
    }

    pub fn display_set(&self, ts: &[TermId]) -> String {
        let mut parts: Vec<String> = ts.iter().map(|&t| self.display(t)).collect();
        parts.sort();
        format!("{{{}}}", parts.join(", "))
    }
}

/// Tree position: sequence of 1-based child indexes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Position(pub Vec<u8>);

impl Position {
    pub fn root() -> Self {
        Position(Vec::new())
    }

    pub fn child(&self, i: u8) -> Self {
        let mut p = self.0.clone();
        p.push(i);
        Position(p)
    }

    /// Prefix order: `self <= other` iff `self` is an ancestor (or equal).
    pub fn is_prefix_of(&self, other: &Position) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }
}

impl std::fmt::Display for Position {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_empty() {
            return write!(f, "e");
        }
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

/// Idempotent substitution from variables to terms.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Subst {
    map: BTreeMap<TermId, TermId>,
}

impl Subst {
    pub fn identity() -> Self {
        Subst::default()
    }

    pub fn singleton(var: TermId, term: TermId) -> Self {
        let mut map = BTreeMap::new();
        map.insert(var, term);
        Subst { map }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (TermId, TermId)>) -> Self {
        Subst { map: pairs.into_iter().collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, var: TermId) -> Option<TermId> {
        self.map.get(&var).copied()
    }

    pub fn domain(&self) -> impl Iterator<Item = TermId> + '_ {
        self.map.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TermId, TermId)> + '_ {
        self.map.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn insert(&mut self, var: TermId, term: TermId) {
        self.map.insert(var, term);
    }

    /// Applies the substitution once (the map is treated as simultaneous;
    /// bindings are not re-expanded).
    pub fn apply(&self, arena: &TermArena, t: TermId) -> TermId {
        if self.map.is_empty() {
            return t;
        }
        let mut memo = HashMap::new();
        self.apply_memo(arena, t, &mut memo)
    }

    fn apply_memo(
        &self,
        arena: &TermArena,
        t: TermId,
        memo: &mut HashMap<TermId, TermId>,
    ) -> TermId {
        if let Some(&r) = memo.get(&t) {
            return r;
        }
        let r = match arena.node(t) {
            TermNode::Var(_) => self.map.get(&t).copied().unwrap_or(t),
            TermNode::Name(_) => t,
            TermNode::Priv(a) => {
                let a2 = self.apply_memo(arena, a, memo);
                if a2 == a {
                    t
                } else {
                    arena.privkey(a2)
                }
            }
            TermNode::App(op, a, b) => {
                let a2 = self.apply_memo(arena, a, memo);
                let b2 = self.apply_memo(arena, b, memo);
                if a2 == a && b2 == b {
                    t
                } else {
                    arena.app_unchecked(op, a2, b2)
                }
            }
        };
        memo.insert(t, r);
        r
    }

    pub fn apply_many(&self, arena: &TermArena, ts: &[TermId]) -> Vec<TermId> {
        ts.iter().map(|&t| self.apply(arena, t)).collect()
    }

    /// Composition `self . then`: applying the result equals applying `self`
    /// first and `then` second.
    pub fn compose(&self, arena: &TermArena, then: &Subst) -> Subst {
        let mut map = BTreeMap::new();
        for (&x, &t) in &self.map {
            let t2 = then.apply(arena, t);
            if t2 != x {
                map.insert(x, t2);
            }
        }
        for (&x, &t) in &then.map {
            map.entry(x).or_insert(t);
        }
        Subst { map }
    }

    pub fn restrict(&self, vars: &[TermId]) -> Subst {
        let keep: HashSet<TermId> = vars.iter().copied().collect();
        Subst { map: self.map.iter().filter(|(k, _)| keep.contains(k)).map(|(&k, &v)| (k, v)).collect() }
    }

    pub fn display(&self, arena: &TermArena) -> String {
        let parts: Vec<String> = self
            .map
            .iter()
            .map(|(&x, &t)| format!("{} -> {}", arena.display(x), arena.display(t)))
            .collect();
        format!("{{{}}}", parts.join(", "))
    }
}

/// Most general unifier of `u` and `v` under the arena's sort discipline,
/// or `None` when the terms do not unify. The result is idempotent.
pub fn mgu(arena: &TermArena, u: TermId, v: TermId) -> Option<Subst> {
    mgu_pairs(arena, &[(u, v)])
}

/// Simultaneous unification of a list of equations.
pub fn mgu_pairs(arena: &TermArena, pairs: &[(TermId, TermId)]) -> Option<Subst> {
    // Triangular bindings: var -> term, where the term may mention vars bound
    // later. Resolved to an idempotent map at the end.
    let mut bind: BTreeMap<TermId, TermId> = BTreeMap::new();
    let mut work: Vec<(TermId, TermId)> = pairs.to_vec();

    fn resolve(bind: &BTreeMap<TermId, TermId>, arena: &TermArena, mut t: TermId) -> TermId {
        while arena.is_var(t) {
            match bind.get(&t) {
                Some(&next) => t = next,
                None => break,
            }
        }
        t
    }

    fn occurs(
        bind: &BTreeMap<TermId, TermId>,
        arena: &TermArena,
        var: TermId,
        t: TermId,
    ) -> bool {
        let t = resolve(bind, arena, t);
        if t == var {
            return true;
        }
        match arena.node(t) {
            TermNode::Name(_) | TermNode::Var(_) => false,
            TermNode::Priv(a) => occurs(bind, arena, var, a),
            TermNode::App(_, a, b) => {
                occurs(bind, arena, var, a) || occurs(bind, arena, var, b)
            }
        }
    }

    while let Some((u0, v0)) = work.pop() {
        let u = resolve(&bind, arena, u0);
        let v = resolve(&bind, arena, v0);
        if u == v {
            continue;
        }
        let (un, vn) = (arena.node(u), arena.node(v));
        match (un, vn) {
            (TermNode::Var(_), TermNode::Var(_)) => {
                let su = arena.sort_of(u);
                let sv = arena.sort_of(v);
                if sv.subsort_of(su) {
                    bind.insert(u, v);
                } else if su.subsort_of(sv) {
                    bind.insert(v, u);
                } else {
                    return None;
                }
            }
            (TermNode::Var(_), _) => {
                if !arena.sort_of(v).subsort_of(arena.sort_of(u)) {
                    return None;
                }
                if occurs(&bind, arena, u, v) {
                    return None;
                }
                bind.insert(u, v);
            }
            (_, TermNode::Var(_)) => {
                if !arena.sort_of(u).subsort_of(arena.sort_of(v)) {
                    return None;
                }
                if occurs(&bind, arena, v, u) {
                    return None;
                }
                bind.insert(v, u);
            }
            (TermNode::Name(_), _) | (_, TermNode::Name(_)) => return None,
            (TermNode::Priv(a), TermNode::Priv(b)) => work.push((a, b)),
            (TermNode::App(op1, a1, b1), TermNode::App(op2, a2, b2)) => {
                if op1 != op2 {
                    return None;
                }
                work.push((a1, a2));
                work.push((b1, b2));
            }
            _ => return None,
        }
    }

    // Expand the triangular bindings into an idempotent substitution.
    fn expand(
        bind: &BTreeMap<TermId, TermId>,
        arena: &TermArena,
        t: TermId,
        memo: &mut HashMap<TermId, TermId>,
    ) -> TermId {
        if let Some(&r) = memo.get(&t) {
            return r;
        }
        let r = match arena.node(t) {
            TermNode::Var(_) => match bind.get(&t) {
                Some(&next) => expand(bind, arena, next, memo),
                None => t,
            },
            TermNode::Name(_) => t,
            TermNode::Priv(a) => {
                let a2 = expand(bind, arena, a, memo);
                if a2 == a {
                    t
                } else {
                    arena.privkey(a2)
                }
            }
            TermNode::App(op, a, b) => {
                let a2 = expand(bind, arena, a, memo);
                let b2 = expand(bind, arena, b, memo);
                if a2 == a && b2 == b {
                    t
                } else {
                    arena.app_unchecked(op, a2, b2)
                }
            }
        };
        memo.insert(t, r);
        r
    }

    let mut memo = HashMap::new();
    let mut out = BTreeMap::new();
    for &x in bind.keys() {
        let t = expand(&bind, arena, x, &mut memo);
        if t != x {
            out.insert(x, t);
        }
    }
    Some(Subst { map: out })
}

/// One-way matching: finds `s` with `pattern . s == target`, treating
/// variables of `target` as constants.
pub fn match_term(arena: &TermArena, pattern: TermId, target: TermId) -> Option<Subst> {
    let mut map: BTreeMap<TermId, TermId> = BTreeMap::new();
    let mut work = vec![(pattern, target)];
    while let Some((p, t)) = work.pop() {
        match arena.node(p) {
            TermNode::Var(_) => match map.get(&p) {
                Some(&prev) => {
                    if prev != t {
                        return None;
                    }
                }
                None => {
                    if !arena.sort_of(t).subsort_of(arena.sort_of(p)) {
                        return None;
                    }
                    map.insert(p, t);
                }
            },
            TermNode::Name(_) => {
                if p != t {
                    return None;
                }
            }
            TermNode::Priv(a) => match arena.node(t) {
                TermNode::Priv(b) => work.push((a, b)),
                _ => return None,
            },
            TermNode::App(op1, a1, b1) => match arena.node(t) {
                TermNode::App(op2, a2, b2) if op1 == op2 => {
                    work.push((a1, a2));
                    work.push((b1, b2));
                }
                _ => return None,
            },
        }
    }
    Some(Subst { map })
}
