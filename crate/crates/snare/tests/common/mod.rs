//! Shared fixtures for the integration suites: an independent ground
//! deduction fixpoint, the key-cycle definitions decided literally by
//! order enumeration, seeded random instances, and the two reference
//! constraint systems the golden tests replay.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use snare::{
    BinOp, DedConstraint, DedSystem, DeductionConfig, RuleApplication, Sort, SortProfile,
    SolveRule, TermArena, TermId,
};
use snare::terms::TermNode;

/// Ground deduction decided from scratch: one joint fixpoint over the
/// subterm universe of the hypotheses, the goal, and any extra domain terms,
/// instead of the library's staged saturation. Variables are opaque, private
/// keys are never composed.
pub fn oracle_closure(
    arena: &TermArena,
    config: DeductionConfig,
    hypotheses: &[TermId],
    goal: Option<TermId>,
) -> BTreeSet<TermId> {
    let extra = match goal {
        Some(g) => arena.subterms(g),
        None => Vec::new(),
    };
    oracle_closure_domain(arena, config, hypotheses, &extra)
}

pub fn oracle_deducible(
    arena: &TermArena,
    config: DeductionConfig,
    hypotheses: &[TermId],
    goal: TermId,
) -> bool {
    oracle_closure(arena, config, hypotheses, Some(goal)).contains(&goal)
}

/// The fixpoint over the hypotheses' subterms extended by an explicit
/// domain, answering all membership queries for the domain at once. The
/// domain is assumed closed under subterms.
pub fn oracle_closure_domain(
    arena: &TermArena,
    config: DeductionConfig,
    hypotheses: &[TermId],
    domain: &[TermId],
) -> BTreeSet<TermId> {
    let mut universe = arena.subterms_many(hypotheses);
    universe.extend_from_slice(domain);
    universe.sort();
    universe.dedup();
    let mut known: BTreeSet<TermId> = hypotheses.iter().copied().collect();
    if config.time_axiom_enabled {
        known.extend(
            universe
                .iter()
                .copied()
                .filter(|&t| arena.is_name(t) && arena.sort_of(t) == Sort::Time),
        );
    }
    loop {
        let mut grew = false;
        for &t in &universe {
            if known.contains(&t) {
                match arena.node(t) {
                    TermNode::App(BinOp::Pair, a, b) => {
                        grew |= known.insert(a);
                        grew |= known.insert(b);
                    }
                    TermNode::App(BinOp::Enc, m, k) if known.contains(&k) => {
                        grew |= known.insert(m);
                    }
                    TermNode::App(BinOp::Enca, m, agent)
                        if known.contains(&arena.privkey(agent)) =>
                    {
                        grew |= known.insert(m);
                    }
                    TermNode::App(BinOp::Sign, m, _) if config.unsign_enabled => {
                        grew |= known.insert(m);
                    }
                    _ => {}
                }
            } else if let TermNode::App(_, a, b) = arena.node(t) {
                if known.contains(&a) && known.contains(&b) {
                    known.insert(t);
                    grew = true;
                }
            }
        }
        if !grew {
            return known;
        }
    }
}

/// Membership of a query in a closed deduction set: already present, or
/// composed from present parts. Complete whenever the set is a closure over
/// a domain covering the hypotheses' subterms, since decompositions never
/// leave that domain.
pub fn deducible_via(arena: &TermArena, closure: &BTreeSet<TermId>, goal: TermId) -> bool {
    closure.contains(&goal)
        || match arena.node(goal) {
            TermNode::App(_, a, b) => {
                deducible_via(arena, closure, a) && deducible_via(arena, closure, b)
            }
            _ => false,
        }
}

/// Key-sorted names occurring in the set but not derivable from it.
pub fn oracle_hidden_keys(
    arena: &TermArena,
    config: DeductionConfig,
    s: &[TermId],
) -> Vec<TermId> {
    let known = oracle_closure(arena, config, s, None);
    arena
        .subterms_many(s)
        .into_iter()
        .filter(|&t| arena.is_name(t) && arena.sort_of(t) == Sort::Key && !known.contains(&t))
        .collect()
}

/// Positions a payload-visibility walk reaches: pair components and payloads
/// of symmetric encryptions, never key slots or other operators. Records,
/// per occurrence of `key` found under at least one encryption, the set of
/// keys whose payloads enclose it.
pub fn plaintext_protectors(arena: &TermArena, s: &[TermId], key: TermId) -> Vec<BTreeSet<TermId>> {
    fn walk(
        arena: &TermArena,
        t: TermId,
        key: TermId,
        above: &mut Vec<TermId>,
        out: &mut Vec<BTreeSet<TermId>>,
    ) {
        if t == key && !above.is_empty() {
            out.push(above.iter().copied().collect());
        }
        match arena.node(t) {
            TermNode::App(BinOp::Pair, a, b) => {
                walk(arena, a, key, above, out);
                walk(arena, b, key, above, out);
            }
            TermNode::App(BinOp::Enc, m, k) => {
                above.push(k);
                walk(arena, m, key, above, out);
                above.pop();
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    for &root in s {
        let mut above = Vec::new();
        walk(arena, root, key, &mut above, &mut out);
    }
    out
}

/// Every strict partial order on `0..n`, as transitively closed edge sets.
/// Enumerates the three states of each unordered pair and keeps the
/// assignments that are transitive; irreflexivity is checked on the closure.
pub fn strict_partial_orders(n: usize) -> Vec<BTreeSet<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let mut out = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    fn recurse(
        n: usize,
        pairs: &[(usize, usize)],
        at: usize,
        edges: &mut Vec<(usize, usize)>,
        out: &mut Vec<BTreeSet<(usize, usize)>>,
    ) {
        if at == pairs.len() {
            let mut rel: BTreeSet<(usize, usize)> = edges.iter().copied().collect();
            loop {
                let grown: Vec<(usize, usize)> = rel
                    .iter()
                    .flat_map(|&(a, b)| {
                        rel.iter().filter(move |&&(c, _)| c == b).map(move |&(_, d)| (a, d))
                    })
                    .collect();
                let before = rel.len();
                rel.extend(grown);
                if rel.len() == before {
                    break;
                }
            }
            if (0..n).all(|i| !rel.contains(&(i, i))) {
                out.push(rel);
            }
            return;
        }
        let (i, j) = pairs[at];
        recurse(n, pairs, at + 1, edges, out);
        edges.push((i, j));
        recurse(n, pairs, at + 1, edges, out);
        edges.pop();
        edges.push((j, i));
        recurse(n, pairs, at + 1, edges, out);
        edges.pop();
    }
    recurse(n, &pairs, 0, &mut edges, &mut out);
    out.sort();
    out.dedup();
    out
}

/// Protection-based key cycle decided literally: the set has a cycle on its
/// hidden keys unless some strict partial order ranks, for every hidden key
/// and every occurrence of it under an encryption payload, a strictly
/// smaller hidden key among the keys protecting that occurrence.
pub fn oracle_key_cycle(arena: &TermArena, config: DeductionConfig, s: &[TermId]) -> bool {
    let hidden = oracle_hidden_keys(arena, config, s);
    let hidden_set: BTreeSet<TermId> = hidden.iter().copied().collect();
    let mut demands: Vec<(usize, BTreeSet<usize>)> = Vec::new();
    for (ki, &k) in hidden.iter().enumerate() {
        for protectors in plaintext_protectors(arena, s, k) {
            let options: BTreeSet<usize> = protectors
                .intersection(&hidden_set)
                .map(|p| hidden.iter().position(|&h| h == *p).unwrap())
                .collect();
            if options.is_empty() {
                return true;
            }
            demands.push((ki, options));
        }
    }
    if demands.is_empty() {
        return false;
    }
    let protected = |order: &BTreeSet<(usize, usize)>| {
        demands
            .iter()
            .all(|(k, options)| options.iter().any(|&p| order.contains(&(p, *k))))
    };
    !strict_partial_orders(hidden.len()).iter().any(protected)
}

/// Subterms visible through pair components and encryption payloads,
/// including the root itself.
fn payload_visible(arena: &TermArena, t: TermId, out: &mut BTreeSet<TermId>) {
    if !out.insert(t) {
        return;
    }
    match arena.node(t) {
        TermNode::App(BinOp::Pair, a, b) => {
            payload_visible(arena, a, out);
            payload_visible(arena, b, out);
        }
        TermNode::App(BinOp::Enc, m, _) => payload_visible(arena, m, out),
        _ => {}
    }
}

/// The literal encrypts relation on hidden keys: k relates to k' when some
/// visible encryption under k has k' in its payload, with the payload
/// occurrence read through the chosen relation.
pub fn oracle_encrypts(
    arena: &TermArena,
    config: DeductionConfig,
    payload_subterm: bool,
    s: &[TermId],
) -> BTreeSet<(TermId, TermId)> {
    let hidden: BTreeSet<TermId> = oracle_hidden_keys(arena, config, s).into_iter().collect();
    let mut visible = BTreeSet::new();
    for &root in s {
        payload_visible(arena, root, &mut visible);
    }
    let mut edges = BTreeSet::new();
    for &t in &visible {
        if let TermNode::App(BinOp::Enc, payload, k) = arena.node(t) {
            if !hidden.contains(&k) {
                continue;
            }
            let inside: BTreeSet<TermId> = if payload_subterm {
                arena.subterms(payload).into_iter().collect()
            } else {
                let mut seen = BTreeSet::new();
                payload_visible(arena, payload, &mut seen);
                seen
            };
            for &kp in inside.intersection(&hidden) {
                edges.insert((k, kp));
            }
        }
    }
    edges
}

/// Cycle test by plain reachability over the edge list.
pub fn has_directed_cycle(edges: &BTreeSet<(TermId, TermId)>) -> bool {
    let nodes: BTreeSet<TermId> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    let mut reach = edges.clone();
    loop {
        let grown: Vec<(TermId, TermId)> = reach
            .iter()
            .flat_map(|&(a, b)| {
                reach.iter().filter(move |&&(c, _)| c == b).map(move |&(_, d)| (a, d))
            })
            .collect();
        let before = reach.len();
        reach.extend(grown);
        if reach.len() == before {
            break;
        }
    }
    nodes.iter().any(|&n| reach.contains(&(n, n)))
}

pub fn oracle_strict_cycle(
    arena: &TermArena,
    config: DeductionConfig,
    payload_subterm: bool,
    s: &[TermId],
) -> bool {
    has_directed_cycle(&oracle_encrypts(arena, config, payload_subterm, s))
}

/// A random message world for the key-cycle differentials: a fresh arena
/// with five keys and two plain atoms, and one to three messages built from
/// pairs and symmetric encryptions, occasionally revealing a key outright.
pub struct KeyWorld {
    pub arena: TermArena,
    pub terms: Vec<TermId>,
    pub keys: Vec<TermId>,
}

pub fn random_key_world(rng: &mut ChaCha8Rng) -> KeyWorld {
    let arena = TermArena::new(SortProfile::AtomicKeys);
    let keys: Vec<TermId> = (1..=5)
        .map(|i| arena.name(&format!("k{i}"), Sort::Key).unwrap())
        .collect();
    let atoms = [
        arena.name("a", Sort::Msg).unwrap(),
        arena.name("b", Sort::Msg).unwrap(),
    ];
    fn tree(
        arena: &TermArena,
        rng: &mut ChaCha8Rng,
        keys: &[TermId],
        atoms: &[TermId],
        depth: usize,
    ) -> TermId {
        if depth == 0 || rng.gen_bool(0.3) {
            return if rng.gen_bool(0.6) {
                keys[rng.gen_range(0..keys.len())]
            } else {
                atoms[rng.gen_range(0..atoms.len())]
            };
        }
        let left = tree(arena, rng, keys, atoms, depth - 1);
        if rng.gen_bool(0.5) {
            let right = tree(arena, rng, keys, atoms, depth - 1);
            arena.pair(left, right)
        } else {
            arena.enc(left, keys[rng.gen_range(0..keys.len())]).unwrap()
        }
    }
    let mut terms = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        let depth = rng.gen_range(2..=4);
        terms.push(tree(&arena, rng, &keys, &atoms, depth));
    }
    if rng.gen_bool(0.3) {
        terms.push(keys[rng.gen_range(0..keys.len())]);
    }
    KeyWorld { arena, terms, keys }
}

/// A random valid constraint system on a fresh arena: ground initial
/// knowledge, a growing knowledge chain, and goals that introduce each
/// variable on a right-hand side before any left-hand side uses it.
pub struct SystemWorld {
    pub arena: TermArena,
    pub system: DedSystem,
}

pub fn random_system_world(rng: &mut ChaCha8Rng, max_subterms: usize) -> SystemWorld {
    loop {
        let arena = TermArena::new(SortProfile::Untyped);
        let atoms = [
            arena.name("a", Sort::Msg).unwrap(),
            arena.name("b", Sort::Msg).unwrap(),
            arena.name("k", Sort::Msg).unwrap(),
        ];
        let mut pool: Vec<TermId> = atoms.to_vec();
        let mut lhs: Vec<TermId> = Vec::new();
        for _ in 0..rng.gen_range(1..=2) {
            lhs.push(random_term(&arena, rng, &pool, 2));
        }
        let mut constraints = Vec::new();
        let count = rng.gen_range(1..=3);
        for i in 0..count {
            let mut rhs = random_term(&arena, rng, &pool, 2);
            if i == 0 || rng.gen_bool(0.5) {
                let x = arena
                    .var(&format!("x{i}"), Sort::Msg)
                    .expect("fresh variable");
                rhs = if rng.gen_bool(0.5) || arena.is_var(rhs) {
                    x
                } else if rng.gen_bool(0.5) {
                    arena.pair(rhs, x)
                } else {
                    arena.enc(x, rhs).unwrap()
                };
                pool.push(x);
            }
            constraints.push(DedConstraint::new(lhs.clone(), rhs));
            for _ in 0..rng.gen_range(0..=1) {
                lhs.push(random_term(&arena, rng, &pool, 2));
            }
        }
        let system = DedSystem::new(constraints);
        let metrics = system.metrics(&arena);
        if system.validate(&arena).is_ok()
            && metrics.var_count >= 1
            && metrics.subterm_count <= max_subterms
        {
            return SystemWorld { arena, system };
        }
    }
}

fn random_term(arena: &TermArena, rng: &mut ChaCha8Rng, pool: &[TermId], depth: usize) -> TermId {
    if depth == 0 || rng.gen_bool(0.4) {
        return pool[rng.gen_range(0..pool.len())];
    }
    let left = random_term(arena, rng, pool, depth - 1);
    let right = random_term(arena, rng, pool, depth - 1);
    if rng.gen_bool(0.6) {
        arena.pair(left, right)
    } else {
        arena.enc(left, right).unwrap()
    }
}

/// A random system sized for exhaustive solution enumeration: one or two
/// variables, the second introduced bare so candidate filtering stays cheap,
/// and knowledge kept lean enough that the deducible slice of the ground
/// universe is small.
pub fn random_desk_world(rng: &mut ChaCha8Rng) -> SystemWorld {
    loop {
        let arena = TermArena::new(SortProfile::Untyped);
        let atoms = [
            arena.name("a", Sort::Msg).unwrap(),
            arena.name("b", Sort::Msg).unwrap(),
            arena.name("k", Sort::Msg).unwrap(),
        ];
        let mut pool = atoms.to_vec();
        let mut lhs = vec![random_term(&arena, rng, &pool, 2)];
        if rng.gen_bool(0.4) {
            lhs.push(random_term(&arena, rng, &pool, 1));
        }
        let x0 = arena.var("x0", Sort::Msg).unwrap();
        let rhs0 = if rng.gen_bool(0.5) {
            x0
        } else {
            let t = random_term(&arena, rng, &pool, 1);
            match rng.gen_range(0..3) {
                0 => arena.enc(x0, t).unwrap(),
                1 => arena.pair(t, x0),
                _ => arena.pair(x0, t),
            }
        };
        let mut constraints = vec![DedConstraint::new(lhs.clone(), rhs0)];
        pool.push(x0);
        if rng.gen_bool(0.3) {
            if rng.gen_bool(0.5) {
                lhs.push(random_term(&arena, rng, &pool, 2));
            }
            let x1 = arena.var("x1", Sort::Msg).unwrap();
            constraints.push(DedConstraint::new(lhs.clone(), x1));
            pool.push(x1);
        }
        if rng.gen_bool(0.5) {
            if rng.gen_bool(0.5) {
                lhs.push(random_term(&arena, rng, &pool, 2));
            }
            constraints.push(DedConstraint::new(lhs.clone(), random_term(&arena, rng, &pool, 2)));
        }
        let system = DedSystem::new(constraints);
        if system.validate(&arena).is_err() || system.vars(&arena).is_empty() {
            continue;
        }
        // keep enumeration trees small: each variable constraint may admit
        // at most sixty candidates from the depth-three universe
        let universe = ground_universe(&arena, &atoms, 3);
        let wide = system.constraints.iter().any(|c| {
            !arena.vars_of(c.rhs).is_empty()
                && oracle_closure_domain(&arena, DeductionConfig::default(), &c.lhs, &universe)
                    .intersection(&universe.iter().copied().collect())
                    .count()
                    > 60
        });
        if !wide {
            return SystemWorld { arena, system };
        }
    }
}

/// Ground solutions over a finite universe by brute force: variables bound
/// in canonical constraint order, each constraint checked by the
/// independent fixpoint as soon as its terms are fully instantiated.
pub fn oracle_solutions(
    arena: &TermArena,
    config: DeductionConfig,
    system: &DedSystem,
    universe: &[TermId],
) -> BTreeSet<Vec<(TermId, TermId)>> {
    let vars = system.vars(arena);
    // one closure per distinct instantiated knowledge set instead of one
    // fixpoint per candidate; queries outside the domain fall back to the
    // composition test
    let mut cache: HashMap<Vec<TermId>, BTreeSet<TermId>> = HashMap::new();
    let mut check = |lhs: &[TermId], rhs: TermId| {
        let closure = cache
            .entry(lhs.to_vec())
            .or_insert_with(|| oracle_closure_domain(arena, config, lhs, universe));
        deducible_via(arena, closure, rhs)
    };
    let ground_ok = system
        .constraints
        .iter()
        .filter(|c| constraint_vars(arena, c).is_empty())
        .all(|c| check(&c.lhs, c.rhs));
    let mut out = BTreeSet::new();
    if !ground_ok {
        return out;
    }
    enumerate_solutions(
        arena,
        universe,
        &vars,
        &snare::Subst::identity(),
        &mut check,
        &system.constraints,
        &mut out,
    );
    out
}

fn constraint_vars(arena: &TermArena, c: &DedConstraint) -> Vec<TermId> {
    let mut terms = c.lhs.clone();
    terms.push(c.rhs);
    arena.vars_of_many(&terms)
}

/// Solutions represented by the solver's branches, restricted to the
/// universe: for every solved branch, ground completions of its residual
/// system are enumerated with the library's deduction engine and composed
/// with the branch substitution.
pub fn branch_solutions(
    arena: &TermArena,
    strategy: &snare::StrategyConfig,
    system: &DedSystem,
    universe: &[TermId],
) -> BTreeSet<Vec<(TermId, TermId)>> {
    let root_vars = system.vars(arena);
    let universe_set: BTreeSet<TermId> = universe.iter().copied().collect();
    let outcome = snare::solve_all(arena, strategy, system).expect("valid system");
    let mut out = BTreeSet::new();
    let mut cache: HashMap<Vec<TermId>, BTreeSet<TermId>> = HashMap::new();
    for branch in &outcome.branches {
        let mut needed: Vec<TermId> = branch.system.vars(arena);
        for &v in &root_vars {
            needed.extend(arena.vars_of(branch.subst.apply(arena, v)));
        }
        needed.sort();
        needed.dedup();
        // the library answers bulk deducibility over the whole universe once
        // per instantiated knowledge set
        let mut check = |lhs: &[TermId], rhs: TermId| {
            let closure = cache.entry(lhs.to_vec()).or_insert_with(|| {
                snare::deduction::deducible_subterms(arena, strategy.deduction, lhs, universe)
                    .into_iter()
                    .collect()
            });
            deducible_via(arena, closure, rhs)
        };
        if !branch
            .system
            .constraints
            .iter()
            .filter(|c| constraint_vars(arena, c).is_empty())
            .all(|c| check(&c.lhs, c.rhs))
        {
            continue;
        }
        let mut completions = BTreeSet::new();
        enumerate_solutions(
            arena,
            universe,
            &needed,
            &snare::Subst::identity(),
            &mut check,
            &branch.system.constraints,
            &mut completions,
        );
        for completion in completions {
            let rho = snare::Subst::from_pairs(completion);
            let solution: Vec<(TermId, TermId)> = root_vars
                .iter()
                .map(|&v| (v, rho.apply(arena, branch.subst.apply(arena, v))))
                .collect();
            if solution.iter().all(|&(_, t)| universe_set.contains(&t)) {
                out.insert(solution);
            }
        }
    }
    out
}

/// Depth-first assignment of universe values to the variables, pruning on
/// the first instantiated constraint the deducibility check rejects.
fn enumerate_solutions(
    arena: &TermArena,
    universe: &[TermId],
    vars: &[TermId],
    partial: &snare::Subst,
    check: &mut dyn FnMut(&[TermId], TermId) -> bool,
    constraints: &[DedConstraint],
    out: &mut BTreeSet<Vec<(TermId, TermId)>>,
) {
    let ready = |partial: &snare::Subst, bound_extra: Option<TermId>, c: &DedConstraint| {
        constraint_vars(arena, c)
            .iter()
            .all(|&v| partial.get(v).is_some() || bound_extra == Some(v))
    };
    match vars.split_first() {
        None => {
            out.insert(partial.iter().collect());
        }
        Some((&x, rest)) => {
            // constraints instantiated exactly when x gets its value
            let due: Vec<&DedConstraint> = constraints
                .iter()
                .filter(|c| !ready(partial, None, c) && ready(partial, Some(x), c))
                .collect();
            for &candidate in universe {
                let mut next = partial.clone();
                next.insert(x, candidate);
                let ok = due.iter().all(|c| {
                    let lhs = next.apply_many(arena, &c.lhs);
                    let rhs = next.apply(arena, c.rhs);
                    check(&lhs, rhs)
                });
                if ok {
                    enumerate_solutions(arena, universe, rest, &next, check, constraints, out);
                }
            }
        }
    }
}

/// All ground terms over the atoms built from pairs and symmetric
/// encryptions, up to the given constructor depth. Atoms have depth one.
pub fn ground_universe(arena: &TermArena, atoms: &[TermId], depth: usize) -> Vec<TermId> {
    let mut layers: Vec<Vec<TermId>> = vec![atoms.to_vec()];
    for _ in 1..depth {
        let below: Vec<TermId> = layers.iter().flatten().copied().collect();
        let mut next = Vec::new();
        for &a in &below {
            for &b in &below {
                next.push(arena.pair(a, b));
                next.push(arena.enc(a, b).unwrap());
            }
        }
        next.sort();
        next.dedup();
        let seen: BTreeSet<TermId> = below.into_iter().collect();
        next.retain(|t| !seen.contains(t));
        layers.push(next);
    }
    let mut out: Vec<TermId> = layers.into_iter().flatten().collect();
    out.sort();
    out.dedup();
    out
}

/// The two-constraint reference system whose six-step reduction the golden
/// test replays: knowledge T1 = {a, <enca(k1,a), enca(k2,a)>}, T2 adds
/// enc(y,x); goals <enca(x,a), enca(y,a)> then k1.
pub struct WorkedExample {
    pub arena: TermArena,
    pub system: DedSystem,
    pub t1: Vec<TermId>,
    pub x: TermId,
    pub y: TermId,
    pub k1: TermId,
}

pub fn worked_example() -> WorkedExample {
    let arena = TermArena::new(SortProfile::Untyped);
    let a = arena.name("a", Sort::Msg).unwrap();
    let k1 = arena.name("k1", Sort::Msg).unwrap();
    let k2 = arena.name("k2", Sort::Msg).unwrap();
    let x = arena.var("x", Sort::Msg).unwrap();
    let y = arena.var("y", Sort::Msg).unwrap();
    let ek1 = arena.enca(k1, a).unwrap();
    let ek2 = arena.enca(k2, a).unwrap();
    let t1 = vec![a, arena.pair(ek1, ek2)];
    let mut t2 = t1.clone();
    t2.push(arena.enc(y, x).unwrap());
    let goal1 = arena.pair(arena.enca(x, a).unwrap(), arena.enca(y, a).unwrap());
    let system = DedSystem::new(vec![
        DedConstraint::new(t1.clone(), goal1),
        DedConstraint::new(t2, k1),
    ]);
    WorkedExample { arena, system, t1, x, y, k1 }
}

/// The chained-encryption family whose unmemoized reduction has a branch of
/// length 3(2^n - 1): knowledge starts at {enc(a,k0)} and gains one
/// enc(<x_{i-1}, <x_{i-1}, a>>, k_i) per level, goals enc(x_i, k_i), with a
/// final constraint on x_n over the knowledge extended by a.
pub struct FamilyWorld {
    pub arena: TermArena,
    pub system: DedSystem,
    pub n: usize,
}

pub fn exponential_family(n: usize) -> FamilyWorld {
    let arena = TermArena::new(SortProfile::Untyped);
    let a = arena.name("a", Sort::Msg).unwrap();
    let keys: Vec<TermId> = (0..=n)
        .map(|i| arena.name(&format!("k{i}"), Sort::Msg).unwrap())
        .collect();
    let vars: Vec<TermId> = (0..=n)
        .map(|i| arena.var(&format!("x{i}"), Sort::Msg).unwrap())
        .collect();
    let mut lhs = vec![arena.enc(a, keys[0]).unwrap()];
    let mut constraints = vec![DedConstraint::new(
        lhs.clone(),
        arena.enc(vars[0], keys[0]).unwrap(),
    )];
    for i in 1..=n {
        let tower = arena.pair(vars[i - 1], arena.pair(vars[i - 1], a));
        lhs.push(arena.enc(tower, keys[i]).unwrap());
        constraints.push(DedConstraint::new(
            lhs.clone(),
            arena.enc(vars[i], keys[i]).unwrap(),
        ));
    }
    lhs.push(a);
    constraints.push(DedConstraint::new(lhs, vars[n]));
    FamilyWorld { arena, system: DedSystem::new(constraints), n }
}

/// The family's final goal after the two-per-level reduction: the system
/// {enc(a,k0)} |- enc(x0,k0) and T |- u_n, where u_0 = x0,
/// u_{i+1} = <u_i, <u_i, a>> and T holds enc(u_i, k_i) for every level plus
/// the atom a. Also returns the rule script that walks the u_n tower one
/// occurrence at a time, whose length is exactly 3(2^n - 1).
pub struct FamilySegment {
    pub arena: TermArena,
    pub system: DedSystem,
    pub script: Vec<RuleApplication>,
    pub finish: Vec<RuleApplication>,
    pub x0: TermId,
    pub big_lhs: Vec<TermId>,
}

pub fn family_segment(n: usize) -> FamilySegment {
    let arena = TermArena::new(SortProfile::Untyped);
    let a = arena.name("a", Sort::Msg).unwrap();
    let keys: Vec<TermId> = (0..=n)
        .map(|i| arena.name(&format!("k{i}"), Sort::Msg).unwrap())
        .collect();
    let x0 = arena.var("x0", Sort::Msg).unwrap();
    let mut towers = vec![x0];
    for i in 1..=n {
        let below = towers[i - 1];
        towers.push(arena.pair(below, arena.pair(below, a)));
    }
    let small_lhs = vec![arena.enc(a, keys[0]).unwrap()];
    let mut big_lhs = small_lhs.clone();
    for i in 1..=n {
        big_lhs.push(arena.enc(towers[i], keys[i]).unwrap());
    }
    big_lhs.push(a);
    let first = DedConstraint::new(small_lhs.clone(), arena.enc(x0, keys[0]).unwrap());
    let system = DedSystem::new(vec![
        first.clone(),
        DedConstraint::new(big_lhs.clone(), towers[n]),
    ]);

    fn walk(
        arena: &TermArena,
        lhs: &[TermId],
        towers: &[TermId],
        a: TermId,
        level: usize,
        out: &mut Vec<RuleApplication>,
    ) {
        if level == 0 {
            return;
        }
        let below = towers[level - 1];
        let sibling = arena.pair(below, a);
        out.push(RuleApplication {
            rule: SolveRule::Split(BinOp::Pair),
            constraint: DedConstraint::new(lhs.to_vec(), towers[level]),
        });
        walk(arena, lhs, towers, a, level - 1, out);
        out.push(RuleApplication {
            rule: SolveRule::Split(BinOp::Pair),
            constraint: DedConstraint::new(lhs.to_vec(), sibling),
        });
        out.push(RuleApplication {
            rule: SolveRule::Drop,
            constraint: DedConstraint::new(lhs.to_vec(), a),
        });
        walk(arena, lhs, towers, a, level - 1, out);
    }
    let mut script = Vec::new();
    walk(&arena, &big_lhs, &towers, a, n, &mut script);

    let enc_a = arena.enc(a, keys[0]).unwrap();
    let subst = snare::Subst::singleton(x0, a);
    let grounded = subst.apply_many(&arena, &big_lhs);
    let finish = vec![
        RuleApplication {
            rule: SolveRule::UnifyRhs { known: enc_a, goal: arena.enc(x0, keys[0]).unwrap() },
            constraint: first,
        },
        RuleApplication {
            rule: SolveRule::Drop,
            constraint: DedConstraint::new(small_lhs, enc_a),
        },
        RuleApplication {
            rule: SolveRule::Drop,
            constraint: DedConstraint::new(grounded, a),
        },
    ];
    FamilySegment { arena, system, script, finish, x0, big_lhs }
}
