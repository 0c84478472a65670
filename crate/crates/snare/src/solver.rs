//! Constraint solving by simplification to solved forms.
//!
//! The solver reduces a deducibility constraint system to a set of solved
//! forms, each paired with the substitution accumulated on the way there;
//! together the solved branches represent every solution of the input
//! system. Two strategies are available. The exhaustive one picks the
//! first unsolved constraint, branches over every rule alternative on it,
//! and memoizes analyzed constraints so that no branch processes the same
//! constraint twice (keeping branch length polynomial). The eager one
//! applies unification steps as soon as any is enabled, branching over a
//! most-general subset of the enabled unifiers plus one committed
//! substitution-free continuation, and otherwise decomposes goals
//! deterministically.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::constraints::{DedConstraint, DedSystem, SystemError};
use crate::deduction::{deducible, DeductionConfig};
use crate::terms::{match_term, mgu, BinOp, Subst, TermArena, TermId, TermNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SolveRule {
    /// Remove a constraint whose goal is deducible from its knowledge set
    /// extended with the variables solved under strictly smaller sets.
    Drop,
    /// Unify a non-variable known subterm with the goal or a goal subterm.
    UnifyRhs { known: TermId, goal: TermId },
    /// Unify two distinct non-variable known subterms.
    UnifyLhs { left: TermId, right: TermId },
    /// Unify the key of a known asymmetric ciphertext with the agent of a
    /// known private key, when at least one of the two is a variable.
    UnifyKey { key: TermId, agent: TermId },
    /// A ground goal that is not deducible: the branch is unsatisfiable.
    Fail,
    /// Decompose a composed goal into its immediate arguments.
    Split(BinOp),
}

impl SolveRule {
    pub fn name(&self) -> &'static str {
        match self {
            SolveRule::Drop => "drop",
            SolveRule::UnifyRhs { .. } => "unify-goal",
            SolveRule::UnifyLhs { .. } => "unify-known",
            SolveRule::UnifyKey { .. } => "unify-key",
            SolveRule::Fail => "fail",
            SolveRule::Split(BinOp::Pair) => "split-pair",
            SolveRule::Split(BinOp::Enc) => "split-enc",
            SolveRule::Split(BinOp::Enca) => "split-enca",
            SolveRule::Split(BinOp::Sign) => "split-sign",
        }
    }
}

/// A rule together with the constraint it targets, as that constraint
/// appeared when the rule fired. Applications are replayable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleApplication {
    pub rule: SolveRule,
    pub constraint: DedConstraint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub app: RuleApplication,
    pub subst: Subst,
}

impl TraceStep {
    pub fn display(&self, arena: &TermArena) -> String {
        if self.subst.is_identity() {
            format!("{}: {}", self.app.rule.name(), self.app.constraint.display(arena))
        } else {
            format!(
                "{} {}: {}",
                self.app.rule.name(),
                self.subst.display(arena),
                self.app.constraint.display(arena)
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    ExhaustiveMemoized,
    EagerSubstitution,
}

/// Scope of the goal side of `UnifyRhs`: the goal itself, or any non-variable
/// subterm of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnifyScope {
    RhsTop,
    RhsSubterm,
}

#[derive(Debug, Clone, Copy)]
pub struct StrategyConfig {
    pub mode: SolveMode,
    pub unify_scope: UnifyScope,
    pub deduction: DeductionConfig,
    pub memo: bool,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            mode: SolveMode::ExhaustiveMemoized,
            unify_scope: UnifyScope::RhsTop,
            deduction: DeductionConfig::default(),
            memo: true,
        }
    }
}

impl StrategyConfig {
    pub fn eager() -> Self {
        StrategyConfig {
            mode: SolveMode::EagerSubstitution,
            unify_scope: UnifyScope::RhsSubterm,
            deduction: DeductionConfig::default(),
            memo: false,
        }
    }

    /// Exhaustive search without memoization; exists to demonstrate the
    /// exponential-length branches that memoization rules out.
    pub fn diagnostic_unmemoized() -> Self {
        StrategyConfig { memo: false, ..StrategyConfig::default() }
    }

    pub fn with_deduction(mut self, deduction: DeductionConfig) -> Self {
        self.deduction = deduction;
        self
    }
}

#[derive(Debug, Clone)]
pub struct SearchState {
    pub active: DedSystem,
    pub memo: BTreeSet<DedConstraint>,
    pub accumulated: Subst,
    pub steps: usize,
    pub trace: Vec<TraceStep>,
    /// Step-count ceiling from the memoized-derivation bound; absent for
    /// variable-free systems where the bound does not apply.
    pub bound: Option<usize>,
}

impl SearchState {
    pub fn root(arena: &TermArena, system: &DedSystem) -> SearchState {
        let metrics = system.metrics(arena);
        let bound =
            if metrics.var_count == 0 { None } else { Some(metrics.step_bound()) };
        SearchState {
            active: system.clone(),
            memo: BTreeSet::new(),
            accumulated: Subst::identity(),
            steps: 0,
            trace: Vec::new(),
            bound,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("targeted constraint is not active")]
    NotActive,
    #[error("side condition violated: {0}")]
    SideCondition(String),
    #[error("terms do not unify")]
    NotUnifiable,
}

#[derive(Debug, Clone)]
pub enum StepResult {
    Continue(SearchState),
    Bottom(SearchState),
}

#[derive(Debug, Clone)]
pub struct SolvedBranch {
    pub system: DedSystem,
    pub subst: Subst,
    pub steps: usize,
    pub trace: Vec<TraceStep>,
}

#[derive(Debug, Clone, Default)]
pub struct SolveOutcome {
    pub branches: Vec<SolvedBranch>,
    pub bottom_count: usize,
    pub stuck_count: usize,
    pub max_branch_steps: usize,
    pub total_steps: usize,
}

fn strictly_included(small: &[TermId], big: &[TermId]) -> bool {
    small.len() < big.len() && {
        let set: BTreeSet<TermId> = big.iter().copied().collect();
        small.iter().all(|t| set.contains(t))
    }
}

/// Knowledge available to the redundancy check on `c`: its own left-hand
/// side plus every variable solved under a strictly smaller one.
fn drop_hypotheses(arena: &TermArena, active: &DedSystem, c: &DedConstraint) -> Vec<TermId> {
    let mut hyps = c.lhs.clone();
    for other in &active.constraints {
        if arena.is_var(other.rhs) && strictly_included(&other.lhs, &c.lhs) {
            hyps.push(other.rhs);
        }
    }
    hyps.sort();
    hyps.dedup();
    hyps
}

fn droppable(arena: &TermArena, cfg: &StrategyConfig, active: &DedSystem, c: &DedConstraint) -> bool {
    !arena.is_var(c.rhs)
        && deducible(arena, cfg.deduction, &drop_hypotheses(arena, active, c), c.rhs)
}

fn ground_constraint(arena: &TermArena, c: &DedConstraint) -> bool {
    arena.is_ground(c.rhs) && c.lhs.iter().all(|&t| arena.is_ground(t))
}

fn failing(arena: &TermArena, cfg: &StrategyConfig, c: &DedConstraint) -> bool {
    ground_constraint(arena, c) && !deducible(arena, cfg.deduction, &c.lhs, c.rhs)
}

/// Applies one rule with full side-condition validation and the
/// memoization bookkeeping `C;D` to `C'∖D; D ∪ (C∖C')`.
pub fn apply_rule(
    arena: &TermArena,
    cfg: &StrategyConfig,
    state: &SearchState,
    app: &RuleApplication,
) -> Result<StepResult, RuleError> {
    let c = &app.constraint;
    let idx = state
        .active
        .constraints
        .iter()
        .position(|k| k == c)
        .ok_or(RuleError::NotActive)?;

    let mut sigma = Subst::identity();
    enum Transform {
        Remove,
        Bottom,
        Split(TermId, TermId),
        Substitute,
    }
    let transform = match app.rule {
        SolveRule::Drop => {
            if arena.is_var(c.rhs) {
                return Err(RuleError::SideCondition("goal is already a variable".into()));
            }
            if !droppable(arena, cfg, &state.active, c) {
                return Err(RuleError::SideCondition("goal is not deducible".into()));
            }
            Transform::Remove
        }
        SolveRule::Fail => {
            if !ground_constraint(arena, c) {
                return Err(RuleError::SideCondition("constraint is not ground".into()));
            }
            if deducible(arena, cfg.deduction, &c.lhs, c.rhs) {
                return Err(RuleError::SideCondition("goal is deducible".into()));
            }
            Transform::Bottom
        }
        SolveRule::UnifyRhs { known, goal } => {
            let stt = arena.subterms_many(&c.lhs);
            if !stt.contains(&known) || arena.is_var(known) {
                return Err(RuleError::SideCondition(
                    "known side is not a non-variable knowledge subterm".into(),
                ));
            }
            if !arena.subterms(c.rhs).contains(&goal) || arena.is_var(goal) {
                return Err(RuleError::SideCondition(
                    "goal side is not a non-variable goal subterm".into(),
                ));
            }
            if known == goal {
                return Err(RuleError::SideCondition("sides are identical".into()));
            }
            sigma = mgu(arena, known, goal).ok_or(RuleError::NotUnifiable)?;
            Transform::Substitute
        }
        SolveRule::UnifyLhs { left, right } => {
            let stt = arena.subterms_many(&c.lhs);
            for t in [left, right] {
                if !stt.contains(&t) || arena.is_var(t) {
                    return Err(RuleError::SideCondition(
                        "side is not a non-variable knowledge subterm".into(),
                    ));
                }
            }
            if left == right {
                return Err(RuleError::SideCondition("sides are identical".into()));
            }
            sigma = mgu(arena, left, right).ok_or(RuleError::NotUnifiable)?;
            Transform::Substitute
        }
        SolveRule::UnifyKey { key, agent } => {
            let stt = arena.subterms_many(&c.lhs);
            let has_cipher = stt.iter().any(|&t| {
                matches!(arena.node(t), TermNode::App(BinOp::Enca, _, k) if k == key)
            });
            if !has_cipher {
                return Err(RuleError::SideCondition(
                    "no known asymmetric ciphertext under this key".into(),
                ));
            }
            if !stt.contains(&arena.privkey(agent)) {
                return Err(RuleError::SideCondition("agent private key is not known".into()));
            }
            if key == agent {
                return Err(RuleError::SideCondition("sides are identical".into()));
            }
            if !arena.is_var(key) && !arena.is_var(agent) {
                return Err(RuleError::SideCondition("neither side is a variable".into()));
            }
            sigma = mgu(arena, key, agent).ok_or(RuleError::NotUnifiable)?;
            Transform::Substitute
        }
        SolveRule::Split(op) => match arena.node(c.rhs) {
            TermNode::App(actual, u, v) if actual == op => Transform::Split(u, v),
            _ => {
                return Err(RuleError::SideCondition(
                    "goal is not an application of the split symbol".into(),
                ))
            }
        },
    };

    let trace_step = TraceStep { app: app.clone(), subst: sigma.clone() };
    let steps = state.steps + 1;

    if matches!(transform, Transform::Bottom) {
        let mut next = state.clone();
        next.active = DedSystem::unsat();
        next.steps = steps;
        next.trace.push(trace_step);
        return Ok(StepResult::Bottom(next));
    }

    let post = match transform {
        Transform::Remove => {
            let mut cs = state.active.constraints.clone();
            cs.remove(idx);
            DedSystem::new(cs)
        }
        Transform::Split(u, v) => {
            let mut cs = state.active.constraints.clone();
            cs.remove(idx);
            cs.push(DedConstraint::new(c.lhs.clone(), u));
            cs.push(DedConstraint::new(c.lhs.clone(), v));
            DedSystem::new(cs)
        }
        Transform::Substitute => state.active.apply(arena, &sigma),
        Transform::Bottom => unreachable!(),
    };

    let pre_set: BTreeSet<DedConstraint> = state.active.constraints.iter().cloned().collect();
    let post_set: BTreeSet<DedConstraint> = post.constraints.iter().cloned().collect();
    let (next_active, next_memo) = if cfg.memo {
        let kept: Vec<DedConstraint> =
            post.constraints.iter().filter(|k| !state.memo.contains(*k)).cloned().collect();
        let mut memo = state.memo.clone();
        for gone in pre_set.difference(&post_set) {
            memo.insert(gone.clone());
        }
        (DedSystem::new(kept), memo)
    } else {
        (post, state.memo.clone())
    };

    debug_assert!(
        next_active.validate(arena).is_ok(),
        "step output violates system invariants: {}",
        next_active.display(arena)
    );
    debug_assert!(
        next_active.constraints.iter().all(|k| !next_memo.contains(k)),
        "active and memoized constraints overlap"
    );
    if cfg.memo {
        if let Some(bound) = state.bound {
            debug_assert!(steps <= bound, "memoized branch exceeded its step bound");
        }
    }

    let mut trace = state.trace.clone();
    trace.push(trace_step);
    Ok(StepResult::Continue(SearchState {
        active: next_active,
        memo: next_memo,
        accumulated: state.accumulated.compose(arena, &sigma),
        steps,
        trace,
        bound: state.bound,
    }))
}

/// All rule instances whose side conditions hold on the system, in the
/// deterministic order: failures, unification rules, redundancy drops,
/// decompositions; within a group by constraint, then by term identity.
pub fn applicable_rules(
    arena: &TermArena,
    cfg: &StrategyConfig,
    system: &DedSystem,
) -> Vec<RuleApplication> {
    let mut apps = Vec::new();
    if system.bottom {
        return apps;
    }
    for c in &system.constraints {
        if failing(arena, cfg, c) {
            apps.push(RuleApplication { rule: SolveRule::Fail, constraint: c.clone() });
        }
    }
    for c in &system.constraints {
        apps.extend(unify_alternatives(arena, cfg, c));
    }
    for c in &system.constraints {
        if droppable(arena, cfg, system, c) {
            apps.push(RuleApplication { rule: SolveRule::Drop, constraint: c.clone() });
        }
    }
    for c in &system.constraints {
        if let TermNode::App(op, _, _) = arena.node(c.rhs) {
            apps.push(RuleApplication { rule: SolveRule::Split(op), constraint: c.clone() });
        }
    }
    apps
}

/// Unification-rule instances on a single constraint, in term-identity order.
fn unify_alternatives(
    arena: &TermArena,
    cfg: &StrategyConfig,
    c: &DedConstraint,
) -> Vec<RuleApplication> {
    let mut alts = Vec::new();
    let stt = arena.subterms_many(&c.lhs);
    let known: Vec<TermId> = stt.iter().copied().filter(|&t| !arena.is_var(t)).collect();

    let goals: Vec<TermId> = match cfg.unify_scope {
        UnifyScope::RhsTop => {
            if arena.is_var(c.rhs) {
                Vec::new()
            } else {
                vec![c.rhs]
            }
        }
        UnifyScope::RhsSubterm => {
            arena.subterms(c.rhs).into_iter().filter(|&t| !arena.is_var(t)).collect()
        }
    };
    for &t in &known {
        for &g in &goals {
            if t != g && mgu(arena, t, g).is_some() {
                alts.push(RuleApplication {
                    rule: SolveRule::UnifyRhs { known: t, goal: g },
                    constraint: c.clone(),
                });
            }
        }
    }
    for (i, &a) in known.iter().enumerate() {
        for &b in &known[i + 1..] {
            if mgu(arena, a, b).is_some() {
                alts.push(RuleApplication {
                    rule: SolveRule::UnifyLhs { left: a, right: b },
                    constraint: c.clone(),
                });
            }
        }
    }
    let mut key_pairs: BTreeSet<(TermId, TermId)> = BTreeSet::new();
    for &t in &stt {
        if let TermNode::App(BinOp::Enca, _, key) = arena.node(t) {
            for &p in &stt {
                if let TermNode::Priv(agent) = arena.node(p) {
                    if key != agent
                        && (arena.is_var(key) || arena.is_var(agent))
                        && mgu(arena, key, agent).is_some()
                    {
                        key_pairs.insert((key, agent));
                    }
                }
            }
        }
    }
    for (key, agent) in key_pairs {
        alts.push(RuleApplication {
            rule: SolveRule::UnifyKey { key, agent },
            constraint: c.clone(),
        });
    }
    alts
}

struct Env<'a> {
    arena: &'a TermArena,
    cfg: StrategyConfig,
    root_vars: Vec<TermId>,
}

impl Env<'_> {
    fn record_solved(&self, state: SearchState, out: &mut SolveOutcome) {
        out.max_branch_steps = out.max_branch_steps.max(state.steps);
        out.total_steps += state.steps;
        out.branches.push(SolvedBranch {
            system: state.active,
            subst: state.accumulated.restrict(&self.root_vars),
            steps: state.steps,
            trace: state.trace,
        });
    }

    fn record_bottom(&self, state: &SearchState, out: &mut SolveOutcome) {
        out.bottom_count += 1;
        out.max_branch_steps = out.max_branch_steps.max(state.steps);
        out.total_steps += state.steps;
    }

    fn record_stuck(&self, state: &SearchState, out: &mut SolveOutcome) {
        out.stuck_count += 1;
        out.max_branch_steps = out.max_branch_steps.max(state.steps);
        out.total_steps += state.steps;
    }
}

/// Enumerates every solved form of the system together with the
/// substitution reaching it. Unsatisfiable branches are counted but not
/// returned; an empty branch list means the system has no solution.
pub fn solve_all(
    arena: &TermArena,
    cfg: &StrategyConfig,
    c0: &DedSystem,
) -> Result<SolveOutcome, SystemError> {
    c0.validate(arena)?;
    let mut out = SolveOutcome::default();
    if c0.bottom {
        out.bottom_count = 1;
        return Ok(out);
    }
    let env = Env { arena, cfg: *cfg, root_vars: c0.vars(arena) };
    let root = SearchState::root(arena, c0);
    match cfg.mode {
        SolveMode::ExhaustiveMemoized => explore_exhaustive(&env, root, &mut out),
        SolveMode::EagerSubstitution => explore_eager(&env, root, true, &mut out),
    }
    Ok(out)
}

fn must_apply(env: &Env, state: &SearchState, app: &RuleApplication) -> StepResult {
    apply_rule(env.arena, &env.cfg, state, app).expect("enumerated rule application must be legal")
}

/// One don't-care pass: fail any ground unsatisfiable constraint, then drop
/// redundant goals. Returns the normalized state, or the terminal bottom.
fn normalize(env: &Env, mut state: SearchState) -> StepResult {
    'outer: loop {
        for c in &state.active.constraints {
            if failing(env.arena, &env.cfg, c) {
                let app = RuleApplication { rule: SolveRule::Fail, constraint: c.clone() };
                match must_apply(env, &state, &app) {
                    StepResult::Bottom(s) => return StepResult::Bottom(s),
                    StepResult::Continue(_) => unreachable!(),
                }
            }
        }
        for c in &state.active.constraints {
            if !env.arena.is_var(c.rhs) && droppable(env.arena, &env.cfg, &state.active, c) {
                let app = RuleApplication { rule: SolveRule::Drop, constraint: c.clone() };
                match must_apply(env, &state, &app) {
                    StepResult::Continue(s) => {
                        state = s;
                        continue 'outer;
                    }
                    StepResult::Bottom(_) => unreachable!(),
                }
            }
        }
        return StepResult::Continue(state);
    }
}

/// Branch alternatives on the first unsolved constraint: unification rules
/// over its knowledge set, then decomposition. A goal that unifies with no
/// non-variable knowledge subterm is decomposed without alternatives.
fn exhaustive_alternatives(env: &Env, active: &DedSystem, target: &DedConstraint) -> Vec<RuleApplication> {
    let _ = active;
    let arena = env.arena;
    let u = target.rhs;
    if let TermNode::App(op, _, _) = arena.node(u) {
        let stt = arena.subterms_many(&target.lhs);
        let top_unifiable = stt
            .iter()
            .any(|&t| !arena.is_var(t) && (t == u || mgu(arena, t, u).is_some()));
        if !top_unifiable {
            return vec![RuleApplication { rule: SolveRule::Split(op), constraint: target.clone() }];
        }
    }
    let mut alts = unify_alternatives(arena, &env.cfg, target);
    if let TermNode::App(op, _, _) = arena.node(u) {
        alts.push(RuleApplication { rule: SolveRule::Split(op), constraint: target.clone() });
    }
    alts
}

fn explore_exhaustive(env: &Env, state: SearchState, out: &mut SolveOutcome) {
    let state = match normalize(env, state) {
        StepResult::Bottom(s) => {
            env.record_bottom(&s, out);
            return;
        }
        StepResult::Continue(s) => s,
    };
    if state.active.is_solved(env.arena) {
        env.record_solved(state, out);
        return;
    }
    let target = state
        .active
        .constraints
        .iter()
        .find(|c| !env.arena.is_var(c.rhs))
        .cloned()
        .expect("unsolved system has a non-variable goal");
    let alts = exhaustive_alternatives(env, &state.active, &target);
    if alts.is_empty() {
        env.record_stuck(&state, out);
        return;
    }
    let mut seen: BTreeSet<(Vec<DedConstraint>, Vec<(TermId, TermId)>)> = BTreeSet::new();
    for app in alts {
        match must_apply(env, &state, &app) {
            StepResult::Continue(child) => {
                let step_subst: Vec<(TermId, TermId)> =
                    child.trace.last().map(|t| t.subst.iter().collect()).unwrap_or_default();
                if seen.insert((child.active.constraints.clone(), step_subst)) {
                    explore_exhaustive(env, child, out);
                }
            }
            StepResult::Bottom(child) => env.record_bottom(&child, out),
        }
    }
}

/// Keeps only most-general unifier candidates: a candidate whose unifier is
/// an instance of an already kept one is covered by that branch.
fn most_general_unifiers(
    env: &Env,
    active: &DedSystem,
    subs: Vec<RuleApplication>,
) -> Vec<RuleApplication> {
    let arena = env.arena;
    let vars = active.vars(arena);
    let mut kept: Vec<(RuleApplication, TermId)> = Vec::new();
    for app in subs {
        let sigma = match &app.rule {
            SolveRule::UnifyRhs { known, goal } => mgu(arena, *known, *goal),
            SolveRule::UnifyLhs { left, right } => mgu(arena, *left, *right),
            SolveRule::UnifyKey { key, agent } => mgu(arena, *key, *agent),
            _ => None,
        }
        .expect("unification alternative must have a unifier");
        let image: Vec<TermId> = vars.iter().map(|&x| sigma.apply(arena, x)).collect();
        let tuple = arena.pair_list(&image);
        if kept.iter().any(|(_, k)| match_term(arena, *k, tuple).is_some()) {
            continue;
        }
        kept.push((app, tuple));
    }
    kept.into_iter().map(|(app, _)| app).collect()
}

fn explore_eager(env: &Env, state: SearchState, allow_unify: bool, out: &mut SolveOutcome) {
    let arena = env.arena;
    let mut state = state;
    let mut allow_unify = allow_unify;
    loop {
        if let Some(c) = state.active.constraints.iter().find(|c| failing(arena, &env.cfg, c)) {
            let app = RuleApplication { rule: SolveRule::Fail, constraint: c.clone() };
            match must_apply(env, &state, &app) {
                StepResult::Bottom(s) => {
                    env.record_bottom(&s, out);
                    return;
                }
                StepResult::Continue(_) => unreachable!(),
            }
        }
        if allow_unify {
            let mut subs = Vec::new();
            for c in &state.active.constraints {
                subs.extend(unify_alternatives(arena, &env.cfg, c));
            }
            if !subs.is_empty() {
                for app in most_general_unifiers(env, &state.active, subs) {
                    match must_apply(env, &state, &app) {
                        StepResult::Continue(child) => explore_eager(env, child, true, out),
                        StepResult::Bottom(child) => env.record_bottom(&child, out),
                    }
                }
                // committed continuation that never unifies again; covers
                // solutions built purely by composition
                allow_unify = false;
                continue;
            }
        }
        if state.active.is_solved(arena) {
            env.record_solved(state, out);
            return;
        }
        let target = state
            .active
            .constraints
            .iter()
            .find(|c| !arena.is_var(c.rhs))
            .cloned()
            .expect("unsolved system has a non-variable goal");
        if droppable(arena, &env.cfg, &state.active, &target) {
            let app = RuleApplication { rule: SolveRule::Drop, constraint: target };
            match must_apply(env, &state, &app) {
                StepResult::Continue(s) => {
                    state = s;
                    continue;
                }
                StepResult::Bottom(_) => unreachable!(),
            }
        }
        if let TermNode::App(op, _, _) = arena.node(target.rhs) {
            let app = RuleApplication { rule: SolveRule::Split(op), constraint: target };
            match must_apply(env, &state, &app) {
                StepResult::Continue(s) => {
                    state = s;
                    continue;
                }
                StepResult::Bottom(_) => unreachable!(),
            }
        }
        env.record_stuck(&state, out);
        return;
    }
}

/// Re-applies a recorded rule sequence from the initial system, validating
/// every side condition again.
pub fn replay(
    arena: &TermArena,
    cfg: &StrategyConfig,
    c0: &DedSystem,
    apps: &[RuleApplication],
) -> Result<SearchState, RuleError> {
    let mut state = SearchState::root(arena, c0);
    for (i, app) in apps.iter().enumerate() {
        match apply_rule(arena, cfg, &state, app)? {
            StepResult::Continue(s) => state = s,
            StepResult::Bottom(s) => {
                if i + 1 != apps.len() {
                    return Err(RuleError::SideCondition(
                        "unsatisfiable before the end of the trace".into(),
                    ));
                }
                state = s;
            }
        }
    }
    Ok(state)
}
