//! Compiling a parsed protocol file: sessions are instantiated with
//! collision-suffixed fresh names and pattern variables, and every
//! admissible interleaving of the receive events becomes one constraint
//! system over the growing attacker knowledge.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::authlogic::Formula;
use crate::constraints::{DedConstraint, DedSystem, SystemError};
use crate::keycycle::Rho1;
use crate::terms::{Sort, SortProfile, TermArena, TermError, TermId};
use crate::timed::{LinearAtom, Relation, TimeDomain, TimedConstraint};

use super::parse::{File, FormulaAst, LinTerm, PropertyAst, RawTerm, RelAst, Rho1Ast, Step};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("unknown role '{0}'")]
    UnknownRole(String),
    #[error("role '{role}' takes {expected} arguments, got {got}")]
    Arity { role: String, expected: usize, got: usize },
    #[error("duplicate session label '{0}'")]
    DuplicateLabel(String),
    #[error("unknown session '{0}'")]
    UnknownSession(String),
    #[error("unknown name '{0}'")]
    UnknownIdent(String),
    #[error("'{0}' exists in several sessions; qualify it with a session label")]
    AmbiguousIdent(String),
    #[error("role '{role}' sends '{ident}' before receiving it")]
    UnboundInSend { role: String, ident: String },
    #[error("bad schedule: {0}")]
    BadSchedule(String),
    #[error("'{0}' is not a time variable")]
    NotTimeVar(String),
    #[error("session references are not allowed inside role definitions")]
    QualifiedInRole,
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// The analysis question, with every term resolved into the arena.
#[derive(Debug, Clone)]
pub enum Property {
    Secrecy(TermId),
    KeyCycle { strict: bool, rho1: Option<Rho1>, extra: Vec<TermId> },
    Ordering { precedes: Vec<(TermId, TermId)>, extra: Vec<TermId> },
    Logic(Formula),
    Timed { domain: TimeDomain, constraint: TimedConstraint },
}

/// One interleaving of the scenario's receive events.
#[derive(Debug, Clone)]
pub struct CompiledSystem {
    /// Event labels `session.step` in execution order.
    pub order: Vec<String>,
    pub system: DedSystem,
    /// Attacker knowledge after the last event, including its replies.
    pub final_knowledge: Vec<TermId>,
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub profile: SortProfile,
    /// Initial attacker knowledge: agent names, corrupted agents' private
    /// keys, scenario extras, and every message sent before any receive.
    pub t0: Vec<TermId>,
    pub systems: Vec<CompiledSystem>,
    pub property: Property,
    pub property_text: String,
    /// True when the interleaving cap cut off the enumeration.
    pub truncated: bool,
}

struct RecvEvent {
    rhs: TermId,
    sends: Vec<TermId>,
}

struct Session {
    label: String,
    /// Fresh names by their role-local base name.
    names: BTreeMap<String, TermId>,
    /// Pattern and timestamp variables by their role-local base name.
    vars: BTreeMap<String, TermId>,
    initial_sends: Vec<TermId>,
    recvs: Vec<RecvEvent>,
}

struct Compiler<'a> {
    arena: &'a TermArena,
    file: &'a File,
    globals: BTreeMap<String, TermId>,
    used_names: BTreeSet<String>,
    used_vars: BTreeSet<String>,
    sessions: Vec<Session>,
    labels: BTreeMap<String, usize>,
}

/// Working state while a single role body is resolved.
struct RoleCtx {
    role: String,
    params: BTreeMap<String, TermId>,
    names: BTreeMap<String, TermId>,
    vars: BTreeMap<String, TermId>,
}

pub fn compile(
    arena: &TermArena,
    file: &File,
    max_interleavings: usize,
) -> Result<Compiled, CompileError> {
    debug_assert_eq!(arena.profile(), file.profile);
    let mut c = Compiler {
        arena,
        file,
        globals: BTreeMap::new(),
        used_names: BTreeSet::new(),
        used_vars: BTreeSet::new(),
        sessions: Vec::new(),
        labels: BTreeMap::new(),
    };

    let mut t0 = Vec::new();
    for &(sort, ref name) in &file.sort_names {
        let id = arena.name(name, sort)?;
        c.globals.insert(name.clone(), id);
        c.used_names.insert(name.clone());
    }
    for agent in &file.agents {
        let id = arena.name(&agent.name, Sort::Msg)?;
        c.globals.insert(agent.name.clone(), id);
        c.used_names.insert(agent.name.clone());
        t0.push(id);
        if agent.corrupt {
            t0.push(arena.privkey(id));
        }
    }

    for decl in &file.scenario.sessions {
        if c.labels.contains_key(&decl.label) {
            return Err(CompileError::DuplicateLabel(decl.label.clone()));
        }
        let session = c.instantiate(decl)?;
        c.labels.insert(decl.label.clone(), c.sessions.len());
        c.sessions.push(session);
    }

    for raw in &file.scenario.knows {
        t0.push(c.resolve_scenario(raw)?);
    }
    for s in &c.sessions {
        t0.extend(s.initial_sends.iter().copied());
    }
    t0 = dedup(t0);

    let (orders, truncated) = c.event_orders(max_interleavings)?;
    let property = c.resolve_property()?;

    let mut systems = Vec::new();
    for order in orders {
        let mut knowledge = t0.clone();
        let mut constraints = Vec::new();
        let mut labels = Vec::new();
        for &(s, j) in &order {
            let event = &c.sessions[s].recvs[j];
            constraints.push(DedConstraint::new(knowledge.clone(), event.rhs));
            knowledge.extend(event.sends.iter().copied());
            knowledge = dedup(knowledge);
            labels.push(format!("{}.{}", c.sessions[s].label, j + 1));
        }
        if let Property::Secrecy(secret) = &property {
            constraints.push(DedConstraint::new(knowledge.clone(), *secret));
        }
        let system = DedSystem::new(constraints);
        system.validate(arena)?;
        systems.push(CompiledSystem { order: labels, system, final_knowledge: knowledge });
    }

    Ok(Compiled {
        profile: file.profile,
        t0,
        systems,
        property,
        property_text: file.property_text(),
        truncated,
    })
}

fn dedup(items: Vec<TermId>) -> Vec<TermId> {
    let mut seen = BTreeSet::new();
    items.into_iter().filter(|t| seen.insert(*t)).collect()
}

impl Compiler<'_> {
    /// Allocates an atom under its role-local base name, appending primes
    /// until the text is unused; later sessions get `na'`, `na''`, and so on.
    fn fresh_atom(
        &mut self,
        base: &str,
        sort: Sort,
        is_var: bool,
    ) -> Result<TermId, CompileError> {
        let used = if is_var { &mut self.used_vars } else { &mut self.used_names };
        let mut text = base.to_string();
        while used.contains(&text) {
            text.push('\'');
        }
        used.insert(text.clone());
        let id = if is_var { self.arena.var(&text, sort)? } else { self.arena.name(&text, sort)? };
        Ok(id)
    }

    fn number(&self, text: &str) -> Result<TermId, CompileError> {
        let sort = if self.file.profile == SortProfile::Timed { Sort::Time } else { Sort::Msg };
        Ok(self.arena.name(text, sort)?)
    }

    fn instantiate(&mut self, decl: &super::parse::SessionDecl) -> Result<Session, CompileError> {
        let role = self
            .file
            .roles
            .iter()
            .find(|r| r.name == decl.role)
            .ok_or_else(|| CompileError::UnknownRole(decl.role.clone()))?
            .clone();
        if role.params.len() != decl.args.len() {
            return Err(CompileError::Arity {
                role: role.name.clone(),
                expected: role.params.len(),
                got: decl.args.len(),
            });
        }
        let mut params = BTreeMap::new();
        for (p, a) in role.params.iter().zip(&decl.args) {
            params.insert(p.clone(), self.resolve_scenario(a)?);
        }
        let mut ctx = RoleCtx {
            role: role.name.clone(),
            params,
            names: BTreeMap::new(),
            vars: BTreeMap::new(),
        };
        let mut session = Session {
            label: decl.label.clone(),
            names: BTreeMap::new(),
            vars: BTreeMap::new(),
            initial_sends: Vec::new(),
            recvs: Vec::new(),
        };
        for step in &role.steps {
            match step {
                Step::Fresh(sort, names) => {
                    for n in names {
                        let id = self.fresh_atom(n, *sort, false)?;
                        ctx.names.insert(n.clone(), id);
                    }
                }
                Step::Send(t) => {
                    let id = self.resolve_in_role(&mut ctx, t, false)?;
                    match session.recvs.last_mut() {
                        Some(event) => event.sends.push(id),
                        None => session.initial_sends.push(id),
                    }
                }
                Step::Recv { pattern, at, send } => {
                    let pat = self.resolve_in_role(&mut ctx, pattern, true)?;
                    let rhs = match at {
                        Some(tv) => {
                            let stamp = self.role_time_var(&mut ctx, tv)?;
                            self.arena.pair(pat, stamp)
                        }
                        None => pat,
                    };
                    let mut sends = Vec::new();
                    if let Some(t) = send {
                        sends.push(self.resolve_in_role(&mut ctx, t, false)?);
                    }
                    session.recvs.push(RecvEvent { rhs, sends });
                }
            }
        }
        session.names = ctx.names;
        session.vars = ctx.vars;
        Ok(session)
    }

    fn role_time_var(&mut self, ctx: &mut RoleCtx, base: &str) -> Result<TermId, CompileError> {
        if let Some(&id) = ctx.vars.get(base) {
            if self.arena.sort_of(id) != Sort::Time {
                return Err(CompileError::NotTimeVar(base.to_string()));
            }
            return Ok(id);
        }
        let id = self.fresh_atom(base, Sort::Time, true)?;
        ctx.vars.insert(base.to_string(), id);
        Ok(id)
    }

    fn resolve_in_role(
        &mut self,
        ctx: &mut RoleCtx,
        raw: &RawTerm,
        can_bind: bool,
    ) -> Result<TermId, CompileError> {
        match raw {
            RawTerm::Tuple(items) => {
                let mut ids = Vec::with_capacity(items.len());
                for item in items {
                    ids.push(self.resolve_in_role(ctx, item, can_bind)?);
                }
                Ok(fold_pairs(self.arena, &ids))
            }
            RawTerm::App(op, a, b) => {
                let ra = self.resolve_in_role(ctx, a, can_bind)?;
                let rb = self.resolve_in_role(ctx, b, can_bind)?;
                Ok(self.arena.app(*op, ra, rb)?)
            }
            RawTerm::Priv(a) => {
                let ra = self.resolve_in_role(ctx, a, can_bind)?;
                Ok(self.arena.privkey(ra))
            }
            RawTerm::Number(n) => self.number(n),
            RawTerm::TimeVar(t) => {
                if !can_bind && !ctx.vars.contains_key(t) {
                    return Err(CompileError::UnboundInSend {
                        role: ctx.role.clone(),
                        ident: t.clone(),
                    });
                }
                self.role_time_var(ctx, t)
            }
            RawTerm::Qualified(_, _) => Err(CompileError::QualifiedInRole),
            RawTerm::Ident(n) => {
                if let Some(&id) = ctx.params.get(n) {
                    return Ok(id);
                }
                if let Some(&id) = ctx.names.get(n) {
                    return Ok(id);
                }
                if let Some(&id) = ctx.vars.get(n) {
                    return Ok(id);
                }
                if let Some(&id) = self.globals.get(n) {
                    return Ok(id);
                }
                if !can_bind {
                    return Err(CompileError::UnboundInSend {
                        role: ctx.role.clone(),
                        ident: n.clone(),
                    });
                }
                let id = self.fresh_atom(n, Sort::Msg, true)?;
                ctx.vars.insert(n.clone(), id);
                Ok(id)
            }
        }
    }

    fn lookup_in_session(&self, label: &str, name: &str) -> Result<TermId, CompileError> {
        let &idx = self
            .labels
            .get(label)
            .ok_or_else(|| CompileError::UnknownSession(label.to_string()))?;
        let s = &self.sessions[idx];
        s.names
            .get(name)
            .or_else(|| s.vars.get(name))
            .copied()
            .ok_or_else(|| CompileError::UnknownIdent(format!("{}.{}", label, name)))
    }

    fn search_sessions(&self, name: &str) -> Result<TermId, CompileError> {
        let mut hits = Vec::new();
        for s in &self.sessions {
            if let Some(&id) = s.names.get(name).or_else(|| s.vars.get(name)) {
                hits.push(id);
            }
        }
        hits.sort();
        hits.dedup();
        match hits.len() {
            0 => Err(CompileError::UnknownIdent(name.to_string())),
            1 => Ok(hits[0]),
            _ => Err(CompileError::AmbiguousIdent(name.to_string())),
        }
    }

    /// Resolution outside roles: globals, then a search across sessions by
    /// the role-local base name; binding is not allowed here.
    fn resolve_scenario(&self, raw: &RawTerm) -> Result<TermId, CompileError> {
        match raw {
            RawTerm::Tuple(items) => {
                let mut ids = Vec::with_capacity(items.len());
                for item in items {
                    ids.push(self.resolve_scenario(item)?);
                }
                Ok(fold_pairs(self.arena, &ids))
            }
            RawTerm::App(op, a, b) => {
                let ra = self.resolve_scenario(a)?;
                let rb = self.resolve_scenario(b)?;
                Ok(self.arena.app(*op, ra, rb)?)
            }
            RawTerm::Priv(a) => Ok(self.arena.privkey(self.resolve_scenario(a)?)),
            RawTerm::Number(n) => self.number(n),
            RawTerm::TimeVar(t) => self.search_sessions(t),
            RawTerm::Ident(n) => match self.globals.get(n) {
                Some(&id) => Ok(id),
                None => self.search_sessions(n),
            },
            RawTerm::Qualified(label, name) => self.lookup_in_session(label, name),
        }
    }

    /// Orders receive events: the explicit schedule gives a single order,
    /// otherwise all interleavings are enumerated up to the cap.
    fn event_orders(
        &self,
        cap: usize,
    ) -> Result<(Vec<Vec<(usize, usize)>>, bool), CompileError> {
        if let Some(entries) = &self.file.scenario.schedule {
            let mut next = vec![0usize; self.sessions.len()];
            let mut order = Vec::new();
            for (label, step) in entries {
                let &idx = self
                    .labels
                    .get(label)
                    .ok_or_else(|| CompileError::UnknownSession(label.clone()))?;
                let session = &self.sessions[idx];
                if *step > session.recvs.len() {
                    return Err(CompileError::BadSchedule(format!(
                        "session '{}' has no step {}",
                        label, step
                    )));
                }
                if *step != next[idx] + 1 {
                    return Err(CompileError::BadSchedule(format!(
                        "step {}.{} is out of order",
                        label, step
                    )));
                }
                next[idx] += 1;
                order.push((idx, step - 1));
            }
            return Ok((vec![order], false));
        }

        let counts: Vec<usize> = self.sessions.iter().map(|s| s.recvs.len()).collect();
        let total: usize = counts.iter().sum();
        let mut out = Vec::new();
        let mut truncated = false;
        let mut taken = vec![0usize; counts.len()];
        let mut cur = Vec::with_capacity(total);
        interleave(&counts, &mut taken, &mut cur, total, cap, &mut out, &mut truncated);
        Ok((out, truncated))
    }

    fn resolve_property(&self) -> Result<Property, CompileError> {
        match &self.file.property {
            PropertyAst::Secrecy(t) => Ok(Property::Secrecy(self.resolve_scenario(t)?)),
            PropertyAst::KeyCycle { strict, rho1, on } => {
                let rho1 = rho1.map(|r| match r {
                    Rho1Ast::Guarded => Rho1::Guarded,
                    Rho1Ast::Subterm => Rho1::Subterm,
                });
                let mut extra = Vec::new();
                for t in on {
                    extra.push(self.resolve_scenario(t)?);
                }
                Ok(Property::KeyCycle { strict: *strict, rho1, extra })
            }
            PropertyAst::Ordering { precedes, on } => {
                let mut pairs = Vec::new();
                for (a, b) in precedes {
                    pairs.push((self.resolve_scenario(a)?, self.resolve_scenario(b)?));
                }
                let mut extra = Vec::new();
                for t in on {
                    extra.push(self.resolve_scenario(t)?);
                }
                Ok(Property::Ordering { precedes: pairs, extra })
            }
            PropertyAst::Logic(f) => Ok(Property::Logic(self.resolve_formula(f)?)),
            PropertyAst::Timed { integer, atoms } => {
                let mut conjuncts = Vec::new();
                for atom in atoms {
                    conjuncts.push(self.resolve_time_atom(atom)?);
                }
                let domain =
                    if *integer { TimeDomain::Integer } else { TimeDomain::Rational };
                Ok(Property::Timed { domain, constraint: TimedConstraint::new(conjuncts) })
            }
        }
    }

    fn resolve_formula(&self, f: &FormulaAst) -> Result<Formula, CompileError> {
        Ok(match f {
            FormulaAst::Eq(a, b) => {
                Formula::eq(self.resolve_scenario(a)?, self.resolve_scenario(b)?)
            }
            FormulaAst::Neq(a, b) => {
                Formula::neq(self.resolve_scenario(a)?, self.resolve_scenario(b)?)
            }
            FormulaAst::Not(g) => self.resolve_formula(g)?.negate(),
            FormulaAst::And(g, h) => self.resolve_formula(g)?.and(self.resolve_formula(h)?),
            FormulaAst::Or(g, h) => self.resolve_formula(g)?.or(self.resolve_formula(h)?),
            FormulaAst::False => Formula::Bottom,
        })
    }

    fn resolve_timeref(&self, raw: &RawTerm) -> Result<TermId, CompileError> {
        let id = self.resolve_scenario(raw)?;
        if !self.arena.is_var(id) || self.arena.sort_of(id) != Sort::Time {
            return Err(CompileError::NotTimeVar(self.arena.display(id)));
        }
        Ok(id)
    }

    /// `lhs rel rhs` becomes `sum(coeffs) rel bound` with every variable
    /// moved left and every constant moved right.
    fn resolve_time_atom(
        &self,
        atom: &super::parse::TimeAtomAst,
    ) -> Result<LinearAtom, CompileError> {
        let (lhs, rhs, relation) = match atom.rel {
            RelAst::Lt => (&atom.lhs, &atom.rhs, Relation::Lt),
            RelAst::Le => (&atom.lhs, &atom.rhs, Relation::Le),
            RelAst::Gt => (&atom.rhs, &atom.lhs, Relation::Lt),
            RelAst::Ge => (&atom.rhs, &atom.lhs, Relation::Le),
        };
        let mut coeffs: Vec<(TermId, BigRational)> = Vec::new();
        let mut bound = BigRational::zero();
        let mut side = |terms: &[LinTerm], sign: BigRational| -> Result<(), CompileError> {
            for t in terms {
                let c = &t.coeff * &sign;
                match &t.var {
                    Some(v) => coeffs.push((self.resolve_timeref(v)?, c)),
                    None => bound -= c,
                }
            }
            Ok(())
        };
        side(lhs, BigRational::from_integer(1.into()))?;
        side(rhs, BigRational::from_integer((-1).into()))?;
        Ok(LinearAtom::new(coeffs, relation, bound))
    }
}

fn fold_pairs(arena: &TermArena, items: &[TermId]) -> TermId {
    let mut t = *items.last().expect("tuples have at least two components");
    for &prev in items[..items.len() - 1].iter().rev() {
        t = arena.pair(prev, t);
    }
    t
}

#[allow(clippy::too_many_arguments)]
fn interleave(
    counts: &[usize],
    taken: &mut Vec<usize>,
    cur: &mut Vec<(usize, usize)>,
    total: usize,
    cap: usize,
    out: &mut Vec<Vec<(usize, usize)>>,
    truncated: &mut bool,
) {
    if *truncated {
        return;
    }
    if cur.len() == total {
        if out.len() < cap {
            out.push(cur.clone());
        } else {
            *truncated = true;
        }
        return;
    }
    for s in 0..counts.len() {
        if taken[s] < counts[s] {
            cur.push((s, taken[s]));
            taken[s] += 1;
            interleave(counts, taken, cur, total, cap, out, truncated);
            taken[s] -= 1;
            cur.pop();
            if *truncated {
                return;
            }
        }
    }
}
