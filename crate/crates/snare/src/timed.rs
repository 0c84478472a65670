//! Linear timing constraints over variables of sort `Time`: exact
//! feasibility over the rationals (Fourier-Motzkin elimination) and over the
//! integers (per-atom coefficient and bound tightening, then variable
//! elimination with divisibility bookkeeping), plus the joint attack
//! decision with a constraint system. Time and message parts of a witness
//! are independent: the solver fixes the message part, feasibility the time
//! part.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::constraints::{is_solution, DedSystem, SystemError};
use crate::solver::{solve_all, StrategyConfig, TraceStep};
use crate::terms::{Sort, Subst, TermArena, TermId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Lt,
    Le,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
        }
    }
}

/// One conjunct: a rational linear combination of `Time` variables compared
/// against a rational bound. Zero coefficients are dropped on construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearAtom {
    pub coeffs: BTreeMap<TermId, BigRational>,
    pub relation: Relation,
    pub bound: BigRational,
}

impl LinearAtom {
    pub fn new(
        coeffs: impl IntoIterator<Item = (TermId, BigRational)>,
        relation: Relation,
        bound: BigRational,
    ) -> LinearAtom {
        let mut merged: BTreeMap<TermId, BigRational> = BTreeMap::new();
        for (x, c) in coeffs {
            let entry = merged.entry(x).or_insert_with(BigRational::zero);
            *entry += c;
        }
        merged.retain(|_, c| !c.is_zero());
        LinearAtom { coeffs: merged, relation, bound }
    }

    pub fn display(&self, arena: &TermArena) -> String {
        if self.coeffs.is_empty() {
            return format!("0 {} {}", self.relation.symbol(), self.bound);
        }
        let lhs = self
            .coeffs
            .iter()
            .map(|(&x, c)| {
                if c.is_one() {
                    arena.display(x)
                } else {
                    format!("{}*{}", c, arena.display(x))
                }
            })
            .collect::<Vec<_>>()
            .join(" + ");
        format!("{} {} {}", lhs, self.relation.symbol(), self.bound)
    }
}

/// A conjunction of linear atoms. The empty conjunction is trivially
/// feasible.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TimedConstraint {
    pub conjuncts: Vec<LinearAtom>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeDomain {
    #[default]
    Rational,
    Integer,
}

pub type TimeAssignment = BTreeMap<TermId, BigRational>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TimedError {
    #[error("{0} is not a variable of sort time")]
    NotTimeVariable(String),
    #[error("time variable {0} is bound to {1}, which is not a numeric timestamp")]
    NotTimeConstant(String, String),
    #[error("the sort profile does not provide timestamps")]
    SortProfile,
    #[error(transparent)]
    System(#[from] SystemError),
}

impl TimedConstraint {
    pub fn new(conjuncts: Vec<LinearAtom>) -> TimedConstraint {
        TimedConstraint { conjuncts }
    }

    pub fn empty() -> TimedConstraint {
        TimedConstraint::default()
    }

    pub fn vars(&self) -> Vec<TermId> {
        let mut out = BTreeSet::new();
        for atom in &self.conjuncts {
            out.extend(atom.coeffs.keys().copied());
        }
        out.into_iter().collect()
    }

    pub fn validate(&self, arena: &TermArena) -> Result<(), TimedError> {
        for &x in &self.vars() {
            if !arena.is_var(x) || arena.sort_of(x) != Sort::Time {
                return Err(TimedError::NotTimeVariable(arena.display(x)));
            }
        }
        Ok(())
    }

    /// Rewrites the constraint under a substitution produced by solving:
    /// variables may be identified with other `Time` variables or bound to
    /// numeric timestamps, which move into the bound.
    pub fn substitute(
        &self,
        arena: &TermArena,
        subst: &Subst,
    ) -> Result<TimedConstraint, TimedError> {
        let mut conjuncts = Vec::with_capacity(self.conjuncts.len());
        for atom in &self.conjuncts {
            let mut coeffs: Vec<(TermId, BigRational)> = Vec::new();
            let mut bound = atom.bound.clone();
            for (&x, c) in &atom.coeffs {
                let image = subst.apply(arena, x);
                if arena.is_var(image) {
                    coeffs.push((image, c.clone()));
                } else {
                    match time_value(arena, image) {
                        Some(v) => bound -= c * v,
                        None => {
                            return Err(TimedError::NotTimeConstant(
                                arena.display(x),
                                arena.display(image),
                            ))
                        }
                    }
                }
            }
            conjuncts.push(LinearAtom::new(coeffs, atom.relation, bound));
        }
        Ok(TimedConstraint { conjuncts })
    }

    pub fn display(&self, arena: &TermArena) -> String {
        if self.conjuncts.is_empty() {
            return "true".to_string();
        }
        self.conjuncts
            .iter()
            .map(|a| a.display(arena))
            .collect::<Vec<_>>()
            .join("  &  ")
    }
}

/// The numeric value of a ground timestamp, if the term is one.
pub fn time_value(arena: &TermArena, t: TermId) -> Option<BigRational> {
    if !arena.is_name(t) || arena.sort_of(t) != Sort::Time {
        return None;
    }
    parse_rational(&arena.atom_text(t)?)
}

/// Parses `p/q`, decimal, or integer literals into an exact rational.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let s = text.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n = BigInt::from_str(num.trim()).ok()?;
        let d = BigInt::from_str(den.trim()).ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let digits: String = format!("{}{}", int, frac);
        let n = BigInt::from_str(&digits).ok()?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        return Some(BigRational::new(n, d));
    }
    BigInt::from_str(s).ok().map(BigRational::from_integer)
}

/// Exact re-evaluation: every variable of the constraint must be assigned
/// and every conjunct must hold.
pub fn satisfies(assignment: &TimeAssignment, constraint: &TimedConstraint) -> bool {
    for atom in &constraint.conjuncts {
        let mut sum = BigRational::zero();
        for (x, c) in &atom.coeffs {
            match assignment.get(x) {
                Some(v) => sum += c * v,
                None => return false,
            }
        }
        let ok = match atom.relation {
            Relation::Lt => sum < atom.bound,
            Relation::Le => sum <= atom.bound,
        };
        if !ok {
            return false;
        }
    }
    true
}

/// A bound on one variable induced by an atom: `x (<|<=) expr` or
/// `expr (<|<=) x`, with `expr` linear over the remaining variables.
struct VarBound {
    coeffs: BTreeMap<TermId, BigRational>,
    constant: BigRational,
    strict: bool,
}

impl VarBound {
    fn eval(&self, assignment: &mut TimeAssignment) -> BigRational {
        let mut sum = self.constant.clone();
        for (x, c) in &self.coeffs {
            let v = assignment.entry(*x).or_insert_with(BigRational::zero);
            sum += c * v.clone();
        }
        sum
    }
}

/// Fourier-Motzkin elimination with strict/non-strict bookkeeping. Returns
/// an assignment covering every variable of the input atoms, found by
/// back-substitution, or `None` when the conjunction has no rational
/// solution.
fn fourier_motzkin(atoms: &[LinearAtom]) -> Option<TimeAssignment> {
    let x = match atoms.iter().flat_map(|a| a.coeffs.keys()).max() {
        Some(&x) => x,
        None => {
            // variable-free: every atom reads 0 (<|<=) bound
            let ok = atoms.iter().all(|a| match a.relation {
                Relation::Lt => BigRational::zero() < a.bound,
                Relation::Le => BigRational::zero() <= a.bound,
            });
            return ok.then(BTreeMap::new);
        }
    };

    let mut rest: Vec<LinearAtom> = Vec::new();
    let mut uppers: Vec<VarBound> = Vec::new();
    let mut lowers: Vec<VarBound> = Vec::new();
    for atom in atoms {
        match atom.coeffs.get(&x) {
            None => rest.push(atom.clone()),
            Some(c) => {
                // a*x + rest ⋉ b  becomes  x ⋉ (b - rest)/a  (a > 0)
                // or  (b - rest)/a ⋉ x  (a < 0)
                let coeffs: BTreeMap<TermId, BigRational> = atom
                    .coeffs
                    .iter()
                    .filter(|(&y, _)| y != x)
                    .map(|(&y, cy)| (y, -cy / c))
                    .collect();
                let bound = VarBound {
                    coeffs,
                    constant: &atom.bound / c,
                    strict: atom.relation == Relation::Lt,
                };
                if c.is_positive() {
                    uppers.push(bound);
                } else {
                    lowers.push(bound);
                }
            }
        }
    }
    for lo in &lowers {
        for hi in &uppers {
            // lo ⋉ x ⋉ hi  projects to  lo - hi ⋉ 0
            let coeffs = lo
                .coeffs
                .iter()
                .map(|(&y, c)| (y, c.clone()))
                .chain(hi.coeffs.iter().map(|(&y, c)| (y, -c)))
                .collect::<Vec<_>>();
            let relation =
                if lo.strict || hi.strict { Relation::Lt } else { Relation::Le };
            rest.push(LinearAtom::new(coeffs, relation, &hi.constant - &lo.constant));
        }
    }

    let mut assignment = fourier_motzkin(&rest)?;
    // tightest bound on each side; a tie is strict when any tied bound is
    let mut lower: Option<(BigRational, bool)> = None;
    for b in &lowers {
        let v = b.eval(&mut assignment);
        lower = Some(match lower {
            None => (v, b.strict),
            Some((best, strict)) => match v.cmp(&best) {
                std::cmp::Ordering::Greater => (v, b.strict),
                std::cmp::Ordering::Equal => (best, strict || b.strict),
                std::cmp::Ordering::Less => (best, strict),
            },
        });
    }
    let mut upper: Option<(BigRational, bool)> = None;
    for b in &uppers {
        let v = b.eval(&mut assignment);
        upper = Some(match upper {
            None => (v, b.strict),
            Some((best, strict)) => match v.cmp(&best) {
                std::cmp::Ordering::Less => (v, b.strict),
                std::cmp::Ordering::Equal => (best, strict || b.strict),
                std::cmp::Ordering::Greater => (best, strict),
            },
        });
    }
    let one = BigRational::one();
    let value = match (lower, upper) {
        (None, None) => BigRational::zero(),
        (Some((lo, strict)), None) => {
            if strict {
                lo + one
            } else {
                lo
            }
        }
        (None, Some((hi, strict))) => {
            if strict {
                hi - one
            } else {
                hi
            }
        }
        (Some((lo, ls)), Some((hi, hs))) => {
            if lo == hi {
                debug_assert!(!ls && !hs, "projection admitted an empty interval");
                lo
            } else {
                (lo + hi) / (&one + &one)
            }
        }
    };
    assignment.insert(x, value);
    Some(assignment)
}

/// Integer-mode preprocessing: scale each atom to coprime integer
/// coefficients and round the bound to the largest integer an integral
/// left-hand side can reach. Preserves the integer solution set exactly and
/// turns strict atoms into non-strict ones.
fn tighten(atoms: &[LinearAtom]) -> Vec<LinearAtom> {
    atoms
        .iter()
        .map(|atom| {
            if atom.coeffs.is_empty() {
                return atom.clone();
            }
            let scale = BigRational::from_integer(
                atom.coeffs.values().fold(BigInt::one(), |acc, c| acc.lcm(c.denom())),
            );
            let ints: Vec<(TermId, BigInt)> = atom
                .coeffs
                .iter()
                .map(|(&x, c)| (x, (c * &scale).to_integer()))
                .collect();
            let g = ints.iter().fold(BigInt::zero(), |acc, (_, c)| acc.gcd(c));
            let bound = &atom.bound * &scale / BigRational::from_integer(g.clone());
            let rounded = match atom.relation {
                Relation::Le => bound.floor(),
                Relation::Lt => {
                    if bound.is_integer() {
                        bound - BigRational::one()
                    } else {
                        bound.floor()
                    }
                }
            };
            LinearAtom::new(
                ints.into_iter()
                    .map(|(x, c)| (x, BigRational::from_integer(c / &g))),
                Relation::Le,
                rounded,
            )
        })
        .collect()
}

/// Integer inequality `sum <= bound`.
#[derive(Clone)]
struct IntIneq {
    coeffs: BTreeMap<TermId, BigInt>,
    bound: BigInt,
}

/// Divisibility side constraint `sum + constant ≡ 0 (mod modulus)`,
/// introduced while eliminating a variable whose coefficients were scaled.
#[derive(Clone)]
struct IntDiv {
    coeffs: BTreeMap<TermId, BigInt>,
    constant: BigInt,
    modulus: BigInt,
}

/// Affine form over the variables that are still to be eliminated.
#[derive(Clone)]
struct Aff {
    coeffs: BTreeMap<TermId, BigInt>,
    constant: BigInt,
}

impl Aff {
    fn eval(&self, assignment: &BTreeMap<TermId, BigInt>) -> BigInt {
        let mut sum = self.constant.clone();
        for (x, c) in &self.coeffs {
            // a variable can cancel out of every substituted combination and
            // never reach the recursion; such variables are fixed to zero
            if let Some(v) = assignment.get(x) {
                sum += c * v;
            }
        }
        sum
    }
}

fn map_diff(
    a: &BTreeMap<TermId, BigInt>,
    b: &BTreeMap<TermId, BigInt>,
) -> BTreeMap<TermId, BigInt> {
    let mut out = a.clone();
    for (&x, c) in b {
        *out.entry(x).or_insert_with(BigInt::zero) -= c;
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn map_add(
    a: &BTreeMap<TermId, BigInt>,
    b: &BTreeMap<TermId, BigInt>,
) -> BTreeMap<TermId, BigInt> {
    let mut out = a.clone();
    for (&x, c) in b {
        *out.entry(x).or_insert_with(BigInt::zero) += c;
    }
    out.retain(|_, c| !c.is_zero());
    out
}

/// Folds a constant inequality on the spot; returns false when it can no
/// longer hold.
fn push_ineq(out: &mut Vec<IntIneq>, coeffs: BTreeMap<TermId, BigInt>, bound: BigInt) -> bool {
    if coeffs.is_empty() {
        return !bound.is_negative();
    }
    out.push(IntIneq { coeffs, bound });
    true
}

fn pick_var(ineqs: &[IntIneq], divs: &[IntDiv]) -> Option<TermId> {
    ineqs
        .iter()
        .flat_map(|q| q.coeffs.keys())
        .chain(divs.iter().flat_map(|d| d.coeffs.keys()))
        .max()
        .copied()
}

/// Integer feasibility by eliminating one variable at a time. The variable's
/// coefficients are scaled to a common value `lambda` and `y = lambda * x`
/// ranges over multiples of `lambda`, recorded as a divisibility constraint.
/// Any solution value of `y` can be shifted down, within the period of the
/// divisibility constraints, onto some lower bound plus an offset below the
/// period (or, with no lower bounds, into the lowest residue window), so
/// finitely many candidate substitutions decide the question.
fn eliminate_integer(
    ineqs: Vec<IntIneq>,
    divs: Vec<IntDiv>,
) -> Option<BTreeMap<TermId, BigInt>> {
    let x = match pick_var(&ineqs, &divs) {
        Some(x) => x,
        None => {
            let ineqs_hold = ineqs.iter().all(|q| !q.bound.is_negative());
            let divs_hold =
                divs.iter().all(|d| d.constant.mod_floor(&d.modulus).is_zero());
            return (ineqs_hold && divs_hold).then(BTreeMap::new);
        }
    };

    let lambda = ineqs
        .iter()
        .filter_map(|q| q.coeffs.get(&x))
        .chain(divs.iter().filter_map(|d| d.coeffs.get(&x)))
        .fold(BigInt::one(), |acc, c| acc.lcm(c));

    let mut uppers: Vec<Aff> = Vec::new();
    let mut lowers: Vec<Aff> = Vec::new();
    let mut rest_ineqs: Vec<IntIneq> = Vec::new();
    for q in &ineqs {
        match q.coeffs.get(&x) {
            None => rest_ineqs.push(q.clone()),
            Some(c) => {
                let s = &lambda / c.abs();
                let scaled: BTreeMap<TermId, BigInt> = q
                    .coeffs
                    .iter()
                    .filter(|(&v, _)| v != x)
                    .map(|(&v, cv)| (v, cv * &s))
                    .collect();
                let bound = &q.bound * &s;
                if c.is_positive() {
                    // lambda*x <= bound - scaled
                    uppers.push(Aff {
                        coeffs: scaled.into_iter().map(|(v, cv)| (v, -cv)).collect(),
                        constant: bound,
                    });
                } else {
                    // scaled - bound <= lambda*x
                    lowers.push(Aff { coeffs: scaled, constant: -bound });
                }
            }
        }
    }

    // (rest, constant, modulus) with the coefficient of y normalized to one
    let mut ydivs: Vec<(BTreeMap<TermId, BigInt>, BigInt, BigInt)> =
        vec![(BTreeMap::new(), BigInt::zero(), lambda.clone())];
    let mut rest_divs: Vec<IntDiv> = Vec::new();
    for d in &divs {
        match d.coeffs.get(&x) {
            None => rest_divs.push(d.clone()),
            Some(c) => {
                let s = &lambda / c.abs();
                let mut rest: BTreeMap<TermId, BigInt> = d
                    .coeffs
                    .iter()
                    .filter(|(&v, _)| v != x)
                    .map(|(&v, cv)| (v, cv * &s))
                    .collect();
                let mut constant = &d.constant * &s;
                if c.is_negative() {
                    rest = rest.into_iter().map(|(v, cv)| (v, -cv)).collect();
                    constant = -constant;
                }
                ydivs.push((rest, constant, &d.modulus * s));
            }
        }
    }
    let period = ydivs.iter().fold(BigInt::one(), |acc, (_, _, m)| acc.lcm(m));

    if lowers.is_empty() {
        let mut k = BigInt::zero();
        while k < period {
            let new_divs: Vec<IntDiv> = rest_divs
                .iter()
                .cloned()
                .chain(ydivs.iter().map(|(rest, c, m)| IntDiv {
                    coeffs: rest.clone(),
                    constant: c + &k,
                    modulus: m.clone(),
                }))
                .collect();
            if let Some(mut assignment) = eliminate_integer(rest_ineqs.clone(), new_divs) {
                let mut y = k.clone();
                if let Some(cap) = uppers.iter().map(|u| u.eval(&assignment)).min() {
                    if y > cap {
                        y -= (&y - cap).div_ceil(&period) * &period;
                    }
                }
                assignment.insert(x, y / &lambda);
                return Some(assignment);
            }
            k += 1;
        }
        return None;
    }

    for low in &lowers {
        let mut k = BigInt::zero();
        while k < period {
            // y = low + k must fit under every upper and over every lower
            let mut new_ineqs = rest_ineqs.clone();
            let mut alive = true;
            for up in &uppers {
                let coeffs = map_diff(&low.coeffs, &up.coeffs);
                let bound = &up.constant - &low.constant - &k;
                if !push_ineq(&mut new_ineqs, coeffs, bound) {
                    alive = false;
                    break;
                }
            }
            for other in &lowers {
                if !alive {
                    break;
                }
                let coeffs = map_diff(&other.coeffs, &low.coeffs);
                let bound = &low.constant + &k - &other.constant;
                if !push_ineq(&mut new_ineqs, coeffs, bound) {
                    alive = false;
                }
            }
            if alive {
                let new_divs: Vec<IntDiv> = rest_divs
                    .iter()
                    .cloned()
                    .chain(ydivs.iter().map(|(rest, c, m)| IntDiv {
                        coeffs: map_add(rest, &low.coeffs),
                        constant: c + &low.constant + &k,
                        modulus: m.clone(),
                    }))
                    .collect();
                if let Some(mut assignment) = eliminate_integer(new_ineqs, new_divs) {
                    let y = low.eval(&assignment) + &k;
                    assignment.insert(x, y / &lambda);
                    return Some(assignment);
                }
            }
            k += 1;
        }
    }
    None
}

/// Entry point for the integer domain: expects tightened atoms, so every
/// non-constant atom is non-strict with integer coefficients and bound.
fn integer_feasible(atoms: &[LinearAtom]) -> Option<TimeAssignment> {
    let mut ineqs = Vec::new();
    for atom in atoms {
        if atom.coeffs.is_empty() {
            let holds = match atom.relation {
                Relation::Lt => BigRational::zero() < atom.bound,
                Relation::Le => BigRational::zero() <= atom.bound,
            };
            if !holds {
                return None;
            }
            continue;
        }
        ineqs.push(IntIneq {
            coeffs: atom.coeffs.iter().map(|(&v, c)| (v, c.to_integer())).collect(),
            bound: atom.bound.to_integer(),
        });
    }
    let solution = eliminate_integer(ineqs, Vec::new())?;
    let vars: BTreeSet<TermId> =
        atoms.iter().flat_map(|a| a.coeffs.keys().copied()).collect();
    Some(
        vars.into_iter()
            .map(|v| {
                let value = solution.get(&v).cloned().unwrap_or_else(BigInt::zero);
                (v, BigRational::from_integer(value))
            })
            .collect(),
    )
}

/// Decides feasibility in the chosen domain, exactly. A returned assignment
/// covers every variable of the constraint and satisfies every conjunct.
pub fn feasible(constraint: &TimedConstraint, domain: TimeDomain) -> Option<TimeAssignment> {
    let solution = match domain {
        TimeDomain::Rational => fourier_motzkin(&constraint.conjuncts),
        TimeDomain::Integer => integer_feasible(&tighten(&constraint.conjuncts)),
    };
    if let Some(assignment) = &solution {
        debug_assert!(satisfies(assignment, constraint));
    }
    solution
}

#[derive(Debug, Clone)]
pub struct TimedAttack {
    /// Ground solution of the system; time variables map to timestamps.
    pub subst: Subst,
    /// Numeric values taken by the constraint's variables under `subst`.
    pub times: TimeAssignment,
    /// Rule trace of the solved branch the witness was built on.
    pub trace: Vec<TraceStep>,
}

/// Searches the system's solved forms for one whose substitution leaves the
/// timing constraint feasible, and completes it into a ground witness:
/// constrained time variables take the feasibility assignment, unconstrained
/// ones take zero, message variables take any deducible value.
pub fn decide_timed_attack(
    arena: &TermArena,
    strategy: &StrategyConfig,
    domain: TimeDomain,
    system: &DedSystem,
    constraint: &TimedConstraint,
) -> Result<Option<TimedAttack>, TimedError> {
    constraint.validate(arena)?;
    let outcome = solve_all(arena, strategy, system)?;
    for branch in &outcome.branches {
        let reduced = constraint.substitute(arena, &branch.subst)?;
        let assignment = match feasible(&reduced, domain) {
            Some(a) => a,
            None => continue,
        };

        let mut time_vars: BTreeSet<TermId> = reduced.vars().into_iter().collect();
        time_vars.extend(
            branch
                .system
                .vars(arena)
                .into_iter()
                .filter(|&v| arena.sort_of(v) == Sort::Time),
        );
        let zero = BigRational::zero();
        let mut tau_time = Subst::identity();
        for v in time_vars {
            let value = assignment.get(&v).unwrap_or(&zero);
            let stamp = arena
                .name(&value.to_string(), Sort::Time)
                .map_err(|_| TimedError::SortProfile)?;
            tau_time = tau_time.compose(arena, &Subst::singleton(v, stamp));
        }

        // timestamp-valued goals are now ground and deducible by the time
        // axiom; the rest stays solved and fixes the message variables
        let grounded = branch.system.apply(arena, &tau_time);
        let remaining = DedSystem::new(
            grounded
                .constraints
                .iter()
                .filter(|c| arena.is_var(c.rhs))
                .cloned()
                .collect(),
        );
        let tau = remaining.tau_solution(arena, strategy.deduction)?;
        let witness = branch.subst.compose(arena, &tau_time).compose(arena, &tau);

        let mut times = TimeAssignment::new();
        for v in constraint.vars() {
            let image = witness.apply(arena, v);
            match time_value(arena, image) {
                Some(value) => {
                    times.insert(v, value);
                }
                None => {
                    return Err(TimedError::NotTimeConstant(
                        arena.display(v),
                        arena.display(image),
                    ))
                }
            }
        }
        debug_assert!(satisfies(&times, constraint));
        debug_assert!(is_solution(arena, strategy.deduction, system, &witness));
        return Ok(Some(TimedAttack {
            subst: witness,
            times,
            trace: branch.trace.clone(),
        }));
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::DedConstraint;
    use crate::deduction::DeductionConfig;
    use crate::terms::SortProfile;

    fn rat(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    fn timed_arena() -> TermArena {
        TermArena::new(SortProfile::Timed)
    }

    /// The delay pattern of the relay scenario: each forwarded timestamp
    /// within 30 of the previous one, final reception at 30 or later.
    fn relay_constraint(ar: &TermArena) -> (Vec<TermId>, TimedConstraint) {
        let xt: Vec<TermId> = (1..=7)
            .map(|i| ar.var(&format!("xt{}", i), Sort::Time).unwrap())
            .collect();
        let step = |later: TermId, earlier: TermId| {
            LinearAtom::new([(later, rat(1)), (earlier, rat(-1))], Relation::Le, rat(30))
        };
        let constraint = TimedConstraint::new(vec![
            step(xt[1], xt[0]),
            step(xt[3], xt[2]),
            step(xt[5], xt[4]),
            LinearAtom::new([(xt[6], rat(-1))], Relation::Le, rat(-30)),
        ]);
        (xt, constraint)
    }

    #[test]
    fn relay_delays_are_feasible_and_the_known_tuple_is_accepted() {
        let ar = timed_arena();
        let (xt, constraint) = relay_constraint(&ar);
        constraint.validate(&ar).unwrap();

        let assignment = feasible(&constraint, TimeDomain::Rational).expect("feasible");
        assert!(satisfies(&assignment, &constraint));

        let tuple = [0, 30, 30, 60, 60, 90, 90];
        let known: TimeAssignment =
            xt.iter().zip(tuple).map(|(&x, v)| (x, rat(v))).collect();
        assert!(satisfies(&known, &constraint));

        let integral = feasible(&constraint, TimeDomain::Integer).expect("integer feasible");
        assert!(integral.values().all(|v| v.is_integer()));
        assert!(satisfies(&integral, &constraint));
    }

    #[test]
    fn strict_self_comparison_is_infeasible() {
        let ar = timed_arena();
        let x = ar.var("x", Sort::Time).unwrap();
        let y = ar.var("y", Sort::Time).unwrap();
        // x < x collapses to 0 < 0
        let t = TimedConstraint::new(vec![LinearAtom::new(
            [(x, rat(1)), (x, rat(-1))],
            Relation::Lt,
            rat(0),
        )]);
        assert_eq!(feasible(&t, TimeDomain::Rational), None);

        let lt = |a: TermId, b: TermId| {
            LinearAtom::new([(a, rat(1)), (b, rat(-1))], Relation::Lt, rat(0))
        };
        let cycle = TimedConstraint::new(vec![lt(x, y), lt(y, x)]);
        assert_eq!(feasible(&cycle, TimeDomain::Rational), None);

        let le = |a: TermId, b: TermId| {
            LinearAtom::new([(a, rat(1)), (b, rat(-1))], Relation::Le, rat(0))
        };
        let equalish = TimedConstraint::new(vec![le(x, y), le(y, x)]);
        let a = feasible(&equalish, TimeDomain::Rational).expect("ties allowed");
        assert_eq!(a.get(&x), a.get(&y));
    }

    #[test]
    fn halves_separate_the_two_domains() {
        let ar = timed_arena();
        let x = ar.var("x", Sort::Time).unwrap();
        let t = TimedConstraint::new(vec![
            LinearAtom::new([(x, rat(2))], Relation::Le, rat(1)),
            LinearAtom::new([(x, rat(-2))], Relation::Le, rat(-1)),
        ]);
        let a = feasible(&t, TimeDomain::Rational).expect("rational point");
        assert_eq!(a.get(&x), Some(&BigRational::new(BigInt::one(), BigInt::from(2))));
        assert_eq!(feasible(&t, TimeDomain::Integer), None);
    }

    #[test]
    fn coefficient_tightening_closes_parallel_gaps() {
        let ar = timed_arena();
        let x = ar.var("x", Sort::Time).unwrap();
        let y = ar.var("y", Sort::Time).unwrap();
        // 2x - 2y <= 1 and 2y - 2x <= -1 pin x - y to 1/2: rational only
        let t = TimedConstraint::new(vec![
            LinearAtom::new([(x, rat(2)), (y, rat(-2))], Relation::Le, rat(1)),
            LinearAtom::new([(x, rat(-2)), (y, rat(2))], Relation::Le, rat(-1)),
        ]);
        assert!(feasible(&t, TimeDomain::Rational).is_some());
        assert_eq!(feasible(&t, TimeDomain::Integer), None);
    }

    #[test]
    fn unbounded_fractional_strips_are_decided() {
        let ar = timed_arena();
        let x = ar.var("x", Sort::Time).unwrap();
        let y = ar.var("y", Sort::Time).unwrap();
        let z = ar.var("z", Sort::Time).unwrap();
        // 2x - 2y + z = 1 with z = 0: rationally a whole line, but
        // 2(x - y) = 1 has no integer points, and no single atom shows it
        let t = TimedConstraint::new(vec![
            LinearAtom::new(
                [(x, rat(2)), (y, rat(-2)), (z, rat(1))],
                Relation::Le,
                rat(1),
            ),
            LinearAtom::new(
                [(x, rat(-2)), (y, rat(2)), (z, rat(-1))],
                Relation::Le,
                rat(-1),
            ),
            LinearAtom::new([(z, rat(1))], Relation::Le, rat(0)),
            LinearAtom::new([(z, rat(-1))], Relation::Le, rat(0)),
        ]);
        assert!(feasible(&t, TimeDomain::Rational).is_some());
        assert_eq!(feasible(&t, TimeDomain::Integer), None);

        // freeing the last coordinate restores integer points: z = 1 - 2x + 2y
        let open = TimedConstraint::new(t.conjuncts[..2].to_vec());
        let a = feasible(&open, TimeDomain::Integer).expect("odd z works");
        assert!(a.values().all(|v| v.is_integer()));
        assert!(satisfies(&a, &open));
    }

    #[test]
    fn divisibility_interplay_is_respected() {
        let ar = timed_arena();
        let x = ar.var("x", Sort::Time).unwrap();
        let y = ar.var("y", Sort::Time).unwrap();
        // x + y = 0 and x - y = 1 meet only at x = 1/2
        let t = TimedConstraint::new(vec![
            LinearAtom::new([(x, rat(1)), (y, rat(1))], Relation::Le, rat(0)),
            LinearAtom::new([(x, rat(-1)), (y, rat(-1))], Relation::Le, rat(0)),
            LinearAtom::new([(x, rat(1)), (y, rat(-1))], Relation::Le, rat(1)),
            LinearAtom::new([(x, rat(-1)), (y, rat(1))], Relation::Le, rat(-1)),
        ]);
        assert!(feasible(&t, TimeDomain::Rational).is_some());
        assert_eq!(feasible(&t, TimeDomain::Integer), None);

        // 3x - 2y = 1 is primitive, so integer points exist
        let open = TimedConstraint::new(vec![
            LinearAtom::new([(x, rat(3)), (y, rat(-2))], Relation::Le, rat(1)),
            LinearAtom::new([(x, rat(-3)), (y, rat(2))], Relation::Le, rat(-1)),
        ]);
        let a = feasible(&open, TimeDomain::Integer).expect("3x - 2y = 1");
        assert!(a.values().all(|v| v.is_integer()));
        assert!(satisfies(&a, &open));
    }

    #[test]
    fn one_sided_bounds_pick_satisfying_values() {
        let ar = timed_arena();
        let x = ar.var("x", Sort::Time).unwrap();
        let ge5 = TimedConstraint::new(vec![LinearAtom::new(
            [(x, rat(-1))],
            Relation::Le,
            rat(-5),
        )]);
        assert_eq!(feasible(&ge5, TimeDomain::Rational).unwrap().get(&x), Some(&rat(5)));
        let gt5 = TimedConstraint::new(vec![LinearAtom::new(
            [(x, rat(-1))],
            Relation::Lt,
            rat(-5),
        )]);
        let a = feasible(&gt5, TimeDomain::Rational).unwrap();
        assert!(a.get(&x).unwrap() > &rat(5));
        let lt3 = TimedConstraint::new(vec![LinearAtom::new(
            [(x, rat(1))],
            Relation::Lt,
            rat(3),
        )]);
        assert!(feasible(&lt3, TimeDomain::Rational).unwrap().get(&x).unwrap() < &rat(3));
        assert!(
            feasible(&TimedConstraint::empty(), TimeDomain::Integer).unwrap().is_empty()
        );
    }

    #[test]
    fn rational_literals_parse_exactly() {
        assert_eq!(parse_rational("30"), Some(rat(30)));
        assert_eq!(parse_rational("-5"), Some(rat(-5)));
        assert_eq!(parse_rational("3/2"), Some(BigRational::new(3.into(), 2.into())));
        assert_eq!(parse_rational("1.5"), Some(BigRational::new(3.into(), 2.into())));
        assert_eq!(parse_rational("-0.25"), Some(BigRational::new((-1).into(), 4.into())));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
    }

    /// The relay protocol: a server re-encrypts whatever carries a fresh
    /// enough timestamp, so the attacker bounces messages between the two
    /// server-facing views to keep a stale key looking fresh.
    fn relay_system(ar: &TermArena) -> (DedSystem, Vec<TermId>, TermId) {
        let a = ar.name("a", Sort::Msg).unwrap();
        let b = ar.name("b", Sort::Msg).unwrap();
        let s = ar.name("s", Sort::Msg).unwrap();
        let kas = ar.name("kas", Sort::Msg).unwrap();
        let kbs = ar.name("kbs", Sort::Msg).unwrap();
        let kab = ar.name("kab", Sort::Msg).unwrap();
        let zero = ar.name("0", Sort::Time).unwrap();
        let y: Vec<TermId> = (1..=3)
            .map(|i| ar.var(&format!("y{}", i), Sort::Msg).unwrap())
            .collect();
        let xt: Vec<TermId> = (1..=7)
            .map(|i| ar.var(&format!("xt{}", i), Sort::Time).unwrap())
            .collect();
        let triple = |t, agent, key| ar.pair(t, ar.pair(agent, key));
        let enc = |m, k| ar.enc(m, k).unwrap();

        let s1 = vec![a, b, s, ar.pair(a, enc(triple(zero, b, kab), kas))];
        let rhs1 = ar.pair(ar.pair(a, enc(triple(xt[0], b, y[0]), kas)), xt[1]);
        let mut s2 = s1.clone();
        s2.push(enc(triple(xt[1], a, y[0]), kbs));
        let rhs2 = ar.pair(ar.pair(b, enc(triple(xt[2], a, y[1]), kbs)), xt[3]);
        let mut s3 = s2.clone();
        s3.push(enc(triple(xt[3], b, y[1]), kas));
        let rhs3 = ar.pair(ar.pair(a, enc(triple(xt[4], b, y[2]), kas)), xt[5]);
        let mut s4 = s3.clone();
        s4.push(enc(triple(xt[5], a, y[2]), kbs));
        let rhs4 = enc(triple(xt[6], a, kab), kbs);

        let system = DedSystem::new(vec![
            DedConstraint::new(s1, rhs1),
            DedConstraint::new(s2, rhs2),
            DedConstraint::new(s3, rhs3),
            DedConstraint::new(s4, rhs4),
        ]);
        (system, xt, kab)
    }

    #[test]
    fn the_relay_attack_is_found_with_its_timing() {
        let ar = timed_arena();
        let (system, _, _) = relay_system(&ar);
        system.validate(&ar).unwrap();
        let (_, constraint) = relay_constraint(&ar);

        let strategy = StrategyConfig::default().with_deduction(DeductionConfig {
            time_axiom_enabled: true,
            ..DeductionConfig::default()
        });
        let attack = decide_timed_attack(
            &ar,
            &strategy,
            TimeDomain::Rational,
            &system,
            &constraint,
        )
        .unwrap()
        .expect("timed attack");

        assert!(satisfies(&attack.times, &constraint));
        assert!(is_solution(&ar, strategy.deduction, &system, &attack.subst));
        // the witness is ground, timestamps included
        for c in &system.constraints {
            assert!(ar.is_ground(attack.subst.apply(&ar, c.rhs)));
        }
    }

    #[test]
    fn solved_systems_attack_exactly_when_the_constraint_is_feasible() {
        let ar = timed_arena();
        let a = ar.name("a", Sort::Msg).unwrap();
        let x = ar.var("x", Sort::Msg).unwrap();
        let xt = ar.var("xt", Sort::Time).unwrap();
        let system = DedSystem::new(vec![DedConstraint::new(vec![a], x)]);
        let strategy = StrategyConfig::default().with_deduction(DeductionConfig {
            time_axiom_enabled: true,
            ..DeductionConfig::default()
        });

        // empty constraint: attack iff the system is satisfiable
        let empty = TimedConstraint::empty();
        let attack =
            decide_timed_attack(&ar, &strategy, TimeDomain::Rational, &system, &empty)
                .unwrap();
        assert!(attack.is_some());

        let infeasible = TimedConstraint::new(vec![LinearAtom::new(
            [(xt, BigRational::zero())],
            Relation::Lt,
            rat(0),
        )]);
        assert_eq!(infeasible.conjuncts[0].coeffs.len(), 0);
        let attack = decide_timed_attack(
            &ar,
            &strategy,
            TimeDomain::Rational,
            &system,
            &infeasible,
        )
        .unwrap();
        assert!(attack.is_none());

        // unsatisfiable system, trivially feasible constraint: no attack
        let k = ar.name("k", Sort::Msg).unwrap();
        let hidden = DedSystem::new(vec![DedConstraint::new(vec![a], ar.enc(k, k).unwrap())]);
        let attack =
            decide_timed_attack(&ar, &strategy, TimeDomain::Rational, &hidden, &empty)
                .unwrap();
        assert!(attack.is_none());
    }

    #[test]
    fn non_time_terms_in_constraints_are_rejected() {
        let ar = timed_arena();
        let a = ar.name("a", Sort::Msg).unwrap();
        let m = ar.var("m", Sort::Msg).unwrap();
        let bad = TimedConstraint::new(vec![LinearAtom::new(
            [(m, rat(1))],
            Relation::Le,
            rat(0),
        )]);
        assert!(matches!(bad.validate(&ar), Err(TimedError::NotTimeVariable(_))));
        let system = DedSystem::new(vec![DedConstraint::new(vec![a], m)]);
        let err = decide_timed_attack(
            &ar,
            &StrategyConfig::default(),
            TimeDomain::Rational,
            &system,
            &bad,
        );
        assert!(err.is_err());
    }
}
