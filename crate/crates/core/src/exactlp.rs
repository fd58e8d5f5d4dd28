//! Exact rational linear programming.
//!
//! A bounded-variable two-phase primal simplex over [`Rational`]. Every
//! outcome carries a certificate that [`verify_certificate`] re-checks by
//! plain arithmetic: a dual vector for optima, a feasible point plus an
//! improving recession direction for unbounded problems, and a Farkas
//! combination of the constraints for infeasible ones.
//!
//! Pivoting uses the largest reduced cost while progress is made and falls
//! back to Bland's smallest-index rule right after any degenerate step, so
//! every cycle of degenerate pivots would be a Bland cycle, which cannot
//! happen.
//!
//! Larger problems are first run through the same tableau in `f64` with a
//! perturbed right-hand side. Its final basis is then inverted exactly; if
//! the basis is nonsingular and its basic solution respects the bounds the
//! exact simplex continues from there, otherwise it starts cold. Nothing
//! computed in floating point reaches an outcome.

use std::fmt::{self, Write as _};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Max,
    Min,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

/// A sparse constraint row `Σ coeffs · x  rel  rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<(usize, Rational)>,
    pub rel: Relation,
    pub rhs: Rational,
}

impl Constraint {
    pub fn new(coeffs: Vec<(usize, Rational)>, rel: Relation, rhs: Rational) -> Constraint {
        let coeffs = coeffs.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        Constraint { coeffs, rel, rhs }
    }

    pub fn dense(row: &[Rational], rel: Relation, rhs: Rational) -> Constraint {
        Constraint::new(row.iter().cloned().enumerate().collect(), rel, rhs)
    }

    pub fn eval(&self, x: &[Rational]) -> Rational {
        let mut acc = Rational::zero();
        for (j, c) in &self.coeffs {
            if !x[*j].is_zero() {
                acc += c * &x[*j];
            }
        }
        acc
    }

    fn holds(&self, lhs: &Rational) -> bool {
        match self.rel {
            Relation::Le => lhs <= &self.rhs,
            Relation::Eq => lhs == &self.rhs,
            Relation::Ge => lhs >= &self.rhs,
        }
    }
}

/// Per-variable bounds; `None` is infinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lower: Option<Rational>,
    pub upper: Option<Rational>,
}

impl Bound {
    pub fn nonneg() -> Bound {
        Bound {
            lower: Some(Rational::zero()),
            upper: None,
        }
    }

    pub fn free() -> Bound {
        Bound {
            lower: None,
            upper: None,
        }
    }

    pub fn between(lower: Rational, upper: Rational) -> Bound {
        Bound {
            lower: Some(lower),
            upper: Some(upper),
        }
    }

    fn contains(&self, x: &Rational) -> bool {
        self.lower.as_ref().is_none_or(|l| x >= l) && self.upper.as_ref().is_none_or(|u| x <= u)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<Rational>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<Bound>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Result of [`lp_solve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum LpOutcome {
    /// `dual[i]` is the multiplier of constraint `i` in the problem's own
    /// sense (see [`verify_certificate`]).
    Optimal {
        point: Vec<Rational>,
        value: Rational,
        dual: Vec<Rational>,
    },
    Unbounded {
        point: Vec<Rational>,
        ray: Vec<Rational>,
    },
    /// One multiplier per constraint; nonnegative on `<=` rows and
    /// nonpositive on `>=` rows.
    Infeasible {
        farkas: Vec<Rational>,
    },
}

impl LpOutcome {
    pub fn status(&self) -> &'static str {
        match self {
            LpOutcome::Optimal { .. } => "optimal",
            LpOutcome::Unbounded { .. } => "unbounded",
            LpOutcome::Infeasible { .. } => "infeasible",
        }
    }

    pub fn value(&self) -> Option<&Rational> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(value),
            _ => None,
        }
    }

    pub fn point(&self) -> Option<&[Rational]> {
        match self {
            LpOutcome::Optimal { point, .. } | LpOutcome::Unbounded { point, .. } => Some(point),
            LpOutcome::Infeasible { .. } => None,
        }
    }
}

impl LinearProgram {
    /// Empty problem over `n` nonnegative variables with a zero objective.
    pub fn new(sense: Sense, n: usize) -> LinearProgram {
        LinearProgram {
            sense,
            objective: vec![Rational::zero(); n],
            constraints: Vec::new(),
            bounds: vec![Bound::nonneg(); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_var(&mut self, cost: Rational, bound: Bound) -> usize {
        self.objective.push(cost);
        self.bounds.push(bound);
        self.objective.len() - 1
    }

    pub fn push(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    fn check_dims(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(LpError::Dimension(format!(
                "{} bounds for {} variables",
                self.bounds.len(),
                n
            )));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if let Some((j, _)) = c.coeffs.iter().find(|(j, _)| *j >= n) {
                return Err(LpError::Dimension(format!(
                    "constraint {i} references variable {j} of {n}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_feasible_point(&self, x: &[Rational]) -> bool {
        x.len() == self.num_vars()
            && self.bounds.iter().zip(x).all(|(b, v)| b.contains(v))
            && self.constraints.iter().all(|c| c.holds(&c.eval(x)))
    }

    pub fn objective_value(&self, x: &[Rational]) -> Rational {
        crate::rational::vec::dot(&self.objective, x)
    }

    /// Plain-text dump, one constraint per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let term = |out: &mut String, j: usize, c: &Rational| {
            let _ = write!(out, " {}{} x{}", if c.is_negative() { "- " } else { "+ " }, c.abs(), j);
        };
        let _ = write!(
            out,
            "{}:",
            match self.sense {
                Sense::Max => "max",
                Sense::Min => "min",
            }
        );
        for (j, c) in self.objective.iter().enumerate() {
            if !c.is_zero() {
                term(&mut out, j, c);
            }
        }
        out.push('\n');
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = write!(out, "c{i}:");
            for (j, a) in &c.coeffs {
                term(&mut out, *j, a);
            }
            let _ = writeln!(out, " {} {}", c.rel, c.rhs);
        }
        for (j, b) in self.bounds.iter().enumerate() {
            match (&b.lower, &b.upper) {
                (Some(l), None) if l.is_zero() => {}
                (Some(l), Some(u)) => {
                    let _ = writeln!(out, "bound: {l} <= x{j} <= {u}");
                }
                (Some(l), None) => {
                    let _ = writeln!(out, "bound: x{j} >= {l}");
                }
                (None, Some(u)) => {
                    let _ = writeln!(out, "bound: x{j} <= {u}");
                }
                (None, None) => {
                    let _ = writeln!(out, "bound: x{j} free");
                }
            }
        }
        out
    }
}

fn trace_enabled() -> bool {
    static FLAG: OnceLock<bool> = OnceLock::new();
    *FLAG.get_or_init(|| std::env::var("ARBCERT_LP_TRACE").is_ok_and(|v| !v.is_empty() && v != "0"))
}

// ---------------------------------------------------------------------------
// Internal standard form
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
enum VarMap {
    /// x = lower + z[k]
    Shift(usize, Rational),
    /// x = upper - z[k]
    Flip(usize, Rational),
    /// x = z[k] - z[k + 1]
    Split(usize),
}

/// `max cost·z` subject to `A z = b`, `0 <= z <= upper`, with `b >= 0`
/// and one unit column (slack or artificial) per row.
struct Standard {
    m: usize,
    cols: Vec<Vec<(usize, Rational)>>,
    b: Vec<Rational>,
    upper: Vec<Option<Rational>>,
    cost: Vec<Rational>,
    first_artificial: usize,
    unit_col: Vec<usize>,
    flip: Vec<bool>,
    maps: Vec<VarMap>,
}

impl Standard {
    fn new(p: &LinearProgram, sign: &Rational) -> Standard {
        let n = p.num_vars();
        let mut maps = Vec::with_capacity(n);
        let mut upper: Vec<Option<Rational>> = Vec::new();
        let mut cost: Vec<Rational> = Vec::new();
        for j in 0..n {
            let b = &p.bounds[j];
            let c = sign * &p.objective[j];
            match (&b.lower, &b.upper) {
                (Some(l), u) => {
                    maps.push(VarMap::Shift(upper.len(), l.clone()));
                    upper.push(u.as_ref().map(|u| u - l));
                    cost.push(c);
                }
                (None, Some(u)) => {
                    maps.push(VarMap::Flip(upper.len(), u.clone()));
                    upper.push(None);
                    cost.push(-c);
                }
                (None, None) => {
                    maps.push(VarMap::Split(upper.len()));
                    upper.push(None);
                    upper.push(None);
                    cost.push(c.clone());
                    cost.push(-c);
                }
            }
        }
        let nz = upper.len();
        let m = p.constraints.len();
        let mut cols: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); nz];
        let mut b = Vec::with_capacity(m);
        for (i, c) in p.constraints.iter().enumerate() {
            let mut rhs = c.rhs.clone();
            for (j, a) in &c.coeffs {
                match &maps[*j] {
                    VarMap::Shift(k, l) => {
                        cols[*k].push((i, a.clone()));
                        if !l.is_zero() {
                            rhs -= a * l;
                        }
                    }
                    VarMap::Flip(k, u) => {
                        cols[*k].push((i, -a));
                        rhs -= a * u;
                    }
                    VarMap::Split(k) => {
                        cols[*k].push((i, a.clone()));
                        cols[*k + 1].push((i, -a));
                    }
                }
            }
            b.push(rhs);
        }
        let flip: Vec<bool> = b.iter().map(|x| x.is_negative()).collect();
        for col in cols.iter_mut() {
            merge_entries(col, &flip);
        }
        for (x, &f) in b.iter_mut().zip(&flip) {
            if f {
                *x = -&*x;
            }
        }
        let mut unit_col = vec![usize::MAX; m];
        for (i, c) in p.constraints.iter().enumerate() {
            let s = match c.rel {
                Relation::Le => 1,
                Relation::Ge => -1,
                Relation::Eq => continue,
            };
            let s = if flip[i] { -s } else { s };
            if s == 1 {
                unit_col[i] = cols.len();
            }
            cols.push(vec![(i, Rational::from_integer(s))]);
            upper.push(None);
            cost.push(Rational::zero());
        }
        let first_artificial = cols.len();
        for i in 0..m {
            if unit_col[i] == usize::MAX {
                unit_col[i] = cols.len();
                cols.push(vec![(i, Rational::one())]);
                upper.push(None);
                cost.push(Rational::zero());
            }
        }
        Standard {
            m,
            cols,
            b,
            upper,
            cost,
            first_artificial,
            unit_col,
            flip,
            maps,
        }
    }

    fn ncols(&self) -> usize {
        self.cols.len()
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.first_artificial
    }

    fn row_sign(&self, i: usize) -> Rational {
        if self.flip[i] {
            -Rational::one()
        } else {
            Rational::one()
        }
    }

    fn unmap(&self, zvals: &dyn Fn(usize) -> Rational, homogeneous: bool) -> Vec<Rational> {
        self.maps
            .iter()
            .map(|mp| match mp {
                VarMap::Shift(k, l) if homogeneous => zvals(*k),
                VarMap::Shift(k, l) => l + &zvals(*k),
                VarMap::Flip(k, _) if homogeneous => -zvals(*k),
                VarMap::Flip(k, u) => u - &zvals(*k),
                VarMap::Split(k) => zvals(*k) - zvals(*k + 1),
            })
            .collect()
    }
}

/// Sums duplicate row entries and applies the row sign flips.
fn merge_entries(col: &mut Vec<(usize, Rational)>, flip: &[bool]) {
    col.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, Rational)> = Vec::with_capacity(col.len());
    for (i, a) in col.drain(..) {
        match out.last_mut() {
            Some((k, v)) if *k == i => *v += &a,
            _ => out.push((i, a)),
        }
    }
    out.retain(|(_, a)| !a.is_zero());
    for (i, a) in out.iter_mut() {
        if flip[*i] {
            *a = -&*a;
        }
    }
    *col = out;
}

// ---------------------------------------------------------------------------
// Tableau simplex, generic over the number type
// ---------------------------------------------------------------------------

/// Arithmetic the tableau needs. The `f64` instance is only used to find a
/// starting basis; its answers are never reported.
trait Num: Clone + PartialOrd + fmt::Display {
    const EXACT: bool;
    fn zero() -> Self;
    fn one() -> Self;
    fn of(r: &Rational) -> Self;
    fn is_zero(&self) -> bool;
    fn is_one(&self) -> bool;
    fn is_positive(&self) -> bool;
    fn is_negative(&self) -> bool;
    fn abs(&self) -> Self;
    fn recip(&self) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    /// `self - a * b`
    fn sub_mul(&self, a: &Self, b: &Self) -> Self;
}

impl Num for Rational {
    const EXACT: bool = true;
    fn zero() -> Self {
        Rational::zero()
    }
    fn one() -> Self {
        Rational::one()
    }
    fn of(r: &Rational) -> Self {
        r.clone()
    }
    fn is_zero(&self) -> bool {
        Rational::is_zero(self)
    }
    fn is_one(&self) -> bool {
        Rational::is_one(self)
    }
    fn is_positive(&self) -> bool {
        Rational::is_positive(self)
    }
    fn is_negative(&self) -> bool {
        Rational::is_negative(self)
    }
    fn abs(&self) -> Self {
        Rational::abs(self)
    }
    fn recip(&self) -> Self {
        Rational::recip(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn sub_mul(&self, a: &Self, b: &Self) -> Self {
        Rational::sub_mul(self, a, b)
    }
}

const FLOAT_EPS: f64 = 1e-9;

impl Num for f64 {
    const EXACT: bool = false;
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn of(r: &Rational) -> Self {
        r.to_f64()
    }
    fn is_zero(&self) -> bool {
        f64::abs(*self) <= FLOAT_EPS
    }
    fn is_one(&self) -> bool {
        *self == 1.0
    }
    fn is_positive(&self) -> bool {
        *self > FLOAT_EPS
    }
    fn is_negative(&self) -> bool {
        *self < -FLOAT_EPS
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn recip(&self) -> Self {
        1.0 / *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn sub_mul(&self, a: &Self, b: &Self) -> Self {
        let ab = a * b;
        let v = self - ab;
        // cancellation noise
        if f64::abs(v) <= 1e-11 * f64::abs(*self).max(f64::abs(ab)) {
            0.0
        } else {
            v
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Status {
    Basic,
    Lower,
    Upper,
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    beta: Vec<T>,
    basis: Vec<usize>,
    status: Vec<Status>,
    upper: Vec<Option<T>>,
    /// reduced costs of the phase-two objective (internal max form)
    rc: Vec<T>,
    /// reduced costs of the phase-one objective, while phase one runs
    rc1: Option<Vec<T>>,
    blocked: Vec<bool>,
    first_artificial: usize,
    last_degenerate: bool,
    pivots: usize,
    pivot_limit: Option<usize>,
}

enum StepResult {
    Optimal,
    Progress,
    Unbounded(usize),
    /// phase one ended with positive infeasibility
    Infeasible,
    /// the pivot limit was hit
    Stalled,
}

impl<T: Num> Tableau<T> {
    /// Tableau at the all-units basis.
    fn cold(s: &Standard) -> Tableau<T> {
        let n = s.ncols();
        let mut rows = vec![vec![T::zero(); n]; s.m];
        for (j, col) in s.cols.iter().enumerate() {
            for (i, a) in col {
                rows[*i][j] = T::of(a);
            }
        }
        let mut status = vec![Status::Lower; n];
        for &j in &s.unit_col {
            status[j] = Status::Basic;
        }
        let mut t = Tableau {
            rows,
            beta: s.b.iter().map(T::of).collect(),
            basis: s.unit_col.clone(),
            status,
            upper: s.upper.iter().map(|u| u.as_ref().map(T::of)).collect(),
            rc: s.cost.iter().map(T::of).collect(),
            rc1: None,
            blocked: vec![false; n],
            first_artificial: s.first_artificial,
            last_degenerate: false,
            pivots: 0,
            pivot_limit: None,
        };
        t.setup_phase(s);
        t
    }

    fn ncols(&self) -> usize {
        self.status.len()
    }

    /// Reduced costs of `cost` for the current basis.
    fn reduced(&self, cost: &[T]) -> Vec<T> {
        let mut rc = cost.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for (j, a) in self.rows[i].iter().enumerate() {
                if !a.is_zero() {
                    rc[j] = rc[j].sub_mul(cb, a);
                }
            }
        }
        rc
    }

    fn infeasibility(&self) -> T {
        let mut sum = T::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            if b >= self.first_artificial {
                sum = sum.add(&self.beta[i]);
            }
        }
        sum
    }

    /// Chooses phase one if some artificial is basic at a positive level,
    /// otherwise pins artificials to zero and goes straight to phase two.
    fn setup_phase(&mut self, s: &Standard) {
        for j in s.first_artificial..s.ncols() {
            self.blocked[j] = false;
            self.upper[j] = None;
        }
        if self.infeasibility().is_positive() {
            let c1: Vec<T> = (0..self.ncols())
                .map(|j| {
                    if s.is_artificial(j) {
                        T::zero().sub(&T::one())
                    } else {
                        T::zero()
                    }
                })
                .collect();
            self.rc1 = Some(self.reduced(&c1));
        } else {
            self.end_phase_one();
        }
    }

    fn end_phase_one(&mut self) {
        self.rc1 = None;
        for j in self.first_artificial..self.ncols() {
            self.blocked[j] = true;
            self.upper[j] = Some(T::zero());
        }
        self.last_degenerate = false;
    }

    fn value_of(&self, j: usize) -> T {
        match self.status[j] {
            Status::Lower => T::zero(),
            Status::Upper => self.upper[j].clone().expect("upper status without bound"),
            Status::Basic => {
                let r = self.basis.iter().position(|&b| b == j).expect("basic column");
                self.beta[r].clone()
            }
        }
    }

    fn choose_entering(&self) -> Option<usize> {
        let rc = self.rc1.as_ref().unwrap_or(&self.rc);
        let eligible = |j: usize| -> bool {
            if self.blocked[j] {
                return false;
            }
            match self.status[j] {
                Status::Basic => false,
                Status::Lower => rc[j].is_positive() && self.upper[j].as_ref().is_none_or(|u| !u.is_zero()),
                Status::Upper => rc[j].is_negative(),
            }
        };
        if self.last_degenerate {
            (0..self.ncols()).find(|&j| eligible(j))
        } else {
            let mut best: Option<(usize, T)> = None;
            for j in 0..self.ncols() {
                if eligible(j) {
                    let a = rc[j].abs();
                    if best.as_ref().is_none_or(|(_, b)| &a > b) {
                        best = Some((j, a));
                    }
                }
            }
            best.map(|(j, _)| j)
        }
    }

    fn step(&mut self) -> StepResult {
        let Some(q) = self.choose_entering() else {
            return StepResult::Optimal;
        };
        let increasing = self.status[q] == Status::Lower;
        if !T::EXACT {
            return self.float_step(q, increasing);
        }
        // basic i moves at rate -delta * alpha_iq
        let mut best: Option<(T, Option<usize>)> = None;
        let mut consider = |theta: T, row: Option<usize>, basis: &Vec<usize>| {
            let theta = if theta.is_negative() { T::zero() } else { theta };
            let better = match &best {
                None => true,
                Some((b, brow)) => {
                    theta < *b
                        || (theta == *b
                            && match (row, brow) {
                                (_, None) => false,
                                (None, Some(_)) => true,
                                (Some(r), Some(br)) => basis[r] < basis[*br],
                            })
                }
            };
            if better {
                best = Some((theta, row));
            }
        };
        if let Some(u) = &self.upper[q] {
            consider(u.clone(), None, &self.basis);
        }
        for i in 0..self.rows.len() {
            let a = &self.rows[i][q];
            if a.is_zero() {
                continue;
            }
            let rate_negative = a.is_positive() == increasing;
            let b = self.basis[i];
            if rate_negative {
                consider(self.beta[i].div(&a.abs()), Some(i), &self.basis);
            } else if let Some(ub) = &self.upper[b] {
                consider(ub.sub(&self.beta[i]).div(&a.abs()), Some(i), &self.basis);
            }
        }
        let Some((theta, leave)) = best else {
            return StepResult::Unbounded(q);
        };
        self.last_degenerate = theta.is_zero();
        if trace_enabled() {
            eprintln!(
                "lp: phase {} pivot #{} enter x{} ({}) theta {} leave {:?}",
                if self.rc1.is_some() { 1 } else { 2 },
                self.pivots,
                q,
                if increasing { "up" } else { "down" },
                theta,
                leave.map(|r| self.basis[r])
            );
        }
        self.pivots += 1;
        if !theta.is_zero() {
            for i in 0..self.rows.len() {
                let a = &self.rows[i][q];
                if a.is_zero() {
                    continue;
                }
                let delta = a.mul(&theta);
                self.beta[i] = if increasing {
                    self.beta[i].sub(&delta)
                } else {
                    self.beta[i].add(&delta)
                };
            }
        }
        match leave {
            None => {
                self.status[q] = if increasing { Status::Upper } else { Status::Lower };
            }
            Some(p) => {
                let old = self.basis[p];
                let rate_negative = self.rows[p][q].is_positive() == increasing;
                let entering_value = if increasing {
                    theta
                } else {
                    self.upper[q].clone().unwrap().sub(&theta)
                };
                self.pivot(p, q);
                self.status[old] = if rate_negative { Status::Lower } else { Status::Upper };
                self.beta[p] = entering_value;
            }
        }
        StepResult::Progress
    }

    /// Harris two-pass ratio test: among rows whose ratio is within
    /// tolerance of the minimum, pivot on the largest entry.
    fn float_step(&mut self, q: usize, increasing: bool) -> StepResult {
        let tol = T::of(&Rational::new(1, 1_000_000_000));
        let piv_tol = T::of(&Rational::new(1, 1_000_000));
        let dir = |a: &T| if increasing { a.clone() } else { T::zero().sub(a) };
        // (row, entry magnitude, room to the violated bound)
        let mut cands: Vec<(usize, T, T)> = Vec::new();
        for i in 0..self.rows.len() {
            let a = dir(&self.rows[i][q]);
            if a.abs() <= piv_tol {
                continue;
            }
            let b = self.basis[i];
            if a.is_positive() {
                cands.push((i, a.clone(), self.beta[i].clone()));
            } else if let Some(ub) = &self.upper[b] {
                cands.push((i, a.abs(), ub.sub(&self.beta[i])));
            }
        }
        let mut bound: Option<T> = self.upper[q].clone();
        for (_, a, room) in &cands {
            let r = room.add(&tol).div(a);
            if bound.as_ref().is_none_or(|b| &r < b) {
                bound = Some(r);
            }
        }
        let Some(bound) = bound else {
            return StepResult::Unbounded(q);
        };
        let mut leave: Option<(usize, T, T)> = None;
        for (i, a, room) in &cands {
            let r = room.div(a);
            if r <= bound && leave.as_ref().is_none_or(|(_, la, _)| a > la) {
                leave = Some((*i, a.clone(), r));
            }
        }
        let theta = match (&leave, &self.upper[q]) {
            (Some((_, _, r)), Some(u)) if u < r => {
                leave = None;
                u.clone()
            }
            (Some((_, _, r)), _) => {
                if r.is_negative() {
                    T::zero()
                } else {
                    r.clone()
                }
            }
            (None, Some(u)) => u.clone(),
            (None, None) => return StepResult::Unbounded(q),
        };
        self.last_degenerate = theta.is_zero();
        self.pivots += 1;
        if !theta.is_zero() {
            for i in 0..self.rows.len() {
                let a = &self.rows[i][q];
                if a.is_zero() {
                    continue;
                }
                let delta = a.mul(&theta);
                self.beta[i] = if increasing {
                    self.beta[i].sub(&delta)
                } else {
                    self.beta[i].add(&delta)
                };
            }
        }
        match leave {
            None => {
                self.status[q] = if increasing { Status::Upper } else { Status::Lower };
            }
            Some((p, _, _)) => {
                let old = self.basis[p];
                let rate_negative = dir(&self.rows[p][q]).is_positive();
                let entering_value = if increasing {
                    theta
                } else {
                    self.upper[q].clone().unwrap().sub(&theta)
                };
                self.pivot(p, q);
                self.status[old] = if rate_negative { Status::Lower } else { Status::Upper };
                self.beta[p] = entering_value;
            }
        }
        StepResult::Progress
    }

    /// Gauss-Jordan pivot on `(p, q)`; updates rows and reduced costs but
    /// not `beta`.
    fn pivot(&mut self, p: usize, q: usize) {
        let inv = self.rows[p][q].recip();
        if !inv.is_one() {
            for x in self.rows[p].iter_mut() {
                if !x.is_zero() {
                    *x = x.mul(&inv);
                }
            }
        }
        self.rows[p][q] = T::one();
        let nz: Vec<usize> = (0..self.ncols()).filter(|&j| !self.rows[p][j].is_zero()).collect();
        let pivot_row = std::mem::take(&mut self.rows[p]);
        let eliminate = |row: &mut Vec<T>| {
            let f = row[q].clone();
            if f.is_zero() {
                return;
            }
            for &j in &nz {
                row[j] = row[j].sub_mul(&f, &pivot_row[j]);
            }
            row[q] = T::zero();
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != p {
                eliminate(row);
            }
        }
        eliminate(&mut self.rc);
        if let Some(rc1) = self.rc1.as_mut() {
            eliminate(rc1);
        }
        self.rows[p] = pivot_row;
        self.basis[p] = q;
        self.status[q] = Status::Basic;
    }

    fn run(&mut self) -> StepResult {
        loop {
            if self.pivot_limit.is_some_and(|l| self.pivots >= l) {
                return StepResult::Stalled;
            }
            if self.rc1.is_some() && !self.infeasibility().is_positive() {
                self.end_phase_one();
            }
            match self.step() {
                StepResult::Progress => {}
                StepResult::Optimal if self.rc1.is_some() => {
                    if self.infeasibility().is_positive() {
                        return StepResult::Infeasible;
                    }
                    self.end_phase_one();
                }
                other => return other,
            }
        }
    }
}

impl Tableau<Rational> {
    /// Exact tableau for a given basis; `None` if the basis is singular or
    /// its basic solution leaves the bounds.
    fn warm(s: &Standard, basis: &[usize], status: &[Status]) -> Option<Tableau<Rational>> {
        let m = s.m;
        let n = s.ncols();
        if basis.len() != m || status.len() != n {
            return None;
        }
        let mut status = status.to_vec();
        for (j, st) in status.iter_mut().enumerate() {
            if *st == Status::Basic && !basis.contains(&j) {
                *st = Status::Lower;
            }
            if *st == Status::Upper && (s.upper[j].is_none() || s.is_artificial(j)) {
                *st = Status::Lower;
            }
        }
        for &j in basis {
            status[j] = Status::Basic;
        }
        let Some(binv) = invert_basis(s, basis) else {
            if trace_enabled() {
                eprintln!("lp: float basis is singular");
            }
            return None;
        };
        let mut rows = vec![vec![Rational::zero(); n]; m];
        for (j, col) in s.cols.iter().enumerate() {
            for (i, a) in col {
                for r in 0..m {
                    let bi = &binv[r][*i];
                    if !bi.is_zero() {
                        rows[r][j] += &(bi * a);
                    }
                }
            }
        }
        let mut rhs = s.b.clone();
        for j in 0..n {
            if status[j] == Status::Upper {
                let u = s.upper[j].as_ref().unwrap();
                for (i, a) in &s.cols[j] {
                    rhs[*i] -= &(a * u);
                }
            }
        }
        let beta: Vec<Rational> = (0..m).map(|r| crate::rational::vec::dot(&binv[r], &rhs)).collect();
        for (r, &b) in basis.iter().enumerate() {
            if beta[r].is_negative() {
                if trace_enabled() {
                    eprintln!("lp: float basis infeasible at row {r}: {}", beta[r]);
                }
                return None;
            }
            if let Some(u) = &s.upper[b] {
                if &beta[r] > u {
                    return None;
                }
            }
        }
        let mut t = Tableau {
            rows,
            beta,
            basis: basis.to_vec(),
            status,
            upper: s.upper.clone(),
            rc: Vec::new(),
            rc1: None,
            blocked: vec![false; n],
            first_artificial: s.first_artificial,
            last_degenerate: false,
            pivots: 0,
            pivot_limit: None,
        };
        t.rc = t.reduced(&s.cost);
        t.setup_phase(s);
        Some(t)
    }

    /// Dual values `c_B B^{-1}` read off the unit columns.
    fn duals(&self, s: &Standard, cost: impl Fn(usize) -> Rational, rc: &[Rational]) -> Vec<Rational> {
        s.unit_col.iter().map(|&j| cost(j) - &rc[j]).collect()
    }
}

/// Exact inverse of the basis matrix whose k-th column is `cols[basis[k]]`.
fn invert_basis(s: &Standard, basis: &[usize]) -> Option<Vec<Vec<Rational>>> {
    let m = s.m;
    let mut a = vec![vec![Rational::zero(); 2 * m]; m];
    for (k, &j) in basis.iter().enumerate() {
        for (i, v) in &s.cols[j] {
            a[*i][k] = v.clone();
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[m + i] = Rational::one();
    }
    for c in 0..m {
        let Some(p) = (c..m).find(|&r| !a[r][c].is_zero()) else {
            return None;
        };
        a.swap(c, p);
        let inv = a[c][c].recip();
        for x in a[c].iter_mut() {
            if !x.is_zero() {
                *x *= &inv;
            }
        }
        let pivot_row = std::mem::take(&mut a[c]);
        let nz: Vec<usize> = (0..2 * m).filter(|&j| !pivot_row[j].is_zero()).collect();
        for row in a.iter_mut() {
            if row.is_empty() {
                continue;
            }
            let f = row[c].clone();
            if f.is_zero() {
                continue;
            }
            for &j in &nz {
                row[j] = row[j].sub_mul(&f, &pivot_row[j]);
            }
        }
        a[c] = pivot_row;
    }
    // row k of the inverse pairs with basis position k
    Some(a.into_iter().map(|row| row[m..].to_vec()).collect())
}

impl Tableau<f64> {
    /// Recomputes rows, basic values and reduced costs from the basis by
    /// partially pivoted elimination; false if the basis is numerically
    /// singular.
    fn refactor(&mut self, s: &Standard, perturb: &[f64]) -> bool {
        let m = s.m;
        let n = s.ncols();
        let mut a = vec![vec![0.0f64; m + n + 1]; m];
        for (k, &j) in self.basis.iter().enumerate() {
            for (i, v) in &s.cols[j] {
                a[*i][k] = v.to_f64();
            }
        }
        for (j, col) in s.cols.iter().enumerate() {
            let shift = if self.status[j] == Status::Upper {
                self.upper[j].unwrap_or(0.0)
            } else {
                0.0
            };
            for (i, v) in col {
                let v = v.to_f64();
                a[*i][m + j] = v;
                a[*i][m + n] -= v * shift;
            }
        }
        for (i, b) in s.b.iter().enumerate() {
            a[i][m + n] += b.to_f64() + perturb[i];
        }
        for c in 0..m {
            let p = (c..m).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
            if a[p][c].abs() < 1e-9 {
                return false;
            }
            a.swap(c, p);
            let inv = 1.0 / a[c][c];
            for x in a[c].iter_mut() {
                *x *= inv;
            }
            let pivot_row = std::mem::take(&mut a[c]);
            for row in a.iter_mut() {
                if row.is_empty() || row[c] == 0.0 {
                    continue;
                }
                let f = row[c];
                for (x, p) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * p;
                }
            }
            a[c] = pivot_row;
        }
        for (r, row) in a.into_iter().enumerate() {
            let clean = |x: f64| if x.abs() < 1e-11 { 0.0 } else { x };
            self.beta[r] = clean(row[m + n]);
            self.rows[r] = row[m..m + n].iter().map(|&x| clean(x)).collect();
            self.rows[r][self.basis[r]] = 1.0;
        }
        let cost: Vec<f64> = s.cost.iter().map(Rational::to_f64).collect();
        self.rc = self.reduced(&cost);
        if self.rc1.is_some() {
            let c1: Vec<f64> = (0..n).map(|j| if s.is_artificial(j) { -1.0 } else { 0.0 }).collect();
            self.rc1 = Some(self.reduced(&c1));
        }
        true
    }
}

/// Pivots between refactorizations of the floating-point tableau.
const REFACTOR_EVERY: usize = 50;

/// Runs the floating-point tableau and returns its final basis, if it
/// finished within the pivot budget.
fn float_basis(s: &Standard) -> Option<(Vec<usize>, Vec<Status>)> {
    // right-hand side perturbation against degenerate cycling
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let perturb: Vec<f64> = (0..s.m).map(|_| 1e-6 * (1.0 + rng.gen::<f64>())).collect();
    let mut t: Tableau<f64> = Tableau::cold(s);
    for (b, e) in t.beta.iter_mut().zip(&perturb) {
        *b += e;
    }
    t.setup_phase(s);
    let budget = 50 * (s.m + s.ncols()) + 1000;
    loop {
        t.pivot_limit = Some(t.pivots + REFACTOR_EVERY);
        match t.run() {
            StepResult::Stalled if t.pivots < budget => {
                if !t.refactor(s, &perturb) {
                    return None;
                }
            }
            StepResult::Stalled | StepResult::Progress => return None,
            _ => return t.refactor(s, &perturb).then_some((t.basis, t.status)),
        }
    }
}

/// Problems at least this large are first solved in floating point; the
/// exact solve then starts from that basis.
const WARM_START_MIN_CELLS: usize = 4000;

/// Solves `p` exactly.
pub fn lp_solve(p: &LinearProgram) -> Result<LpOutcome, LpError> {
    solve_with(p, None)
}

/// `warm_start` overrides the size rule for trying a floating-point start.
fn solve_with(p: &LinearProgram, warm_start: Option<bool>) -> Result<LpOutcome, LpError> {
    p.check_dims()?;
    let sign = match p.sense {
        Sense::Max => Rational::one(),
        Sense::Min => -Rational::one(),
    };

    // bounds that exclude everything
    for b in &p.bounds {
        if let (Some(l), Some(u)) = (&b.lower, &b.upper) {
            if l > u {
                return Ok(LpOutcome::Infeasible {
                    farkas: vec![Rational::zero(); p.constraints.len()],
                });
            }
        }
    }

    let s = Standard::new(p, &sign);
    let try_warm = warm_start.unwrap_or(s.m * s.ncols() >= WARM_START_MIN_CELLS);
    let warm = if try_warm {
        let fb = float_basis(&s);
        if trace_enabled() {
            eprintln!("lp: float basis {}", if fb.is_some() { "found" } else { "not found" });
        }
        let w = fb.and_then(|(basis, status)| Tableau::warm(&s, &basis, &status));
        if trace_enabled() {
            eprintln!("lp: warm start {}", if w.is_some() { "accepted" } else { "rejected" });
        }
        w
    } else {
        None
    };
    let mut t = match warm {
        Some(t) => t,
        None => Tableau::cold(&s),
    };
    let result = t.run();
    if trace_enabled() {
        eprintln!("lp: {} rows, {} columns, {} exact pivots", s.m, s.ncols(), t.pivots);
    }
    let m = s.m;
    match result {
        StepResult::Infeasible => {
            let rc1 = t.rc1.as_ref().unwrap();
            let y_int = t.duals(
                &s,
                |j| {
                    if s.is_artificial(j) {
                        -Rational::one()
                    } else {
                        Rational::zero()
                    }
                },
                rc1,
            );
            let farkas: Vec<Rational> = (0..m).map(|i| &y_int[i] * &s.row_sign(i)).collect();
            Ok(LpOutcome::Infeasible { farkas })
        }
        StepResult::Optimal => {
            let point = s.unmap(&|k| t.value_of(k), false);
            let value = p.objective_value(&point);
            let y_int = t.duals(&s, |j| s.cost[j].clone(), &t.rc);
            let dual: Vec<Rational> = (0..m).map(|i| &(&y_int[i] * &s.row_sign(i)) * &sign).collect();
            Ok(LpOutcome::Optimal { point, value, dual })
        }
        StepResult::Unbounded(q) => {
            let point = s.unmap(&|k| t.value_of(k), false);
            let increasing = t.status[q] == Status::Lower;
            let mut dir = vec![Rational::zero(); t.ncols()];
            dir[q] = if increasing { Rational::one() } else { -Rational::one() };
            for i in 0..m {
                let a = &t.rows[i][q];
                if !a.is_zero() {
                    dir[t.basis[i]] = if increasing { -a } else { a.clone() };
                }
            }
            let ray = s.unmap(&|k| dir[k].clone(), true);
            Ok(LpOutcome::Unbounded { point, ray })
        }
        StepResult::Progress | StepResult::Stalled => unreachable!(),
    }
}

/// Re-derives the claimed status of `o` for `p` by direct arithmetic.
///
/// * Optimal: the point is feasible, its objective equals `value`, the
///   dual multipliers have the right signs, every reduced cost is covered
///   by a finite bound, and the dual objective equals `value`.
/// * Unbounded: the point is feasible and the ray is a recession direction
///   that strictly improves the objective.
/// * Infeasible: the Farkas combination of the rows is a valid inequality
///   whose left side is bounded below on the variable box by more than its
///   right side.
pub fn verify_certificate(p: &LinearProgram, o: &LpOutcome) -> bool {
    if p.check_dims().is_err() {
        return false;
    }
    let n = p.num_vars();
    let m = p.constraints.len();
    let sign = match p.sense {
        Sense::Max => Rational::one(),
        Sense::Min => -Rational::one(),
    };
    match o {
        LpOutcome::Optimal { point, value, dual } => {
            if !p.is_feasible_point(point) || &p.objective_value(point) != value || dual.len() != m {
                return false;
            }
            let y: Vec<Rational> = dual.iter().map(|v| v * &sign).collect();
            let mut d: Vec<Rational> = p.objective.iter().map(|c| c * &sign).collect();
            let mut dual_obj = Rational::zero();
            for (c, yi) in p.constraints.iter().zip(&y) {
                let ok = match c.rel {
                    Relation::Le => !yi.is_negative(),
                    Relation::Ge => !yi.is_positive(),
                    Relation::Eq => true,
                };
                if !ok {
                    return false;
                }
                if yi.is_zero() {
                    continue;
                }
                for (j, a) in &c.coeffs {
                    d[*j] -= a * yi;
                }
                dual_obj += yi * &c.rhs;
            }
            for j in 0..n {
                let b = &p.bounds[j];
                match d[j].signum() {
                    0 => {}
                    1 => match &b.upper {
                        Some(u) => dual_obj += &d[j] * u,
                        None => return false,
                    },
                    _ => match &b.lower {
                        Some(l) => dual_obj += &d[j] * l,
                        None => return false,
                    },
                }
            }
            dual_obj == &sign * value
        }
        LpOutcome::Unbounded { point, ray } => {
            if !p.is_feasible_point(point) || ray.len() != n {
                return false;
            }
            for c in &p.constraints {
                let v = c.eval(ray);
                let ok = match c.rel {
                    Relation::Le => !v.is_positive(),
                    Relation::Ge => !v.is_negative(),
                    Relation::Eq => v.is_zero(),
                };
                if !ok {
                    return false;
                }
            }
            for (b, r) in p.bounds.iter().zip(ray) {
                if b.lower.is_some() && r.is_negative() {
                    return false;
                }
                if b.upper.is_some() && r.is_positive() {
                    return false;
                }
            }
            (&sign * &p.objective_value(ray)).is_positive()
        }
        LpOutcome::Infeasible { farkas } => {
            if p.bounds
                .iter()
                .any(|b| matches!((&b.lower, &b.upper), (Some(l), Some(u)) if l > u))
            {
                return true;
            }
            if farkas.len() != m {
                return false;
            }
            let mut g = vec![Rational::zero(); n];
            let mut yb = Rational::zero();
            for (c, yi) in p.constraints.iter().zip(farkas) {
                let ok = match c.rel {
                    Relation::Le => !yi.is_negative(),
                    Relation::Ge => !yi.is_positive(),
                    Relation::Eq => true,
                };
                if !ok {
                    return false;
                }
                if yi.is_zero() {
                    continue;
                }
                for (j, a) in &c.coeffs {
                    g[*j] += a * yi;
                }
                yb += yi * &c.rhs;
            }
            let mut min_lhs = Rational::zero();
            for (gj, b) in g.iter().zip(&p.bounds) {
                match gj.signum() {
                    0 => {}
                    1 => match &b.lower {
                        Some(l) => min_lhs += gj * l,
                        None => return false,
                    },
                    _ => match &b.upper {
                        Some(u) => min_lhs += gj * u,
                        None => return false,
                    },
                }
            }
            min_lhs > yb
        }
    }
}

/// Solves and insists on a verified certificate; verdict code only goes
/// through this entry point.
pub fn solve_verified(p: &LinearProgram) -> Result<LpOutcome, LpError> {
    let o = lp_solve(p)?;
    assert!(
        verify_certificate(p, &o),
        "LP certificate failed verification ({}):\n{}",
        o.status(),
        p.to_text()
    );
    Ok(o)
}
