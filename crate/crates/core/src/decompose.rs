//! Splitting an order at a node into a reversible part and a pure part.
//!
//! An order `λ` at node `u` (time `t`) is reversible when its effect can be
//! undone later: `−lift(u, L_u(λ)) ∈ A_{t+1}^T` restricted to the subtree of
//! `u`. These orders form a cone `R_t`. The reversible part `p(λ)` is the
//! point of `X_λ = {λ̃ ∈ R_t : 0 ≤ λ̃ ≤ λ}` nearest to `λ` in the Euclidean
//! norm and `q(λ) = λ − p(λ)`.
//!
//! `R_t` is never written down as an inequality system. The projection runs
//! Wolfe's minimum-norm-point method, whose only access to `X_λ` is an LP
//! over the lifted set `{(λ̃, ν) : lift(u, L_u(λ̃)) + G ν = 0}`; in exact
//! arithmetic it terminates with the exact minimiser. Optimality is then
//! certified by one more LP: `y` is the projection iff `min_{z ∈ X_λ} g·z =
//! g·y` for `g = y − λ`.

use serde_json::{json, Value};
use thiserror::Error;

use crate::claims::{build_attainable_below, lift, member_attainable, AttainableCone, Membership, Strategy};
use crate::exactlp::{lp_solve, verify_certificate, Bound, Constraint, LinearProgram, LpOutcome, Relation, Sense};
use crate::linalg;
use crate::rational::{vec, Rational};
use crate::scenario::{BidAskMatrix, MarketModel};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecomposeError {
    #[error("node {0:?} has no bid-ask matrix")]
    NotBidAsk(String),
    #[error("bad order: {0}")]
    BadOrder(String),
    #[error("node {0:?} is terminal; nothing trades after it")]
    Terminal(String),
    #[error("projection did not converge within {0} iterations")]
    Stalled(usize),
}

/// A `d × d` matrix of order quantities, `λ[i][j]` units of asset `j`
/// bought with asset `i`.
pub type Order = Vec<Vec<Rational>>;

pub fn zero_order(d: usize) -> Order {
    vec![vec::zeros(d); d]
}

/// Parses `[i, j, qty]` triples with 1-based assets; repeated pairs add up.
pub fn order_from_triples(d: usize, triples: &[(usize, usize, Rational)]) -> Result<Order, DecomposeError> {
    let mut o = zero_order(d);
    for (i, j, x) in triples {
        if *i == 0 || *j == 0 || *i > d || *j > d {
            return Err(DecomposeError::BadOrder(format!("asset pair ({i},{j}) out of range")));
        }
        o[i - 1][j - 1] += x;
    }
    check_order(&o, d)?;
    Ok(o)
}

fn check_order(o: &Order, d: usize) -> Result<(), DecomposeError> {
    if o.len() != d || o.iter().any(|r| r.len() != d) {
        return Err(DecomposeError::BadOrder(format!("order must be {d}x{d}")));
    }
    for i in 0..d {
        if !o[i][i].is_zero() {
            return Err(DecomposeError::BadOrder("diagonal entries must be zero".into()));
        }
        if o[i].iter().any(Rational::is_negative) {
            return Err(DecomposeError::BadOrder("quantities must be nonnegative".into()));
        }
    }
    Ok(())
}

pub fn order_json(o: &Order) -> Value {
    let mut out = Vec::new();
    for (i, row) in o.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            if !x.is_zero() {
                out.push(json!([i + 1, j + 1, x]));
            }
        }
    }
    Value::Array(out)
}

fn sub(a: &Order, b: &Order) -> Order {
    a.iter().zip(b).map(|(x, y)| vec::sub(x, y)).collect()
}

fn scale(a: &Order, c: &Rational) -> Order {
    a.iter().map(|x| vec::scale(x, c)).collect()
}

fn is_zero(a: &Order) -> bool {
    a.iter().all(|r| vec::is_zero(r))
}

/// `‖a − b‖²`.
pub fn dist2(a: &Order, b: &Order) -> Rational {
    sub(a, b).iter().flatten().map(|x| x * x).sum()
}

/// Portfolio change `L(λ) = Σ λ^{ij} (e^j − π^{ij} e^i)`.
pub fn order_effect(pi: &BidAskMatrix, o: &Order) -> Vec<Rational> {
    let d = pi.d();
    let mut out = vec::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let x = &o[i][j];
            if i != j && !x.is_zero() {
                out[j] += x;
                out[i] -= &(x * pi.get(i, j));
            }
        }
    }
    out
}

/// The node, its matrix and the later cone below it.
struct Setting<'a> {
    m: &'a MarketModel,
    u: usize,
    pi: &'a BidAskMatrix,
    later: AttainableCone,
}

impl<'a> Setting<'a> {
    fn new(m: &'a MarketModel, u: usize) -> Result<Setting<'a>, DecomposeError> {
        let pi = m
            .bid_ask(u)
            .ok_or_else(|| DecomposeError::NotBidAsk(m.node_id(u).to_string()))?;
        let t = m.tree.node(u).t;
        if t == m.horizon() {
            return Err(DecomposeError::Terminal(m.node_id(u).to_string()));
        }
        let later = build_attainable_below(m, u, t + 1, m.horizon()).expect("window inside horizon");
        Ok(Setting { m, u, pi, later })
    }

    /// `−lift(u, L_u(λ))`.
    fn target(&self, o: &Order) -> Vec<Rational> {
        vec::neg(&lift(self.m, self.u, &order_effect(self.pi, o)))
    }

    /// `min c·y` over `{0 ≤ y ≤ λ|_pairs, ν ≥ 0 : lift(u, L_u(y)) + G ν = 0}`.
    fn oracle_lp(&self, pairs: &[(usize, usize)], cap: &Order, c: &[Rational]) -> LinearProgram {
        let np = pairs.len();
        let mut p = LinearProgram::new(Sense::Min, np + self.later.len());
        for (k, &(i, j)) in pairs.iter().enumerate() {
            p.objective[k] = c[k].clone();
            p.bounds[k] = Bound::between(Rational::zero(), cap[i][j].clone());
        }
        let mut rows = self.later.rows(np);
        let d = self.m.d;
        for &pos in self.m.tree.leaves_under(self.u) {
            for (k, &(i, j)) in pairs.iter().enumerate() {
                let base = pos * d;
                rows[base + j].push((k, Rational::one()));
                rows[base + i].push((k, -self.pi.get(i, j)));
            }
        }
        for row in rows {
            if !row.is_empty() {
                p.push(Constraint::new(row, Relation::Eq, Rational::zero()));
            }
        }
        p
    }
}

/// Support pairs of `λ`: the only coordinates a point of `X_λ` can use.
fn support(o: &Order) -> Vec<(usize, usize)> {
    let d = o.len();
    let mut out = Vec::new();
    for i in 0..d {
        for j in 0..d {
            if i != j && o[i][j].is_positive() {
                out.push((i, j));
            }
        }
    }
    out
}

fn restrict(o: &Order, pairs: &[(usize, usize)]) -> Vec<Rational> {
    pairs.iter().map(|&(i, j)| o[i][j].clone()).collect()
}

fn expand(y: &[Rational], pairs: &[(usize, usize)], d: usize) -> Order {
    let mut o = zero_order(d);
    for (x, &(i, j)) in y.iter().zip(pairs) {
        o[i][j] = x.clone();
    }
    o
}

/// Whether `λ ∈ R_t`: a strategy on `[t+1, T]` below `u` undoing the order,
/// or a separating functional.
pub fn reversible_cone_test(m: &MarketModel, u: usize, o: &Order) -> Result<Membership, DecomposeError> {
    check_order(o, m.d)?;
    let s = Setting::new(m, u)?;
    Ok(member_attainable(&s.later, &s.target(o)))
}

/// `p(λ)` and `q(λ)` with the optimality certificate and the liquidation of
/// the reversible part.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub node: usize,
    pub order: Order,
    pub reversible: Order,
    pub pure: Order,
    /// `min g·z` over `X_λ` with `g = p(λ) − λ` on the support of `λ`.
    pub kkt: (LinearProgram, LpOutcome),
    /// Strategy on `[t+1, T]` inducing `−lift(u, L_u(p(λ)))`.
    pub liquidation: Strategy,
    pub iterations: usize,
}

impl Decomposition {
    /// Re-checks feasibility of `p(λ)`, the liquidation strategy and the
    /// variational inequality certified by the KKT LP.
    pub fn verify(&self, m: &MarketModel) -> Result<(), String> {
        let s = Setting::new(m, self.node).map_err(|e| e.to_string())?;
        let d = m.d;
        if sub(&self.order, &self.reversible) != self.pure {
            return Err("parts do not add up to the order".into());
        }
        for i in 0..d {
            for j in 0..d {
                let r = &self.reversible[i][j];
                if r.is_negative() || r > &self.order[i][j] {
                    return Err("reversible part leaves the box [0, λ]".into());
                }
            }
        }
        let t = m.tree.node(self.node).t;
        if !is_zero(&self.reversible) {
            let sub_ok = self
                .liquidation
                .trades
                .keys()
                .all(|&v| m.tree.is_descendant(v, self.node));
            if self.liquidation.s != t + 1 || !sub_ok || !self.liquidation.realizes(m, &s.target(&self.reversible)) {
                return Err("liquidation strategy does not undo the reversible part".into());
            }
        }
        let pairs = support(&self.order);
        let g: Vec<Rational> = pairs
            .iter()
            .map(|&(i, j)| &self.reversible[i][j] - &self.order[i][j])
            .collect();
        let (lp, outcome) = &self.kkt;
        if *lp != s.oracle_lp(&pairs, &self.order, &g) {
            return Err("KKT LP differs from the projection problem".into());
        }
        let gy = vec::dot(&g, &restrict(&self.reversible, &pairs));
        if !verify_certificate(lp, outcome) || outcome.value() != Some(&gy) {
            return Err("KKT certificate fails".into());
        }
        Ok(())
    }

    pub fn to_json(&self, m: &MarketModel) -> Value {
        json!({
            "node": m.node_id(self.node),
            "order": order_json(&self.order),
            "reversible": order_json(&self.reversible),
            "pure": order_json(&self.pure),
            "kkt": {
                "gradient": order_json(&sub(&self.reversible, &self.order)),
                "value": self.kkt.1.value(),
            },
            "liquidation": self.liquidation.to_json(m),
        })
    }
}

const MAX_ITERATIONS: usize = 10_000;

fn solve_oracle(lp: &LinearProgram, np: usize) -> Vec<Rational> {
    let o = lp_solve(lp).expect("well-formed oracle LP");
    assert!(verify_certificate(lp, &o), "oracle LP certificate");
    match o {
        LpOutcome::Optimal { point, .. } => point[..np].to_vec(),
        _ => unreachable!("the box is bounded and contains zero"),
    }
}

/// Point of `conv(points)` nearest to the origin, as weights; the corral
/// `points` is affinely independent.
fn affine_minimizer(points: &[Vec<Rational>]) -> Vec<Rational> {
    let k = points.len();
    let mut a = vec![vec::zeros(k + 1); k + 1];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = vec::dot(&points[i], &points[j]);
        }
        a[i][k] = Rational::one();
        a[k][i] = Rational::one();
    }
    let mut b = vec::zeros(k + 1);
    b[k] = Rational::one();
    let sol = linalg::solve(&a, &b, k + 1).expect("corral is affinely independent");
    sol[..k].to_vec()
}

fn combine(points: &[Vec<Rational>], w: &[Rational]) -> Vec<Rational> {
    let mut x = vec::zeros(points[0].len());
    for (p, c) in points.iter().zip(w) {
        vec::axpy(&mut x, c, p);
    }
    x
}

/// Wolfe's method on the shifted set `X_λ − λ`; returns the minimiser
/// (unshifted) and the iteration count.
fn project(s: &Setting, pairs: &[(usize, usize)], cap: &Order) -> Result<(Vec<Rational>, usize), DecomposeError> {
    let np = pairs.len();
    let lam = restrict(cap, pairs);
    // the zero order is always reversible
    let mut corral: Vec<Vec<Rational>> = vec![vec::neg(&lam)];
    let mut w = vec![Rational::one()];
    let mut x = corral[0].clone();
    for it in 0..MAX_ITERATIONS {
        let y = solve_oracle(&s.oracle_lp(pairs, cap, &x), np);
        let qv = vec::sub(&y, &lam);
        if vec::dot(&x, &x) <= vec::dot(&x, &qv) {
            return Ok((vec::add(&x, &lam), it));
        }
        corral.push(qv);
        w.push(Rational::zero());
        loop {
            let alpha = affine_minimizer(&corral);
            if alpha.iter().all(Rational::is_positive) {
                w = alpha;
                x = combine(&corral, &w);
                break;
            }
            let mut theta: Option<Rational> = None;
            for (wi, ai) in w.iter().zip(&alpha) {
                if !ai.is_positive() {
                    let r = wi / &(wi - ai);
                    theta = Some(match theta {
                        Some(t) => t.min(r),
                        None => r,
                    });
                }
            }
            let theta = theta.expect("some weight is nonpositive");
            let one_minus = &Rational::one() - &theta;
            w = w
                .iter()
                .zip(&alpha)
                .map(|(wi, ai)| &(&one_minus * wi) + &(&theta * ai))
                .collect();
            let keep: Vec<bool> = w.iter().map(|x| x.is_positive()).collect();
            corral = corral
                .into_iter()
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|(p, _)| p)
                .collect();
            w = w.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(p, _)| p).collect();
        }
    }
    Err(DecomposeError::Stalled(MAX_ITERATIONS))
}

/// Computes `p(λ)` and `q(λ)` at node `u`.
pub fn decompose_order(m: &MarketModel, u: usize, o: &Order) -> Result<Decomposition, DecomposeError> {
    check_order(o, m.d)?;
    let s = Setting::new(m, u)?;
    let pairs = support(o);
    let (y, iterations) = if pairs.is_empty() {
        (Vec::new(), 0)
    } else {
        project(&s, &pairs, o)?
    };
    let reversible = expand(&y, &pairs, m.d);
    let g: Vec<Rational> = vec::sub(&y, &restrict(o, &pairs));
    let lp = s.oracle_lp(&pairs, o, &g);
    let outcome = lp_solve(&lp).expect("well-formed KKT LP");
    let liquidation = match member_attainable(&s.later, &s.target(&reversible)) {
        Membership::Member(st) => st,
        Membership::Separated(_) => unreachable!("the projection is reversible"),
    };
    let d = Decomposition {
        node: u,
        order: o.clone(),
        pure: sub(o, &reversible),
        reversible,
        kkt: (lp, outcome),
        liquidation,
        iterations,
    };
    debug_assert!(d.verify(m).is_ok(), "{:?}", d.verify(m));
    Ok(d)
}

/// Outcome of [`check_decomposition_laws`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Laws {
    /// `p(μλ) = μ p(λ)`.
    pub homogeneous: bool,
    /// `q(q(λ)) = q(λ)`.
    pub q_idempotent: bool,
    /// `p(p(λ)) = p(λ)` and `p(q(λ)) = 0`, so nothing nonzero lies in both
    /// images.
    pub images_disjoint: bool,
}

impl Laws {
    pub fn all(&self) -> bool {
        self.homogeneous && self.q_idempotent && self.images_disjoint
    }
}

pub fn check_decomposition_laws(m: &MarketModel, u: usize, o: &Order, mu: &Rational) -> Result<Laws, DecomposeError> {
    let base = decompose_order(m, u, o)?;
    let scaled = decompose_order(m, u, &scale(o, mu))?;
    let of_q = decompose_order(m, u, &base.pure)?;
    let of_p = decompose_order(m, u, &base.reversible)?;
    Ok(Laws {
        homogeneous: scaled.reversible == scale(&base.reversible, mu),
        q_idempotent: of_q.pure == base.pure,
        images_disjoint: of_p.reversible == base.reversible && is_zero(&of_q.reversible),
    })
}

/// `‖p(λ + δ/n) − p(λ)‖²` for `n ∈ {1, 10, 100, 1000}`.
pub fn continuity_errors(m: &MarketModel, u: usize, o: &Order, delta: &Order) -> Result<Vec<Rational>, DecomposeError> {
    let base = decompose_order(m, u, o)?;
    let mut out = Vec::new();
    for n in [1i64, 10, 100, 1000] {
        let step = scale(delta, &Rational::new(1, n));
        let on: Order = o.iter().zip(&step).map(|(a, b)| vec::add(a, b)).collect();
        let dn = decompose_order(m, u, &on)?;
        out.push(dist2(&dn.reversible, &base.reversible));
    }
    Ok(out)
}

/// Errors nonincreasing along the sequence and strictly smaller at the end
/// unless all are zero.
pub fn continuity_ok(errors: &[Rational]) -> bool {
    let monotone = errors.windows(2).all(|w| w[1] <= w[0]);
    let shrinks = errors.last() < errors.first() || errors.iter().all(Rational::is_zero);
    monotone && shrinks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::scenario::library::{ex41, ex42};

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    fn order(d: usize, entries: &[(usize, usize, Rational)]) -> Order {
        order_from_triples(d, entries).unwrap()
    }

    #[test]
    fn ex41_purchase_is_reversible() {
        // buying the stock at the root can be sold back at price 1 at t = 1
        let m = ex41();
        let o = order(2, &[(1, 2, r(1))]);
        assert!(reversible_cone_test(&m, 0, &o).unwrap().is_member());
        let dec = decompose_order(&m, 0, &o).unwrap();
        assert_eq!(dec.reversible, o);
        assert!(is_zero(&dec.pure));
        assert!(dec.verify(&m).is_ok());
    }

    #[test]
    fn ex41_sale_is_pure() {
        // cash bought at 2 units of stock cannot be turned back into two
        // units of stock at t = 1
        let m = ex41();
        let o = order(2, &[(2, 1, r(1))]);
        let dec = decompose_order(&m, 0, &o).unwrap();
        assert!(is_zero(&dec.reversible));
        assert_eq!(dec.pure, o);
    }

    #[test]
    fn ex42_sale_is_pure_and_purchase_reversible() {
        // a sale is not undone at repurchase price 2 ...
        let m = ex42();
        let sale = order(2, &[(2, 1, r(1))]);
        assert!(!reversible_cone_test(&m, 0, &sale).unwrap().is_member());
        let dec = decompose_order(&m, 0, &sale).unwrap();
        assert!(is_zero(&dec.reversible));
        assert_eq!(dec.pure, sale);
        assert!(dec.verify(&m).is_ok());
        // ... while a purchase can still be sold at bid 1
        let buy = order(2, &[(1, 2, q(3, 2))]);
        assert_eq!(decompose_order(&m, 0, &buy).unwrap().reversible, buy);
    }

    #[test]
    fn mixed_order_projects_onto_the_reversible_part() {
        let m = ex42();
        let o = order(2, &[(1, 2, r(2)), (2, 1, r(1))]);
        let dec = decompose_order(&m, 0, &o).unwrap();
        assert!(dec.verify(&m).is_ok());
        assert_eq!(dec.reversible[0][1], r(2));
        assert!(dec.reversible[1][0] < r(1));
        let laws = check_decomposition_laws(&m, 0, &o, &q(5, 2)).unwrap();
        assert!(laws.all(), "{laws:?}");
    }

    #[test]
    fn tampering_breaks_the_certificate() {
        let m = ex42();
        let o = order(2, &[(1, 2, r(2)), (2, 1, r(1))]);
        let mut dec = decompose_order(&m, 0, &o).unwrap();
        dec.reversible[0][1] = r(1);
        dec.pure = sub(&dec.order, &dec.reversible);
        assert!(dec.verify(&m).is_err());
    }

    #[test]
    fn bad_orders_are_rejected() {
        assert!(order_from_triples(2, &[(1, 1, r(1))]).is_err());
        assert!(order_from_triples(2, &[(1, 3, r(1))]).is_err());
        assert!(order_from_triples(2, &[(1, 2, r(-1))]).is_err());
        let o = order(2, &[(1, 2, r(1))]);
        assert!(matches!(
            decompose_order(&ex41(), 1, &o),
            Err(DecomposeError::Terminal(_))
        ));
    }
}
