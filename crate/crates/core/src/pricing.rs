//! Consistent price systems, frictionless witnesses and superhedging.
//!
//! A consistent price system (CPS) is a martingale `Z` with
//! `Z(u) ∈ K^*(u) \ {0}` at every node. The LPs here are written over the
//! extreme rays of each `K^*(u)`: `Z(u) = Σ_r β_{u,r} ρ_r` with `β ≥ 0`, so
//! only the martingale and normalisation rows remain. Infeasibility is
//! reported as a Farkas certificate of the plain LP over `Z` (with the
//! inequality rows of `K^*`), which does not depend on the ray lists.

use serde_json::{json, Value};
use thiserror::Error;

use crate::claims::{self, at_leaf, build_attainable, Claim, Strategy};
use crate::cones::{self, cone_combination, dd_h_to_v, dual_cone_h, ConeError, ConeH, DEFAULT_DD_LIMIT};
use crate::exactlp::{lp_solve, verify_certificate, Bound, Constraint, LinearProgram, LpOutcome, Relation, Sense};
use crate::jsonfmt::OrderedMap;
use crate::rational::{vec, Rational};
use crate::scenario::{BidAskMatrix, MarketModel, NodeCone};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PricingError {
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error("the model admits no consistent price system")]
    NoCps,
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("asset index {0} out of range")]
    BadAsset(usize),
    #[error("claim has {got} entries, expected {expected}")]
    BadClaim { got: usize, expected: usize },
    #[error("price system vanishes in asset {asset} at node {node:?}")]
    NotPositive { node: String, asset: usize },
    #[error("the claim cannot be superhedged with the numeraire")]
    NotSuperhedgeable,
    #[error("the bound LP is unbounded")]
    Unbounded,
    #[error("witness does not match the model: {0}")]
    Witness(String),
}

/// A process `Z` given node by node, with a tag saying how it was scaled.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PriceSystem {
    pub z: Vec<Vec<Rational>>,
    pub normalization: String,
}

impl PriceSystem {
    pub fn to_json(&self, m: &MarketModel) -> Value {
        let z: OrderedMap<Vec<Rational>> = self
            .z
            .iter()
            .enumerate()
            .map(|(u, x)| (m.node_id(u).to_string(), x.clone()))
            .collect();
        json!({"normalization": self.normalization, "z": z})
    }

    /// Nodes where `Z` is the zero vector.
    pub fn zero_nodes(&self) -> Vec<usize> {
        (0..self.z.len()).filter(|&u| vec::is_zero(&self.z[u])).collect()
    }
}

/// Checks shape, `Z(u) ∈ K^*(u)`, the martingale identity and `Z(u) ≠ 0`.
pub fn verify_cps(m: &MarketModel, ps: &PriceSystem) -> Result<(), String> {
    verify_closure(m, ps)?;
    if let Some(u) = ps.zero_nodes().first() {
        return Err(format!("Z vanishes at node {:?}", m.node_id(*u)));
    }
    Ok(())
}

/// As [`verify_cps`] but allows `Z(u) = 0`.
pub fn verify_closure(m: &MarketModel, ps: &PriceSystem) -> Result<(), String> {
    let tree = &m.tree;
    if ps.z.len() != tree.len() || ps.z.iter().any(|x| x.len() != m.d) {
        return Err("price system has the wrong shape".into());
    }
    for u in 0..tree.len() {
        let h = dual_cone_h(&m.cones[u]);
        if !h.contains(&ps.z[u]) {
            return Err(format!("Z({}) is not in the dual cone", m.node_id(u)));
        }
        let children = &tree.node(u).children;
        if children.is_empty() {
            continue;
        }
        let mut lhs = vec::scale(&ps.z[u], &tree.prob(u));
        for &c in children {
            vec::axpy(&mut lhs, &-tree.prob(c), &ps.z[c]);
        }
        if !vec::is_zero(&lhs) {
            return Err(format!("martingale identity fails at node {:?}", m.node_id(u)));
        }
    }
    Ok(())
}

/// Rows of `h` that vanish on the whole cone, proven by `−a ∈ cone(rows)`.
fn is_implicit(h: &ConeH, a: usize) -> bool {
    cones::cone_contains(&h.rows, &vec::neg(&h.rows[a]))
}

/// [`verify_cps`] plus `Z(u) ∈ relint K^*(u)`: every row of `K^*(u)` is
/// either strictly positive at `Z(u)` or an implicit equality.
pub fn verify_scps(m: &MarketModel, ps: &PriceSystem) -> Result<(), String> {
    verify_cps(m, ps)?;
    for u in 0..m.tree.len() {
        let h = dual_cone_h(&m.cones[u]);
        for a in 0..h.rows.len() {
            if vec::dot(&h.rows[a], &ps.z[u]).is_zero() && !is_implicit(&h, a) {
                return Err(format!("Z({}) lies on a proper face of the dual cone", m.node_id(u)));
            }
        }
    }
    Ok(())
}

/// Extreme rays of `K^*(u)` at every node and the column layout of the
/// ray-weight LPs.
struct RayLayout {
    rays: Vec<Vec<Vec<Rational>>>,
    start: Vec<usize>,
    len: usize,
}

impl RayLayout {
    fn new(m: &MarketModel) -> Result<RayLayout, ConeError> {
        let mut rays = Vec::with_capacity(m.tree.len());
        let mut start = Vec::with_capacity(m.tree.len());
        let mut len = 0;
        for c in &m.cones {
            let v = dd_h_to_v(&dual_cone_h(c), DEFAULT_DD_LIMIT)?;
            start.push(len);
            len += v.rays.len();
            rays.push(v.rays);
        }
        Ok(RayLayout { rays, start, len })
    }

    /// Coefficients of `Z_i(u)` in terms of the ray weights, scaled by `c`.
    fn coord(&self, u: usize, i: usize, c: &Rational) -> Vec<(usize, Rational)> {
        self.rays[u]
            .iter()
            .enumerate()
            .map(|(r, ray)| (self.start[u] + r, &ray[i] * c))
            .collect()
    }

    fn z(&self, beta: &[Rational], d: usize) -> Vec<Vec<Rational>> {
        self.rays
            .iter()
            .enumerate()
            .map(|(u, rs)| {
                let mut z = vec::zeros(d);
                for (r, ray) in rs.iter().enumerate() {
                    let b = &beta[self.start[u] + r];
                    if !b.is_zero() {
                        vec::axpy(&mut z, b, ray);
                    }
                }
                z
            })
            .collect()
    }

    /// Martingale rows `P(u) Z_i(u) − Σ_c P(c) Z_i(c) = 0`.
    fn martingale_rows(&self, m: &MarketModel) -> Vec<Constraint> {
        let tree = &m.tree;
        let mut out = Vec::new();
        for u in 0..tree.len() {
            let children = &tree.node(u).children;
            if children.is_empty() {
                continue;
            }
            for i in 0..m.d {
                let mut coeffs = self.coord(u, i, &tree.prob(u));
                for &c in children {
                    coeffs.extend(self.coord(c, i, &-tree.prob(c)));
                }
                out.push(Constraint::new(coeffs, Relation::Eq, Rational::zero()));
            }
        }
        out
    }
}

/// The CPS feasibility LP over `Z` itself: variables `Z_i(u)` at column
/// `u·d + i`; rows are the inequalities of every `K^*(u)`, then the
/// martingale identities, then `Σ_i Z_i(u) ≥ 1` per node.
pub fn cps_lp(m: &MarketModel) -> (LinearProgram, Vec<String>) {
    let tree = &m.tree;
    let d = m.d;
    let mut p = LinearProgram::new(Sense::Max, tree.len() * d);
    let mut labels = Vec::new();
    for u in 0..tree.len() {
        for (k, a) in dual_cone_h(&m.cones[u]).rows.iter().enumerate() {
            p.push(Constraint::new(
                (0..d).map(|i| (u * d + i, a[i].clone())).collect(),
                Relation::Ge,
                Rational::zero(),
            ));
            labels.push(format!("dual cone row {} at {}", k + 1, m.node_id(u)));
        }
    }
    for u in 0..tree.len() {
        let children = &tree.node(u).children;
        if children.is_empty() {
            continue;
        }
        for i in 0..d {
            let mut coeffs = vec![(u * d + i, tree.prob(u))];
            for &c in children {
                coeffs.push((c * d + i, -tree.prob(c)));
            }
            p.push(Constraint::new(coeffs, Relation::Eq, Rational::zero()));
            labels.push(format!("martingale asset {} at {}", i + 1, m.node_id(u)));
        }
    }
    for u in 0..tree.len() {
        p.push(Constraint::new(
            (0..d).map(|i| (u * d + i, Rational::one())).collect(),
            Relation::Ge,
            Rational::one(),
        ));
        labels.push(format!("normalization at {}", m.node_id(u)));
    }
    (p, labels)
}

/// Why no (strictly) consistent price system exists.
#[derive(Clone, Debug)]
pub enum CpsCertificate {
    /// Farkas multipliers for [`cps_lp`].
    Farkas {
        lp: LinearProgram,
        labels: Vec<String>,
        farkas: Vec<Rational>,
    },
    /// The slack LP of the strict search has optimum zero.
    ZeroSlack { lp: LinearProgram, outcome: LpOutcome },
}

impl CpsCertificate {
    pub fn verify(&self) -> bool {
        match self {
            CpsCertificate::Farkas { lp, farkas, .. } => {
                verify_certificate(lp, &LpOutcome::Infeasible { farkas: farkas.clone() })
            }
            CpsCertificate::ZeroSlack { lp, outcome } => {
                matches!(outcome.value(), Some(v) if v.is_zero()) && verify_certificate(lp, outcome)
            }
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            CpsCertificate::Farkas { labels, farkas, .. } => {
                let rows: Vec<Value> = labels
                    .iter()
                    .zip(farkas)
                    .filter(|(_, y)| !y.is_zero())
                    .map(|(l, y)| json!({"row": l, "multiplier": y}))
                    .collect();
                json!({"kind": "farkas", "rows": rows})
            }
            CpsCertificate::ZeroSlack { outcome, .. } => {
                json!({"kind": "zero-slack", "value": outcome.value()})
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum CpsOutcome {
    /// `slack` is the optimal margin of the strict search.
    Found {
        ps: PriceSystem,
        slack: Option<Rational>,
    },
    Absent(CpsCertificate),
}

impl CpsOutcome {
    pub fn price_system(&self) -> Option<&PriceSystem> {
        match self {
            CpsOutcome::Found { ps, .. } => Some(ps),
            CpsOutcome::Absent(_) => None,
        }
    }
}

/// Searches for a CPS, or with `strict` for one taking values in the
/// relative interiors of the dual cones.
pub fn find_cps(m: &MarketModel, strict: bool) -> Result<CpsOutcome, PricingError> {
    let layout = RayLayout::new(m)?;
    let outcome = find_plain(m, &layout);
    match outcome {
        CpsOutcome::Found { .. } if strict => Ok(find_strict(m, &layout)),
        _ => Ok(outcome),
    }
}

fn find_plain(m: &MarketModel, layout: &RayLayout) -> CpsOutcome {
    let tree = &m.tree;
    let mut p = LinearProgram::new(Sense::Max, layout.len);
    for c in layout.martingale_rows(m) {
        p.push(c);
    }
    for u in 0..tree.len() {
        let mut coeffs = Vec::new();
        for i in 0..m.d {
            coeffs.extend(layout.coord(u, i, &Rational::one()));
        }
        p.push(Constraint::new(coeffs, Relation::Ge, Rational::one()));
    }
    let o = lp_solve(&p).expect("well-formed CPS LP");
    assert!(verify_certificate(&p, &o), "CPS LP certificate");
    match o {
        LpOutcome::Optimal { point, .. } => {
            let ps = PriceSystem {
                z: layout.z(&point, m.d),
                normalization: "sum of Z(u) at least 1 at every node".into(),
            };
            debug_assert!(verify_cps(m, &ps).is_ok());
            CpsOutcome::Found { ps, slack: None }
        }
        LpOutcome::Infeasible { farkas } => CpsOutcome::Absent(translate_farkas(m, &farkas)),
        LpOutcome::Unbounded { .. } => unreachable!("zero objective"),
    }
}

/// Turns a Farkas vector of the ray-weight LP into one for [`cps_lp`]: the
/// combined functional on each `Z(u)` is nonnegative on every ray of
/// `K^*(u)`, so it lies in `cone(rows of K^*(u))` and the dual cone rows
/// can absorb it exactly.
fn translate_farkas(m: &MarketModel, y: &[Rational]) -> CpsCertificate {
    let (lp, labels) = cps_lp(m);
    let tree = &m.tree;
    let d = m.d;
    let dual_rows: Vec<ConeH> = m.cones.iter().map(dual_cone_h).collect();
    let n_dual: usize = dual_rows.iter().map(|h| h.rows.len()).sum();
    // functional on the Z variables from the martingale and normalisation rows
    let tail = &lp.constraints[n_dual..];
    debug_assert_eq!(tail.len(), y.len());
    let mut f = vec::zeros(tree.len() * d);
    for (row, yk) in tail.iter().zip(y) {
        for (j, a) in &row.coeffs {
            f[*j] += a * yk;
        }
    }
    let mut farkas = Vec::with_capacity(lp.constraints.len());
    for (u, h) in dual_rows.iter().enumerate() {
        let target = &f[u * d..(u + 1) * d];
        let gamma = cone_combination(&h.rows, target).expect("Farkas functional lies in the solvency cone");
        farkas.extend(gamma.into_iter().map(|g| -g));
    }
    farkas.extend(y.iter().cloned());
    CpsCertificate::Farkas { lp, labels, farkas }
}

/// Maximises `ε` over `β ≥ ε`, `Σ_i Z_i(root) = 1`, `ε ≤ 1`, substituting
/// `β = β' + ε`. A positive optimum gives weights on every ray, hence a
/// point of each relative interior.
fn strict_lp(m: &MarketModel, layout: &RayLayout) -> LinearProgram {
    let tree = &m.tree;
    let n = layout.len;
    let eps = n;
    let mut p = LinearProgram::new(Sense::Max, n + 1);
    p.objective[eps] = Rational::one();
    p.bounds[eps] = Bound::between(Rational::zero(), Rational::one());
    let ray_sum: Vec<Vec<Rational>> = layout
        .rays
        .iter()
        .map(|rs| {
            let mut s = vec::zeros(m.d);
            for r in rs {
                s = vec::add(&s, r);
            }
            s
        })
        .collect();
    for u in 0..tree.len() {
        let children = &tree.node(u).children;
        if children.is_empty() {
            continue;
        }
        for i in 0..m.d {
            let pu = tree.prob(u);
            let mut coeffs = layout.coord(u, i, &pu);
            let mut e = &ray_sum[u][i] * &pu;
            for &c in children {
                let pc = tree.prob(c);
                coeffs.extend(layout.coord(c, i, &-&pc));
                e -= &ray_sum[c][i] * &pc;
            }
            coeffs.push((eps, e));
            p.push(Constraint::new(coeffs, Relation::Eq, Rational::zero()));
        }
    }
    let root = tree.root();
    let mut coeffs = Vec::new();
    let mut e = Rational::zero();
    for i in 0..m.d {
        coeffs.extend(layout.coord(root, i, &Rational::one()));
        e += &ray_sum[root][i];
    }
    coeffs.push((eps, e));
    p.push(Constraint::new(coeffs, Relation::Eq, Rational::one()));
    p
}

/// The slack LP of the strict search; its last variable is the margin.
pub fn strict_cps_lp(m: &MarketModel) -> Result<LinearProgram, PricingError> {
    Ok(strict_lp(m, &RayLayout::new(m)?))
}

fn find_strict(m: &MarketModel, layout: &RayLayout) -> CpsOutcome {
    let n = layout.len;
    let p = strict_lp(m, layout);
    let o = lp_solve(&p).expect("well-formed strict CPS LP");
    assert!(verify_certificate(&p, &o), "strict CPS LP certificate");
    match o {
        LpOutcome::Optimal { point, value, .. } if value.is_positive() => {
            let beta: Vec<Rational> = point[..n].iter().map(|b| b + &value).collect();
            let ps = PriceSystem {
                z: layout.z(&beta, m.d),
                normalization: "sum of Z(root) equal to 1".into(),
            };
            debug_assert!(verify_scps(m, &ps).is_ok());
            CpsOutcome::Found { ps, slack: Some(value) }
        }
        o @ LpOutcome::Optimal { .. } => CpsOutcome::Absent(CpsCertificate::ZeroSlack { lp: p, outcome: o }),
        LpOutcome::Infeasible { .. } | LpOutcome::Unbounded { .. } => {
            unreachable!("a CPS exists and the slack is bounded")
        }
    }
}

/// Range of `Z_i(u)` over the closure of the CPS set normalised by
/// `Z_1(root) = 1`.
pub fn cps_uniqueness_bounds(m: &MarketModel, u: usize, i: usize) -> Result<(Rational, Rational), PricingError> {
    if u >= m.tree.len() {
        return Err(PricingError::UnknownNode(u.to_string()));
    }
    if i >= m.d {
        return Err(PricingError::BadAsset(i + 1));
    }
    let layout = RayLayout::new(m)?;
    if matches!(find_plain(m, &layout), CpsOutcome::Absent(_)) {
        return Err(PricingError::NoCps);
    }
    let mut bounds = Vec::new();
    for sense in [Sense::Min, Sense::Max] {
        let mut p = LinearProgram::new(sense, layout.len);
        for (j, c) in layout.coord(u, i, &Rational::one()) {
            p.objective[j] += c;
        }
        for c in layout.martingale_rows(m) {
            p.push(c);
        }
        p.push(Constraint::new(
            layout.coord(m.tree.root(), 0, &Rational::one()),
            Relation::Eq,
            Rational::one(),
        ));
        let o = lp_solve(&p).expect("well-formed bound LP");
        assert!(verify_certificate(&p, &o), "bound LP certificate");
        match o {
            LpOutcome::Optimal { value, .. } => bounds.push(value),
            LpOutcome::Unbounded { .. } => return Err(PricingError::Unbounded),
            LpOutcome::Infeasible { .. } => return Err(PricingError::NoCps),
        }
    }
    let hi = bounds.pop().unwrap();
    let lo = bounds.pop().unwrap();
    Ok((lo, hi))
}

/// The frictionless market `π̃^{ij} = Z^j / Z^i` on the same tree.
pub fn frictionless_witness(m: &MarketModel, ps: &PriceSystem) -> Result<MarketModel, PricingError> {
    let d = m.d;
    let mut cones = Vec::with_capacity(m.tree.len());
    for (u, z) in ps.z.iter().enumerate() {
        if let Some(i) = z.iter().position(|x| !x.is_positive()) {
            return Err(PricingError::NotPositive {
                node: m.node_id(u).to_string(),
                asset: i + 1,
            });
        }
        let pi = (0..d).map(|i| (0..d).map(|j| &z[j] / &z[i]).collect()).collect();
        cones.push(NodeCone::BidAsk(BidAskMatrix::new(pi)));
    }
    Ok(MarketModel::new(d, m.tree.clone(), cones).expect("same tree, same dimension"))
}

/// Checks that `w` lives on the same tree as `m` and that its solvency
/// cones contain those of `m` (for bid-ask matrices: `π̃ ≤ π`).
pub fn dominated_by(m: &MarketModel, w: &MarketModel) -> Result<(), PricingError> {
    if m.d != w.d || m.tree.len() != w.tree.len() {
        return Err(PricingError::Witness("different shape".into()));
    }
    for u in 0..m.tree.len() {
        let (a, b) = (m.tree.node(u), w.tree.node(u));
        if a.id != b.id || a.parent != b.parent || a.t != b.t {
            return Err(PricingError::Witness(format!("node {:?} differs", a.id)));
        }
        match (m.bid_ask(u), w.bid_ask(u)) {
            (Some(p), Some(pw)) => {
                for i in 0..m.d {
                    for j in 0..m.d {
                        if pw.get(i, j) > p.get(i, j) {
                            return Err(PricingError::Witness(format!(
                                "witness entry ({},{}) exceeds the model at {:?}",
                                i + 1,
                                j + 1,
                                a.id
                            )));
                        }
                    }
                }
            }
            _ => {
                let wide = cones::solvency_cone(&w.cones[u]);
                for r in cones::solvency_cone(&m.cones[u]).rays {
                    if !cones::cone_contains(&wide.rays, &r) {
                        return Err(PricingError::Witness(format!(
                            "witness cone does not contain the model cone at {:?}",
                            a.id
                        )));
                    }
                }
            }
        }
    }
    if m.tree.leaf_prob() != w.tree.leaf_prob() {
        return Err(PricingError::Witness("different leaf probabilities".into()));
    }
    Ok(())
}

/// Superhedging a claim with the numeraire asset, by its primal LP over
/// strategies and, independently, by its dual over the closure of the CPS
/// set.
#[derive(Clone, Debug)]
pub struct Superhedge {
    pub numeraire: usize,
    /// `None` when the primal is unbounded below.
    pub price: Option<Rational>,
    /// Strategy taking `price · e^num` at the root to the claim.
    pub strategy: Option<Strategy>,
    pub primal: (LinearProgram, LpOutcome),
    /// `None` when the closure is empty (no consistent prices at all).
    pub dual_value: Option<Rational>,
    pub dual: Option<(LinearProgram, LpOutcome)>,
    pub dual_ps: Option<PriceSystem>,
}

impl Superhedge {
    pub fn gap(&self) -> Option<Rational> {
        match (&self.price, &self.dual_value) {
            (Some(p), Some(d)) => Some(p - d),
            _ => None,
        }
    }

    pub fn primal_only(&self) -> bool {
        self.dual_value.is_none()
    }

    pub fn verify(&self, m: &MarketModel, v: &[Rational]) -> bool {
        if !verify_certificate(&self.primal.0, &self.primal.1) {
            return false;
        }
        if let (Some(p), Some(st)) = (&self.price, &self.strategy) {
            let mut w = v.to_vec();
            let e = claims::lift(m, m.tree.root(), &vec::unit(m.d, self.numeraire));
            vec::axpy(&mut w, &-p, &e);
            if !st.realizes(m, &w) {
                return false;
            }
        }
        if let Some((lp, o)) = &self.dual {
            if !verify_certificate(lp, o) {
                return false;
            }
        }
        if let Some(ps) = &self.dual_ps {
            if verify_closure(m, ps).is_err() || !ps.z[m.tree.root()][self.numeraire].is_one() {
                return false;
            }
        }
        true
    }

    pub fn to_json(&self, m: &MarketModel) -> Value {
        let mut out = serde_json::Map::new();
        out.insert("numeraire".into(), json!(self.numeraire + 1));
        out.insert("price".into(), json!(self.price));
        out.insert("dual_value".into(), json!(self.dual_value));
        out.insert("gap".into(), json!(self.gap()));
        out.insert("primal_only".into(), json!(self.primal_only()));
        if let Some(st) = &self.strategy {
            out.insert("strategy".into(), st.to_json(m));
        }
        if let Some(ps) = &self.dual_ps {
            out.insert("price_system".into(), ps.to_json(m));
            let zero: Vec<&str> = ps.zero_nodes().into_iter().map(|u| m.node_id(u)).collect();
            out.insert("price_system_zero_at".into(), json!(zero));
        }
        Value::Object(out)
    }
}

/// Least `x` with `v − x e^num ∈ A_0^T`, together with the largest
/// expectation `Σ_ℓ P(ℓ) Z(ℓ)·v(ℓ)` over martingales `Z ∈ K^*` with
/// `Z^num(root) = 1`.
pub fn superhedge(m: &MarketModel, v: &[Rational], numeraire: usize) -> Result<Superhedge, PricingError> {
    if numeraire >= m.d {
        return Err(PricingError::BadAsset(numeraire + 1));
    }
    if v.len() != m.claim_dim() {
        return Err(PricingError::BadClaim {
            got: v.len(),
            expected: m.claim_dim(),
        });
    }
    let a = build_attainable(m, 0, m.horizon()).expect("full window");
    let x = a.len();
    let mut p = LinearProgram::new(Sense::Min, x + 1);
    p.objective[x] = Rational::one();
    p.bounds[x] = Bound::free();
    let e = claims::lift(m, m.tree.root(), &vec::unit(m.d, numeraire));
    for (i, mut row) in a.rows(0).into_iter().enumerate() {
        if !e[i].is_zero() {
            row.push((x, e[i].clone()));
        }
        p.push(Constraint::new(row, Relation::Eq, v[i].clone()));
    }
    let o = lp_solve(&p).expect("well-formed superhedging LP");
    assert!(verify_certificate(&p, &o), "superhedging LP certificate");
    let (price, strategy) = match &o {
        LpOutcome::Optimal { point, value, .. } => (Some(value.clone()), Some(a.strategy(&point[..x]))),
        LpOutcome::Unbounded { .. } => (None, None),
        LpOutcome::Infeasible { .. } => return Err(PricingError::NotSuperhedgeable),
    };

    let layout = RayLayout::new(m)?;
    let mut q = LinearProgram::new(Sense::Max, layout.len);
    for (pos, &l) in m.tree.leaves().iter().enumerate() {
        let pl = &m.tree.leaf_prob()[pos];
        let vl = at_leaf(m, v, pos);
        for (r, ray) in layout.rays[l].iter().enumerate() {
            q.objective[layout.start[l] + r] += pl * &vec::dot(ray, vl);
        }
    }
    for c in layout.martingale_rows(m) {
        q.push(c);
    }
    q.push(Constraint::new(
        layout.coord(m.tree.root(), numeraire, &Rational::one()),
        Relation::Eq,
        Rational::one(),
    ));
    let qo = lp_solve(&q).expect("well-formed dual superhedging LP");
    assert!(verify_certificate(&q, &qo), "dual superhedging LP certificate");
    let (dual_value, dual_ps) = match &qo {
        LpOutcome::Optimal { point, value, .. } => (
            Some(value.clone()),
            Some(PriceSystem {
                z: layout.z(point, m.d),
                normalization: format!("Z^{}(root) = 1", numeraire + 1),
            }),
        ),
        LpOutcome::Infeasible { .. } => (None, None),
        LpOutcome::Unbounded { .. } => return Err(PricingError::NotSuperhedgeable),
    };
    Ok(Superhedge {
        numeraire,
        price,
        strategy,
        primal: (p, o),
        dual_value,
        dual: Some((q, qo)),
        dual_ps,
    })
}

/// The claim paying `w` at every leaf.
pub fn constant_claim(m: &MarketModel, w: &[Rational]) -> Claim {
    claims::lift(m, m.tree.root(), w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::scenario::library::{ex41, ex42, ex43};

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn ex41_price_system_is_unique_but_not_strict() {
        let m = ex41();
        let CpsOutcome::Found { ps, .. } = find_cps(&m, false).unwrap() else {
            panic!("ex41 has consistent prices");
        };
        assert!(verify_cps(&m, &ps).is_ok());
        assert_eq!(ps.z[0][0], ps.z[0][1]);
        assert_eq!(cps_uniqueness_bounds(&m, 0, 1).unwrap(), (r(1), r(1)));
        assert_eq!(cps_uniqueness_bounds(&m, 1, 1).unwrap(), (r(1), r(1)));
        match find_cps(&m, true).unwrap() {
            CpsOutcome::Absent(c) => {
                assert!(c.verify());
                assert!(matches!(c, CpsCertificate::ZeroSlack { .. }));
            }
            CpsOutcome::Found { .. } => panic!("no strictly consistent prices"),
        }
    }

    #[test]
    fn ex42_bounds_and_witness() {
        let m = ex42();
        assert_eq!(cps_uniqueness_bounds(&m, 0, 1).unwrap(), (r(1), r(1)));
        let ps = find_cps(&m, false).unwrap().price_system().cloned().unwrap();
        let w = frictionless_witness(&m, &ps).unwrap();
        for u in 0..2 {
            assert_eq!(w.bid_ask(u).unwrap().pi, vec![vec![r(1); 2]; 2]);
        }
        assert!(dominated_by(&m, &w).is_ok());
        assert!(dominated_by(&w, &m).is_err());
    }

    #[test]
    fn strict_prices_with_a_spread_everywhere() {
        let m = crate::scenario::library::ex41();
        let mut cones = m.cones.clone();
        cones[1] = NodeCone::BidAsk(BidAskMatrix::from_ints(&[&[1, 2], &[2, 1]]));
        let m = MarketModel::new(2, m.tree.clone(), cones).unwrap();
        let CpsOutcome::Found { ps, slack } = find_cps(&m, true).unwrap() else {
            panic!("strict prices exist");
        };
        assert!(slack.unwrap().is_positive());
        assert!(verify_scps(&m, &ps).is_ok());
    }

    #[test]
    fn superhedge_one_unit_of_the_second_asset() {
        for m in [ex41(), ex42()] {
            let v = constant_claim(&m, &[r(0), r(1)]);
            let s = superhedge(&m, &v, 0).unwrap();
            assert_eq!(s.price, Some(r(1)));
            assert_eq!(s.gap(), Some(r(0)));
            assert!(s.verify(&m, &v));
        }
    }

    #[test]
    fn cascade_has_no_consistent_prices() {
        let m = ex43(2, false, None);
        match find_cps(&m, false).unwrap() {
            CpsOutcome::Absent(c) => {
                assert!(c.verify());
                let CpsCertificate::Farkas { farkas, lp, .. } = &c else {
                    panic!()
                };
                assert_eq!(farkas.len(), lp.constraints.len());
            }
            CpsOutcome::Found { .. } => panic!("the cascade admits arbitrage"),
        }
        // the witness only widens the cones, so the truncated arbitrage survives
        let w = ex43(2, true, None);
        assert!(find_cps(&w, false).unwrap().price_system().is_none());
        assert!(dominated_by(&m, &w).is_ok());
    }

    #[test]
    fn farkas_translation_rejects_tampering() {
        let m = ex43(1, false, None);
        let CpsOutcome::Absent(CpsCertificate::Farkas { lp, labels, mut farkas }) = find_cps(&m, false).unwrap() else {
            panic!("no CPS");
        };
        let k = farkas.iter().position(|y| !y.is_zero()).unwrap();
        farkas[k] = &farkas[k] * &q(1, 2);
        assert!(!CpsCertificate::Farkas { lp, labels, farkas }.verify());
    }
}
