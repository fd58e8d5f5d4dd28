//! No-arbitrage conditions, each decided with a certificate that can be
//! re-checked by recomputation.
//!
//! Conditions are trait objects in a [`Registry`]; [`run`] evaluates a
//! selection concurrently, re-verifies every certificate and then checks
//! the known implications between the verdicts.

use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use thiserror::Error;

use crate::claims::{
    build_attainable, claim_json, lineality_attainable, member_attainable, verify_separation, AttainableCone, Claim,
    Membership, Strategy,
};
use crate::cones::{
    cone_contains, functionals_vanish, lineality, positive_kernel, solvency_cone, verify_vanishing, KernelSupport,
    SparseVec, SubspaceBasis, Vanishing,
};
use crate::exactlp::{lp_solve, verify_certificate, Constraint, LinearProgram, LpOutcome, Relation, Sense};
use crate::linalg;
use crate::pricing::{
    cps_lp, dominated_by, find_cps, frictionless_witness, strict_cps_lp, verify_cps, verify_scps, CpsCertificate,
    CpsOutcome, PriceSystem, PricingError,
};
use crate::rational::{vec, Rational};
use crate::scenario::MarketModel;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerdictError {
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unknown condition {0:?}")]
    UnknownCondition(String),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
}

/// Codes of the conditions in [`Registry::standard`], in report order.
pub const STANDARD_CODES: [&str; 8] = ["na", "nas", "naps", "nar", "nawps", "ef", "penner", "nullspace"];

// ---------------------------------------------------------------------------
// Position conditions: A_0^t ∩ (−B_t) ⊆ B_t
// ---------------------------------------------------------------------------

/// Which cone plays `B_t` in `A_0^t ∩ (−B_t) ⊆ B_t`.
#[derive(Clone, Debug)]
pub enum Flavor {
    /// `B_t = A_t^T`.
    Prospective,
    /// `B_t = A_t^t`, so `−B_t = L^0(K_t)` and `lin B_t = L^0(K^0_t)`.
    Strict,
    /// `B_t = Ã_t^T` of a more favourable model.
    Mixed(Box<MarketModel>),
}

impl Flavor {
    fn second<'a>(&'a self, m: &'a MarketModel) -> &'a MarketModel {
        match self {
            Flavor::Mixed(w) => w,
            _ => m,
        }
    }

    fn window(&self, m: &MarketModel, t: usize) -> (usize, usize) {
        match self {
            Flavor::Strict => (t, t),
            _ => (t, m.horizon()),
        }
    }

    fn cones(&self, m: &MarketModel, t: usize) -> (AttainableCone, AttainableCone) {
        let (s, e) = self.window(m, t);
        (
            build_attainable(m, 0, t).expect("t within horizon"),
            build_attainable(self.second(m), s, e).expect("t within horizon"),
        )
    }
}

/// `c·(G_1 μ)` for each `c`, as functionals on the stacked weights `(μ, ν)`.
fn stacked_functionals(g1: &AttainableCone, complement: &[Vec<Rational>]) -> Vec<SparseVec> {
    complement
        .iter()
        .map(|c| {
            g1.cols
                .iter()
                .enumerate()
                .filter_map(|(k, col)| {
                    let x: Rational = col.iter().map(|(i, a)| a * &c[*i]).sum();
                    (!x.is_zero()).then_some((k, x))
                })
                .collect()
        })
        .collect()
}

fn stacked_cols(g1: &AttainableCone, g2: &AttainableCone) -> Vec<SparseVec> {
    g1.cols.iter().chain(&g2.cols).cloned().collect()
}

/// Every `v ∈ A_0^t ∩ (−B_t)` lies in `lin B_t`: the nonnegative kernel of
/// `[G_1 | G_2]` (support and interior point in `kernel`), the lineality of
/// `B_t` (kernel of `G_2` in `inner`), a basis of its orthogonal complement
/// and multipliers showing each complement functional vanishes on the
/// kernel.
#[derive(Clone, Debug)]
pub struct LinealityCert {
    pub kernel: KernelSupport,
    pub inner: KernelSupport,
    pub complement: Vec<Vec<Rational>>,
    pub alphas: Vec<Vec<Rational>>,
}

impl LinealityCert {
    fn verify(&self, m: &MarketModel, flavor: &Flavor, t: usize) -> Result<(), String> {
        let (g1, g2) = flavor.cones(m, t);
        let dim = g1.dim;
        if !self.inner.verify(&g2.cols, dim) {
            return Err("lineality kernel certificate fails".into());
        }
        let lin: Vec<Vec<Rational>> = self.inner.support.iter().map(|&k| g2.claim(k)).collect();
        let lin = SubspaceBasis::from_span(&lin, dim);
        for c in &self.complement {
            if lin.basis.iter().any(|b| !vec::dot(b, c).is_zero()) {
                return Err("complement vector not orthogonal to the lineality".into());
            }
        }
        if linalg::rank(&self.complement, dim) + lin.rank() != dim {
            return Err("complement does not span the orthogonal complement".into());
        }
        let fs = stacked_functionals(&g1, &self.complement);
        if !verify_vanishing(&stacked_cols(&g1, &g2), dim, &self.kernel, &fs, &self.alphas) {
            return Err("vanishing certificate fails".into());
        }
        Ok(())
    }
}

/// A position `v` built in `[0, t−1]` with `−v ∈ B_t` and `v ∉ B_t`.
#[derive(Clone, Debug)]
pub struct PositionFailure {
    pub claim: Claim,
    pub forward: Strategy,
    pub backward: Strategy,
    /// `y·G ≥ 0` on the generators of `B_t`, `y·v < 0`.
    pub separator: Vec<Rational>,
}

impl PositionFailure {
    fn verify(&self, m: &MarketModel, flavor: &Flavor, t: usize) -> Result<(), String> {
        if t == 0 || vec::is_zero(&self.claim) {
            return Err("degenerate position".into());
        }
        if self.forward.s != 0 || self.forward.t != t - 1 || !self.forward.realizes(m, &self.claim) {
            return Err("forward strategy does not build the position".into());
        }
        let (s, e) = flavor.window(m, t);
        let neg = vec::neg(&self.claim);
        if self.backward.s != s || self.backward.t != e || !self.backward.realizes(flavor.second(m), &neg) {
            return Err("backward strategy does not unwind the position".into());
        }
        let (_, g2) = flavor.cones(m, t);
        if !verify_separation(&g2, &self.separator, &self.claim) {
            return Err("separator does not exclude the position".into());
        }
        Ok(())
    }

    fn to_json(&self, m: &MarketModel, flavor: &Flavor) -> Value {
        json!({
            "claim": claim_json(m, &self.claim),
            "forward": self.forward.to_json(m),
            "backward": self.backward.to_json(flavor.second(m)),
        })
    }
}

#[derive(Clone, Debug)]
pub enum AtTime {
    Holds(LinealityCert),
    Fails(PositionFailure),
}

impl AtTime {
    pub fn holds(&self) -> bool {
        matches!(self, AtTime::Holds(_))
    }
}

fn inconsistent(what: &str) -> VerdictError {
    VerdictError::Inconsistent(what.to_string())
}

/// Decides the position condition at one `t`.
pub fn check_position(m: &MarketModel, flavor: &Flavor, t: usize) -> Result<AtTime, VerdictError> {
    let (g1, g2) = flavor.cones(m, t);
    let dim = g1.dim;
    let cols = stacked_cols(&g1, &g2);
    let kernel = positive_kernel(&cols, dim);
    let inner = lineality_attainable(&g2);
    let complement = inner.space.complement();
    let fs = stacked_functionals(&g1, &complement);
    match functionals_vanish(&cols, dim, &kernel, &fs) {
        Vanishing::Holds(alphas) => Ok(AtTime::Holds(LinealityCert {
            kernel,
            inner: inner.kernel,
            complement,
            alphas,
        })),
        Vanishing::Fails { x, .. } => {
            // Drop the time-t trades of the forward leg: they lie in B_t, so
            // the remaining position still has −v ∈ B_t and v ∉ B_t.
            let mut mu: Vec<Rational> = x[..g1.len()].to_vec();
            for (k, g) in g1.gens.iter().enumerate() {
                if m.tree.node(g.node).t == t {
                    mu[k] = Rational::zero();
                }
            }
            let v = g1.combine(&mu);
            if t == 0 || vec::is_zero(&v) {
                return Err(inconsistent("position built before t vanishes"));
            }
            // rescale to a primitive integer claim
            let p = vec::primitive(&v);
            let k = v.iter().position(|x| !x.is_zero()).unwrap();
            let scale = &p[k] / &v[k];
            let mu = vec::scale(&mu, &scale);
            let v = p;
            let mut forward = g1.strategy(&mu);
            forward.t = t - 1;
            let backward = match member_attainable(&g2, &vec::neg(&v)) {
                Membership::Member(s) => s,
                Membership::Separated(_) => return Err(inconsistent("unwinding leg is not attainable")),
            };
            let separator = match member_attainable(&g2, &v) {
                Membership::Separated(y) => y,
                Membership::Member(_) => return Err(inconsistent("position lies in the later cone")),
            };
            Ok(AtTime::Fails(PositionFailure {
                claim: v,
                forward,
                backward,
                separator,
            }))
        }
    }
}

/// [`check_position`] for every `t`, concurrently.
pub fn check_positions(m: &MarketModel, flavor: &Flavor) -> Result<Vec<AtTime>, VerdictError> {
    let ts: Vec<usize> = (0..=m.horizon()).collect();
    thread::scope(|s| {
        let handles: Vec<_> = ts
            .iter()
            .map(|&t| s.spawn(move || check_position(m, flavor, t)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

// ---------------------------------------------------------------------------
// Certificates and verdicts
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum Certificate {
    /// The normalised arbitrage LP with optimum zero.
    NoArbitrage {
        lp: LinearProgram,
        outcome: LpOutcome,
    },
    /// A nonzero nonnegative claim and a strategy attaining it.
    Arbitrage {
        claim: Claim,
        strategy: Strategy,
    },
    Positions {
        flavor: Flavor,
        per_t: Vec<AtTime>,
    },
    StrictPrices {
        ps: PriceSystem,
        slack: Rational,
    },
    Prices {
        ps: PriceSystem,
        witness: Option<Box<MarketModel>>,
    },
    NoPrices(CpsCertificate),
    /// Every `π^{ij} π^{ji}` exceeds one (bid-ask form) or every `−K(u)`
    /// is pointed (generator form); checked by recomputation.
    Efficient,
    /// `π^{ij} π^{ji} ≤ 1` at a node.
    Frictionless {
        node: usize,
        i: usize,
        j: usize,
        product: Rational,
    },
    /// `w ≠ 0` with `±w ∈ −K(u)`.
    FrictionlessDirection {
        node: usize,
        w: Vec<Rational>,
    },
    /// Subspace containments at every node; checked by recomputation.
    PennerHolds,
    /// `w` in `K^0(c)` for every child `c` of `node` but not in `K^0(node)`.
    PennerFails {
        node: usize,
        w: Vec<Rational>,
    },
    /// Kernel of all generators with multipliers showing every null
    /// strategy trades inside `K^0`.
    NullHolds {
        kernel: KernelSupport,
        alphas: Vec<Vec<Rational>>,
    },
    /// A null strategy whose trade at `node` leaves `K^0(node)`.
    NullFails {
        strategy: Strategy,
        node: usize,
    },
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub code: &'static str,
    pub holds: bool,
    pub certificate: Certificate,
    pub notes: Vec<String>,
}

impl Verdict {
    /// Outcome per `t` for the position conditions.
    pub fn per_t(&self) -> Option<Vec<bool>> {
        match &self.certificate {
            Certificate::Positions { per_t, .. } => Some(per_t.iter().map(AtTime::holds).collect()),
            _ => None,
        }
    }

    /// Re-checks the certificate against the model and `holds`.
    pub fn verify(&self, m: &MarketModel) -> Result<(), String> {
        let expect = |ok: bool| -> Result<(), String> {
            if ok == self.holds {
                Ok(())
            } else {
                Err("certificate kind does not match the verdict".into())
            }
        };
        match &self.certificate {
            Certificate::NoArbitrage { lp, outcome } => {
                expect(true)?;
                if *lp != na_lp(m).0 {
                    return Err("arbitrage LP differs from the model's".into());
                }
                if !verify_certificate(lp, outcome) || !matches!(outcome.value(), Some(v) if v.is_zero()) {
                    return Err("arbitrage LP certificate fails".into());
                }
                Ok(())
            }
            Certificate::Arbitrage { claim, strategy } => {
                expect(false)?;
                if vec::is_zero(claim) || claim.iter().any(Rational::is_negative) {
                    return Err("claim is not a nonzero nonnegative claim".into());
                }
                if strategy.s != 0 || strategy.t != m.horizon() || !strategy.realizes(m, claim) {
                    return Err("strategy does not attain the claim".into());
                }
                Ok(())
            }
            Certificate::Positions { flavor, per_t } => {
                expect(per_t.iter().all(AtTime::holds))?;
                if per_t.len() != m.horizon() + 1 {
                    return Err("one outcome per time is required".into());
                }
                if let Flavor::Mixed(w) = flavor {
                    dominated_by(m, w).map_err(|e| e.to_string())?;
                }
                for (t, o) in per_t.iter().enumerate() {
                    match o {
                        AtTime::Holds(c) => c.verify(m, flavor, t),
                        AtTime::Fails(f) => f.verify(m, flavor, t),
                    }
                    .map_err(|e| format!("t = {t}: {e}"))?;
                }
                Ok(())
            }
            Certificate::StrictPrices { ps, slack } => {
                expect(true)?;
                if !slack.is_positive() {
                    return Err("slack must be positive".into());
                }
                verify_scps(m, ps)
            }
            Certificate::Prices { ps, witness } => {
                expect(true)?;
                verify_cps(m, ps)?;
                if let Some(w) = witness {
                    let again = frictionless_witness(m, ps).map_err(|e| e.to_string())?;
                    if **w != again {
                        return Err("witness is not the frictionless market of Z".into());
                    }
                    dominated_by(m, w).map_err(|e| e.to_string())?;
                }
                Ok(())
            }
            Certificate::NoPrices(c) => {
                expect(false)?;
                let same_lp = match c {
                    CpsCertificate::Farkas { lp, .. } => *lp == cps_lp(m).0,
                    CpsCertificate::ZeroSlack { lp, .. } => Ok(lp) == strict_cps_lp(m).as_ref(),
                };
                if !same_lp || !c.verify() {
                    return Err("price system LP certificate fails".into());
                }
                Ok(())
            }
            Certificate::Efficient => {
                expect(true)?;
                match first_frictionless(m) {
                    None => Ok(()),
                    Some(_) => Err("a node has no efficient friction".into()),
                }
            }
            Certificate::Frictionless { node, i, j, product } => {
                expect(false)?;
                let pi = m.bid_ask(*node).ok_or("not a bid-ask node")?;
                if i == j || product != &(pi.get(*i, *j) * pi.get(*j, *i)) || product > &Rational::one() {
                    return Err("product does not witness missing friction".into());
                }
                Ok(())
            }
            Certificate::FrictionlessDirection { node, w } => {
                expect(false)?;
                let rays = solvency_cone(&m.cones[*node]).rays;
                if vec::is_zero(w) || !cone_contains(&rays, w) || !cone_contains(&rays, &vec::neg(w)) {
                    return Err("direction is not frictionless".into());
                }
                Ok(())
            }
            Certificate::PennerHolds => {
                expect(true)?;
                match penner_violation(m) {
                    None => Ok(()),
                    Some(_) => Err("a node violates the containment".into()),
                }
            }
            Certificate::PennerFails { node, w } => {
                expect(false)?;
                let tree = &m.tree;
                let children = &tree.node(*node).children;
                let two_sided = |u: usize| {
                    let rays = solvency_cone(&m.cones[u]).rays;
                    cone_contains(&rays, w) && cone_contains(&rays, &vec::neg(w))
                };
                if children.is_empty() || !children.iter().all(|&c| two_sided(c)) || two_sided(*node) {
                    return Err("vector does not violate the containment".into());
                }
                Ok(())
            }
            Certificate::NullHolds { kernel, alphas } => {
                expect(true)?;
                let (a, fs, _) = null_functionals(m);
                if !verify_vanishing(&a.cols, a.dim, kernel, &fs, alphas) {
                    return Err("null-strategy certificate fails".into());
                }
                Ok(())
            }
            Certificate::NullFails { strategy, node } => {
                expect(false)?;
                if strategy.s != 0 || strategy.t != m.horizon() || !strategy.realizes(m, &vec::zeros(m.claim_dim())) {
                    return Err("strategy is not a null strategy".into());
                }
                let xi = strategy.xi(m, *node);
                let rays = solvency_cone(&m.cones[*node]).rays;
                if cone_contains(&rays, &vec::neg(&xi)) {
                    return Err("trade at the node is frictionless".into());
                }
                Ok(())
            }
        }
    }

    pub fn to_json(&self, m: &MarketModel) -> Value {
        let mut out = serde_json::Map::new();
        out.insert("holds".into(), json!(self.holds));
        if let Some(per_t) = self.per_t() {
            out.insert("per_t".into(), json!(per_t));
        }
        out.insert("certificate".into(), certificate_json(&self.certificate, m));
        if !self.notes.is_empty() {
            out.insert("notes".into(), json!(self.notes));
        }
        Value::Object(out)
    }
}

fn certificate_json(c: &Certificate, m: &MarketModel) -> Value {
    match c {
        Certificate::NoArbitrage { outcome, lp } => json!({
            "kind": "lp-optimum",
            "value": outcome.value(),
            "variables": lp.num_vars(),
            "constraints": lp.constraints.len(),
        }),
        Certificate::Arbitrage { claim, strategy } => json!({
            "kind": "arbitrage",
            "claim": claim_json(m, claim),
            "strategy": strategy.to_json(m),
        }),
        Certificate::Positions { flavor, per_t } => {
            let items: Vec<Value> = per_t
                .iter()
                .enumerate()
                .map(|(t, o)| match o {
                    AtTime::Holds(c) => json!({
                        "t": t,
                        "holds": true,
                        "kernel_support": c.kernel.support.len(),
                        "lineality_support": c.inner.support.len(),
                        "functionals": c.complement.len(),
                    }),
                    AtTime::Fails(f) => {
                        let mut v = f.to_json(m, flavor);
                        v["t"] = json!(t);
                        v["holds"] = json!(false);
                        v
                    }
                })
                .collect();
            json!({"kind": "positions", "per_t": items})
        }
        Certificate::StrictPrices { ps, slack } => json!({
            "kind": "strictly-consistent-prices",
            "slack": slack,
            "price_system": ps.to_json(m),
        }),
        Certificate::Prices { ps, witness } => {
            let mut v = json!({"kind": "consistent-prices", "price_system": ps.to_json(m)});
            if let Some(w) = witness {
                let pis: serde_json::Map<String, Value> = (0..w.tree.len())
                    .map(|u| (w.node_id(u).to_string(), json!(w.bid_ask(u).map(|b| b.pi.clone()))))
                    .collect();
                v["witness"] = Value::Object(pis);
            }
            v
        }
        Certificate::NoPrices(c) => c.to_json(),
        Certificate::Efficient => json!({"kind": "recompute"}),
        Certificate::Frictionless { node, i, j, product } => json!({
            "kind": "frictionless-pair",
            "node": m.node_id(*node),
            "assets": [i + 1, j + 1],
            "product": product,
        }),
        Certificate::FrictionlessDirection { node, w } => json!({
            "kind": "frictionless-direction",
            "node": m.node_id(*node),
            "direction": w,
        }),
        Certificate::PennerHolds => json!({"kind": "recompute"}),
        Certificate::PennerFails { node, w } => json!({
            "kind": "penner-violation",
            "node": m.node_id(*node),
            "direction": w,
        }),
        Certificate::NullHolds { kernel, alphas } => json!({
            "kind": "null-strategies-frictionless",
            "kernel_support": kernel.support.len(),
            "functionals": alphas.len(),
        }),
        Certificate::NullFails { strategy, node } => json!({
            "kind": "null-strategy",
            "node": m.node_id(*node),
            "strategy": strategy.to_json(m),
        }),
    }
}

// ---------------------------------------------------------------------------
// The individual checks
// ---------------------------------------------------------------------------

/// Maximise `Σ v` over `v = G μ ≥ 0`, `Σ μ ≤ 1` with `G` the generators of
/// `A_0^T`.
pub fn na_lp(m: &MarketModel) -> (LinearProgram, AttainableCone) {
    let a = build_attainable(m, 0, m.horizon()).expect("full window");
    let mut p = LinearProgram::new(Sense::Max, a.len());
    for (k, col) in a.cols.iter().enumerate() {
        p.objective[k] = col.iter().map(|(_, x)| x).sum();
    }
    for row in a.rows(0) {
        p.push(Constraint::new(row, Relation::Ge, Rational::zero()));
    }
    p.push(Constraint::new(
        (0..a.len()).map(|k| (k, Rational::one())).collect(),
        Relation::Le,
        Rational::one(),
    ));
    (p, a)
}

pub fn check_na(m: &MarketModel) -> Result<Verdict, VerdictError> {
    let (lp, a) = na_lp(m);
    let outcome = lp_solve(&lp).expect("well-formed arbitrage LP");
    if !verify_certificate(&lp, &outcome) {
        return Err(inconsistent("arbitrage LP certificate"));
    }
    let LpOutcome::Optimal { point, value, .. } = &outcome else {
        return Err(inconsistent("arbitrage LP is bounded and feasible"));
    };
    if value.is_zero() {
        return Ok(Verdict {
            code: "na",
            holds: true,
            certificate: Certificate::NoArbitrage { lp, outcome },
            notes: vec![],
        });
    }
    let claim = a.combine(point);
    let strategy = a.strategy(point);
    Ok(Verdict {
        code: "na",
        holds: false,
        certificate: Certificate::Arbitrage { claim, strategy },
        notes: vec![],
    })
}

fn position_verdict(code: &'static str, m: &MarketModel, flavor: Flavor) -> Result<Verdict, VerdictError> {
    let per_t = check_positions(m, &flavor)?;
    let holds = per_t.iter().all(AtTime::holds);
    let notes = per_t
        .iter()
        .enumerate()
        .filter(|(_, o)| !o.holds())
        .map(|(t, _)| format!("fails at t = {t}; the position is built in [0, {}]", t - 1))
        .collect();
    Ok(Verdict {
        code,
        holds,
        certificate: Certificate::Positions { flavor, per_t },
        notes,
    })
}

pub fn check_nas(m: &MarketModel) -> Result<Verdict, VerdictError> {
    position_verdict("nas", m, Flavor::Strict)
}

pub fn check_naps(m: &MarketModel) -> Result<Verdict, VerdictError> {
    position_verdict("naps", m, Flavor::Prospective)
}

/// `A_0^t ∩ (−Ã_t^T) ⊆ Ã_t^T` for a witness with wider cones.
pub fn check_mixed(m: &MarketModel, witness: &MarketModel) -> Result<Verdict, VerdictError> {
    dominated_by(m, witness).map_err(|e| VerdictError::Precondition(e.to_string()))?;
    position_verdict("mixed", m, Flavor::Mixed(Box::new(witness.clone())))
}

pub fn check_nar(m: &MarketModel) -> Result<Verdict, VerdictError> {
    if !m.is_bid_ask() {
        return Err(VerdictError::Unsupported(
            "robust no-arbitrage needs bid-ask matrices".into(),
        ));
    }
    Ok(match find_cps(m, true)? {
        CpsOutcome::Found { ps, slack } => Verdict {
            code: "nar",
            holds: true,
            certificate: Certificate::StrictPrices {
                ps,
                slack: slack.expect("strict search reports its slack"),
            },
            notes: vec![],
        },
        CpsOutcome::Absent(c) => Verdict {
            code: "nar",
            holds: false,
            certificate: Certificate::NoPrices(c),
            notes: vec![],
        },
    })
}

pub fn check_nawps(m: &MarketModel) -> Result<Verdict, VerdictError> {
    Ok(match find_cps(m, false)? {
        CpsOutcome::Found { ps, .. } => {
            let mut notes = vec![];
            let witness = match frictionless_witness(m, &ps) {
                Ok(w) => Some(Box::new(w)),
                Err(e) => {
                    notes.push(format!("no frictionless witness: {e}"));
                    None
                }
            };
            Verdict {
                code: "nawps",
                holds: true,
                certificate: Certificate::Prices { ps, witness },
                notes,
            }
        }
        CpsOutcome::Absent(c) => Verdict {
            code: "nawps",
            holds: false,
            certificate: Certificate::NoPrices(c),
            notes: vec![],
        },
    })
}

fn first_frictionless(m: &MarketModel) -> Option<Certificate> {
    for u in 0..m.tree.len() {
        match m.bid_ask(u) {
            Some(pi) => {
                if let Err((i, j)) = pi.efficient_friction() {
                    return Some(Certificate::Frictionless {
                        node: u,
                        i,
                        j,
                        product: pi.get(i, j) * pi.get(j, i),
                    });
                }
            }
            None => {
                let lin = lineality(&solvency_cone(&m.cones[u]));
                if let Some(w) = lin.basis.first() {
                    return Some(Certificate::FrictionlessDirection { node: u, w: w.clone() });
                }
            }
        }
    }
    None
}

pub fn check_ef(m: &MarketModel) -> Result<Verdict, VerdictError> {
    let found = first_frictionless(m);
    // the matrix test and the lineality of −K must agree at every node
    for u in 0..m.tree.len() {
        if let Some(pi) = m.bid_ask(u) {
            let pointed = lineality(&solvency_cone(&m.cones[u])).is_zero();
            if pointed != pi.efficient_friction().is_ok() {
                return Err(inconsistent("efficient friction disagrees with the lineality of -K"));
            }
        }
    }
    Ok(match found {
        None => Verdict {
            code: "ef",
            holds: true,
            certificate: Certificate::Efficient,
            notes: vec![],
        },
        Some(c) => Verdict {
            code: "ef",
            holds: false,
            certificate: c,
            notes: vec![],
        },
    })
}

fn penner_violation(m: &MarketModel) -> Option<(usize, Vec<Rational>)> {
    let tree = &m.tree;
    let k0: Vec<SubspaceBasis> = m.cones.iter().map(|c| lineality(&solvency_cone(c))).collect();
    for u in 0..tree.len() {
        let children = &tree.node(u).children;
        if children.is_empty() {
            continue;
        }
        let spaces: Vec<Vec<Vec<Rational>>> = children.iter().map(|&c| k0[c].basis.clone()).collect();
        for w in linalg::intersect_subspaces(&spaces, m.d) {
            if !k0[u].contains(&w) {
                return Some((u, w));
            }
        }
    }
    None
}

pub fn check_penner(m: &MarketModel) -> Result<Verdict, VerdictError> {
    Ok(match penner_violation(m) {
        None => Verdict {
            code: "penner",
            holds: true,
            certificate: Certificate::PennerHolds,
            notes: vec![],
        },
        Some((node, w)) => Verdict {
            code: "penner",
            holds: false,
            certificate: Certificate::PennerFails { node, w },
            notes: vec![],
        },
    })
}

/// Generators of `A_0^T` and, for every node `u` and every `c` in a basis of
/// `K^0(u)^⊥`, the functional `μ ↦ c·ξ(u)`; the third component names the
/// node of each functional.
fn null_functionals(m: &MarketModel) -> (AttainableCone, Vec<SparseVec>, Vec<usize>) {
    let a = build_attainable(m, 0, m.horizon()).expect("full window");
    let mut fs = Vec::new();
    let mut nodes = Vec::new();
    for u in 0..m.tree.len() {
        for c in lineality(&solvency_cone(&m.cones[u])).complement() {
            let f: SparseVec = a
                .gens
                .iter()
                .enumerate()
                .filter(|(_, g)| g.node == u)
                .filter_map(|(k, g)| {
                    let x = vec::dot(&c, &g.local);
                    (!x.is_zero()).then_some((k, x))
                })
                .collect();
            fs.push(f);
            nodes.push(u);
        }
    }
    (a, fs, nodes)
}

pub fn check_nullspace(m: &MarketModel) -> Result<Verdict, VerdictError> {
    let (a, fs, nodes) = null_functionals(m);
    let kernel = positive_kernel(&a.cols, a.dim);
    Ok(match functionals_vanish(&a.cols, a.dim, &kernel, &fs) {
        Vanishing::Holds(alphas) => Verdict {
            code: "nullspace",
            holds: true,
            certificate: Certificate::NullHolds { kernel, alphas },
            notes: vec![],
        },
        Vanishing::Fails { x, index } => Verdict {
            code: "nullspace",
            holds: false,
            certificate: Certificate::NullFails {
                strategy: a.strategy(&x),
                node: nodes[index],
            },
            notes: vec![],
        },
    })
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

pub trait Condition: Send + Sync {
    fn code(&self) -> &'static str;
    fn title(&self) -> &'static str;
    fn check(&self, m: &MarketModel) -> Result<Verdict, VerdictError>;
}

struct Simple {
    code: &'static str,
    title: &'static str,
    run: fn(&MarketModel) -> Result<Verdict, VerdictError>,
}

impl Condition for Simple {
    fn code(&self) -> &'static str {
        self.code
    }

    fn title(&self) -> &'static str {
        self.title
    }

    fn check(&self, m: &MarketModel) -> Result<Verdict, VerdictError> {
        (self.run)(m)
    }
}

/// The mixed condition against a fixed witness model.
pub struct Mixed {
    pub witness: MarketModel,
}

impl Condition for Mixed {
    fn code(&self) -> &'static str {
        "mixed"
    }

    fn title(&self) -> &'static str {
        "positions evaluated in a more favourable market"
    }

    fn check(&self, m: &MarketModel) -> Result<Verdict, VerdictError> {
        check_mixed(m, &self.witness)
    }
}

pub struct Registry {
    entries: Vec<Box<dyn Condition>>,
}

impl Registry {
    pub fn empty() -> Registry {
        Registry { entries: Vec::new() }
    }

    pub fn standard() -> Registry {
        let mut r = Registry::empty();
        let simple: [(
            &'static str,
            &'static str,
            fn(&MarketModel) -> Result<Verdict, VerdictError>,
        ); 8] = [
            ("na", "no arbitrage", check_na),
            ("nas", "strict no arbitrage", check_nas),
            ("naps", "prospective strict no arbitrage", check_naps),
            ("nar", "robust no arbitrage", check_nar),
            ("nawps", "weak prospective strict no arbitrage", check_nawps),
            ("ef", "efficient friction", check_ef),
            ("penner", "Penner condition", check_penner),
            ("nullspace", "null strategies are frictionless", check_nullspace),
        ];
        for (code, title, run) in simple {
            r.register(Box::new(Simple { code, title, run }));
        }
        r
    }

    /// Adds a condition, replacing one with the same code.
    pub fn register(&mut self, c: Box<dyn Condition>) {
        self.entries.retain(|e| e.code() != c.code());
        self.entries.push(c);
    }

    pub fn get(&self, code: &str) -> Option<&dyn Condition> {
        self.entries.iter().find(|e| e.code() == code).map(|e| e.as_ref())
    }

    pub fn codes(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.code()).collect()
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

pub struct Entry {
    pub code: &'static str,
    /// `Err` only for conditions that do not apply to the model.
    pub outcome: Result<Verdict, String>,
    pub elapsed: Duration,
}

pub struct Report {
    pub entries: Vec<Entry>,
    pub consistency: Vec<(&'static str, bool)>,
}

impl Report {
    pub fn verdict(&self, code: &str) -> Option<&Verdict> {
        self.entries
            .iter()
            .find(|e| e.code == code)
            .and_then(|e| e.outcome.as_ref().ok())
    }

    pub fn holds(&self, code: &str) -> Option<bool> {
        self.verdict(code).map(|v| v.holds)
    }

    pub fn to_json(&self, m: &MarketModel, timings: bool) -> Value {
        let mut out = serde_json::Map::new();
        for e in &self.entries {
            let mut v = match &e.outcome {
                Ok(v) => v.to_json(m),
                Err(reason) => json!({"unsupported": reason}),
            };
            if timings {
                v["ms"] = json!(e.elapsed.as_millis() as u64);
            }
            out.insert(e.code.to_string(), v);
        }
        let c: serde_json::Map<String, Value> = self
            .consistency
            .iter()
            .map(|(k, ok)| (k.to_string(), json!(ok)))
            .collect();
        out.insert("consistency".into(), Value::Object(c));
        Value::Object(out)
    }
}

/// Runs every standard condition; see [`run`].
pub fn run_all(m: &MarketModel) -> Result<Report, VerdictError> {
    run(m, &Registry::standard(), &STANDARD_CODES)
}

/// Evaluates the selected conditions concurrently, re-verifies every
/// certificate and checks the implications that hold on finite trees.
/// Any failure of those checks is an internal inconsistency.
pub fn run(m: &MarketModel, registry: &Registry, codes: &[&str]) -> Result<Report, VerdictError> {
    let report = evaluate(m, registry, codes)?;
    if let Some((name, _)) = report.consistency.iter().find(|(_, ok)| !ok) {
        return Err(VerdictError::Inconsistent(format!("{name} violated")));
    }
    Ok(report)
}

/// As [`run`], but a violated implication is only recorded in the report.
/// A certificate that fails re-verification is still an error.
pub fn evaluate(m: &MarketModel, registry: &Registry, codes: &[&str]) -> Result<Report, VerdictError> {
    let mut chosen = Vec::with_capacity(codes.len());
    for &c in codes {
        chosen.push(
            registry
                .get(c)
                .ok_or_else(|| VerdictError::UnknownCondition(c.to_string()))?,
        );
    }
    let results: Vec<(Result<Verdict, VerdictError>, Duration)> = thread::scope(|s| {
        let handles: Vec<_> = chosen
            .iter()
            .map(|c| {
                s.spawn(move || {
                    let start = Instant::now();
                    let r = c.check(m);
                    (r, start.elapsed())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut entries = Vec::with_capacity(results.len());
    for (c, (r, elapsed)) in chosen.iter().zip(results) {
        let outcome = match r {
            Ok(v) => {
                v.verify(m)
                    .map_err(|e| VerdictError::Inconsistent(format!("{} certificate: {e}", c.code())))?;
                Ok(v)
            }
            Err(VerdictError::Unsupported(why)) => Err(why),
            Err(e) => return Err(e),
        };
        entries.push(Entry {
            code: c.code(),
            outcome,
            elapsed,
        });
    }
    let mut report = Report {
        entries,
        consistency: Vec::new(),
    };
    report.consistency = consistency(&report)?;
    Ok(report)
}

fn consistency(r: &Report) -> Result<Vec<(&'static str, bool)>, VerdictError> {
    let h = |c: &str| r.holds(c);
    let imp = |a: Option<bool>, b: Option<bool>| a.zip(b).map(|(a, b)| !a || b);
    let iff = |a: Option<bool>, b: Option<bool>| a.zip(b).map(|(a, b)| a == b);
    let mut out = Vec::new();
    let mut push = |name: &'static str, v: Option<bool>| {
        if let Some(ok) = v {
            out.push((name, ok));
        }
    };
    push("nar implies naps", imp(h("nar"), h("naps")));
    push("naps implies nawps", imp(h("naps"), h("nawps")));
    push("nawps implies na", imp(h("nawps"), h("na")));
    push("na iff nawps", iff(h("na"), h("nawps")));
    push("nar iff nullspace", iff(h("nar"), h("nullspace")));
    if h("ef") == Some(true) {
        push("ef: naps iff nas", iff(h("naps"), h("nas")));
    }
    if let Some(Certificate::Prices { witness: Some(w), .. }) = r.verdict("nawps").map(|v| &v.certificate) {
        let wv = check_naps(w)?;
        push("witness satisfies naps", Some(wv.holds));
    }
    Ok(out)
}
