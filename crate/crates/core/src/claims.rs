//! Claim space `R^{L×d}` and the attainable cones `A_s^t`.

use std::collections::BTreeMap;

use serde_json::{json, Value};
use thiserror::Error;

use crate::cones::{self, neg_k_generators, KernelSupport, Move, SparseVec, SubspaceBasis};
use crate::exactlp::{lp_solve, verify_certificate, Constraint, LinearProgram, LpOutcome, Relation, Sense};
use crate::jsonfmt::OrderedMap;
use crate::rational::{vec, Rational};
use crate::scenario::MarketModel;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClaimError {
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("bad window [{s}, {t}] for horizon {horizon}")]
    BadWindow { s: usize, t: usize, horizon: usize },
}

/// A terminal portfolio: `L·d` entries, leaf-major.
pub type Claim = Vec<Rational>;

pub fn claim_index(d: usize, leaf_pos: usize, asset: usize) -> usize {
    leaf_pos * d + asset
}

/// `w` on every leaf below `u`, zero elsewhere.
pub fn lift(m: &MarketModel, u: usize, w: &[Rational]) -> Claim {
    let mut out = vec::zeros(m.claim_dim());
    for &pos in m.tree.leaves_under(u) {
        for (i, x) in w.iter().enumerate() {
            out[claim_index(m.d, pos, i)] = x.clone();
        }
    }
    out
}

pub fn lift_sparse(m: &MarketModel, u: usize, w: &[Rational]) -> SparseVec {
    let mut out = Vec::new();
    for &pos in m.tree.leaves_under(u) {
        for (i, x) in w.iter().enumerate() {
            if !x.is_zero() {
                out.push((claim_index(m.d, pos, i), x.clone()));
            }
        }
    }
    out
}

/// Looks up a node by id.
pub fn node_by_id(m: &MarketModel, id: &str) -> Result<usize, ClaimError> {
    m.tree
        .index_of(id)
        .ok_or_else(|| ClaimError::UnknownNode(id.to_string()))
}

/// The claim that is `w(leaf)` at each leaf, given per leaf.
pub fn claim_from_leaves(m: &MarketModel, per_leaf: &[Vec<Rational>]) -> Claim {
    assert_eq!(per_leaf.len(), m.tree.num_leaves());
    per_leaf.iter().flatten().cloned().collect()
}

/// The vector held at leaf position `pos`.
pub fn at_leaf<'a>(m: &MarketModel, v: &'a [Rational], pos: usize) -> &'a [Rational] {
    &v[pos * m.d..(pos + 1) * m.d]
}

pub fn claim_json(m: &MarketModel, v: &[Rational]) -> Value {
    let map: OrderedMap<Vec<Rational>> = m
        .tree
        .leaves()
        .iter()
        .enumerate()
        .map(|(pos, &l)| (m.node_id(l).to_string(), at_leaf(m, v, pos).to_vec()))
        .collect();
    serde_json::to_value(map).unwrap()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    pub node: usize,
    pub mv: Move,
    pub local: Vec<Rational>,
}

/// Generators `lift(u, g)` of `A_s^t`, restricted to the nodes kept.
#[derive(Clone, Debug)]
pub struct AttainableCone {
    pub s: usize,
    pub t: usize,
    pub d: usize,
    pub dim: usize,
    pub gens: Vec<Generator>,
    pub cols: Vec<SparseVec>,
}

/// `A_s^t`: every ray of `−K(u)` lifted, for all nodes `u` with
/// `s ≤ t(u) ≤ t`.
pub fn build_attainable(m: &MarketModel, s: usize, t: usize) -> Result<AttainableCone, ClaimError> {
    if s > t || t > m.horizon() {
        return Err(ClaimError::BadWindow {
            s,
            t,
            horizon: m.horizon(),
        });
    }
    let nodes: Vec<usize> = (0..m.tree.len())
        .filter(|&u| (s..=t).contains(&m.tree.node(u).t))
        .collect();
    Ok(attainable_from_nodes(m, s, t, &nodes))
}

/// `A_s^t` restricted to the subtree of `root`.
pub fn build_attainable_below(m: &MarketModel, root: usize, s: usize, t: usize) -> Result<AttainableCone, ClaimError> {
    if s > t || t > m.horizon() {
        return Err(ClaimError::BadWindow {
            s,
            t,
            horizon: m.horizon(),
        });
    }
    let nodes: Vec<usize> = m
        .tree
        .subtree(root)
        .into_iter()
        .filter(|&u| (s..=t).contains(&m.tree.node(u).t))
        .collect();
    Ok(attainable_from_nodes(m, s, t, &nodes))
}

fn attainable_from_nodes(m: &MarketModel, s: usize, t: usize, nodes: &[usize]) -> AttainableCone {
    let mut gens = Vec::new();
    let mut cols = Vec::new();
    for &u in nodes {
        for (mv, g) in neg_k_generators(&m.cones[u]) {
            cols.push(lift_sparse(m, u, &g));
            gens.push(Generator { node: u, mv, local: g });
        }
    }
    AttainableCone {
        s,
        t,
        d: m.d,
        dim: m.claim_dim(),
        gens,
        cols,
    }
}

impl AttainableCone {
    pub fn len(&self) -> usize {
        self.gens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gens.is_empty()
    }

    pub fn claim(&self, k: usize) -> Claim {
        cones::densify(&self.cols[k], self.dim)
    }

    /// `Σ μ_k G_k`.
    pub fn combine(&self, mu: &[Rational]) -> Claim {
        cones::combine(&self.cols, mu, self.dim)
    }

    /// The strategy whose generator weights are `mu`.
    pub fn strategy(&self, mu: &[Rational]) -> Strategy {
        let mut st = Strategy::new(self.s, self.t);
        for (g, x) in self.gens.iter().zip(mu) {
            if !x.is_zero() {
                st.add(self.d, g.node, g.mv, x);
            }
        }
        st
    }

    /// Rows `Σ_k G_k[i] x_k` of the claim identity, for LP construction
    /// with the generator weights starting at column `offset`.
    pub fn rows(&self, offset: usize) -> Vec<SparseVec> {
        let mut rows: Vec<SparseVec> = vec![Vec::new(); self.dim];
        for (k, c) in self.cols.iter().enumerate() {
            for (i, a) in c {
                rows[*i].push((offset + k, a.clone()));
            }
        }
        rows
    }
}

/// Orders, disposals and generator weights at one node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeTrade {
    pub orders: Vec<Vec<Rational>>,
    pub disposal: Vec<Rational>,
    pub generators: BTreeMap<usize, Rational>,
}

impl NodeTrade {
    fn new(d: usize) -> NodeTrade {
        NodeTrade {
            orders: vec![vec::zeros(d); d],
            disposal: vec::zeros(d),
            generators: BTreeMap::new(),
        }
    }

    fn is_zero(&self) -> bool {
        self.orders.iter().all(|r| vec::is_zero(r))
            && vec::is_zero(&self.disposal)
            && self.generators.values().all(|x| x.is_zero())
    }
}

/// A self-financing strategy: nonnegative orders `λ(u)`, disposals `r(u)`
/// (and, for generator-form cones, generator weights) at nodes whose time
/// lies in `[s, t]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Strategy {
    pub s: usize,
    pub t: usize,
    pub trades: BTreeMap<usize, NodeTrade>,
}

impl Strategy {
    pub fn new(s: usize, t: usize) -> Strategy {
        Strategy {
            s,
            t,
            trades: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, d: usize, u: usize, mv: Move, qty: &Rational) {
        let tr = self.trades.entry(u).or_insert_with(|| NodeTrade::new(d));
        match mv {
            Move::Transfer(i, j) => tr.orders[i][j] += qty,
            Move::Disposal(i) => tr.disposal[i] += qty,
            Move::Generator(k) => *tr.generators.entry(k).or_insert_with(Rational::zero) += qty,
        }
    }

    pub fn order(&mut self, d: usize, u: usize, i: usize, j: usize, qty: &Rational) {
        self.add(d, u, Move::Transfer(i, j), qty)
    }

    /// Portfolio change `ξ(u) = L_u(λ(u)) − r(u) (+ Σ w_k X_k)`.
    pub fn xi(&self, m: &MarketModel, u: usize) -> Vec<Rational> {
        let d = m.d;
        let mut out = vec::zeros(d);
        let Some(tr) = self.trades.get(&u) else {
            return out;
        };
        let gens = neg_k_generators(&m.cones[u]);
        for (mv, g) in &gens {
            let qty = match mv {
                Move::Transfer(i, j) => &tr.orders[*i][*j],
                Move::Disposal(i) => &tr.disposal[*i],
                Move::Generator(k) => match tr.generators.get(k) {
                    Some(x) => x,
                    None => continue,
                },
            };
            if !qty.is_zero() {
                vec::axpy(&mut out, qty, g);
            }
        }
        out
    }

    pub fn induced_claim(&self, m: &MarketModel) -> Claim {
        let mut out = vec::zeros(m.claim_dim());
        for &u in self.trades.keys() {
            let xi = self.xi(m, u);
            if !vec::is_zero(&xi) {
                let l = lift_sparse(m, u, &xi);
                for (i, x) in l {
                    out[i] += x;
                }
            }
        }
        out
    }

    /// Nonnegative quantities, zero diagonal, trades only inside the window
    /// and only on moves the node's cone offers.
    pub fn is_admissible(&self, m: &MarketModel) -> bool {
        for (&u, tr) in &self.trades {
            let t = m.tree.node(u).t;
            if tr.is_zero() {
                continue;
            }
            if t < self.s || t > self.t {
                return false;
            }
            let bid_ask = m.cones[u].bid_ask().is_some();
            for i in 0..m.d {
                if !tr.orders[i][i].is_zero() {
                    return false;
                }
                for j in 0..m.d {
                    if tr.orders[i][j].is_negative() || (!bid_ask && !tr.orders[i][j].is_zero()) {
                        return false;
                    }
                }
                if tr.disposal[i].is_negative() || (!bid_ask && !tr.disposal[i].is_zero()) {
                    return false;
                }
            }
            if tr.generators.values().any(|x| x.is_negative()) || (bid_ask && !tr.generators.is_empty()) {
                return false;
            }
        }
        true
    }

    /// Whether the strategy is admissible and induces exactly `v`.
    pub fn realizes(&self, m: &MarketModel, v: &[Rational]) -> bool {
        self.is_admissible(m) && self.induced_claim(m) == v
    }

    pub fn to_json(&self, m: &MarketModel) -> Value {
        let mut map = serde_json::Map::new();
        for (&u, tr) in &self.trades {
            if tr.is_zero() {
                continue;
            }
            let mut orders = Vec::new();
            for i in 0..m.d {
                for j in 0..m.d {
                    if !tr.orders[i][j].is_zero() {
                        orders.push(json!([i + 1, j + 1, tr.orders[i][j]]));
                    }
                }
            }
            let mut entry = serde_json::Map::new();
            entry.insert("orders".into(), Value::Array(orders));
            entry.insert("disposal".into(), serde_json::to_value(&tr.disposal).unwrap());
            if !tr.generators.is_empty() {
                let g: Vec<Value> = tr
                    .generators
                    .iter()
                    .filter(|(_, x)| !x.is_zero())
                    .map(|(k, x)| json!([k + 1, x]))
                    .collect();
                entry.insert("generators".into(), Value::Array(g));
            }
            map.insert(m.node_id(u).to_string(), Value::Object(entry));
        }
        Value::Object(map)
    }
}

/// Result of a membership test.
#[derive(Clone, Debug)]
pub enum Membership {
    /// A strategy inducing the claim.
    Member(Strategy),
    /// A claim functional `y` with `y·G ≥ 0` on all generators and
    /// `y·v < 0`.
    Separated(Vec<Rational>),
}

impl Membership {
    pub fn is_member(&self) -> bool {
        matches!(self, Membership::Member(_))
    }
}

/// Decides `v ∈ A` by one LP over the generator weights.
pub fn member_attainable(a: &AttainableCone, v: &[Rational]) -> Membership {
    assert_eq!(v.len(), a.dim);
    if vec::is_zero(v) {
        return Membership::Member(Strategy::new(a.s, a.t));
    }
    let mut p = LinearProgram::new(Sense::Max, a.len());
    for (i, row) in a.rows(0).into_iter().enumerate() {
        p.push(Constraint::new(row, Relation::Eq, v[i].clone()));
    }
    let o = lp_solve(&p).expect("well-formed membership LP");
    assert!(verify_certificate(&p, &o), "membership LP certificate");
    match o {
        LpOutcome::Optimal { point, .. } => Membership::Member(a.strategy(&point)),
        LpOutcome::Infeasible { farkas } => Membership::Separated(farkas),
        LpOutcome::Unbounded { .. } => unreachable!("zero objective"),
    }
}

/// Checks a separating functional against the generators of `a`.
pub fn verify_separation(a: &AttainableCone, y: &[Rational], v: &[Rational]) -> bool {
    y.len() == a.dim
        && a.cols
            .iter()
            .all(|c| !c.iter().map(|(i, x)| x * &y[*i]).sum::<Rational>().is_negative())
        && vec::dot(y, v).is_negative()
}

/// Lineality space `A ∩ (−A)` with the kernel certificate behind it.
#[derive(Clone, Debug)]
pub struct Lineality {
    pub space: SubspaceBasis,
    pub kernel: KernelSupport,
}

/// Span of the generators whose negation lies in the cone.
pub fn lineality_attainable(a: &AttainableCone) -> Lineality {
    let kernel = cones::positive_kernel(&a.cols, a.dim);
    let inside: Vec<Vec<Rational>> = kernel.support.iter().map(|&k| a.claim(k)).collect();
    Lineality {
        space: SubspaceBasis::from_span(&inside, a.dim),
        kernel,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::scenario::library::{ex41, ex42, ex43};

    fn v(xs: &[i64]) -> Vec<Rational> {
        xs.iter().map(|&x| Rational::from_integer(x)).collect()
    }

    #[test]
    fn lift_root_and_leaf() {
        let m = ex43(1, false, None);
        let c = lift(&m, 0, &v(&[1, 0, 0, 0]));
        assert_eq!(c.iter().filter(|x| x.is_one()).count(), 4);
        let leaf = m.tree.leaves()[2];
        let c = lift(&m, leaf, &v(&[0, 1, 0, 0]));
        assert_eq!(c.iter().filter(|x| !x.is_zero()).count(), 1);
        assert!(c[claim_index(4, 2, 1)].is_one());
    }

    #[test]
    fn lift_cascade_first_period_node() {
        let m = ex43(3, false, None);
        let u = m.tree.index_of("n=1").unwrap();
        let c = lift(&m, u, &v(&[1, 0, 0, 0]));
        assert_eq!(c.iter().filter(|x| x.is_one()).count(), 12);
    }

    #[test]
    fn ex41_terminal_generators() {
        let m = ex41();
        let a = build_attainable(&m, 1, 1).unwrap();
        let got: Vec<Claim> = (0..a.len()).map(|k| a.claim(k)).collect();
        assert_eq!(got, vec![v(&[-1, 1]), v(&[1, -1]), v(&[-1, 0]), v(&[0, -1])]);
        let b = build_attainable(&ex42(), 1, 1).unwrap();
        assert!((0..b.len()).any(|k| b.claim(k) == v(&[-2, 1])));
        assert!(build_attainable(&m, 1, 0).is_err());
    }

    #[test]
    fn ex41_membership() {
        let m = ex41();
        let a = build_attainable(&m, 0, 1).unwrap();
        match member_attainable(&a, &v(&[-1, 1])) {
            Membership::Member(st) => assert!(st.realizes(&m, &v(&[-1, 1]))),
            Membership::Separated(_) => panic!("buying one share is attainable"),
        }
        assert!(member_attainable(&a, &v(&[0, 0])).is_member());
        let target = vec![q(1, 4), q(0, 1)];
        match member_attainable(&a, &target) {
            Membership::Separated(y) => assert!(verify_separation(&a, &y, &target)),
            Membership::Member(_) => panic!("free money in an arbitrage-free market"),
        }
    }

    #[test]
    fn generators_are_members_and_windows_nest() {
        let m = ex43(1, false, None);
        let small = build_attainable(&m, 1, 2).unwrap();
        let big = build_attainable(&m, 0, 3).unwrap();
        for k in 0..small.len() {
            let g = small.claim(k);
            assert!(member_attainable(&small, &g).is_member());
            assert!(member_attainable(&big, &g).is_member());
        }
    }

    #[test]
    fn lineality_examples() {
        let m = ex41();
        let l = lineality_attainable(&build_attainable(&m, 1, 1).unwrap());
        assert_eq!(l.space.rank(), 1);
        assert!(l.space.contains(&v(&[1, -1])));
        assert!(lineality_attainable(&build_attainable(&m, 0, 0).unwrap())
            .space
            .is_zero());
        assert!(lineality_attainable(&build_attainable(&ex42(), 1, 1).unwrap())
            .space
            .is_zero());
    }

    #[test]
    fn lineality_matches_negation_oracle() {
        let m = ex43(1, true, None);
        let a = build_attainable(&m, 1, 3).unwrap();
        let l = lineality_attainable(&a);
        let mut oracle = Vec::new();
        for k in 0..a.len() {
            let g = a.claim(k);
            if member_attainable(&a, &vec::neg(&g)).is_member() {
                oracle.push(g);
            }
        }
        assert_eq!(l.space.rank(), crate::linalg::rank(&oracle, a.dim));
        for b in &l.space.basis {
            assert!(member_attainable(&a, b).is_member());
            assert!(member_attainable(&a, &vec::neg(b)).is_member());
        }
    }

    #[test]
    fn strategy_json_uses_one_based_orders() {
        let m = ex41();
        let mut st = Strategy::new(0, 1);
        st.order(2, 0, 0, 1, &q(1, 1));
        let j = st.to_json(&m);
        assert_eq!(j["0"]["orders"][0], json!([1, 2, 1]));
        assert_eq!(st.induced_claim(&m), v(&[-1, 1]));
    }

    #[test]
    fn measurability_of_lifted_strategies() {
        let m = ex43(2, false, None);
        let u = m.tree.index_of("n=2").unwrap();
        let mut st = Strategy::new(1, 1);
        st.order(4, u, 3, 0, &q(3, 1));
        let c = st.induced_claim(&m);
        let under = m.tree.leaves_under(u);
        let first = at_leaf(&m, &c, under[0]).to_vec();
        for &pos in under {
            assert_eq!(at_leaf(&m, &c, pos), first.as_slice());
        }
    }
}
