//! Finite event-tree market models.
//!
//! Asset indices are 0-based inside the library and 1-based in every file
//! format and report.

mod json;
pub mod library;
pub mod random;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;

pub use json::{parse_model, parse_model_unchecked, serialize_model};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Syntax(String),
    #[error("structure: {0}")]
    Structure(String),
    #[error("completion at node {node}: {detail}")]
    Completion { node: String, detail: String },
    #[error("invalid model: {}", .0.summary())]
    Invalid(ValidationReport),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub id: String,
    pub parent: Option<usize>,
    pub t: usize,
    pub children: Vec<usize>,
}

/// Tree of information sets with probabilities on the leaves.
///
/// Leaves are kept in document order; that order fixes the layout of
/// claim vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventTree {
    nodes: Vec<Node>,
    leaves: Vec<usize>,
    leaf_pos: Vec<Option<usize>>,
    leaf_prob: Vec<Rational>,
    horizon: usize,
    under: Vec<Vec<usize>>,
    by_time: Vec<Vec<usize>>,
}

impl EventTree {
    /// Builds a tree from `(id, parent id, t)` triples in document order.
    pub fn new(
        spec: Vec<(String, Option<String>, usize)>,
        leaf_prob: Vec<(String, Rational)>,
    ) -> Result<EventTree, ScenarioError> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (k, (id, _, _)) in spec.iter().enumerate() {
            if index.insert(id.as_str(), k).is_some() {
                return Err(ScenarioError::Structure(format!("duplicate node id {id:?}")));
            }
        }
        let mut nodes: Vec<Node> = Vec::with_capacity(spec.len());
        let mut root = None;
        for (id, parent, t) in &spec {
            let parent = match parent {
                None => {
                    if root.replace(nodes.len()).is_some() {
                        return Err(ScenarioError::Structure("more than one root".into()));
                    }
                    if *t != 0 {
                        return Err(ScenarioError::Structure(format!("root {id:?} must have t = 0")));
                    }
                    None
                }
                Some(p) => match index.get(p.as_str()) {
                    Some(&pi) => Some(pi),
                    None => {
                        return Err(ScenarioError::Structure(format!(
                            "node {id:?} has unknown parent {p:?}"
                        )))
                    }
                },
            };
            nodes.push(Node {
                id: id.clone(),
                parent,
                t: *t,
                children: Vec::new(),
            });
        }
        if root.is_none() {
            return Err(ScenarioError::Structure("no root node".into()));
        }
        for k in 0..nodes.len() {
            if let Some(p) = nodes[k].parent {
                if nodes[k].t != nodes[p].t + 1 {
                    return Err(ScenarioError::Structure(format!(
                        "node {:?} at t = {} has parent {:?} at t = {}",
                        nodes[k].id, nodes[k].t, nodes[p].id, nodes[p].t
                    )));
                }
                nodes[p].children.push(k);
            }
        }
        let leaves: Vec<usize> = (0..nodes.len()).filter(|&k| nodes[k].children.is_empty()).collect();
        let mut leaf_pos = vec![None; nodes.len()];
        for (pos, &k) in leaves.iter().enumerate() {
            leaf_pos[k] = Some(pos);
        }
        let mut probs: Vec<Option<Rational>> = vec![None; leaves.len()];
        for (id, p) in leaf_prob {
            let Some(&k) = index.get(id.as_str()) else {
                return Err(ScenarioError::Structure(format!(
                    "probability given for unknown node {id:?}"
                )));
            };
            let Some(pos) = leaf_pos[k] else {
                return Err(ScenarioError::Structure(format!(
                    "probability given for interior node {id:?}"
                )));
            };
            probs[pos] = Some(p);
        }
        let mut leaf_prob = Vec::with_capacity(leaves.len());
        for (pos, p) in probs.into_iter().enumerate() {
            match p {
                Some(p) => leaf_prob.push(p),
                None => {
                    return Err(ScenarioError::Structure(format!(
                        "missing probability for leaf {:?}",
                        nodes[leaves[pos]].id
                    )))
                }
            }
        }
        let horizon = nodes.iter().map(|n| n.t).max().unwrap_or(0);
        let mut under = vec![Vec::new(); nodes.len()];
        for (pos, &leaf) in leaves.iter().enumerate() {
            let mut k = Some(leaf);
            while let Some(x) = k {
                under[x].push(pos);
                k = nodes[x].parent;
            }
        }
        let mut by_time = vec![Vec::new(); horizon + 1];
        for (k, n) in nodes.iter().enumerate() {
            by_time[n.t].push(k);
        }
        Ok(EventTree {
            nodes,
            leaves,
            leaf_pos,
            leaf_prob,
            horizon,
            under,
            by_time,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, u: usize) -> &Node {
        &self.nodes[u]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.nodes.iter().position(|n| n.parent.is_none()).unwrap()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Node indices of the leaves in canonical order.
    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_position(&self, u: usize) -> Option<usize> {
        self.leaf_pos[u]
    }

    /// Positions (in [`leaves`](Self::leaves)) of the leaves below `u`.
    pub fn leaves_under(&self, u: usize) -> &[usize] {
        &self.under[u]
    }

    pub fn nodes_at(&self, t: usize) -> &[usize] {
        self.by_time.get(t).map_or(&[], |v| v.as_slice())
    }

    pub fn leaf_prob(&self) -> &[Rational] {
        &self.leaf_prob
    }

    /// Sum of the leaf probabilities below `u`.
    pub fn prob(&self, u: usize) -> Rational {
        self.under[u].iter().map(|&p| &self.leaf_prob[p]).sum()
    }

    /// Whether `v` lies in the subtree rooted at `u`.
    pub fn is_descendant(&self, v: usize, u: usize) -> bool {
        let mut k = Some(v);
        while let Some(x) = k {
            if x == u {
                return true;
            }
            k = self.nodes[x].parent;
        }
        false
    }

    /// Nodes of the subtree of `u` (including `u`) in document order.
    pub fn subtree(&self, u: usize) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&v| self.is_descendant(v, u)).collect()
    }

    pub fn with_leaf_prob(&self, probs: Vec<Rational>) -> EventTree {
        assert_eq!(probs.len(), self.leaves.len());
        EventTree {
            leaf_prob: probs,
            ..self.clone()
        }
    }
}

/// Entries filled in by [`complete_matrix`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Completion {
    pub via: usize,
    pub holes: Vec<(usize, usize)>,
}

/// `pi[i][j]` units of asset `i` buy one unit of asset `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BidAskMatrix {
    pub pi: Vec<Vec<Rational>>,
    pub completion: Option<Completion>,
}

impl BidAskMatrix {
    pub fn new(pi: Vec<Vec<Rational>>) -> BidAskMatrix {
        BidAskMatrix { pi, completion: None }
    }

    pub fn from_ints(rows: &[&[i64]]) -> BidAskMatrix {
        BidAskMatrix::new(
            rows.iter()
                .map(|r| r.iter().map(|&x| Rational::from_integer(x)).collect())
                .collect(),
        )
    }

    pub fn d(&self) -> usize {
        self.pi.len()
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.pi[i][j]
    }

    /// Axiom violations as `(rule, detail)` with 1-based indices.
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let d = self.d();
        let mut out = Vec::new();
        for i in 0..d {
            for j in 0..d {
                if !self.pi[i][j].is_positive() {
                    out.push((
                        "axiom-i",
                        format!("pi^{}{} = {} is not positive", i + 1, j + 1, self.pi[i][j]),
                    ));
                }
            }
            if !self.pi[i][i].is_one() {
                out.push(("axiom-ii", format!("pi^{0}{0} = {1} is not 1", i + 1, self.pi[i][i])));
            }
        }
        if !out.is_empty() {
            return out;
        }
        for i in 0..d {
            for k in 0..d {
                for j in 0..d {
                    let via = &self.pi[i][k] * &self.pi[k][j];
                    if self.pi[i][j] > via {
                        out.push((
                            "axiom-iii",
                            format!(
                                "pi^{i1}{j1} = {} > pi^{i1}{k1} * pi^{k1}{j1} = {} at (i,k,j) = ({i1},{k1},{j1})",
                                self.pi[i][j],
                                via,
                                i1 = i + 1,
                                k1 = k + 1,
                                j1 = j + 1
                            ),
                        ));
                    }
                }
            }
        }
        out
    }

    /// Whether `π^{ij} π^{ji} > 1` for every pair `i ≠ j`; on failure the
    /// first pair found.
    pub fn efficient_friction(&self) -> Result<(), (usize, usize)> {
        let d = self.d();
        for i in 0..d {
            for j in (i + 1)..d {
                if &self.pi[i][j] * &self.pi[j][i] <= Rational::one() {
                    return Err((i, j));
                }
            }
        }
        Ok(())
    }
}

/// Fills missing entries through asset `via`: `π^{ij} = π^{i,via} π^{via,j}`.
pub fn complete_matrix(partial: &[Vec<Option<Rational>>], via: usize) -> Result<BidAskMatrix, String> {
    let d = partial.len();
    if via >= d {
        return Err(format!("via asset {} out of range", via + 1));
    }
    for (i, row) in partial.iter().enumerate() {
        if row.len() != d {
            return Err(format!("row {} has {} entries, expected {d}", i + 1, row.len()));
        }
    }
    for k in 0..d {
        for (i, j) in [(k, k), (k, via), (via, k)] {
            if partial[i][j].is_none() {
                return Err(format!(
                    "entry pi^{}{} is required for completion via asset {}",
                    i + 1,
                    j + 1,
                    via + 1
                ));
            }
        }
    }
    let mut holes = Vec::new();
    let mut pi = vec![vec![Rational::zero(); d]; d];
    for i in 0..d {
        for j in 0..d {
            pi[i][j] = match &partial[i][j] {
                Some(x) => x.clone(),
                None => {
                    holes.push((i, j));
                    partial[i][via].as_ref().unwrap() * partial[via][j].as_ref().unwrap()
                }
            };
        }
    }
    let m = BidAskMatrix {
        pi,
        completion: (!holes.is_empty()).then_some(Completion { via, holes }),
    };
    match m.violations().into_iter().next() {
        Some((rule, detail)) => Err(format!("completed matrix violates {rule}: {detail}")),
        None => Ok(m),
    }
}

/// The trading cone at one node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeCone {
    BidAsk(BidAskMatrix),
    /// Generators of `−K`.
    Generators(Vec<Vec<Rational>>),
}

impl NodeCone {
    pub fn dim(&self) -> usize {
        match self {
            NodeCone::BidAsk(m) => m.d(),
            NodeCone::Generators(g) => g.first().map_or(0, |x| x.len()),
        }
    }

    pub fn bid_ask(&self) -> Option<&BidAskMatrix> {
        match self {
            NodeCone::BidAsk(m) => Some(m),
            NodeCone::Generators(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarketModel {
    pub d: usize,
    pub tree: EventTree,
    pub cones: Vec<NodeCone>,
}

impl MarketModel {
    pub fn new(d: usize, tree: EventTree, cones: Vec<NodeCone>) -> Result<MarketModel, ScenarioError> {
        if d == 0 {
            return Err(ScenarioError::Structure("at least one asset is required".into()));
        }
        if cones.len() != tree.len() {
            return Err(ScenarioError::Structure(format!(
                "{} cones for {} nodes",
                cones.len(),
                tree.len()
            )));
        }
        for (u, c) in cones.iter().enumerate() {
            let ok = match c {
                NodeCone::BidAsk(m) => m.pi.len() == d && m.pi.iter().all(|r| r.len() == d),
                NodeCone::Generators(g) => g.iter().all(|x| x.len() == d),
            };
            if !ok {
                return Err(ScenarioError::Structure(format!(
                    "node {:?}: cone dimension differs from {d} assets",
                    tree.node(u).id
                )));
            }
        }
        Ok(MarketModel { d, tree, cones })
    }

    pub fn is_bid_ask(&self) -> bool {
        self.cones.iter().all(|c| matches!(c, NodeCone::BidAsk(_)))
    }

    pub fn bid_ask(&self, u: usize) -> Option<&BidAskMatrix> {
        self.cones[u].bid_ask()
    }

    pub fn horizon(&self) -> usize {
        self.tree.horizon()
    }

    pub fn node_id(&self, u: usize) -> &str {
        &self.tree.node(u).id
    }

    pub fn with_leaf_prob(&self, probs: Vec<Rational>) -> MarketModel {
        MarketModel {
            tree: self.tree.with_leaf_prob(probs),
            ..self.clone()
        }
    }

    /// Claim-space dimension `L · d`.
    pub fn claim_dim(&self) -> usize {
        self.tree.num_leaves() * self.d
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub node: String,
    pub rule: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        self.violations
            .iter()
            .map(|v| {
                if v.node.is_empty() {
                    format!("{}: {}", v.rule, v.detail)
                } else {
                    format!("node {}: {}: {}", v.node, v.rule, v.detail)
                }
            })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            f.write_str("ok")
        } else {
            f.write_str(&self.summary())
        }
    }
}

/// Lists every violated invariant; an empty list means the model is valid.
pub fn validate_model(m: &MarketModel) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |node: &str, rule: &str, detail: String| {
        violations.push(Violation {
            node: node.to_string(),
            rule: rule.to_string(),
            detail,
        })
    };
    let tree = &m.tree;
    let horizon = tree.horizon();
    for &leaf in tree.leaves() {
        if tree.node(leaf).t != horizon {
            push(
                &tree.node(leaf).id,
                "leaf-depth",
                format!("leaf at t = {} but the horizon is {horizon}", tree.node(leaf).t),
            );
        }
    }
    let mut total = Rational::zero();
    for (pos, p) in tree.leaf_prob().iter().enumerate() {
        if !p.is_positive() {
            push(
                &tree.node(tree.leaves()[pos]).id,
                "probability-positive",
                format!("leaf probability {p} is not positive"),
            );
        }
        total += p;
    }
    if !total.is_one() {
        push(
            "",
            "probability-sum",
            format!("probabilities must sum to 1 (sum is {total})"),
        );
    }
    let bid_ask = m.cones.iter().filter(|c| c.bid_ask().is_some()).count();
    if bid_ask != 0 && bid_ask != m.cones.len() {
        push(
            "",
            "mixed-forms",
            "bid-ask and generator cones cannot be mixed in one model".into(),
        );
    }
    for (u, c) in m.cones.iter().enumerate() {
        let id = &tree.node(u).id;
        match c {
            NodeCone::BidAsk(b) => {
                for (rule, detail) in b.violations() {
                    push(id, rule, detail);
                }
            }
            NodeCone::Generators(g) => {
                if g.iter().all(|x| crate::rational::vec::is_zero(x)) {
                    push(id, "generator-empty", "no nonzero generator".into());
                    continue;
                }
                if tree.node(u).t == horizon {
                    let rays: Vec<Vec<Rational>> = g.clone();
                    for i in 0..m.d {
                        let target = crate::rational::vec::neg(&crate::rational::vec::unit(m.d, i));
                        if !crate::cones::cone_contains(&rays, &target) {
                            push(
                                id,
                                "generator-disposal",
                                format!("terminal cone does not contain -e^{}", i + 1),
                            );
                        }
                    }
                    if let Some(w) = crate::cones::cone_meets_orthant(&rays) {
                        push(
                            id,
                            "generator-orthant",
                            format!(
                                "terminal cone contains the nonnegative vector {}",
                                crate::rational::vec::fmt(&w)
                            ),
                        );
                    }
                }
            }
        }
    }
    ValidationReport {
        ok: violations.is_empty(),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    fn single(pi: BidAskMatrix) -> MarketModel {
        let tree = EventTree::new(vec![("root".into(), None, 0)], vec![("root".into(), r(1))]).unwrap();
        MarketModel::new(pi.d(), tree, vec![NodeCone::BidAsk(pi)]).unwrap()
    }

    #[test]
    fn completion_via_first_asset() {
        let one = || Some(r(1));
        let partial = vec![
            vec![one(), one(), one()],
            vec![one(), one(), None],
            vec![one(), None, one()],
        ];
        let m = complete_matrix(&partial, 0).unwrap();
        assert_eq!(m.pi[1][2], r(1));
        assert_eq!(m.pi[2][1], r(1));
        assert_eq!(m.completion.as_ref().unwrap().holes, vec![(1, 2), (2, 1)]);
    }

    #[test]
    fn full_matrix_completes_unchanged() {
        let m = BidAskMatrix::from_ints(&[&[1, 1], &[2, 1]]);
        let partial: Vec<Vec<Option<Rational>>> =
            m.pi.iter().map(|row| row.iter().cloned().map(Some).collect()).collect();
        let c = complete_matrix(&partial, 0).unwrap();
        assert_eq!(c, m);
    }

    #[test]
    fn completion_rejects_triangle_violation() {
        // pi^31 = 3 exceeds pi^32 pi^21 = 1
        let partial = vec![
            vec![Some(r(1)), Some(r(1)), Some(r(1))],
            vec![Some(r(1)), Some(r(1)), None],
            vec![Some(r(3)), Some(r(1)), Some(r(1))],
        ];
        let err = complete_matrix(&partial, 0).unwrap_err();
        assert!(err.contains("axiom-iii"), "{err}");
    }

    #[test]
    fn triangle_violation_is_reported_with_triple() {
        let mut pi = BidAskMatrix::from_ints(&[&[1, 1, 3], &[1, 1, 1], &[1, 1, 1]]);
        pi.pi[0][2] = r(3);
        let rep = validate_model(&single(pi));
        assert!(!rep.ok);
        assert!(rep
            .violations
            .iter()
            .any(|v| v.rule == "axiom-iii" && v.detail.contains("(i,k,j) = (1,2,3)")));
    }

    #[test]
    fn diagonal_violation() {
        let pi = BidAskMatrix::from_ints(&[&[2, 1], &[1, 1]]);
        let rep = validate_model(&single(pi));
        assert!(rep.violations.iter().any(|v| v.rule == "axiom-ii"));
    }

    #[test]
    fn efficient_friction() {
        assert!(BidAskMatrix::from_ints(&[&[1, 2], &[1, 1]])
            .efficient_friction()
            .is_ok());
        let m = BidAskMatrix::new(vec![vec![r(1), q(1, 2)], vec![r(2), r(1)]]);
        assert_eq!(m.efficient_friction(), Err((0, 1)));
    }

    #[test]
    fn tree_structure_errors() {
        let e = EventTree::new(
            vec![("a".into(), None, 0), ("b".into(), Some("a".into()), 2)],
            vec![("b".into(), r(1))],
        );
        assert!(matches!(e, Err(ScenarioError::Structure(_))));
        let e = EventTree::new(vec![("a".into(), None, 0), ("a".into(), None, 0)], vec![]);
        assert!(e.is_err());
    }

    #[test]
    fn subtree_leaf_bookkeeping() {
        let tree = EventTree::new(
            vec![
                ("r".into(), None, 0),
                ("u".into(), Some("r".into()), 1),
                ("d".into(), Some("r".into()), 1),
                ("uu".into(), Some("u".into()), 2),
                ("ud".into(), Some("u".into()), 2),
                ("dd".into(), Some("d".into()), 2),
            ],
            vec![("uu".into(), q(1, 4)), ("ud".into(), q(1, 4)), ("dd".into(), q(1, 2))],
        )
        .unwrap();
        let u = tree.index_of("u").unwrap();
        assert_eq!(tree.leaves_under(u), &[0, 1]);
        assert_eq!(tree.prob(u), q(1, 2));
        assert_eq!(tree.nodes_at(2).len(), 3);
        assert_eq!(tree.subtree(u).len(), 3);
    }
}
