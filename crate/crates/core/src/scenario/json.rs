use serde::{Deserialize, Serialize};

use super::{complete_matrix, validate_model, BidAskMatrix, EventTree, MarketModel, NodeCone, ScenarioError};
use crate::jsonfmt::{to_pretty, OrderedMap};
use crate::rational::Rational;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    assets: usize,
    nodes: Vec<RawNode>,
    leaf_prob: OrderedMap<Rational>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    id: String,
    parent: Option<String>,
    t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pi: Option<Vec<Vec<Option<Rational>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    via: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generators: Option<Vec<Vec<Rational>>>,
}

/// Parses a model file without checking the market axioms.
///
/// Structural problems (syntax, unknown fields, dangling parents, matrix
/// shapes, failed completions) are errors; axiom and probability issues
/// are left to [`validate_model`].
pub fn parse_model_unchecked(text: &[u8]) -> Result<MarketModel, ScenarioError> {
    let raw: RawModel = serde_json::from_slice(text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
    let d = raw.assets;
    let mut spec = Vec::with_capacity(raw.nodes.len());
    let mut cones = Vec::with_capacity(raw.nodes.len());
    for n in raw.nodes {
        let cone = match (n.pi, n.generators) {
            (Some(_), Some(_)) => {
                return Err(ScenarioError::Structure(format!(
                    "node {:?} has both \"pi\" and \"generators\"",
                    n.id
                )))
            }
            (None, None) => {
                return Err(ScenarioError::Structure(format!(
                    "node {:?} needs \"pi\" or \"generators\"",
                    n.id
                )))
            }
            (Some(pi), None) => {
                if pi.len() != d || pi.iter().any(|r| r.len() != d) {
                    return Err(ScenarioError::Structure(format!("node {:?}: pi must be {d}x{d}", n.id)));
                }
                let has_holes = pi.iter().flatten().any(|x| x.is_none());
                match n.via {
                    Some(via) => {
                        if via == 0 || via > d {
                            return Err(ScenarioError::Structure(format!(
                                "node {:?}: via must be an asset index in 1..={d}",
                                n.id
                            )));
                        }
                        let m = complete_matrix(&pi, via - 1).map_err(|detail| ScenarioError::Completion {
                            node: n.id.clone(),
                            detail,
                        })?;
                        NodeCone::BidAsk(m)
                    }
                    None if has_holes => {
                        return Err(ScenarioError::Structure(format!(
                            "node {:?}: pi has holes but no \"via\" asset",
                            n.id
                        )))
                    }
                    None => NodeCone::BidAsk(BidAskMatrix::new(
                        pi.into_iter()
                            .map(|r| r.into_iter().map(Option::unwrap).collect())
                            .collect(),
                    )),
                }
            }
            (None, Some(g)) => {
                if n.via.is_some() {
                    return Err(ScenarioError::Structure(format!(
                        "node {:?}: \"via\" only applies to \"pi\"",
                        n.id
                    )));
                }
                if g.iter().any(|x| x.len() != d) {
                    return Err(ScenarioError::Structure(format!(
                        "node {:?}: generators must have {d} entries",
                        n.id
                    )));
                }
                NodeCone::Generators(g)
            }
        };
        spec.push((n.id, n.parent, n.t));
        cones.push(cone);
    }
    let tree = EventTree::new(spec, raw.leaf_prob.0)?;
    MarketModel::new(d, tree, cones)
}

/// Parses and validates a model file.
pub fn parse_model(text: &[u8]) -> Result<MarketModel, ScenarioError> {
    let m = parse_model_unchecked(text)?;
    let report = validate_model(&m);
    if report.ok {
        Ok(m)
    } else {
        Err(ScenarioError::Invalid(report))
    }
}

/// Canonical JSON text of a model; completed entries are written back as
/// holes together with their `via` asset.
pub fn serialize_model(m: &MarketModel) -> String {
    let tree = &m.tree;
    let nodes = tree
        .nodes()
        .iter()
        .enumerate()
        .map(|(u, n)| {
            let (pi, via, generators) = match &m.cones[u] {
                NodeCone::BidAsk(b) => {
                    let mut rows: Vec<Vec<Option<Rational>>> =
                        b.pi.iter().map(|r| r.iter().cloned().map(Some).collect()).collect();
                    let via = b.completion.as_ref().map(|c| {
                        for &(i, j) in &c.holes {
                            rows[i][j] = None;
                        }
                        c.via + 1
                    });
                    (Some(rows), via, None)
                }
                NodeCone::Generators(g) => (None, None, Some(g.clone())),
            };
            RawNode {
                id: n.id.clone(),
                parent: n.parent.map(|p| tree.node(p).id.clone()),
                t: n.t,
                pi,
                via,
                generators,
            }
        })
        .collect();
    let leaf_prob = tree
        .leaves()
        .iter()
        .zip(tree.leaf_prob())
        .map(|(&l, p)| (tree.node(l).id.clone(), p.clone()))
        .collect();
    to_pretty(&RawModel {
        assets: m.d,
        nodes,
        leaf_prob,
    })
}
