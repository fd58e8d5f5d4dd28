//! Seeded random bid-ask models for property suites.
//!
//! Each node gets frictionless prices `S^i` (asset 1 is the unit) and
//! nonnegative relative spreads; `π^{ij} = S^j/S^i · (1 + s^{ij})` is then
//! closed under the triangle inequality by shortest paths.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{validate_model, BidAskMatrix, EventTree, MarketModel, NodeCone};
use crate::rational::{q, Rational};

#[derive(Clone, Debug)]
pub struct RandomSpec {
    pub max_assets: usize,
    pub max_horizon: usize,
    pub max_branching: usize,
    /// Every spread strictly positive, so every node has efficient friction.
    pub efficient_friction: bool,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            max_assets: 3,
            max_horizon: 3,
            max_branching: 2,
            efficient_friction: false,
        }
    }
}

const PRICES: [(i64, i64); 6] = [(1, 2), (2, 3), (1, 1), (1, 1), (3, 2), (2, 1)];
const SPREADS: [(i64, i64); 5] = [(0, 1), (0, 1), (1, 4), (1, 2), (1, 1)];

fn pick<R: Rng>(rng: &mut R, xs: &[(i64, i64)]) -> Rational {
    let &(a, b) = xs.choose(rng).unwrap();
    q(a, b)
}

/// Random positive leaf probabilities summing to one.
pub fn random_probabilities<R: Rng>(rng: &mut R, leaves: usize) -> Vec<Rational> {
    let w: Vec<i64> = (0..leaves).map(|_| rng.gen_range(1..=4)).collect();
    let total: i64 = w.iter().sum();
    w.into_iter().map(|x| q(x, total)).collect()
}

/// A bid-ask matrix around the prices `s` with random spreads.
pub fn random_matrix<R: Rng>(rng: &mut R, s: &[Rational], efficient: bool) -> BidAskMatrix {
    let d = s.len();
    let mut pi = vec![vec![Rational::one(); d]; d];
    for i in 0..d {
        for j in 0..d {
            if i != j {
                let spread = if efficient {
                    pick(rng, &SPREADS[2..])
                } else {
                    pick(rng, &SPREADS)
                };
                pi[i][j] = &(&s[j] / &s[i]) * &(&Rational::one() + &spread);
            }
        }
    }
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                let via = &pi[i][k] * &pi[k][j];
                if via < pi[i][j] {
                    pi[i][j] = via;
                }
            }
        }
    }
    BidAskMatrix::new(pi)
}

/// A valid random model within the bounds of `spec`.
pub fn random_model<R: Rng>(rng: &mut R, spec: &RandomSpec) -> MarketModel {
    let d = rng.gen_range(1..=spec.max_assets);
    let horizon = rng.gen_range(1..=spec.max_horizon);
    let mut nodes: Vec<(String, Option<String>, usize)> = vec![("r".into(), None, 0)];
    let mut frontier = vec!["r".to_string()];
    for t in 1..=horizon {
        let mut next = Vec::new();
        for p in &frontier {
            for c in 0..rng.gen_range(1..=spec.max_branching) {
                let id = format!("{p}.{c}");
                nodes.push((id.clone(), Some(p.clone()), t));
                next.push(id);
            }
        }
        frontier = next;
    }
    let probs = random_probabilities(rng, frontier.len());
    let tree = EventTree::new(nodes, frontier.into_iter().zip(probs).collect()).expect("well-formed tree");
    let cones = (0..tree.len())
        .map(|_| {
            let mut s = vec![Rational::one()];
            s.extend((1..d).map(|_| pick(rng, &PRICES)));
            NodeCone::BidAsk(random_matrix(rng, &s, spec.efficient_friction))
        })
        .collect();
    let m = MarketModel::new(d, tree, cones).expect("consistent dimensions");
    debug_assert!(validate_model(&m).ok, "{}", validate_model(&m));
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_models_are_valid_and_reproducible() {
        let spec = RandomSpec::default();
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let m = random_model(&mut a, &spec);
            assert!(validate_model(&m).ok, "{}", validate_model(&m));
            assert!(m.d <= 3 && m.horizon() <= 3);
            assert!(m.tree.nodes().iter().all(|n| n.children.len() <= 2));
            assert_eq!(m, random_model(&mut b, &spec));
        }
    }

    #[test]
    fn efficient_spreads_stay_efficient_after_closure() {
        let spec = RandomSpec {
            efficient_friction: true,
            ..RandomSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let m = random_model(&mut rng, &spec);
            for u in 0..m.tree.len() {
                assert!(m.bid_ask(u).unwrap().efficient_friction().is_ok());
            }
        }
    }
}
