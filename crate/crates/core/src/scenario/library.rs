//! Built-in example markets.

use super::{complete_matrix, BidAskMatrix, EventTree, MarketModel, NodeCone};
use crate::claims::Strategy;
use crate::rational::{q, Rational};

fn r(n: i64) -> Rational {
    Rational::from_integer(n)
}

fn chain(pis: Vec<BidAskMatrix>) -> MarketModel {
    let d = pis[0].d();
    let spec = (0..pis.len())
        .map(|t| (t.to_string(), t.checked_sub(1).map(|p| p.to_string()), t))
        .collect();
    let leaf = (pis.len() - 1).to_string();
    let tree = EventTree::new(spec, vec![(leaf, r(1))]).unwrap();
    MarketModel::new(d, tree, pis.into_iter().map(NodeCone::BidAsk).collect()).unwrap()
}

/// Two assets, one period: bid 1/2 and ask 1 at t = 0, frictionless price
/// 1 at t = 1.
pub fn ex41() -> MarketModel {
    chain(vec![
        BidAskMatrix::from_ints(&[&[1, 1], &[2, 1]]),
        BidAskMatrix::from_ints(&[&[1, 1], &[1, 1]]),
    ])
}

/// As [`ex41`] but with ask price 2 at t = 1.
pub fn ex42() -> MarketModel {
    chain(vec![
        BidAskMatrix::from_ints(&[&[1, 1], &[2, 1]]),
        BidAskMatrix::from_ints(&[&[1, 2], &[1, 1]]),
    ])
}

/// Prohibitive transfer price of the cascade example.
pub const EX43_A: i64 = 5;

/// State coordinates of a node of the cascade example; `None` where the
/// coordinate is not yet revealed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ex43State {
    pub n: Option<i64>,
    pub m: Option<i64>,
    pub i: Option<Rational>,
    pub j: Option<Rational>,
}

impl Ex43State {
    pub fn id(&self) -> String {
        let mut parts = Vec::new();
        if let Some(n) = self.n {
            parts.push(format!("n={n}"));
        }
        if let Some(m) = self.m {
            parts.push(format!("m={m}"));
        }
        if let Some(i) = &self.i {
            parts.push(format!("i={i}"));
        }
        if let Some(j) = &self.j {
            parts.push(format!("j={j}"));
        }
        if parts.is_empty() {
            "root".into()
        } else {
            parts.join(",")
        }
    }

    pub fn t(&self) -> usize {
        match (&self.n, &self.i, &self.j) {
            (None, _, _) => 0,
            (Some(_), None, _) => 1,
            (Some(_), Some(_), None) => 2,
            _ => 3,
        }
    }
}

/// All states of the truncation `n, m ∈ {1..=n_max}` in document order:
/// root, then t = 1, 2, 3 nodes, each level in lexicographic order.
pub fn ex43_states(n_max: i64) -> Vec<Ex43State> {
    let signs = [q(-1, 2), q(1, 2)];
    let mut out = vec![Ex43State {
        n: None,
        m: None,
        i: None,
        j: None,
    }];
    for n in 1..=n_max {
        out.push(Ex43State {
            n: Some(n),
            m: None,
            i: None,
            j: None,
        });
    }
    for n in 1..=n_max {
        for m in 1..=n_max {
            for i in &signs {
                out.push(Ex43State {
                    n: Some(n),
                    m: Some(m),
                    i: Some(i.clone()),
                    j: None,
                });
            }
        }
    }
    for n in 1..=n_max {
        for m in 1..=n_max {
            for i in &signs {
                for j in &signs {
                    out.push(Ex43State {
                        n: Some(n),
                        m: Some(m),
                        i: Some(i.clone()),
                        j: Some(j.clone()),
                    });
                }
            }
        }
    }
    out
}

fn parent_state(s: &Ex43State) -> Option<Ex43State> {
    match s.t() {
        0 => None,
        1 => Some(Ex43State { n: None, ..s.clone() }),
        2 => Some(Ex43State {
            m: None,
            i: None,
            ..s.clone()
        }),
        _ => Some(Ex43State { j: None, ..s.clone() }),
    }
}

/// Completes a matrix given by its first row and first column through
/// asset 1.
fn via_first(row: [Rational; 4], col: [Rational; 4]) -> BidAskMatrix {
    let mut partial = vec![vec![None; 4]; 4];
    for k in 0..4 {
        partial[0][k] = Some(row[k].clone());
        partial[k][0] = Some(col[k].clone());
        partial[k][k] = Some(r(1));
    }
    complete_matrix(&partial, 0).expect("cascade matrices satisfy the axioms")
}

/// Bid-ask matrix of the cascade example at a state; `witness` selects the
/// more favourable matrix at t = 1 with `π^{13} = π^{14} = 1`.
pub fn ex43_matrix(s: &Ex43State, witness: bool) -> BidAskMatrix {
    let a = r(EX43_A);
    let one = r(1);
    match s.t() {
        0 => via_first(
            [one.clone(), one.clone(), one.clone(), one.clone()],
            [one, a.clone(), a.clone(), a],
        ),
        1 => {
            let row = if witness {
                [one.clone(), a.clone(), one.clone(), one.clone()]
            } else {
                [one.clone(), a.clone(), a.clone(), a.clone()]
            };
            via_first(row, [one.clone(), a.clone(), a, one])
        }
        2 => {
            let n = r(s.n.unwrap());
            let i = s.i.clone().unwrap();
            let p31 = (&one + &i).recip();
            let p41 = (&one - &(&i / &n)).recip();
            via_first([one.clone(), a.clone(), a.clone(), a.clone()], [one, a, p31, p41])
        }
        _ => {
            let m = r(s.m.unwrap());
            let i = s.i.clone().unwrap();
            let j = s.j.clone().unwrap();
            let p21 = (&(&one + &q(1, 4)) + &j).recip();
            let p31 = (&(&one + &i) * &(&one - &(&j / &m))).recip();
            via_first([one.clone(), a.clone(), a.clone(), a.clone()], [one, p21, p31, a])
        }
    }
}

/// The cascade-of-hedges example truncated to `n, m ≤ n_max`, uniform leaf
/// probabilities unless `leaf_prob` is given.
pub fn ex43(n_max: i64, witness: bool, leaf_prob: Option<Vec<Rational>>) -> MarketModel {
    assert!(n_max >= 1);
    let states = ex43_states(n_max);
    let spec: Vec<(String, Option<String>, usize)> = states
        .iter()
        .map(|s| (s.id(), parent_state(s).map(|p| p.id()), s.t()))
        .collect();
    let leaves: Vec<&Ex43State> = states.iter().filter(|s| s.t() == 3).collect();
    let probs = leaf_prob.unwrap_or_else(|| {
        let l = leaves.len() as i64;
        vec![q(1, l); leaves.len()]
    });
    assert_eq!(probs.len(), leaves.len());
    let tree = EventTree::new(spec, leaves.iter().map(|s| s.id()).zip(probs).collect()).unwrap();
    let cones = states
        .iter()
        .map(|s| NodeCone::BidAsk(ex43_matrix(s, witness)))
        .collect();
    MarketModel::new(4, tree, cones).unwrap()
}

/// The cascade strategy with parameter `k` on [`ex43`]`(n_max, ..)`: buy
/// one unit of asset 2, `k` of asset 3 and `k²` of asset 4 at the root,
/// then unwind through asset 1 as the states are revealed.
pub fn ex43_strategy(m: &MarketModel, n_max: i64, k: i64) -> Strategy {
    let states = ex43_states(n_max);
    assert_eq!(states.len(), m.tree.len(), "model is not the truncation for n_max");
    let d = m.d;
    let k = r(k);
    let one = r(1);
    let mut st = Strategy::new(0, 3);
    for s in &states {
        let u = m.tree.index_of(&s.id()).expect("state node");
        match s.t() {
            0 => {
                st.order(d, u, 0, 1, &one);
                st.order(d, u, 0, 2, &k);
                st.order(d, u, 0, 3, &(&k * &k));
            }
            1 => {
                let n = r(s.n.unwrap());
                let kn = k.clone().min(n);
                st.order(d, u, 3, 0, &(&(&k * &k) - &(&kn * &k)));
            }
            2 => {
                let n = r(s.n.unwrap());
                let m_ = r(s.m.unwrap());
                let i = s.i.clone().unwrap();
                let kn = k.clone().min(n.clone());
                st.order(d, u, 3, 0, &(&(&kn * &k) * &(&one - &(&i / &n))));
                let cap = (&m_ / &(&one + &i)).min(k.clone());
                st.order(d, u, 2, 0, &(&(&k - &cap) * &(&one + &i)));
            }
            _ => {
                let m_ = r(s.m.unwrap());
                let i = s.i.clone().unwrap();
                let j = s.j.clone().unwrap();
                st.order(d, u, 1, 0, &(&(&one + &q(1, 4)) + &j));
                let cap = (&m_ / &(&one + &i)).min(k.clone());
                st.order(d, u, 2, 0, &(&(&cap * &(&one + &i)) * &(&one - &(&j / &m_))));
            }
        }
    }
    st
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{parse_model, serialize_model, validate_model};

    #[test]
    fn small_examples_validate() {
        for m in [ex41(), ex42()] {
            assert!(validate_model(&m).ok);
            assert_eq!(m.horizon(), 1);
            assert_eq!(m.tree.num_leaves(), 1);
        }
        assert_eq!(ex41().bid_ask(0).unwrap().pi[1][0], r(2));
        assert_eq!(ex42().bid_ask(1).unwrap().pi[0][1], r(2));
    }

    #[test]
    fn cascade_shape() {
        let m = ex43(3, false, None);
        assert!(validate_model(&m).ok, "{}", validate_model(&m));
        assert_eq!(m.tree.len(), 1 + 3 + 18 + 36);
        assert_eq!(m.claim_dim(), 144);
        let small = ex43(1, false, None);
        assert_eq!(small.tree.num_leaves(), 4);
        assert!(validate_model(&ex43(3, true, None)).ok);
    }

    #[test]
    fn cascade_completion_entries() {
        let m = ex43(3, false, None);
        let pi0 = m.bid_ask(0).unwrap();
        assert_eq!(pi0.pi[1][2], r(5));
        assert_eq!(pi0.completion.as_ref().unwrap().via, 0);
        let u = m.tree.index_of("n=2,m=1,i=1/2").unwrap();
        let pi = m.bid_ask(u).unwrap();
        // 1 / (1 - (1/2)/2)
        assert_eq!(pi.pi[3][0], q(4, 3));
        assert_eq!(pi.pi[3][1], &q(4, 3) * &r(5));
    }

    #[test]
    fn cascade_round_trips_through_json() {
        let m = ex43(2, false, None);
        let back = parse_model(serialize_model(&m).as_bytes()).unwrap();
        assert_eq!(back, m);
    }

    /// `v^k = [1/4 + i k (1 − (n∧k)/n) + j (1 − (1+i)/m ((m/(1+i))∧k))] e^1`.
    fn cascade_claim(n: i64, m: i64, i: &Rational, j: &Rational, k: i64) -> Rational {
        let (nr, mr, kr, one) = (r(n), r(m), r(k), r(1));
        let first = i * &kr * &(&one - &(&kr.clone().min(nr.clone()) / &nr));
        let cap = (&mr / &(&one + i)).min(kr.clone());
        let second = j * &(&one - &(&(&(&one + i) / &mr) * &cap));
        &(&q(1, 4) + &first) + &second
    }

    #[test]
    fn cascade_strategy_attains_the_formula() {
        for (n_max, k) in [(1, 1), (2, 1), (2, 3), (3, 3), (3, 6)] {
            let m = ex43(n_max, false, None);
            let st = ex43_strategy(&m, n_max, k);
            assert!(st.is_admissible(&m));
            let v = st.induced_claim(&m);
            for (pos, &l) in m.tree.leaves().iter().enumerate() {
                let s = ex43_states(n_max).into_iter().find(|s| s.id() == m.node_id(l)).unwrap();
                let want = cascade_claim(
                    s.n.unwrap(),
                    s.m.unwrap(),
                    s.i.as_ref().unwrap(),
                    s.j.as_ref().unwrap(),
                    k,
                );
                let got = &v[pos * 4..pos * 4 + 4];
                assert_eq!(
                    got,
                    &[want, r(0), r(0), r(0)][..],
                    "n_max {n_max}, k {k}, leaf {}",
                    m.node_id(l)
                );
            }
        }
    }
}
