use arbcert::decompose::{check_decomposition_laws, decompose_order, order_from_triples};
use arbcert::pricing::{dominated_by, find_cps, frictionless_witness, superhedge, verify_cps, PriceSystem};
use arbcert::rational::{q, vec, Rational};
use arbcert::scenario::random::{random_model, RandomSpec};
use arbcert::scenario::{parse_model, serialize_model, validate_model, BidAskMatrix, MarketModel, NodeCone};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model(seed: u64) -> MarketModel {
    random_model(&mut ChaCha8Rng::seed_from_u64(seed), &RandomSpec::default())
}

/// Lowers `π^{ij}` at node `u` halfway to the least value keeping the
/// triangle and reciprocity inequalities.
fn cheaper(m: &MarketModel, u: usize, i: usize, j: usize) -> Option<MarketModel> {
    let pi = m.bid_ask(u)?;
    let d = m.d;
    let mut lo = pi.get(j, i).recip();
    for k in 0..d {
        if k != i && k != j {
            lo = lo.max(pi.get(i, k) / pi.get(j, k));
            lo = lo.max(pi.get(k, j) / pi.get(k, i));
        }
    }
    if &lo >= pi.get(i, j) {
        return None;
    }
    let mut rows = pi.pi.clone();
    rows[i][j] = &(&rows[i][j] + &lo) / &Rational::from_integer(2);
    let mut cones = m.cones.clone();
    cones[u] = NodeCone::BidAsk(BidAskMatrix::new(rows));
    let out = MarketModel::new(d, m.tree.clone(), cones).ok()?;
    validate_model(&out).ok.then_some(out)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn model_files_round_trip(seed in any::<u64>()) {
        let m = model(seed);
        let text = serialize_model(&m);
        prop_assert_eq!(parse_model(text.as_bytes()).unwrap(), m.clone());
        prop_assert_eq!(serialize_model(&m), text);
    }

    #[test]
    fn price_systems_scale(seed in any::<u64>(), c in prop::sample::select(vec![q(1, 3), q(2, 1), q(7, 2)])) {
        let m = model(seed);
        if let Some(ps) = find_cps(&m, false).unwrap().price_system() {
            prop_assert!(verify_cps(&m, ps).is_ok());
            let scaled = PriceSystem {
                z: ps.z.iter().map(|z| vec::scale(z, &c)).collect(),
                normalization: ps.normalization.clone(),
            };
            prop_assert!(verify_cps(&m, &scaled).is_ok());
        }
    }

    #[test]
    fn witnesses_are_dominated_entrywise(seed in any::<u64>()) {
        let m = model(seed);
        if let Some(ps) = find_cps(&m, false).unwrap().price_system() {
            if let Ok(w) = frictionless_witness(&m, ps) {
                prop_assert!(dominated_by(&m, &w).is_ok());
                for u in 0..m.tree.len() {
                    let (a, b) = (m.bid_ask(u).unwrap(), w.bid_ask(u).unwrap());
                    for i in 0..m.d {
                        for j in 0..m.d {
                            prop_assert!(b.get(i, j) <= a.get(i, j));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn superhedging_gets_cheaper_with_lower_asks(seed in any::<u64>()) {
        let m = model(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        if m.d < 2 {
            return Ok(());
        }
        let u = rng.gen_range(0..m.tree.len());
        let i = rng.gen_range(0..m.d);
        let j = (i + rng.gen_range(1..m.d)) % m.d;
        let Some(m2) = cheaper(&m, u, i, j) else { return Ok(()) };
        let v: Vec<Rational> = (0..m.claim_dim()).map(|_| q(rng.gen_range(-2..=3), 2)).collect();
        let (a, b) = (superhedge(&m, &v, 0).unwrap(), superhedge(&m2, &v, 0).unwrap());
        prop_assert!(a.verify(&m, &v) && b.verify(&m2, &v));
        match (&a.price, &b.price) {
            (Some(pa), Some(pb)) => prop_assert!(pb <= pa),
            (None, pb) => prop_assert!(pb.is_none()),
            (Some(_), None) => {}
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn decomposition_laws_hold(
        seed in any::<u64>(),
        entries in prop::collection::vec((1usize..=3, 1usize..=3, 0i64..=4), 0..6),
        mu in prop::sample::select(vec![q(0, 1), q(1, 2), q(3, 1), q(5, 3)]),
    ) {
        let m = model(seed);
        let triples: Vec<(usize, usize, Rational)> = entries
            .into_iter()
            .filter(|(i, j, _)| i != j && *i <= m.d && *j <= m.d)
            .map(|(i, j, x)| (i, j, q(x, 2)))
            .collect();
        let o = order_from_triples(m.d, &triples).unwrap();
        let u = m.tree.root();
        let dec = decompose_order(&m, u, &o).unwrap();
        prop_assert!(dec.verify(&m).is_ok());
        let laws = check_decomposition_laws(&m, u, &o, &mu).unwrap();
        prop_assert!(laws.all(), "{:?}", laws);
    }
}
