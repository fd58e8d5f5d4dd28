//! Seeded property suites over random models.
//!
//! Every violation is tagged with the property it breaks:
//! `chain` (NA^r ⇒ NA^ps ⇒ NA^wps ⇒ NA), `ftap` (NA ⇔ CPS ⇔ NA^wps),
//! `robust` (NA^r ⇔ SCPS ⇔ nullspace), `efficient` (NA^ps ⇔ NA^s under EF),
//! `measure` (verdicts unchanged by new leaf probabilities), `superhedge`
//! (zero duality gap when NA^ps holds) and `certificate` (re-verification).

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::decompose::{
    check_decomposition_laws, continuity_errors, continuity_ok, decompose_order, zero_order, Order,
};
use crate::pricing::{find_cps, superhedge, verify_cps, verify_scps, CpsOutcome};
use crate::rational::{q, Rational};
use crate::scenario::random::{random_model, random_probabilities, RandomSpec};
use crate::scenario::MarketModel;
use crate::verdicts::{evaluate, Registry, Report, STANDARD_CODES};

pub const TAGS: [&str; 7] = [
    "chain",
    "ftap",
    "robust",
    "efficient",
    "measure",
    "superhedge",
    "certificate",
];

#[derive(Clone, Debug, Default)]
pub struct SuiteSummary {
    pub models: usize,
    /// `(model index, tag, detail)`.
    pub violations: Vec<(usize, &'static str, String)>,
    /// Verdict vectors over [`STANDARD_CODES`] as `1`/`0` strings.
    pub patterns: BTreeMap<String, usize>,
    /// Models on which a superhedging gap was computed.
    pub superhedged: usize,
    pub certificates: usize,
}

impl SuiteSummary {
    pub fn count(&self, tag: &str) -> usize {
        self.violations.iter().filter(|(_, t, _)| *t == tag).count()
    }

    pub fn to_json(&self) -> Value {
        let by_tag: serde_json::Map<String, Value> =
            TAGS.iter().map(|t| (t.to_string(), json!(self.count(t)))).collect();
        let details: Vec<Value> = self
            .violations
            .iter()
            .map(|(i, t, d)| json!({"model": i, "tag": t, "detail": d}))
            .collect();
        json!({
            "models": self.models,
            "violations": by_tag,
            "details": details,
            "patterns": self.patterns,
            "superhedged": self.superhedged,
            "certificates": self.certificates,
        })
    }
}

fn pattern(r: &Report) -> String {
    STANDARD_CODES
        .iter()
        .map(|c| match r.holds(c) {
            Some(true) => '1',
            Some(false) => '0',
            None => '-',
        })
        .collect()
}

fn consistency_tag(name: &str) -> &'static str {
    match name {
        "nar implies naps" | "naps implies nawps" | "nawps implies na" => "chain",
        "na iff nawps" => "ftap",
        "nar iff nullspace" => "robust",
        "ef: naps iff nas" => "efficient",
        _ => "certificate",
    }
}

const CLAIM_VALUES: [(i64, i64); 5] = [(-1, 1), (0, 1), (1, 2), (1, 1), (2, 1)];

fn random_claim<R: Rng>(rng: &mut R, m: &MarketModel) -> Vec<Rational> {
    (0..m.claim_dim())
        .map(|_| {
            let &(a, b) = CLAIM_VALUES.choose(rng).unwrap();
            q(a, b)
        })
        .collect()
}

/// Runs every property on `models` random models drawn from `seed`.
pub fn verdict_suite(seed: u64, models: usize, spec: &RandomSpec) -> SuiteSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let registry = Registry::standard();
    let mut out = SuiteSummary {
        models,
        ..SuiteSummary::default()
    };
    for k in 0..models {
        let m = random_model(&mut rng, spec);
        let mut bad = |tag: &'static str, d: String| out.violations.push((k, tag, d));
        let report = match evaluate(&m, &registry, &STANDARD_CODES) {
            Ok(r) => r,
            Err(e) => {
                bad("certificate", e.to_string());
                continue;
            }
        };
        out.certificates += report.entries.len();
        for (name, ok) in &report.consistency {
            if !ok {
                bad(consistency_tag(name), name.to_string());
            }
        }
        let holds = |c: &str| report.holds(c).expect("bid-ask models support every condition");

        match find_cps(&m, false) {
            Ok(CpsOutcome::Found { ps, .. }) => {
                if let Err(e) = verify_cps(&m, &ps) {
                    bad("certificate", format!("cps: {e}"));
                }
                if !holds("na") {
                    bad("ftap", "CPS found but NA fails".into());
                }
            }
            Ok(CpsOutcome::Absent(cert)) => {
                if !cert.verify() {
                    bad("certificate", "cps certificate".into());
                }
                if holds("na") {
                    bad("ftap", "no CPS but NA holds".into());
                }
            }
            Err(e) => bad("certificate", format!("cps: {e}")),
        }
        match find_cps(&m, true) {
            Ok(CpsOutcome::Found { ps, .. }) => {
                if let Err(e) = verify_scps(&m, &ps) {
                    bad("certificate", format!("scps: {e}"));
                }
                if !holds("nar") {
                    bad("robust", "SCPS found but NA^r fails".into());
                }
            }
            Ok(CpsOutcome::Absent(cert)) => {
                if !cert.verify() {
                    bad("certificate", "scps certificate".into());
                }
                if holds("nar") {
                    bad("robust", "no SCPS but NA^r holds".into());
                }
            }
            Err(e) => bad("certificate", format!("scps: {e}")),
        }
        out.certificates += 2;

        let resampled = m.with_leaf_prob(random_probabilities(&mut rng, m.tree.num_leaves()));
        match evaluate(&resampled, &registry, &STANDARD_CODES) {
            Ok(r2) => {
                if pattern(&r2) != pattern(&report) {
                    bad("measure", format!("{} became {}", pattern(&report), pattern(&r2)));
                }
                out.certificates += r2.entries.len();
            }
            Err(e) => bad("certificate", format!("resampled: {e}")),
        }

        if holds("naps") {
            let v = random_claim(&mut rng, &m);
            let num = rng.gen_range(0..m.d);
            match superhedge(&m, &v, num) {
                Ok(s) => {
                    out.superhedged += 1;
                    out.certificates += 1;
                    if !s.verify(&m, &v) {
                        bad("certificate", "superhedge".into());
                    }
                    if s.gap() != Some(Rational::zero()) {
                        bad("superhedge", format!("gap {:?}", s.gap()));
                    }
                }
                Err(e) => bad("superhedge", e.to_string()),
            }
        }
        *out.patterns.entry(pattern(&report)).or_default() += 1;
    }
    out
}

#[derive(Clone, Debug, Default)]
pub struct DecompositionSummary {
    pub cases: usize,
    /// `(case index, detail)`.
    pub violations: Vec<(usize, String)>,
    /// Cases whose reversible part is neither zero nor the whole order.
    pub split: usize,
}

impl DecompositionSummary {
    pub fn to_json(&self) -> Value {
        let details: Vec<Value> = self
            .violations
            .iter()
            .map(|(i, d)| json!({"case": i, "detail": d}))
            .collect();
        json!({"cases": self.cases, "violations": details, "split": self.split})
    }
}

const ORDER_VALUES: [(i64, i64); 4] = [(0, 1), (1, 2), (1, 1), (2, 1)];
const SCALES: [(i64, i64); 5] = [(0, 1), (1, 3), (1, 1), (2, 1), (5, 2)];

fn random_order<R: Rng>(rng: &mut R, d: usize) -> Order {
    let mut o = zero_order(d);
    for (i, row) in o.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            if i != j {
                let &(a, b) = ORDER_VALUES.choose(rng).unwrap();
                *x = q(a, b);
            }
        }
    }
    o
}

/// Decomposes random orders at random non-terminal nodes and checks the
/// certificate, the algebraic laws and continuity under shrinking
/// perturbations.
pub fn decomposition_suite(seed: u64, cases: usize, spec: &RandomSpec) -> DecompositionSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DecompositionSummary {
        cases,
        ..DecompositionSummary::default()
    };
    for k in 0..cases {
        let m = random_model(&mut rng, spec);
        let inner: Vec<usize> = (0..m.tree.len()).filter(|&u| m.tree.node(u).t < m.horizon()).collect();
        let u = *inner.choose(&mut rng).unwrap();
        let o = random_order(&mut rng, m.d);
        let delta = random_order(&mut rng, m.d);
        let &(a, b) = SCALES.choose(&mut rng).unwrap();
        let mu = q(a, b);
        let mut bad = |d: String| out.violations.push((k, d));
        match decompose_order(&m, u, &o) {
            Ok(dec) => {
                if let Err(e) = dec.verify(&m) {
                    bad(format!("certificate: {e}"));
                }
                if dec.reversible != o && dec.reversible != zero_order(m.d) {
                    out.split += 1;
                }
            }
            Err(e) => bad(e.to_string()),
        }
        match check_decomposition_laws(&m, u, &o, &mu) {
            Ok(laws) if laws.all() => {}
            Ok(laws) => bad(format!("laws {laws:?}")),
            Err(e) => bad(e.to_string()),
        }
        match continuity_errors(&m, u, &o, &delta) {
            Ok(errs) if continuity_ok(&errs) => {}
            Ok(errs) => bad(format!("continuity {errs:?}")),
            Err(e) => bad(e.to_string()),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_are_clean() {
        let s = verdict_suite(1, 20, &RandomSpec::default());
        assert!(s.violations.is_empty(), "{:?}", s.violations);
        assert_eq!(s.patterns.values().sum::<usize>(), 20);
        let d = decomposition_suite(1, 10, &RandomSpec::default());
        assert!(d.violations.is_empty(), "{:?}", d.violations);
    }
}
