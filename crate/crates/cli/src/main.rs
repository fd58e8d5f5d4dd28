//! `arbcert`: exact arbitrage checks for bid-ask models on event trees.
//!
//! Exit codes: 0 when the command ran (verdicts are in the output), 2 for
//! input errors, 3 for internal inconsistencies.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use arbcert::claims::{claim_from_leaves, node_by_id};
use arbcert::decompose::{decompose_order, order_from_triples, DecomposeError};
use arbcert::exactlp::LinearProgram;
use arbcert::jsonfmt::to_pretty;
use arbcert::pricing::{
    constant_claim, cps_lp, cps_uniqueness_bounds, find_cps, strict_cps_lp, superhedge, CpsOutcome, PricingError,
};
use arbcert::rational::Rational;
use arbcert::scenario::library::{ex41, ex42, ex43};
use arbcert::scenario::random::{random_probabilities, RandomSpec};
use arbcert::scenario::{parse_model, parse_model_unchecked, serialize_model, validate_model, MarketModel};
use arbcert::suite::{decomposition_suite, verdict_suite};
use arbcert::verdicts::{na_lp, run, Mixed, Registry, Report, VerdictError, STANDARD_CODES};

#[derive(Parser)]
#[command(name = "arbcert", version, about = "Exact no-arbitrage checks with certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a model file and list violated invariants
    Validate {
        model: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Decide no-arbitrage conditions
    Check(CheckArgs),
    /// Search for a consistent price system
    Cps {
        model: PathBuf,
        /// Require values in the relative interiors of the dual cones
        #[arg(long)]
        strict: bool,
        /// Range of Z^asset(node) over price systems with Z^1(root) = 1, as NODE:ASSET
        #[arg(long = "bounds", value_name = "NODE:ASSET")]
        bounds: Vec<String>,
        #[arg(long, value_name = "FILE")]
        dump_lp: Option<PathBuf>,
    },
    /// Split an order into reversible and pure parts
    Decompose {
        model: PathBuf,
        #[arg(long)]
        node: String,
        /// JSON list of [i, j, qty] triples with 1-based assets
        #[arg(long)]
        order: String,
    },
    /// Superhedging price of a claim in a numeraire asset
    Superhedge {
        model: PathBuf,
        /// JSON: a list of d amounts paid at every leaf, or an object from
        /// leaf id to amounts
        #[arg(long)]
        claim: String,
        /// 1-based numeraire asset
        #[arg(long, default_value_t = 1)]
        numeraire: usize,
        #[arg(long, value_name = "FILE")]
        dump_lp: Option<PathBuf>,
    },
    /// Write one of the built-in example models
    Examples {
        #[arg(value_parser = ["ex41", "ex42", "ex43"])]
        name: String,
        /// Truncation of the cascade example
        #[arg(long, default_value_t = 3)]
        n_max: i64,
        /// Frictionless comparison market of the cascade example
        #[arg(long)]
        witness: bool,
        /// Random positive leaf probabilities instead of uniform ones
        #[arg(long, value_name = "SEED")]
        prob_seed: Option<u64>,
        #[arg(short, long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Randomized property suites
    Suite {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        models: usize,
        /// Strictly positive spreads everywhere
        #[arg(long)]
        efficient: bool,
        #[arg(long, default_value_t = 100)]
        decompositions: usize,
    },
}

#[derive(Args)]
struct CheckArgs {
    model: PathBuf,
    /// Comma-separated condition codes (default: all)
    #[arg(long, value_delimiter = ',')]
    conditions: Vec<String>,
    /// Comparison market for the mixed condition
    #[arg(long, value_name = "FILE")]
    witness: Option<PathBuf>,
    #[arg(long, conflicts_with = "text")]
    json: bool,
    #[arg(long)]
    text: bool,
    /// Include per-condition wall time in milliseconds
    #[arg(long)]
    timings: bool,
    #[arg(long, value_name = "FILE")]
    dump_lp: Option<PathBuf>,
}

enum Failure {
    Input(String),
    Internal(String),
}

type Outcome = Result<String, Failure>;

fn input<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Input(e.to_string())
}

fn load(path: &Path) -> Result<MarketModel, Failure> {
    let text = fs::read(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    parse_model(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn dump(path: &Option<PathBuf>, lps: &[(&str, &LinearProgram)]) -> Result<(), Failure> {
    let Some(path) = path else { return Ok(()) };
    let mut text = String::new();
    for (name, lp) in lps {
        text.push_str(&format!("# {name}\n"));
        text.push_str(&lp.to_text());
    }
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn validate(model: &Path, as_json: bool) -> Outcome {
    let text = fs::read(model).map_err(|e| Failure::Input(format!("{}: {e}", model.display())))?;
    let m = parse_model_unchecked(&text).map_err(input)?;
    let report = validate_model(&m);
    if as_json {
        let vs: Vec<Value> = report
            .violations
            .iter()
            .map(|v| json!({"node": v.node, "rule": v.rule, "detail": v.detail}))
            .collect();
        let out = to_pretty(&json!({"ok": report.ok, "violations": vs}));
        return if report.ok { Ok(out) } else { Err(Failure::Input(out)) };
    }
    if report.ok {
        Ok(format!(
            "ok: d = {}, T = {}, {} nodes\n",
            m.d,
            m.horizon(),
            m.tree.len()
        ))
    } else {
        Err(Failure::Input(report.summary()))
    }
}

fn report_text(r: &Report) -> String {
    let mut out = String::new();
    for e in &r.entries {
        let line = match &e.outcome {
            Ok(v) => {
                let mut s = if v.holds {
                    "holds".to_string()
                } else {
                    "fails".to_string()
                };
                if let Some(per_t) = v.per_t() {
                    let ts: Vec<&str> = per_t.iter().map(|&b| if b { "1" } else { "0" }).collect();
                    s.push_str(&format!("  (per t: {})", ts.join(" ")));
                }
                s
            }
            Err(why) => format!("unsupported: {why}"),
        };
        out.push_str(&format!("{:<10}{line}\n", e.code));
    }
    let failed: Vec<&str> = r.consistency.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    if failed.is_empty() {
        out.push_str(&format!("consistency: {} checks pass\n", r.consistency.len()));
    } else {
        out.push_str(&format!("consistency: violated {}\n", failed.join(", ")));
    }
    out
}

fn check(a: &CheckArgs) -> Outcome {
    let m = load(&a.model)?;
    let mut registry = Registry::standard();
    let mut codes: Vec<String> = if a.conditions.is_empty() {
        STANDARD_CODES.iter().map(|c| c.to_string()).collect()
    } else {
        a.conditions.iter().map(|c| c.trim().to_string()).collect()
    };
    if let Some(w) = &a.witness {
        registry.register(Box::new(Mixed { witness: load(w)? }));
        if a.conditions.is_empty() {
            codes.push("mixed".into());
        }
    }
    let codes: Vec<&str> = codes.iter().map(String::as_str).collect();
    let report = run(&m, &registry, &codes).map_err(|e| match e {
        VerdictError::Inconsistent(_) | VerdictError::Pricing(_) => Failure::Internal(e.to_string()),
        _ => Failure::Input(e.to_string()),
    })?;
    let na = na_lp(&m).0;
    let cps = cps_lp(&m).0;
    dump(&a.dump_lp, &[("no-arbitrage", &na), ("consistent prices", &cps)])?;
    if a.text {
        Ok(report_text(&report))
    } else {
        Ok(to_pretty(&report.to_json(&m, a.timings)))
    }
}

fn pricing_failure(e: PricingError) -> Failure {
    match e {
        PricingError::UnknownNode(_) | PricingError::BadAsset(_) | PricingError::BadClaim { .. } => input(e),
        PricingError::Cone(_) => input(e),
        _ => Failure::Internal(e.to_string()),
    }
}

fn parse_bound(m: &MarketModel, spec: &str) -> Result<(usize, usize), Failure> {
    let (node, asset) = spec
        .rsplit_once(':')
        .ok_or_else(|| Failure::Input(format!("bound {spec:?} is not NODE:ASSET")))?;
    let u = node_by_id(m, node).map_err(input)?;
    let i: usize = asset
        .parse()
        .map_err(|_| Failure::Input(format!("bad asset {asset:?}")))?;
    if i == 0 || i > m.d {
        return Err(Failure::Input(format!("asset {i} out of range 1..={}", m.d)));
    }
    Ok((u, i - 1))
}

fn cps(model: &Path, strict: bool, bounds: &[String], dump_lp: &Option<PathBuf>) -> Outcome {
    let m = load(model)?;
    let wanted = bounds
        .iter()
        .map(|b| parse_bound(&m, b))
        .collect::<Result<Vec<_>, _>>()?;
    let outcome = find_cps(&m, strict).map_err(pricing_failure)?;
    let mut out = serde_json::Map::new();
    out.insert("strict".into(), json!(strict));
    match &outcome {
        CpsOutcome::Found { ps, slack } => {
            out.insert("found".into(), json!(true));
            if let Some(s) = slack {
                out.insert("slack".into(), json!(s));
            }
            out.insert("price_system".into(), ps.to_json(&m));
            let mut bs = Vec::new();
            for (u, i) in wanted {
                let (lo, hi) = cps_uniqueness_bounds(&m, u, i).map_err(pricing_failure)?;
                bs.push(json!({"node": m.node_id(u), "asset": i + 1, "min": lo, "max": hi}));
            }
            if !bs.is_empty() {
                out.insert("bounds".into(), Value::Array(bs));
            }
        }
        CpsOutcome::Absent(cert) => {
            if !cert.verify() {
                return Err(Failure::Internal("certificate of absence fails re-verification".into()));
            }
            out.insert("found".into(), json!(false));
            out.insert("certificate".into(), cert.to_json());
        }
    }
    let plain = cps_lp(&m).0;
    if strict {
        let s = strict_cps_lp(&m).map_err(pricing_failure)?;
        dump(dump_lp, &[("consistent prices", &plain), ("strict slack", &s)])?;
    } else {
        dump(dump_lp, &[("consistent prices", &plain)])?;
    }
    Ok(to_pretty(&Value::Object(out)))
}

fn decompose(model: &Path, node: &str, order: &str) -> Outcome {
    let m = load(model)?;
    let u = node_by_id(&m, node).map_err(input)?;
    let triples: Vec<(usize, usize, Rational)> =
        serde_json::from_str(order).map_err(|e| Failure::Input(format!("order: {e}")))?;
    let o = order_from_triples(m.d, &triples).map_err(input)?;
    let dec = decompose_order(&m, u, &o).map_err(|e| match e {
        DecomposeError::Stalled(_) => Failure::Internal(e.to_string()),
        _ => input(e),
    })?;
    dec.verify(&m).map_err(Failure::Internal)?;
    Ok(to_pretty(&dec.to_json(&m)))
}

fn parse_claim(m: &MarketModel, text: &str) -> Result<Vec<Rational>, Failure> {
    let v: Value = serde_json::from_str(text).map_err(|e| Failure::Input(format!("claim: {e}")))?;
    let amounts = |x: &Value| -> Result<Vec<Rational>, Failure> {
        let w: Vec<Rational> = serde_json::from_value(x.clone()).map_err(|e| Failure::Input(format!("claim: {e}")))?;
        if w.len() != m.d {
            return Err(Failure::Input(format!(
                "claim: expected {} amounts, got {}",
                m.d,
                w.len()
            )));
        }
        Ok(w)
    };
    match &v {
        Value::Array(_) => Ok(constant_claim(m, &amounts(&v)?)),
        Value::Object(map) => {
            let mut per_leaf = vec![None; m.tree.num_leaves()];
            for (id, x) in map {
                let u = node_by_id(m, id).map_err(input)?;
                let pos = m
                    .tree
                    .leaf_position(u)
                    .ok_or_else(|| Failure::Input(format!("claim: {id:?} is not a leaf")))?;
                per_leaf[pos] = Some(amounts(x)?);
            }
            let per_leaf: Vec<Vec<Rational>> = per_leaf
                .into_iter()
                .enumerate()
                .map(|(pos, w)| {
                    w.ok_or_else(|| {
                        let id = m.node_id(m.tree.leaves()[pos]);
                        Failure::Input(format!("claim: no amounts for leaf {id:?}"))
                    })
                })
                .collect::<Result<_, _>>()?;
            Ok(claim_from_leaves(m, &per_leaf))
        }
        _ => Err(Failure::Input("claim must be a list or an object".into())),
    }
}

fn superhedge_cmd(model: &Path, claim: &str, numeraire: usize, dump_lp: &Option<PathBuf>) -> Outcome {
    let m = load(model)?;
    let v = parse_claim(&m, claim)?;
    if numeraire == 0 || numeraire > m.d {
        return Err(Failure::Input(format!(
            "numeraire {numeraire} out of range 1..={}",
            m.d
        )));
    }
    let s = superhedge(&m, &v, numeraire - 1).map_err(pricing_failure)?;
    if !s.verify(&m, &v) {
        return Err(Failure::Internal(
            "superhedging certificates fail re-verification".into(),
        ));
    }
    let mut lps = vec![("superhedging primal", &s.primal.0)];
    if let Some((lp, _)) = &s.dual {
        lps.push(("superhedging dual", lp));
    }
    dump(dump_lp, &lps)?;
    Ok(to_pretty(&s.to_json(&m)))
}

fn examples(name: &str, n_max: i64, witness: bool, prob_seed: Option<u64>, out: &Option<PathBuf>) -> Outcome {
    let mut m = match name {
        "ex41" => ex41(),
        "ex42" => ex42(),
        _ => {
            if n_max < 1 {
                return Err(Failure::Input("--n-max must be at least 1".into()));
            }
            ex43(n_max, witness, None)
        }
    };
    if let Some(seed) = prob_seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        m = m.with_leaf_prob(random_probabilities(&mut rng, m.tree.num_leaves()));
    }
    let text = serialize_model(&m);
    match out {
        Some(path) => {
            fs::write(path, &text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn suite(seed: u64, models: usize, efficient: bool, decompositions: usize) -> Outcome {
    let spec = RandomSpec {
        efficient_friction: efficient,
        ..RandomSpec::default()
    };
    let v = verdict_suite(seed, models, &spec);
    let d = decomposition_suite(seed, decompositions, &spec);
    let text = to_pretty(&json!({"seed": seed, "verdicts": v.to_json(), "decompositions": d.to_json()}));
    if v.violations.is_empty() && d.violations.is_empty() {
        Ok(text)
    } else {
        Err(Failure::Internal(text))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { model, json } => validate(model, *json),
        Command::Check(a) => check(a),
        Command::Cps {
            model,
            strict,
            bounds,
            dump_lp,
        } => cps(model, *strict, bounds, dump_lp),
        Command::Decompose { model, node, order } => decompose(model, node, order),
        Command::Superhedge {
            model,
            claim,
            numeraire,
            dump_lp,
        } => superhedge_cmd(model, claim, *numeraire, dump_lp),
        Command::Examples {
            name,
            n_max,
            witness,
            prob_seed,
            out,
        } => examples(name, *n_max, *witness, *prob_seed, out),
        Command::Suite {
            seed,
            models,
            efficient,
            decompositions,
        } => suite(*seed, *models, *efficient, *decompositions),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {}", msg.trim_end());
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal inconsistency: {}", msg.trim_end());
            ExitCode::from(3)
        }
    }
}
