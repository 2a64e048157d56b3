//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero if
//! any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use negotiate_core::beliefs::alignment_score;
use negotiate_core::condition::Condition;
use negotiate_core::domain::{encode, Component, Contract, FeatureVector, Role, DIM};
use negotiate_core::exec::Parallelism;
use negotiate_core::frontier::{brute_force_oracle, compute_frontier, hausdorff_one_sided};
use negotiate_core::metrics::{concession, own_gain};
use negotiate_core::protocol::Outcome;
use negotiate_core::runner::replay::replay;
use negotiate_core::runner::run_trial;
use negotiate_core::runner::store::{record_hash, run_experiment};
use negotiate_core::utility::{best_contract, normalized_utility, sample_profile, worst_contract, UtilityProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn encoding_fidelity() -> Check {
    let start = Instant::now();
    for (p, want) in [(20.0, 0.0), (45.0, 1.0), (32.5, 0.5)] {
        let c = Contract { continuous: [p, 10.0, 20.0, 7.0], choices: [0; 5], accessories: false };
        let f = encode(&c, Role::Buyer).map_err(|e| e.to_string())?;
        ensure((f.0[0] - want).abs() <= 1e-12, format!("price {p} -> {}", f.0[0]))?;
        ensure((f.0[0] - (p - 20.0) / (45.0 - 20.0)).abs() <= 1e-12, "formula mismatch")?;
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("3 price points exact, {:.2?}", start.elapsed()))
}

fn profile_laws() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_err: f64 = 0.0;
    for role in [Role::Buyer, Role::Seller] {
        for i in 0..10_000 {
            let p = sample_profile(role, &mut rng);
            ensure((p.l1_norm() - 1.0).abs() <= 1e-9, format!("{role:?} #{i}: norm {}", p.l1_norm()))?;
            ensure(p.sign_constraints_hold(), format!("{role:?} #{i}: sign table violated"))?;
            let w = normalized_utility(&p, &worst_contract(&p)).map_err(|e| e.to_string())?;
            let b = normalized_utility(&p, &best_contract(&p)).map_err(|e| e.to_string())?;
            ensure(w.abs() <= 1e-9 && (b - 1.0).abs() <= 1e-9, format!("{role:?} #{i}: worst {w} best {b}"))?;
            worst_err = worst_err.max(w.abs()).max((b - 1.0).abs());
        }
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("20000 profiles, max endpoint error {worst_err:.1e}, {:.2?}", start.elapsed()))
}

fn frontier_oracle() -> Check {
    let start = Instant::now();
    let mut worst_h: f64 = 0.0;
    let mut worst_gap = f64::NEG_INFINITY;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = sample_profile(Role::Buyer, &mut rng);
        let s = sample_profile(Role::Seller, &mut rng);
        let curve = compute_frontier(&b, &s).map_err(|e| e.to_string())?;
        let oracle = brute_force_oracle(&b, &s, 21, Parallelism::Parallel).map_err(|e| e.to_string())?;
        let h = hausdorff_one_sided(&oracle.frontier, &curve, Parallelism::Parallel);
        let gap = oracle.nbs.product() - curve.nbs.product;
        ensure(curve.nbs.product >= oracle.nbs.product() - 1e-3, format!("seed {seed}: NBS product short by {gap}"))?;
        ensure(h <= 0.02, format!("seed {seed}: Hausdorff {h}"))?;
        worst_h = worst_h.max(h);
        worst_gap = worst_gap.max(gap);
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("50 pairs, max Hausdorff {worst_h:.2e}, max oracle-solver product gap {worst_gap:.1e}, {:.2?}", start.elapsed()))
}

fn analytic_nbs() -> Check {
    let (b, s) = (common::price_only(Role::Buyer), common::price_only(Role::Seller));
    let curve = compute_frontier(&b, &s).map_err(|e| e.to_string())?;
    let (gp, _, _) = common::price_only_nbs_by_grid(100_000);
    let n = &curve.nbs;
    ensure((gp - 35.0).abs() < 1e-3, format!("grid oracle argmax {gp}"))?;
    ensure((n.contract.price() - 35.0).abs() <= 1e-6, format!("price {}", n.contract.price()))?;
    ensure((n.point.buyer - 0.4).abs() <= 1e-6 && (n.point.seller - 1.0 / 3.0).abs() <= 1e-6, format!("{:?}", n.point))?;
    Ok(format!("price {:.9}, point ({:.9}, {:.9})", n.contract.price(), n.point.buyer, n.point.seller))
}

fn fv(pairs: &[(usize, f64)]) -> FeatureVector {
    let mut f = FeatureVector::zeros();
    for (i, v) in pairs {
        f.0[*i] = *v;
    }
    f
}

fn metric_formulas() -> Check {
    let price = Component::from_index(0);
    let delivery = Component::from_index(1);
    let prev = fv(&[(0, 0.5), (1, 0.5)]);
    let cases = [
        (concession(&[(price, -1)], &prev, &fv(&[(0, 0.4), (1, 0.5)])), 0.1),
        (concession(&[(price, -1)], &prev, &fv(&[(0, 0.6), (1, 0.5)])), 0.0),
        (concession(&[(price, -1), (delivery, -1)], &prev, &fv(&[(0, 0.4), (1, 0.6)])), 0.1),
    ];
    let mut w = [0.0; DIM];
    w[1] = 0.4;
    w[2] = -0.35;
    w[3] = 0.25;
    let p = UtilityProfile::from_weights(Role::Seller, w);
    let zero = FeatureVector::zeros();
    let gains = [
        (own_gain(&p, &zero, &fv(&[(1, 0.2), (2, 0.1)]), 3), 0.1 / 3.0),
        (own_gain(&p, &prev, &prev, 3), 0.0),
        (own_gain(&p, &fv(&[(2, 1.0)]), &fv(&[(1, 1.0), (3, 1.0)]), 3), 1.0),
    ];
    for (i, (got, want)) in cases.iter().chain(&gains).enumerate() {
        ensure((got - want).abs() <= 1e-12, format!("case {i}: {got} vs {want}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let d: i8 = if rng.random::<bool>() { 1 } else { -1 };
        let v: f64 = rng.random();
        ensure((alignment_score(d, v) + alignment_score(-d, v)).abs() < 1e-15, "antisymmetry")?;
    }
    Ok("6 hand cases within 1e-12, 1000 antisymmetry pairs".into())
}

fn protocol_soundness() -> Check {
    let start = Instant::now();
    let mut deals = 0;
    let mut turns = 0;
    for (k, exps) in [(1.0, 1.0), (4.0, 4.0), (0.5, 0.5), (4.0, 0.5)].iter().enumerate() {
        let text = format!(
            "schema_version = 1\ncondition = symmetric_none\nbuyer_agent = conceder\nseller_agent = conceder\n\
             buyer_exponent = {}\nseller_exponent = {}\nmaster_seed = {}\n",
            exps.0, exps.1, 100 + k
        );
        let config = negotiate_core::runner::ExperimentConfig::parse(&text).map_err(|e| e.to_string())?;
        for i in 0..250 {
            let r = run_trial(&config, Condition::SymmetricNone, i, None).map_err(|e| e.to_string())?;
            if let Outcome::Deal { contract, .. } = &r.outcome {
                let ub = normalized_utility(&r.buyer, contract).map_err(|e| e.to_string())?;
                let us = normalized_utility(&r.seller, contract).map_err(|e| e.to_string())?;
                ensure(ub > 0.0 && us > 0.0, format!("trial {i}: deal at ({ub}, {us})"))?;
                deals += 1;
            }
            for (j, t) in r.turns.iter().enumerate() {
                ensure(t.turn.index == j + 1 && t.turn.role == Role::for_turn(j + 1), format!("trial {i}: turn order"))?;
            }
            turns += r.turns.len();
            replay(&r).map_err(|e| format!("trial {i}: {e}"))?;
        }
    }
    Ok(format!("1000 trials, {deals} deals, {turns} turns, 0 violations, 0 replay divergences, {:.2?}", start.elapsed()))
}

fn determinism() -> Check {
    let config = common::scripted_config(100, 77);
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ra = run_experiment(&config, a.path()).map_err(|e| e.to_string())?;
    let rb = run_experiment(&config, b.path()).map_err(|e| e.to_string())?;
    let sa = fs::read(a.path().join("summary.csv")).map_err(|e| e.to_string())?;
    let sb = fs::read(b.path().join("summary.csv")).map_err(|e| e.to_string())?;
    ensure(sa == sb, "summary CSVs differ")?;
    ensure(ra.records.len() == 100, "record count")?;
    for (x, y) in ra.records.iter().zip(&rb.records) {
        ensure(record_hash(x) == record_hash(y), format!("trial {} hash differs", x.trial_index))?;
    }
    Ok(format!("100 trials, summary {} bytes identical, 100 hashes identical", sa.len()))
}

fn prompt_fidelity() -> Check {
    let re = Regex::new(r"(^|[^\d.])0\.\d+").map_err(|e| e.to_string())?;
    let texts = common::golden_texts();
    for (name, text) in &texts {
        let want = fs::read_to_string(common::golden_dir().join(name)).map_err(|e| format!("{name}: {e}"))?;
        ensure(&want == text, format!("{name} differs from golden file"))?;
        ensure(!re.is_match(text), format!("{name}: numeric value in prompt"))?;
    }
    Ok(format!("{} golden files byte-equal, regex audit clean", texts.len()))
}

fn scripted_convergence() -> Check {
    let config = common::scripted_config(100, 2025);
    let mut longest = 0;
    for i in 0..100 {
        let r = run_trial(&config, Condition::SymmetricNone, i, None).map_err(|e| e.to_string())?;
        ensure(r.outcome.is_deal() && r.turns.len() < 40, format!("trial {i}: {:?} after {} turns", r.outcome, r.turns.len()))?;
        longest = longest.max(r.turns.len());
    }
    Ok(format!("100/100 deals, longest {longest} turns"))
}

const REPORT_ARTIFACTS: &[&str] = &[
    "report.md",
    "conditions.csv",
    "fig_utilities.svg",
    "fig_outcomes.svg",
    "fig_price_anchors.svg",
    "fig_accuracy_buyer.svg",
    "fig_accuracy_seller.svg",
    "fig_alignment.svg",
    "fig_coupling.svg",
    "fig_efficiency.svg",
];

const ANALYSIS_ARTIFACTS: &[&str] = &[
    "conditions.csv",
    "turn_metrics.csv",
    "coupling.csv",
    "anchors.csv",
    "categorical_conflicts.csv",
    "accuracy_curves.csv",
    "alignment.csv",
];

fn stub_end_to_end() -> Check {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = tmp.path().join("config.txt");
    fs::write(&cfg, "schema_version = 1\nendpoint_url = stub\nmodel_name = stub\ncondition = all\nn_trials = 10\n")
        .map_err(|e| e.to_string())?;
    let run = tmp.path().join("run");
    let report = tmp.path().join("report");
    let bin = env!("CARGO_BIN_EXE_negotiate");
    let p = |x: &Path| x.display().to_string();
    let steps: [Vec<String>; 3] = [
        vec!["run".into(), "--config".into(), p(&cfg), "--out".into(), p(&run)],
        vec!["analyze".into(), "--in".into(), p(&run), "--charts".into()],
        vec!["report".into(), "--in".into(), p(&run), "--out".into(), p(&report)],
    ];
    for args in &steps {
        let o = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        ensure(o.status.success(), format!("{} failed: {}", args[0], String::from_utf8_lossy(&o.stderr)))?;
    }
    for c in Condition::ALL {
        let n = fs::read_dir(run.join(c.as_str()).join("trials")).map_err(|e| e.to_string())?.count();
        ensure(n == 20, format!("{}: {n} trial files", c.as_str()))?;
    }
    for a in REPORT_ARTIFACTS {
        ensure(report.join(a).exists(), format!("missing report/{a}"))?;
    }
    for a in ANALYSIS_ARTIFACTS {
        ensure(run.join("analysis").join(a).exists(), format!("missing analysis/{a}"))?;
    }
    let summary = fs::read_to_string(run.join("summary.csv")).map_err(|e| e.to_string())?;
    ensure(summary.lines().count() == 9, "summary should have 8 condition rows")?;
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!(
        "8 conditions x 10 trials, {} report + {} analysis artifacts, {:.2?}; published LLM numbers are not reproduced offline, only their table and figure schemas",
        REPORT_ARTIFACTS.len(),
        ANALYSIS_ARTIFACTS.len(),
        start.elapsed()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("encoding fidelity", encoding_fidelity),
        ("profile laws", profile_laws),
        ("frontier-oracle equivalence", frontier_oracle),
        ("analytic NBS", analytic_nbs),
        ("metric formulas", metric_formulas),
        ("protocol soundness", protocol_soundness),
        ("determinism", determinism),
        ("prompt fidelity", prompt_fidelity),
        ("scripted convergence", scripted_convergence),
        ("stub end-to-end report", stub_end_to_end),
    ];
    // `cargo test -- --list` and filters are not meaningful here
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
