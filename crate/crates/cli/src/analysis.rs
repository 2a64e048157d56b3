//! Tables and charts computed from stored trial records.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use negotiate_core::condition::Condition;
use negotiate_core::domain::{Role, Term};
use negotiate_core::metrics::{
    accuracy_curve, alignment_summary, anchor_report, by_condition, categorical_conflict_report, condition_summary,
    coupling_report, first_proposed_price, ConditionSummary, Fit, Stat,
};
use negotiate_core::protocol::Outcome;
use negotiate_core::record::TrialRecord;
use negotiate_core::runner::store::{summary_csv, summary_row, SUMMARY_HEADER};

use crate::charts::{bar_chart, line_chart, scatter, Bar, ScatterPanel};

/// k used for the accuracy curves.
pub const ACCURACY_K: usize = 5;
pub const CURVE_BINS: usize = 10;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn write(out: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let p = out.join(name);
    fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
    written.push(p);
    Ok(())
}

pub fn summaries(records: &[TrialRecord]) -> Vec<ConditionSummary> {
    by_condition(records).into_iter().map(|(c, g)| condition_summary(c, &g)).collect()
}

fn fit_row(scope: &str, predictor: &str, f: Option<Fit>, n: usize) -> Vec<String> {
    vec![
        scope.into(),
        predictor.into(),
        f.map_or(n, |f| f.n).to_string(),
        opt(f.and_then(|f| f.pearson_r)),
        opt(f.and_then(|f| f.slope)),
    ]
}

fn anchor_rows(scope: &str, trials: &[&TrialRecord], model: Option<&str>) -> Vec<Vec<String>> {
    let deals = trials.iter().filter(|t| t.outcome.is_deal()).count();
    match anchor_report(trials, model) {
        Ok(r) => vec![
            fit_row(scope, "first_price", Some(r.first_price), deals),
            fit_row(scope, "buyer_price_weight", Some(r.buyer_weight), deals),
            fit_row(scope, "seller_price_weight", Some(r.seller_weight), deals),
        ],
        Err(_) => ["first_price", "buyer_price_weight", "seller_price_weight"]
            .iter()
            .map(|p| fit_row(scope, p, None, deals))
            .collect(),
    }
}

/// Writes every analysis CSV (and the charts when asked) into `out`.
pub fn analyze(records: &[TrialRecord], out: &Path, charts: bool, model: Option<&str>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    let groups = by_condition(records);

    write(out, "conditions.csv", &summary_csv(&summaries(records)), &mut written)?;

    let mut rows = Vec::new();
    for r in records {
        for t in &r.turns {
            let m = &t.metrics;
            rows.push(vec![
                r.condition.as_str().to_string(),
                r.trial_index.to_string(),
                t.turn.index.to_string(),
                t.turn.role.as_str().to_string(),
                format!("{:?}", t.turn.action.kind).to_uppercase(),
                opt(m.concession_c),
                opt(m.own_gain_g),
                opt(m.alignment_mean),
                m.mentioned_features.join(";"),
                if t.belief_status.is_ok() { "ok" } else { "unavailable" }.to_string(),
            ]);
        }
    }
    let header = [
        "condition",
        "trial_index",
        "turn_index",
        "role",
        "action",
        "concession_c",
        "own_gain_g",
        "alignment_mean",
        "mentioned_features",
        "belief_status",
    ];
    write(out, "turn_metrics.csv", &csv_text(&header, &rows)?, &mut written)?;

    let mut rows = Vec::new();
    for c in coupling_report(records) {
        for (group, st) in [("concession", c.with_concession), ("no_concession", c.without_concession)] {
            rows.push(vec![
                c.condition.as_str().into(),
                c.role.as_str().into(),
                group.into(),
                st.n.to_string(),
                opt(st.mean),
                opt(st.se),
            ]);
        }
    }
    write(out, "coupling.csv", &csv_text(&["condition", "role", "group", "n", "mean_own_gain", "se"], &rows)?, &mut written)?;

    let all: Vec<&TrialRecord> = records.iter().collect();
    let mut rows = anchor_rows("all", &all, model);
    for (c, g) in &groups {
        rows.extend(anchor_rows(c.as_str(), g, model));
    }
    write(out, "anchors.csv", &csv_text(&["scope", "predictor", "n", "pearson_r", "slope"], &rows)?, &mut written)?;

    let mut rows = Vec::new();
    let mut scopes: Vec<(String, Vec<&TrialRecord>)> = vec![("all".into(), all.clone())];
    scopes.extend(groups.iter().map(|(c, g)| (c.as_str().to_string(), g.clone())));
    for (scope, g) in &scopes {
        for r in categorical_conflict_report(g) {
            rows.push(vec![
                scope.clone(),
                r.term.name().into(),
                r.n.to_string(),
                r.buyer_wins.to_string(),
                r.seller_wins.to_string(),
                opt(r.buyer_win_rate),
                opt(r.price_buyer_won),
                opt(r.price_seller_won),
                opt(r.price_difference),
            ]);
        }
    }
    let header = [
        "scope",
        "term",
        "n_conflicts",
        "buyer_wins",
        "seller_wins",
        "buyer_win_rate",
        "mean_price_buyer_won",
        "mean_price_seller_won",
        "price_difference",
    ];
    write(out, "categorical_conflicts.csv", &csv_text(&header, &rows)?, &mut written)?;

    let mut rows = Vec::new();
    for (c, g) in &groups {
        for role in [Role::Buyer, Role::Seller] {
            for p in accuracy_curve(g, role, ACCURACY_K, CURVE_BINS) {
                rows.push(vec![
                    c.as_str().into(),
                    role.as_str().into(),
                    p.bin_start.to_string(),
                    p.bin_end.to_string(),
                    p.accuracy.n.to_string(),
                    opt(p.accuracy.mean),
                    opt(p.accuracy.se),
                ]);
            }
        }
    }
    let header = ["condition", "role", "bin_start", "bin_end", "n", "signed_accuracy", "se"];
    write(out, "accuracy_curves.csv", &csv_text(&header, &rows)?, &mut written)?;

    let mut rows = Vec::new();
    for (c, g) in &groups {
        for role in [Role::Buyer, Role::Seller] {
            let st = alignment_summary(g, role);
            rows.push(vec![c.as_str().into(), role.as_str().into(), st.n.to_string(), opt(st.mean), opt(st.se)]);
        }
    }
    write(out, "alignment.csv", &csv_text(&["condition", "role", "n_turns", "mean_alignment", "se"], &rows)?, &mut written)?;

    if charts {
        written.extend(write_charts(records, out)?);
    }
    Ok(written)
}

fn bar(st: &Stat) -> Bar {
    st.mean.map(|m| (m, st.se))
}

/// The seven figure layouts as SVG files.
pub fn write_charts(records: &[TrialRecord], out: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let groups = by_condition(records);
    let conds: Vec<Condition> = groups.keys().copied().collect();
    let names: Vec<String> = conds.iter().map(|c| c.as_str().to_string()).collect();
    let sums = summaries(records);

    let svg = bar_chart(
        "Normalized utility by condition (mean, SE)",
        "normalized utility",
        &names,
        &[
            ("buyer".into(), sums.iter().map(|s| bar(&s.buyer_utility)).collect()),
            ("seller".into(), sums.iter().map(|s| bar(&s.seller_utility)).collect()),
        ],
    );
    write(out, "fig_utilities.svg", &svg, &mut written)?;

    let mut panel = ScatterPanel {
        title: "Agreed deals".into(),
        xlabel: "buyer normalized utility".into(),
        ylabel: "seller normalized utility".into(),
        groups: Vec::new(),
        markers: Vec::new(),
        fixed_range: Some(((0.0, 1.0), (0.0, 1.0))),
    };
    for (i, (c, g)) in groups.iter().enumerate() {
        let pts: Vec<(f64, f64)> = g
            .iter()
            .filter_map(|t| match t.outcome {
                Outcome::Deal { buyer_utility, seller_utility, .. } => Some((buyer_utility, seller_utility)),
                Outcome::NoDeal { .. } => None,
            })
            .collect();
        if let (Some(b), Some(s)) = (sums[i].buyer_utility.mean, sums[i].seller_utility.mean) {
            panel.markers.push((i, (b, s)));
        }
        panel.groups.push((c.as_str().to_string(), pts));
    }
    write(out, "fig_outcomes.svg", &scatter("Deal outcomes with condition means", &[panel]), &mut written)?;

    let mut panels: Vec<ScatterPanel> = ["first proposed price ($k)", "buyer price weight", "seller price weight"]
        .iter()
        .map(|x| ScatterPanel {
            title: x.to_string(),
            xlabel: x.to_string(),
            ylabel: "final price ($k)".into(),
            groups: Vec::new(),
            markers: Vec::new(),
            fixed_range: None,
        })
        .collect();
    for (c, g) in &groups {
        let mut cols: [Vec<(f64, f64)>; 3] = Default::default();
        for t in g {
            let Some(contract) = t.outcome.contract() else { continue };
            let y = contract.price();
            if let Some(fp) = first_proposed_price(t) {
                cols[0].push((fp, y));
            }
            cols[1].push((t.buyer.weights[Term::Price.index()].abs(), y));
            cols[2].push((t.seller.weights[Term::Price.index()].abs(), y));
        }
        for (p, col) in panels.iter_mut().zip(cols) {
            p.groups.push((c.as_str().to_string(), col));
        }
    }
    write(out, "fig_price_anchors.svg", &scatter("Final price against anchors and price weights", &panels), &mut written)?;

    for role in [Role::Buyer, Role::Seller] {
        let mut x = Vec::new();
        let mut series = Vec::new();
        for (c, g) in &groups {
            let curve = accuracy_curve(g, role, ACCURACY_K, CURVE_BINS);
            x = curve.iter().map(|p| (p.bin_start + p.bin_end) / 2.0).collect();
            series.push((c.as_str().to_string(), curve.iter().map(|p| p.accuracy.mean).collect()));
        }
        let svg = line_chart(
            &format!("Cumulative signed accuracy@{ACCURACY_K} of {} beliefs", role.as_str()),
            "turn fraction",
            "signed accuracy",
            &x,
            &series,
            (0.0, 1.0),
        );
        write(out, &format!("fig_accuracy_{}.svg", role.as_str()), &svg, &mut written)?;
    }

    let svg = bar_chart(
        "Belief-offer alignment (mean, SE)",
        "alignment",
        &names,
        &[
            ("buyer".into(), groups.values().map(|g| bar(&alignment_summary(g, Role::Buyer))).collect()),
            ("seller".into(), groups.values().map(|g| bar(&alignment_summary(g, Role::Seller))).collect()),
        ],
    );
    write(out, "fig_alignment.svg", &svg, &mut written)?;

    let coupling = coupling_report(records);
    let cats: Vec<String> = coupling.iter().map(|r| format!("{} {}", r.condition.as_str(), r.role.as_str())).collect();
    let svg = bar_chart(
        "Own gain on concession vs non-concession turns (mean, SE)",
        "own gain",
        &cats,
        &[
            ("c > 0".into(), coupling.iter().map(|r| bar(&r.with_concession)).collect()),
            ("c = 0".into(), coupling.iter().map(|r| bar(&r.without_concession)).collect()),
        ],
    );
    write(out, "fig_coupling.svg", &svg, &mut written)?;

    let svg = bar_chart(
        "Distance to Pareto frontier and to NBS (mean, SE)",
        "distance",
        &names,
        &[
            ("d_pareto".into(), sums.iter().map(|s| bar(&s.d_pareto)).collect()),
            ("d_nbs".into(), sums.iter().map(|s| bar(&s.d_nbs)).collect()),
        ],
    );
    write(out, "fig_efficiency.svg", &svg, &mut written)?;
    Ok(written)
}

fn cell(st: &Stat) -> String {
    match (st.mean, st.se) {
        (Some(m), Some(se)) => format!("{m:.3} ({se:.3})"),
        (Some(m), None) => format!("{m:.3}"),
        _ => "-".into(),
    }
}

/// Markdown summary plus the charts.
pub fn report(records: &[TrialRecord], out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    let sums = summaries(records);
    let mut md = String::from("# Negotiation outcomes\n\n");
    md.push_str("Utilities and distances are in normalized utility space, averaged over agreed deals; standard errors in parentheses.\n\n");
    md.push_str("| Condition | Trials | U_b (SE) | U_s (SE) | Welfare (SE) | d_pareto (SE) | d_nbs (SE) | No-deal |\n");
    md.push_str("|---|---|---|---|---|---|---|---|\n");
    for s in &sums {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            s.condition.as_str(),
            s.n_trials,
            cell(&s.buyer_utility),
            cell(&s.seller_utility),
            cell(&s.welfare),
            cell(&s.d_pareto),
            cell(&s.d_nbs),
            s.no_deal_rate().map_or("-".into(), |r| format!("{:.0}%", r * 100.0)),
        );
    }
    md.push_str("\n## Coupling of concessions and own gain\n\n| Condition | Role | g when c > 0 | n | g when c = 0 | n |\n|---|---|---|---|---|---|\n");
    for r in coupling_report(records) {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} |",
            r.condition.as_str(),
            r.role.as_str(),
            cell(&r.with_concession),
            r.with_concession.n,
            cell(&r.without_concession),
            r.without_concession.n
        );
    }
    md.push_str("\n## Charts\n\n");
    let charts = write_charts(records, out)?;
    for p in &charts {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let _ = writeln!(md, "- [{name}]({name})");
    }
    write(out, "report.md", &md, &mut written)?;
    let mut rows = Vec::new();
    for s in &sums {
        rows.push(summary_row(s));
    }
    write(out, "conditions.csv", &csv_text(&SUMMARY_HEADER, &rows)?, &mut written)?;
    written.extend(charts);
    Ok(written)
}
