//! On-disk layout of a run directory:
//!
//! ```text
//! <out>/manifest.json
//! <out>/summary.csv
//! <out>/trials/trial_<idx>.jsonl    one turn per line
//! <out>/trials/trial_<idx>.json     everything else about the trial
//! ```
//!
//! Runs over several conditions put one such directory per condition under
//! `<out>/<condition>/` and add a combined manifest and summary at `<out>`.
//! The `.json` file is written last, so its presence marks a finished
//! trial; resumed runs skip those indices.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{is_backend_failure, make_backend, run_trial, ExperimentConfig, RunError, SEED_ALGORITHM};
use crate::backend::ChatBackend;
use crate::condition::Condition;
use crate::exec::{map_range, with_pool, Parallelism};
use crate::metrics::{condition_summary, ConditionSummary, Stat};
use crate::record::{TrialRecord, TurnRecord};

pub const TOOL_NAME: &str = "negotiate";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.display().to_string(), source }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn trial_paths(dir: &Path, index: usize) -> (PathBuf, PathBuf) {
    let t = dir.join("trials");
    (t.join(format!("trial_{index}.jsonl")), t.join(format!("trial_{index}.json")))
}

fn turn_lines(record: &TrialRecord) -> String {
    let mut s = String::new();
    for t in &record.turns {
        s.push_str(&serde_json::to_string(t).expect("turn serializes"));
        s.push('\n');
    }
    s
}

fn header(record: &TrialRecord) -> Value {
    let mut v = serde_json::to_value(record).expect("record serializes");
    if let Value::Object(m) = &mut v {
        m.remove("turns");
        m.insert("n_turns".into(), json!(record.turns.len()));
    }
    v
}

/// SHA-256 of the record's canonical JSON.
pub fn record_hash(record: &TrialRecord) -> String {
    let bytes = serde_json::to_vec(record).expect("record serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_trial(dir: &Path, record: &TrialRecord) -> Result<(), RunError> {
    let (jsonl, json_path) = trial_paths(dir, record.trial_index);
    let parent = jsonl.parent().expect("trials dir");
    fs::create_dir_all(parent).map_err(io_err(parent))?;
    write_atomic(&jsonl, turn_lines(record).as_bytes())?;
    let mut text = serde_json::to_string_pretty(&header(record)).expect("header serializes");
    text.push('\n');
    write_atomic(&json_path, text.as_bytes())
}

pub fn read_trial(json_path: &Path) -> Result<TrialRecord, RunError> {
    let bad = |message: String| RunError::Record { path: json_path.display().to_string(), message };
    let text = fs::read_to_string(json_path).map_err(io_err(json_path))?;
    let mut v: Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let jsonl = json_path.with_extension("jsonl");
    let lines = fs::read_to_string(&jsonl).map_err(io_err(&jsonl))?;
    let mut turns = Vec::new();
    for line in lines.lines().filter(|l| !l.trim().is_empty()) {
        let t: TurnRecord = serde_json::from_str(line).map_err(|e| bad(format!("turn line: {e}")))?;
        turns.push(serde_json::to_value(t).expect("turn serializes"));
    }
    let m = v.as_object_mut().ok_or_else(|| bad("not an object".into()))?;
    let expected = m.remove("n_turns").and_then(|n| n.as_u64());
    if expected.is_some_and(|n| n as usize != turns.len()) {
        return Err(bad(format!("expected {} turns, found {}", expected.unwrap_or(0), turns.len())));
    }
    m.insert("turns".into(), Value::Array(turns));
    serde_json::from_value(v).map_err(|e| bad(e.to_string()))
}

/// Every finished trial record under `root`, searched recursively, sorted
/// by (condition, trial index).
pub fn load_records(root: &Path) -> Result<Vec<TrialRecord>, RunError> {
    let mut files = Vec::new();
    collect_trial_files(root, &mut files)?;
    let mut out = files.iter().map(|p| read_trial(p)).collect::<Result<Vec<_>, _>>()?;
    out.sort_by_key(|r| (r.condition, r.trial_index));
    out.dedup_by_key(|r| (r.condition, r.trial_index));
    Ok(out)
}

fn collect_trial_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), RunError> {
    if !dir.is_dir() {
        return Ok(());
    }
    let mut entries: Vec<PathBuf> =
        fs::read_dir(dir).map_err(io_err(dir))?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_trial_files(&p, out)?;
        } else if p.extension().is_some_and(|e| e == "json")
            && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("trial_"))
        {
            out.push(p);
        }
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const SUMMARY_HEADER: [&str; 15] = [
    "condition",
    "n_trials",
    "n_deals",
    "deal_rate",
    "no_deal_rate",
    "buyer_utility_mean",
    "buyer_utility_se",
    "seller_utility_mean",
    "seller_utility_se",
    "welfare_mean",
    "welfare_se",
    "d_pareto_mean",
    "d_pareto_se",
    "d_nbs_mean",
    "d_nbs_se",
];

pub fn summary_row(s: &ConditionSummary) -> Vec<String> {
    let pair = |st: &Stat| [fmt_opt(st.mean), fmt_opt(st.se)];
    let mut row = vec![
        s.condition.as_str().to_string(),
        s.n_trials.to_string(),
        s.n_deals.to_string(),
        fmt_opt(s.deal_rate.mean),
        fmt_opt(s.no_deal_rate()),
    ];
    for st in [&s.buyer_utility, &s.seller_utility, &s.welfare, &s.d_pareto, &s.d_nbs] {
        row.extend(pair(st));
    }
    row
}

pub fn summary_csv(summaries: &[ConditionSummary]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER).expect("in-memory write");
    for s in summaries {
        w.write_record(summary_row(s)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// Config as stored in manifests: endpoint URLs other than the stub are
/// not persisted.
fn manifest_config(config: &ExperimentConfig) -> Value {
    let mut c = config.clone();
    if !c.uses_stub() {
        c.llm.endpoint_url = "<redacted>".into();
    }
    serde_json::to_value(&c).expect("config serializes")
}

fn manifest(config: &ExperimentConfig, records: &[&TrialRecord]) -> Value {
    let trials: Vec<Value> = records
        .iter()
        .map(|r| {
            json!({
                "condition": r.condition,
                "trial_index": r.trial_index,
                "seed": r.seed,
                "record_sha256": record_hash(r),
            })
        })
        .collect();
    json!({
        "tool": TOOL_NAME,
        "tool_version": TOOL_VERSION,
        "record_schema_version": crate::record::RECORD_SCHEMA_VERSION,
        "extractor_prompt_version": crate::beliefs::EXTRACTOR_VERSION,
        "seed_algorithm": SEED_ALGORITHM,
        "config": manifest_config(config),
        "trials": trials,
    })
}

fn write_outputs(dir: &Path, config: &ExperimentConfig, records: &[&TrialRecord]) -> Result<Vec<ConditionSummary>, RunError> {
    let mut summaries = Vec::new();
    for c in &config.conditions {
        let group: Vec<&TrialRecord> = records.iter().copied().filter(|r| r.condition == *c).collect();
        if !group.is_empty() {
            summaries.push(condition_summary(*c, &group));
        }
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_atomic(&dir.join("summary.csv"), summary_csv(&summaries).as_bytes())?;
    let mut m = serde_json::to_string_pretty(&manifest(config, records)).expect("manifest serializes");
    m.push('\n');
    write_atomic(&dir.join("manifest.json"), m.as_bytes())?;
    Ok(summaries)
}

pub fn condition_dir(out: &Path, config: &ExperimentConfig, condition: Condition) -> PathBuf {
    if config.conditions.len() == 1 {
        out.to_path_buf()
    } else {
        out.join(condition.as_str())
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub summaries: Vec<ConditionSummary>,
    pub records: Vec<TrialRecord>,
    /// Trials loaded from an earlier run instead of being played.
    pub resumed: usize,
    pub backend_failures: usize,
}

/// Runs (or resumes) every configured condition into `out`.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<RunReport, RunError> {
    config.validate()?;
    let backend = make_backend(config);
    run_experiment_with(config, out, backend.as_deref())
}

pub fn run_experiment_with(
    config: &ExperimentConfig,
    out: &Path,
    chat: Option<&dyn ChatBackend>,
) -> Result<RunReport, RunError> {
    let par = if config.concurrency > 1 { Parallelism::Parallel } else { Parallelism::Sequential };
    let mut all = Vec::new();
    let mut resumed = 0;
    for &condition in &config.conditions {
        let dir = condition_dir(out, config, condition);
        let results = with_pool(config.concurrency, || {
            map_range(par, config.n_trials, |i| -> Result<(TrialRecord, bool), RunError> {
                let (_, json_path) = trial_paths(&dir, i);
                if json_path.exists() {
                    let r = read_trial(&json_path)?;
                    if r.condition == condition {
                        return Ok((r, true));
                    }
                }
                let r = run_trial(config, condition, i, chat)?;
                write_trial(&dir, &r)?;
                Ok((r, false))
            })
        });
        let mut records = Vec::with_capacity(results.len());
        for r in results {
            let (rec, was_resumed) = r?;
            resumed += usize::from(was_resumed);
            records.push(rec);
        }
        if config.conditions.len() > 1 {
            let sub = ExperimentConfig { conditions: vec![condition], ..config.clone() };
            write_outputs(&dir, &sub, &records.iter().collect::<Vec<_>>())?;
        }
        all.extend(records);
    }
    let refs: Vec<&TrialRecord> = all.iter().collect();
    let summaries = write_outputs(out, config, &refs)?;
    let backend_failures = all.iter().filter(|r| is_backend_failure(r)).count();
    if backend_failures * 2 > all.len() {
        return Err(RunError::TooManyBackendFailures { failed: backend_failures, total: all.len() });
    }
    Ok(RunReport { summaries, records: all, resumed, backend_failures })
}
