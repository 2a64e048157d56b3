mod analysis;
mod charts;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use negotiate_core::agents::{act, AgentPolicy, TurnContext};
use negotiate_core::condition::Condition;
use negotiate_core::domain::Role;
use negotiate_core::exec::Parallelism;
use negotiate_core::frontier::{brute_force_oracle, compute_frontier, hausdorff_one_sided};
use negotiate_core::prompts::bundle;
use negotiate_core::protocol::{NegotiationState, Parties};
use negotiate_core::runner::config::schema_help;
use negotiate_core::runner::replay::replay_with_cap;
use negotiate_core::runner::store::{load_records, read_trial, run_experiment};
use negotiate_core::runner::{trial_seed, ExperimentConfig};
use negotiate_core::stub::StubBackend;
use negotiate_core::utility::{sample_profile, UtilityProfile};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "negotiate", version, about = "Bilateral car-purchase negotiation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) an experiment described by a config file.
    #[command(after_help = schema_help())]
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override master_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override n_trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Override condition (same syntax as the config key).
        #[arg(long)]
        condition: Option<String>,
    },
    /// Write analysis tables (and optionally charts) for a run directory.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        /// Defaults to <in>/analysis.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        charts: bool,
        /// Restrict the price-anchor fits to deals on this model.
        #[arg(long)]
        model: Option<String>,
    },
    /// Frontier and Nash bargaining solution for a pair of profiles.
    Frontier {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Also enumerate the grid oracle with this many steps per interval.
        #[arg(long)]
        oracle_grid: Option<usize>,
    },
    /// Re-derive stored trials and check them for divergence.
    Replay {
        /// A trial_<idx>.json file or a run directory.
        #[arg(long)]
        record: PathBuf,
        #[arg(long)]
        turn_cap: Option<usize>,
    },
    /// Show the prompts of one trial's opening turns.
    Prompts {
        #[arg(long, default_value = "symmetric_full")]
        condition: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Write the prompts as files into this directory instead of printing.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Summary tables and charts for a run directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Usage(anyhow::Error),
    Exec(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Exec(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}\n\n{}", schema_help());
            ExitCode::from(1)
        }
        Err(Failure::Exec(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config, out, seed, trials, condition } => run(&config, &out, seed, trials, condition),
        Command::Analyze { input, out, charts, model } => {
            let records = load_nonempty(&input)?;
            let out = out.unwrap_or_else(|| input.join("analysis"));
            let files = analysis::analyze(&records, &out, charts, model.as_deref())?;
            println!("{} records, {} files written to {}", records.len(), files.len(), out.display());
            Ok(())
        }
        Command::Frontier { profiles, svg, oracle_grid } => Ok(frontier(&profiles, svg.as_deref(), oracle_grid)?),
        Command::Replay { record, turn_cap } => Ok(replay(&record, turn_cap)?),
        Command::Prompts { condition, seed, trial, dump } => {
            let c: Condition = condition.parse().map_err(|e| Failure::Usage(anyhow!("{e}")))?;
            Ok(prompts(c, seed, trial, dump.as_deref())?)
        }
        Command::Report { input, out } => {
            let records = load_nonempty(&input)?;
            let files = analysis::report(&records, &out)?;
            println!("{} records, {} files written to {}", records.len(), files.len(), out.display());
            Ok(())
        }
    }
}

fn load_nonempty(dir: &Path) -> Result<Vec<negotiate_core::record::TrialRecord>> {
    let records = load_records(dir).with_context(|| format!("reading records under {}", dir.display()))?;
    if records.is_empty() {
        bail!("InsufficientData: no trial records under {}", dir.display());
    }
    Ok(records)
}

fn run(config: &Path, out: &Path, seed: Option<u64>, trials: Option<usize>, condition: Option<String>) -> Result<(), Failure> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg = ExperimentConfig::parse(&text).map_err(|e| Failure::Usage(e.into()))?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(n) = trials {
        cfg.n_trials = n;
    }
    if let Some(c) = condition {
        let patched = format!("schema_version = 1\ncondition = {c}\n");
        cfg.conditions = ExperimentConfig::parse(&patched).map_err(|e| Failure::Usage(e.into()))?.conditions;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.into()))?;
    let report = run_experiment(&cfg, out).map_err(|e| anyhow!(e))?;
    println!(
        "{} trials ({} resumed, {} backend failures) written to {}",
        report.records.len(),
        report.resumed,
        report.backend_failures,
        out.display()
    );
    for s in &report.summaries {
        println!(
            "{:<22} deals {}/{}  U_b {}  U_s {}",
            s.condition.as_str(),
            s.n_deals,
            s.n_trials,
            s.buyer_utility.mean.map_or("-".into(), |v| format!("{v:.3}")),
            s.seller_utility.mean.map_or("-".into(), |v| format!("{v:.3}")),
        );
    }
    Ok(())
}

fn profile_from(role: Role, v: &Value) -> Result<UtilityProfile> {
    let weights = match v {
        Value::Array(_) => v,
        Value::Object(m) => m.get("weights").ok_or_else(|| anyhow!("{} profile has no weights", role.as_str()))?,
        _ => bail!("{} profile must be a weight list or an object with weights", role.as_str()),
    };
    let w: Vec<f64> = serde_json::from_value(weights.clone()).context("weights must be numbers")?;
    Ok(UtilityProfile::from_slice(role, &w)?)
}

fn frontier(path: &Path, svg: Option<&Path>, oracle_grid: Option<usize>) -> Result<()> {
    let v: Value = serde_json::from_str(&fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)
        .context("profiles file is not JSON")?;
    let buyer = profile_from(Role::Buyer, v.get("buyer").ok_or_else(|| anyhow!("missing `buyer`"))?)?;
    let seller = profile_from(Role::Seller, v.get("seller").ok_or_else(|| anyhow!("missing `seller`"))?)?;
    let curve = compute_frontier(&buyer, &seller)?;
    let mut out = json!({
        "vertices": curve.vertices.iter().map(|x| json!({"buyer": x.point.buyer, "seller": x.point.seller, "contract": x.contract})).collect::<Vec<_>>(),
        "nbs": curve.nbs,
    });
    let mut reference = Vec::new();
    if let Some(g) = oracle_grid {
        if g < 2 {
            bail!("oracle grid needs at least 2 steps");
        }
        let oracle = brute_force_oracle(&buyer, &seller, g, Parallelism::Parallel)?;
        out["oracle"] = json!({
            "grid_steps": g,
            "contracts_evaluated": oracle.contracts_evaluated,
            "nbs": oracle.nbs,
            "hausdorff_oracle_to_frontier": hausdorff_one_sided(&oracle.frontier, &curve, Parallelism::Parallel),
        });
        reference = oracle.frontier.iter().map(|p| (p.buyer, p.seller)).collect();
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    if let Some(p) = svg {
        let line: Vec<(f64, f64)> = curve.polyline().iter().map(|p| (p.buyer, p.seller)).collect();
        let s = charts::frontier_chart("Pareto frontier and Nash bargaining solution", &line, (curve.nbs.point.buyer, curve.nbs.point.seller), &reference);
        fs::write(p, s).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn replay(path: &Path, turn_cap: Option<usize>) -> Result<()> {
    let records = if path.is_dir() { load_records(path)? } else { vec![read_trial(path)?] };
    if records.is_empty() {
        bail!("InsufficientData: no trial records under {}", path.display());
    }
    let mut diverged = 0;
    for r in &records {
        match replay_with_cap(r, turn_cap.unwrap_or(r.turn_cap)) {
            Ok(_) => {}
            Err(d) => {
                diverged += 1;
                eprintln!("{} trial {}: {d}", r.condition.as_str(), r.trial_index);
            }
        }
    }
    println!("{} records replayed, {} diverged", records.len(), diverged);
    if diverged > 0 {
        bail!("ReplayDivergence in {diverged} record(s)");
    }
    Ok(())
}

fn prompts(condition: Condition, seed: u64, trial: usize, dump: Option<&Path>) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, condition, trial));
    let buyer = sample_profile(Role::Buyer, &mut rng);
    let seller = sample_profile(Role::Seller, &mut rng);
    let parties = Parties::new(&buyer, &seller);
    let mut state = NegotiationState::new(negotiate_core::protocol::DEFAULT_TURN_CAP);
    let stub = StubBackend::new();
    let mut files: Vec<(String, String)> = Vec::new();
    for _ in 0..2 {
        let role = state.to_move();
        let (own, opp) = (parties.get(role), parties.get(role.opponent()));
        let b = bundle(&state, condition, own, opp);
        files.push((format!("{}_system.txt", role.as_str()), b.system_prompt));
        files.push((format!("{}_turn_{}.txt", role.as_str(), state.next_turn()), b.turn_prompt));
        let ctx = TurnContext { state: &state, condition, own, opponent: opp };
        let reply = act(&AgentPolicy::Llm, ctx, Some(&stub))?;
        state.apply_action(reply.into_turn_input(role), parties)?;
    }
    match dump {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for (name, text) in &files {
                fs::write(dir.join(name), text).with_context(|| format!("writing {name}"))?;
            }
            println!("{} prompt files written to {}", files.len(), dir.display());
        }
        None => {
            for (name, text) in &files {
                println!("===== {name} =====\n{text}");
            }
        }
    }
    Ok(())
}
