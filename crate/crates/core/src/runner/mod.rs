//! Experiment orchestration: seeding, trial execution, persistence,
//! resume and replay.

pub mod config;
pub mod replay;
pub mod store;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::agents::{act, TurnContext};
use crate::backend::{ChatBackend, HttpBackend};
use crate::beliefs::{extract_beliefs, Belief};
use crate::condition::Condition;
use crate::domain::Role;
use crate::frontier::{compute_frontier, efficiency_distances, FrontierError};
use crate::metrics::turn_metrics;
use crate::protocol::{NegotiationState, NoDealReason, Outcome, Parties, ProtocolError};
use crate::record::{BeliefStatus, TrialRecord, TurnRecord, RECORD_SCHEMA_VERSION};
use crate::stub::StubBackend;
use crate::utility::sample_profile;

pub use self::config::{ConfigError, ExperimentConfig};

/// Seed derivation, recorded in every manifest.
pub const SEED_ALGORITHM: &str = "condition_seed = splitmix64(master_seed + 0x9E3779B97F4A7C15 * (condition_ordinal + 1)); \
trial_seed = splitmix64(condition_seed XOR splitmix64(trial_index)); profiles drawn from ChaCha8Rng::seed_from_u64(trial_seed), buyer first";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-condition base seed. Conditions draw independent profiles.
pub fn condition_seed(master_seed: u64, condition: Condition) -> u64 {
    let ordinal = Condition::ALL.iter().position(|c| *c == condition).expect("listed") as u64;
    splitmix64(master_seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(ordinal + 1)))
}

/// Distinct for distinct indices under one condition seed.
pub fn trial_seed(master_seed: u64, condition: Condition, trial_index: usize) -> u64 {
    splitmix64(condition_seed(master_seed, condition) ^ splitmix64(trial_index as u64))
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Frontier(#[from] FrontierError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("io error at {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed record {path}: {message}")]
    Record { path: String, message: String },
    #[error("{failed} of {total} trials ended in backend failure")]
    TooManyBackendFailures { failed: usize, total: usize },
}

/// Chat backend for a config: the offline stub for `endpoint_url = stub`,
/// otherwise the HTTP client with the key from the environment.
pub fn make_backend(config: &ExperimentConfig) -> Option<Box<dyn ChatBackend>> {
    if !config.needs_chat() {
        return None;
    }
    if config.uses_stub() {
        Some(Box::new(StubBackend { turn_cap: Some(config.turn_cap) }))
    } else {
        Some(Box::new(HttpBackend::from_env(config.llm.clone())))
    }
}

/// Plays one negotiation and scores it.
pub fn run_trial(
    config: &ExperimentConfig,
    condition: Condition,
    trial_index: usize,
    chat: Option<&dyn ChatBackend>,
) -> Result<TrialRecord, RunError> {
    let seed = trial_seed(config.master_seed, condition, trial_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let buyer = sample_profile(Role::Buyer, &mut rng);
    let seller = sample_profile(Role::Seller, &mut rng);
    let parties = Parties::new(&buyer, &seller);
    let curve = compute_frontier(&buyer, &seller)?;

    let mut state = NegotiationState::new(config.turn_cap);
    let mut beliefs: Vec<(Vec<Belief>, BeliefStatus)> = Vec::new();
    while state.is_running() {
        let role = state.to_move();
        let ctx = TurnContext {
            state: &state,
            condition,
            own: parties.get(role),
            opponent: parties.get(role.opponent()),
        };
        let reply = match act(config.agent(role), ctx, chat) {
            Ok(r) => r,
            Err(_) => {
                state.fail_backend()?;
                break;
            }
        };
        let input = reply.into_turn_input(role);
        let turn = state.apply_action(input, parties)?;
        beliefs.push(match extract_beliefs(&turn.think, role, turn.index, config.extractor_backend, chat) {
            Ok(x) => (x.beliefs, BeliefStatus::Ok { dropped: x.dropped }),
            Err(e) => (Vec::new(), BeliefStatus::Unavailable { error: e.to_string() }),
        });
    }

    let usable: Vec<Option<&[Belief]>> =
        beliefs.iter().map(|(b, s)| s.is_ok().then_some(b.as_slice())).collect();
    let metrics = turn_metrics(&state.transcript, &usable, &buyer, &seller, config.top_k);
    let outcome = state.outcome(parties)?;
    let efficiency = match &outcome {
        Outcome::Deal { contract, .. } => Some(efficiency_distances(&curve, contract, &buyer, &seller)?),
        Outcome::NoDeal { .. } => None,
    };
    let turns = state
        .transcript
        .into_iter()
        .zip(beliefs)
        .zip(metrics)
        .map(|((turn, (beliefs, belief_status)), metrics)| TurnRecord { turn, beliefs, belief_status, metrics })
        .collect();
    Ok(TrialRecord {
        schema_version: RECORD_SCHEMA_VERSION,
        trial_index,
        condition,
        seed,
        turn_cap: config.turn_cap,
        top_k: config.top_k,
        extractor_backend: config.extractor_backend,
        buyer_agent: config.buyer_agent,
        seller_agent: config.seller_agent,
        buyer,
        seller,
        turns,
        outcome,
        nbs: curve.nbs,
        efficiency,
    })
}

pub fn is_backend_failure(record: &TrialRecord) -> bool {
    matches!(record.outcome, Outcome::NoDeal { reason: NoDealReason::BackendFailure })
}

/// Runs every trial of one condition in memory, in index order.
pub fn run_condition(
    config: &ExperimentConfig,
    condition: Condition,
    chat: Option<&dyn ChatBackend>,
) -> Result<Vec<TrialRecord>, RunError> {
    use crate::exec::{map_range, with_pool, Parallelism};
    let par = if config.concurrency > 1 { Parallelism::Parallel } else { Parallelism::Sequential };
    with_pool(config.concurrency, || map_range(par, config.n_trials, |i| run_trial(config, condition, i, chat)))
        .into_iter()
        .collect()
}
