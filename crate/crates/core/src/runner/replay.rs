//! Re-derives a stored trial from its raw actions and checks every stored
//! value against the recomputation.

use std::fmt::Debug;

use thiserror::Error;

use crate::agents::parse::parse_response;
use crate::beliefs::{extract_beliefs, ExtractorBackend};
use crate::frontier::{compute_frontier, efficiency_distances};
use crate::metrics::recompute;
use crate::protocol::{NegotiationState, NoDealReason, Outcome, Parties, TurnEvent, TurnInput};
use crate::record::{BeliefStatus, TrialRecord};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("replay diverged at {}: {field} stored {stored} but recomputed {recomputed}", turn.map_or("trial".to_string(), |t| format!("turn {t}")))]
pub struct ReplayDivergence {
    pub turn: Option<usize>,
    pub field: String,
    pub stored: String,
    pub recomputed: String,
}

fn check<T: PartialEq + Debug>(turn: Option<usize>, field: &str, stored: &T, recomputed: &T) -> Result<(), ReplayDivergence> {
    if stored == recomputed {
        Ok(())
    } else {
        Err(ReplayDivergence {
            turn,
            field: field.to_string(),
            stored: format!("{stored:?}"),
            recomputed: format!("{recomputed:?}"),
        })
    }
}

/// Events produced by the agent side rather than the protocol.
fn agent_event(e: &TurnEvent) -> bool {
    matches!(e, TurnEvent::Parse { .. } | TurnEvent::ParseRetry { .. })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySummary {
    pub turns: usize,
    pub outcome: Outcome,
}

/// Replays under the record's own turn cap.
pub fn replay(record: &TrialRecord) -> Result<ReplaySummary, ReplayDivergence> {
    replay_with_cap(record, record.turn_cap)
}

pub fn replay_with_cap(record: &TrialRecord, turn_cap: usize) -> Result<ReplaySummary, ReplayDivergence> {
    let parties = Parties::new(&record.buyer, &record.seller);
    let mut state = NegotiationState::new(turn_cap);
    for stored in &record.turns {
        let t = &stored.turn;
        let at = Some(t.index);
        check(at, "status", &"running", &if state.is_running() { "running" } else { "finished" })?;
        if let Ok(p) = parse_response(&t.raw_action, None) {
            check(at, "action", &t.action, &p.action)?;
        }
        let input = TurnInput {
            role: t.role,
            dialogue: t.dialogue.clone(),
            think: t.think.clone(),
            raw_action: t.raw_action.clone(),
            action: t.action.clone(),
            events: t.events.iter().filter(|e| agent_event(e)).cloned().collect(),
        };
        let replayed = state.apply_action(input, parties).map_err(|e| ReplayDivergence {
            turn: at,
            field: "protocol".into(),
            stored: "accepted turn".into(),
            recomputed: e.to_string(),
        })?;
        check(at, "index", &t.index, &replayed.index)?;
        check(at, "role", &t.role, &replayed.role)?;
        check(at, "resolved_offer", &t.resolved_offer, &replayed.resolved_offer)?;
        check(at, "events", &t.events, &replayed.events)?;

        if record.extractor_backend == ExtractorBackend::Annotation {
            if let BeliefStatus::Ok { dropped } = stored.belief_status {
                let x = extract_beliefs(&t.think, t.role, t.index, ExtractorBackend::Annotation, None)
                    .expect("annotation extraction is local");
                check(at, "beliefs", &stored.beliefs, &x.beliefs)?;
                check(at, "beliefs_dropped", &dropped, &x.dropped)?;
            }
        }
    }
    if state.is_running() {
        if let Outcome::NoDeal { reason: NoDealReason::BackendFailure } = record.outcome {
            state.fail_backend().expect("running");
        } else {
            return Err(ReplayDivergence {
                turn: Some(state.next_turn()),
                field: "status".into(),
                stored: format!("{:?}", record.outcome),
                recomputed: "still running".into(),
            });
        }
    }
    let outcome = state.outcome(parties).expect("finished");
    check(None, "outcome", &record.outcome, &outcome)?;

    let fresh = recompute(record);
    for (stored, m) in record.turns.iter().zip(&fresh) {
        check(Some(stored.turn.index), "metrics", &stored.metrics, m)?;
    }
    let curve = compute_frontier(&record.buyer, &record.seller).map_err(|e| ReplayDivergence {
        turn: None,
        field: "frontier".into(),
        stored: "computable".into(),
        recomputed: e.to_string(),
    })?;
    check(None, "nbs", &record.nbs, &curve.nbs)?;
    let eff = outcome
        .contract()
        .map(|c| efficiency_distances(&curve, c, &record.buyer, &record.seller).expect("frontier computed"));
    check(None, "efficiency", &record.efficiency, &eff)?;
    Ok(ReplaySummary { turns: record.turns.len(), outcome })
}
