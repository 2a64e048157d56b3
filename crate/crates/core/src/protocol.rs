//! Alternating-offers state machine: turn order, offer resolution, phase
//! schedule, acceptance rules and outcomes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{joint_bounds, merge_autofill, Contract, PartialOffer, ResolvedOffer, Role, Term, TermValue};
use crate::utility::{normalized_utility, UtilityError, UtilityProfile};

pub const DEFAULT_TURN_CAP: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("turn {turn}: {expected:?} is to move, got {got:?}")]
    OutOfTurn { turn: usize, expected: Role, got: Role },
    #[error("negotiation already finished")]
    NotRunning,
    #[error("negotiation still running")]
    StillRunning,
    #[error(transparent)]
    Utility(#[from] UtilityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Opening,
    Exploratory,
    ProposeComplete,
    ActiveBargaining,
    Convergence,
    FinalRound,
}

/// Phase schedule keyed on the global turn counter. Turns 2-5 that already
/// have a complete offer on the table are treated as active bargaining.
pub fn phase_for(turn_index: usize, has_complete_offer: bool) -> Phase {
    match (turn_index, has_complete_offer) {
        (0 | 1, _) => Phase::Opening,
        (2..=5, false) => Phase::Exploratory,
        (_, false) => Phase::ProposeComplete,
        (2..=15, true) => Phase::ActiveBargaining,
        (16..=30, true) => Phase::Convergence,
        (_, true) => Phase::FinalRound,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionKind {
    Accept,
    Counter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    /// Always empty for ACCEPT.
    pub terms: PartialOffer,
    #[serde(default)]
    pub notes: String,
}

impl Action {
    pub fn accept() -> Self {
        Action { kind: ActionKind::Accept, terms: PartialOffer::new(), notes: String::new() }
    }

    pub fn counter(terms: PartialOffer) -> Self {
        Action { kind: ActionKind::Counter, terms, notes: String::new() }
    }

    pub fn with_notes(mut self, notes: impl Into<String>) -> Self {
        self.notes = notes.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    NoOfferToAccept,
    OutsideJointRange,
    BelowReservation { buyer: f64, seller: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TurnEvent {
    /// Parser dropped or coerced part of the action.
    Parse { message: String },
    /// A backend answer could not be parsed and was requested again.
    ParseRetry { attempt: u32, error: String },
    /// An offered value outside the offering role's own range was clamped.
    Clamped { term: Term, value: f64, clamped_to: f64 },
    /// The resolved complete offer lies outside the joint feasible range.
    InfeasibleOffer { terms: Vec<Term> },
    RejectedAccept(RejectReason),
}

/// What an agent hands to the protocol for one turn.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnInput {
    pub role: Role,
    pub dialogue: String,
    pub think: String,
    pub raw_action: String,
    pub action: Action,
    pub events: Vec<TurnEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub role: Role,
    pub dialogue: String,
    pub think: String,
    pub raw_action: String,
    pub action: Action,
    pub resolved_offer: ResolvedOffer,
    pub events: Vec<TurnEvent>,
}

impl Turn {
    pub fn accepted(&self) -> bool {
        self.action.kind == ActionKind::Accept && !self.events.iter().any(|e| matches!(e, TurnEvent::RejectedAccept(_)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoDealReason {
    TurnCap,
    BackendFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum Status {
    Running,
    Deal(Contract),
    NoDeal(NoDealReason),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Deal { contract: Contract, buyer_utility: f64, seller_utility: f64 },
    NoDeal { reason: NoDealReason },
}

impl Outcome {
    pub fn is_deal(&self) -> bool {
        matches!(self, Outcome::Deal { .. })
    }

    pub fn contract(&self) -> Option<&Contract> {
        match self {
            Outcome::Deal { contract, .. } => Some(contract),
            Outcome::NoDeal { .. } => None,
        }
    }
}

/// The two private profiles, needed to judge acceptance.
#[derive(Debug, Clone, Copy)]
pub struct Parties<'a> {
    pub buyer: &'a UtilityProfile,
    pub seller: &'a UtilityProfile,
}

impl<'a> Parties<'a> {
    pub fn new(buyer: &'a UtilityProfile, seller: &'a UtilityProfile) -> Self {
        Self { buyer, seller }
    }

    pub fn get(&self, role: Role) -> &'a UtilityProfile {
        match role {
            Role::Buyer => self.buyer,
            Role::Seller => self.seller,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegotiationState {
    pub turn_cap: usize,
    pub transcript: Vec<Turn>,
    pub offer_on_table: Option<Contract>,
    /// Latest non-empty partial proposal made before any complete offer.
    pub last_partial: Option<PartialOffer>,
    pub status: Status,
}

impl NegotiationState {
    pub fn new(turn_cap: usize) -> Self {
        Self { turn_cap, transcript: Vec::new(), offer_on_table: None, last_partial: None, status: Status::Running }
    }

    /// Index of the turn about to be played.
    pub fn next_turn(&self) -> usize {
        self.transcript.len() + 1
    }

    pub fn to_move(&self) -> Role {
        Role::for_turn(self.next_turn())
    }

    pub fn phase(&self) -> Phase {
        phase_for(self.next_turn(), self.offer_on_table.is_some())
    }

    pub fn is_running(&self) -> bool {
        self.status == Status::Running
    }

    /// Turn progress in [0, 1] for the turn about to be played.
    pub fn progress(&self) -> f64 {
        if self.turn_cap <= 1 {
            return 1.0;
        }
        ((self.next_turn() - 1) as f64 / (self.turn_cap - 1) as f64).clamp(0.0, 1.0)
    }

    /// Resolves one agent action and advances the state.
    pub fn apply_action(&mut self, input: TurnInput, parties: Parties<'_>) -> Result<&Turn, ProtocolError> {
        if !self.is_running() {
            return Err(ProtocolError::NotRunning);
        }
        let index = self.next_turn();
        let expected = Role::for_turn(index);
        if input.role != expected {
            return Err(ProtocolError::OutOfTurn { turn: index, expected, got: input.role });
        }
        let mut events = input.events;
        let mut deal = None;

        let proposal = match input.action.kind {
            ActionKind::Accept => {
                match self.check_accept(parties)? {
                    Ok(contract) => deal = Some(contract),
                    Err(reason) => events.push(TurnEvent::RejectedAccept(reason)),
                }
                PartialOffer::new()
            }
            ActionKind::Counter => clamp_to_own_range(&input.action.terms, input.role, &mut events),
        };

        let resolved = match deal {
            Some(c) => ResolvedOffer::Complete(c),
            None => {
                let resolved = merge_autofill(&proposal, self.offer_on_table.as_ref());
                match &resolved {
                    ResolvedOffer::Complete(c) => {
                        let outside: Vec<Term> = Term::CONTINUOUS
                            .into_iter()
                            .filter(|t| !joint_bounds(*t).expect("continuous").contains(c.continuous[t.index()]))
                            .collect();
                        if !outside.is_empty() && self.offer_on_table != Some(*c) {
                            events.push(TurnEvent::InfeasibleOffer { terms: outside });
                        }
                        self.offer_on_table = Some(*c);
                    }
                    ResolvedOffer::Partial(p) => {
                        if !p.is_empty() {
                            self.last_partial = Some(p.clone());
                        }
                    }
                }
                resolved
            }
        };

        self.transcript.push(Turn {
            index,
            role: input.role,
            dialogue: input.dialogue,
            think: input.think,
            raw_action: input.raw_action,
            action: input.action,
            resolved_offer: resolved,
            events,
        });
        if let Some(c) = deal {
            self.status = Status::Deal(c);
        } else if index >= self.turn_cap {
            self.status = Status::NoDeal(NoDealReason::TurnCap);
        }
        Ok(self.transcript.last().expect("just pushed"))
    }

    fn check_accept(&self, parties: Parties<'_>) -> Result<Result<Contract, RejectReason>, ProtocolError> {
        let Some(c) = self.offer_on_table else {
            return Ok(Err(RejectReason::NoOfferToAccept));
        };
        if !c.within_joint_bounds() {
            return Ok(Err(RejectReason::OutsideJointRange));
        }
        let buyer = normalized_utility(parties.buyer, &c)?;
        let seller = normalized_utility(parties.seller, &c)?;
        if buyer > 0.0 && seller > 0.0 {
            Ok(Ok(c))
        } else {
            Ok(Err(RejectReason::BelowReservation { buyer, seller }))
        }
    }

    /// Ends the negotiation because an agent backend gave up.
    pub fn fail_backend(&mut self) -> Result<(), ProtocolError> {
        if !self.is_running() {
            return Err(ProtocolError::NotRunning);
        }
        self.status = Status::NoDeal(NoDealReason::BackendFailure);
        Ok(())
    }

    pub fn outcome(&self, parties: Parties<'_>) -> Result<Outcome, ProtocolError> {
        match &self.status {
            Status::Running => Err(ProtocolError::StillRunning),
            Status::NoDeal(reason) => Ok(Outcome::NoDeal { reason: *reason }),
            Status::Deal(c) => Ok(Outcome::Deal {
                contract: *c,
                buyer_utility: normalized_utility(parties.buyer, c)?,
                seller_utility: normalized_utility(parties.seller, c)?,
            }),
        }
    }
}

/// Clamps continuous values to the offering role's own range, recording an
/// event for each change.
fn clamp_to_own_range(terms: &PartialOffer, role: Role, events: &mut Vec<TurnEvent>) -> PartialOffer {
    let mut out = terms.clone();
    for (term, value) in terms.iter() {
        if let TermValue::Number(v) = value {
            let r = term.range(role).expect("continuous range");
            let c = r.clamp(v);
            if c != v {
                events.push(TurnEvent::Clamped { term, value: v, clamped_to: c });
                out.set(term, TermValue::Number(c));
            }
        }
    }
    out
}
