//! Negotiating agents: prompt-driven agents backed by a chat endpoint, and
//! deterministic scripted concession agents used for baselines and tests.

pub mod parse;
pub mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ChatBackend};
use crate::condition::Condition;
use crate::domain::Role;
use crate::prompts::{bundle, PromptBundle};
use crate::protocol::{NegotiationState, TurnEvent, TurnInput};
use crate::utility::UtilityProfile;

use self::parse::{parse_response, ParsedResponse};
use self::scripted::{decide, observed_choices, render_decision, OpponentModel, Schedule};

/// Parse attempts per turn before the agent gives up.
pub const PARSE_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentPolicy {
    /// Prompted agent; the chat backend is supplied by the caller.
    Llm,
    /// Accepts once the offer meets its time-dependent target.
    Conceder { exponent: f64, floor: f64 },
    /// Concedes on the same schedule but accepts anything above the floor.
    Accommodator { exponent: f64, floor: f64 },
}

impl AgentPolicy {
    pub fn conceder(exponent: f64) -> Self {
        let s = Schedule::new(exponent);
        AgentPolicy::Conceder { exponent: s.exponent, floor: s.floor }
    }

    pub fn accommodator() -> Self {
        let s = Schedule::new(scripted::EAGER);
        AgentPolicy::Accommodator { exponent: s.exponent, floor: s.floor }
    }

    pub fn needs_backend(&self) -> bool {
        matches!(self, AgentPolicy::Llm)
    }

    pub fn label(&self) -> String {
        match self {
            AgentPolicy::Llm => "llm".into(),
            AgentPolicy::Conceder { exponent, .. } => format!("conceder(e={exponent})"),
            AgentPolicy::Accommodator { exponent, .. } => format!("accommodator(e={exponent})"),
        }
    }
}

/// Everything an agent may look at when it moves.
#[derive(Debug, Clone, Copy)]
pub struct TurnContext<'a> {
    pub state: &'a NegotiationState,
    pub condition: Condition,
    pub own: &'a UtilityProfile,
    /// Only shown to the agent when the condition informs its role.
    pub opponent: &'a UtilityProfile,
}

impl TurnContext<'_> {
    pub fn role(&self) -> Role {
        self.state.to_move()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentReply {
    pub raw: String,
    pub reasoning: Option<String>,
    pub parsed: ParsedResponse,
    pub prompt: Option<PromptBundle>,
    pub events: Vec<TurnEvent>,
}

impl AgentReply {
    pub fn into_turn_input(self, role: Role) -> TurnInput {
        let mut events = self.events;
        events.extend(self.parsed.parse_events.iter().map(|m| TurnEvent::Parse { message: m.clone() }));
        TurnInput {
            role,
            dialogue: self.parsed.dialogue,
            think: self.parsed.think,
            raw_action: self.raw,
            action: self.parsed.action,
            events,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("no chat backend configured for a prompted agent")]
    MissingBackend,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("no parseable action after {attempts} attempts")]
    Unparseable { attempts: u32, events: Vec<TurnEvent> },
}

/// One move by the agent to act in `ctx`.
pub fn act(policy: &AgentPolicy, ctx: TurnContext<'_>, backend: Option<&dyn ChatBackend>) -> Result<AgentReply, AgentError> {
    match *policy {
        AgentPolicy::Llm => act_prompted(ctx, backend.ok_or(AgentError::MissingBackend)?),
        AgentPolicy::Conceder { exponent, floor } => Ok(act_scripted(ctx, Schedule { exponent, floor }, false)),
        AgentPolicy::Accommodator { exponent, floor } => Ok(act_scripted(ctx, Schedule { exponent, floor }, true)),
    }
}

fn act_scripted(ctx: TurnContext<'_>, schedule: Schedule, accept_at_floor: bool) -> AgentReply {
    let role = ctx.role();
    let opp = OpponentModel::uniform(role.opponent(), &observed_choices(ctx.state, role.opponent()));
    let target = schedule.target(ctx.state.progress());
    let threshold = if accept_at_floor { schedule.floor } else { target };
    let decision = decide(ctx.own, &opp, target, threshold, ctx.state.offer_on_table.as_ref());
    let raw = render_decision(&decision, &[]);
    let parsed = parse_response(&raw, None).expect("scripted replies always carry an action");
    AgentReply { raw, reasoning: None, parsed, prompt: None, events: Vec::new() }
}

fn act_prompted(ctx: TurnContext<'_>, backend: &dyn ChatBackend) -> Result<AgentReply, AgentError> {
    let prompt = bundle(ctx.state, ctx.condition, ctx.own, ctx.opponent);
    let mut events = Vec::new();
    for attempt in 1..=PARSE_ATTEMPTS {
        let completion = backend.complete(&prompt.messages)?;
        match parse_response(&completion.content, completion.reasoning.as_deref()) {
            Ok(parsed) => {
                return Ok(AgentReply {
                    raw: completion.content,
                    reasoning: completion.reasoning,
                    parsed,
                    prompt: Some(prompt),
                    events,
                })
            }
            Err(e) => events.push(TurnEvent::ParseRetry { attempt, error: e.to_string() }),
        }
    }
    Err(AgentError::Unparseable { attempts: PARSE_ATTEMPTS, events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::Completion;
    use crate::prompts::ChatMessage;
    use crate::protocol::DEFAULT_TURN_CAP;
    use crate::utility::sample_profile;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Garbage(AtomicU32);

    impl ChatBackend for Garbage {
        fn complete(&self, _: &[ChatMessage]) -> Result<Completion, BackendError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(Completion { content: "no json here".into(), reasoning: None })
        }
    }

    #[test]
    fn unparseable_replies_retry_then_fail() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = sample_profile(Role::Buyer, &mut rng);
        let s = sample_profile(Role::Seller, &mut rng);
        let state = NegotiationState::new(DEFAULT_TURN_CAP);
        let ctx = TurnContext { state: &state, condition: Condition::ALL[0], own: &b, opponent: &s };
        let g = Garbage(AtomicU32::new(0));
        match act(&AgentPolicy::Llm, ctx, Some(&g)) {
            Err(AgentError::Unparseable { attempts, events }) => {
                assert_eq!(attempts, 3);
                assert_eq!(events.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(g.0.load(Ordering::SeqCst), 3);
        assert_eq!(act(&AgentPolicy::Llm, ctx, None), Err(AgentError::MissingBackend));
    }
}
