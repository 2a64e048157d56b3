//! Persisted per-trial record. Self-describing: analysis reads only these.

use serde::{Deserialize, Serialize};

use crate::agents::AgentPolicy;
use crate::beliefs::{Belief, ExtractorBackend};
use crate::condition::Condition;
use crate::domain::Role;
use crate::frontier::{EfficiencyReport, NashSolution};
use crate::protocol::{Outcome, Turn};
use crate::utility::UtilityProfile;

pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BeliefStatus {
    Ok { dropped: usize },
    /// Extractor failed; the turn is excluded from belief-dependent metrics.
    Unavailable { error: String },
}

impl BeliefStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, BeliefStatus::Ok { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TurnMetrics {
    /// Concession toward the believed opponent directions; absent without
    /// a prior own complete offer or without beliefs.
    pub concession_c: Option<f64>,
    /// Own gain over the K largest-weight components.
    pub own_gain_g: Option<f64>,
    pub alignment_mean: Option<f64>,
    pub mentioned_features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    #[serde(flatten)]
    pub turn: Turn,
    pub beliefs: Vec<Belief>,
    pub belief_status: BeliefStatus,
    pub metrics: TurnMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub schema_version: u32,
    pub trial_index: usize,
    pub condition: Condition,
    pub seed: u64,
    pub turn_cap: usize,
    pub top_k: usize,
    pub extractor_backend: ExtractorBackend,
    pub buyer_agent: AgentPolicy,
    pub seller_agent: AgentPolicy,
    pub buyer: UtilityProfile,
    pub seller: UtilityProfile,
    pub turns: Vec<TurnRecord>,
    pub outcome: Outcome,
    pub nbs: NashSolution,
    /// Present for deals only.
    pub efficiency: Option<EfficiencyReport>,
}

impl TrialRecord {
    pub fn profile(&self, role: Role) -> &UtilityProfile {
        match role {
            Role::Buyer => &self.buyer,
            Role::Seller => &self.seller,
        }
    }

    pub fn final_turn_index(&self) -> usize {
        self.turns.last().map_or(0, |t| t.turn.index)
    }
}
