//! Information conditions: who sees the opponent's ranked preferences and
//! whether the trade-plan scaffold is appended to turn prompts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Role;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    ExpAsym,
    ExpTradePlan,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::ExpAsym => "exp_asym",
            Experiment::ExpTradePlan => "exp_trade_plan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    SymmetricNone,
    BuyerInformed,
    SellerInformed,
    SymmetricFull,
    UninformedNoPlan,
    UninformedWithPlan,
    InformedNoPlan,
    InformedWithPlan,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown condition `{0}`")]
pub struct UnknownCondition(pub String);

impl Condition {
    pub const ALL: [Condition; 8] = [
        Condition::SymmetricNone,
        Condition::BuyerInformed,
        Condition::SellerInformed,
        Condition::SymmetricFull,
        Condition::UninformedNoPlan,
        Condition::UninformedWithPlan,
        Condition::InformedNoPlan,
        Condition::InformedWithPlan,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::SymmetricNone => "symmetric_none",
            Condition::BuyerInformed => "buyer_informed",
            Condition::SellerInformed => "seller_informed",
            Condition::SymmetricFull => "symmetric_full",
            Condition::UninformedNoPlan => "uninformed_no_plan",
            Condition::UninformedWithPlan => "uninformed_with_plan",
            Condition::InformedNoPlan => "informed_no_plan",
            Condition::InformedWithPlan => "informed_with_plan",
        }
    }

    pub fn experiment(self) -> Experiment {
        match self {
            Condition::SymmetricNone | Condition::BuyerInformed | Condition::SellerInformed | Condition::SymmetricFull => {
                Experiment::ExpAsym
            }
            _ => Experiment::ExpTradePlan,
        }
    }

    pub fn buyer_informed(self) -> bool {
        matches!(
            self,
            Condition::BuyerInformed | Condition::SymmetricFull | Condition::InformedNoPlan | Condition::InformedWithPlan
        )
    }

    pub fn seller_informed(self) -> bool {
        matches!(
            self,
            Condition::SellerInformed | Condition::SymmetricFull | Condition::InformedNoPlan | Condition::InformedWithPlan
        )
    }

    pub fn informed(self, role: Role) -> bool {
        match role {
            Role::Buyer => self.buyer_informed(),
            Role::Seller => self.seller_informed(),
        }
    }

    pub fn trade_plan(self) -> bool {
        matches!(self, Condition::UninformedWithPlan | Condition::InformedWithPlan)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = UnknownCondition;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownCondition(s.to_string()))
    }
}
