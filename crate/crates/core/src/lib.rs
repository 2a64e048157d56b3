//! Multi-attribute bilateral negotiation environment and evaluation
//! harness: the car-purchase domain, private linear utilities, Pareto
//! frontier and Nash bargaining solution, the alternating-offers protocol,
//! prompt construction, agent policies, belief scoring, turn-level
//! strategy metrics and a seeded experiment runner.

pub mod agents;
pub mod backend;
pub mod beliefs;
pub mod condition;
pub mod domain;
pub mod exec;
pub mod frontier;
pub mod metrics;
pub mod prompts;
pub mod protocol;
pub mod record;
pub mod runner;
pub mod stub;
pub mod utility;
