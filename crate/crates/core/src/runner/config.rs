//! Flat `key = value` experiment configuration.
//!
//! ```text
//! schema_version = 1
//! condition = symmetric_none, seller_informed   # or `all`, `exp_asym`, `exp_trade_plan`
//! n_trials = 100
//! master_seed = 7
//! buyer_agent = llm          # llm | conceder | accommodator
//! seller_agent = conceder
//! seller_exponent = 1
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors.

use std::fmt::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::scripted::{DEFAULT_FLOOR, EAGER, LINEAR};
use crate::agents::AgentPolicy;
use crate::backend::{LlmConfig, STUB_ENDPOINT};
use crate::beliefs::ExtractorBackend;
use crate::condition::{Condition, Experiment};
use crate::domain::Role;
use crate::metrics::DEFAULT_TOP_K;
use crate::protocol::DEFAULT_TURN_CAP;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("schema_version", "config format version; must be 1"),
    ("endpoint_url", "chat-completions URL, or `stub` for the offline backend"),
    ("model_name", "model identifier sent to the endpoint"),
    ("temperature", "sampling temperature (default 0.6)"),
    ("condition", "condition name(s), comma separated, `all`, `exp_asym` or `exp_trade_plan`"),
    ("n_trials", "trials per condition (default 100)"),
    ("master_seed", "64-bit master seed (default 0)"),
    ("turn_cap", "maximum turns per negotiation (default 40)"),
    ("K", "components in the own-gain metric (default 5)"),
    ("extractor_backend", "`annotation` (belief sidecars) or `extractor` (chat endpoint)"),
    ("concurrency", "trials run at once (default 4)"),
    ("buyer_agent", "`llm`, `conceder` or `accommodator` (default llm)"),
    ("seller_agent", "`llm`, `conceder` or `accommodator` (default llm)"),
    ("buyer_exponent", "concession exponent for a scripted buyer (default 1)"),
    ("seller_exponent", "concession exponent for a scripted seller (default 1)"),
    ("buyer_floor", "target floor for a scripted buyer (default 0.1)"),
    ("seller_floor", "target floor for a scripted seller (default 0.1)"),
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    BadValue { line: usize, key: String, message: String },
    #[error("missing schema_version")]
    MissingVersion,
    #[error("unsupported schema_version {0}")]
    UnsupportedVersion(u32),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub llm: LlmConfig,
    pub conditions: Vec<Condition>,
    pub n_trials: usize,
    pub master_seed: u64,
    pub turn_cap: usize,
    pub top_k: usize,
    pub extractor_backend: ExtractorBackend,
    pub concurrency: usize,
    pub buyer_agent: AgentPolicy,
    pub seller_agent: AgentPolicy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            llm: LlmConfig::default(),
            conditions: vec![Condition::SymmetricNone],
            n_trials: 100,
            master_seed: 0,
            turn_cap: DEFAULT_TURN_CAP,
            top_k: DEFAULT_TOP_K,
            extractor_backend: ExtractorBackend::Annotation,
            concurrency: 4,
            buyer_agent: AgentPolicy::Llm,
            seller_agent: AgentPolicy::Llm,
        }
    }
}

fn parse_conditions(v: &str) -> Result<Vec<Condition>, String> {
    match v {
        "all" => return Ok(Condition::ALL.to_vec()),
        "exp_asym" | "exp_trade_plan" => {
            let e = if v == "exp_asym" { Experiment::ExpAsym } else { Experiment::ExpTradePlan };
            return Ok(Condition::ALL.into_iter().filter(|c| c.experiment() == e).collect());
        }
        _ => {}
    }
    let mut out = Vec::new();
    for name in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let c = Condition::from_str(name).map_err(|e| e.to_string())?;
        if !out.contains(&c) {
            out.push(c);
        }
    }
    if out.is_empty() {
        return Err("no condition given".into());
    }
    Ok(out)
}

#[derive(Clone, Copy)]
struct AgentSpec {
    kind: &'static str,
    exponent: Option<f64>,
    floor: Option<f64>,
}

fn policy(spec: AgentSpec) -> AgentPolicy {
    match spec.kind {
        "conceder" => AgentPolicy::Conceder {
            exponent: spec.exponent.unwrap_or(LINEAR),
            floor: spec.floor.unwrap_or(DEFAULT_FLOOR),
        },
        "accommodator" => AgentPolicy::Accommodator {
            exponent: spec.exponent.unwrap_or(EAGER),
            floor: spec.floor.unwrap_or(DEFAULT_FLOOR),
        },
        _ => AgentPolicy::Llm,
    }
}

fn agent_fields(p: &AgentPolicy) -> (&'static str, Option<(f64, f64)>) {
    match *p {
        AgentPolicy::Llm => ("llm", None),
        AgentPolicy::Conceder { exponent, floor } => ("conceder", Some((exponent, floor))),
        AgentPolicy::Accommodator { exponent, floor } => ("accommodator", Some((exponent, floor))),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut version = None;
        let mut agents = [AgentSpec { kind: "llm", exponent: None, floor: None }; 2];
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |message: String| ConfigError::BadValue { line, key: key.to_string(), message };
            let num = |v: &str| v.parse::<f64>().map_err(|e| bad(e.to_string()));
            let int = |v: &str| v.parse::<u64>().map_err(|e| bad(e.to_string()));
            match key {
                "schema_version" => version = Some(int(value)? as u32),
                "endpoint_url" => cfg.llm.endpoint_url = value.to_string(),
                "model_name" => cfg.llm.model_name = value.to_string(),
                "temperature" => cfg.llm.temperature = num(value)?,
                "condition" => cfg.conditions = parse_conditions(value).map_err(bad)?,
                "n_trials" => cfg.n_trials = int(value)? as usize,
                "master_seed" => cfg.master_seed = int(value)?,
                "turn_cap" => cfg.turn_cap = int(value)? as usize,
                "K" => cfg.top_k = int(value)? as usize,
                "extractor_backend" => {
                    cfg.extractor_backend =
                        ExtractorBackend::parse(value).ok_or_else(|| bad("expected annotation or extractor".into()))?
                }
                "concurrency" => cfg.concurrency = int(value)? as usize,
                "buyer_agent" | "seller_agent" => {
                    let slot = usize::from(key.starts_with("seller"));
                    agents[slot].kind = match value {
                        "llm" => "llm",
                        "conceder" => "conceder",
                        "accommodator" => "accommodator",
                        _ => return Err(bad("expected llm, conceder or accommodator".into())),
                    };
                }
                "buyer_exponent" | "seller_exponent" => {
                    agents[usize::from(key.starts_with("seller"))].exponent = Some(num(value)?)
                }
                "buyer_floor" | "seller_floor" => agents[usize::from(key.starts_with("seller"))].floor = Some(num(value)?),
                _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
            }
        }
        match version {
            None => return Err(ConfigError::MissingVersion),
            Some(v) if v != CONFIG_SCHEMA_VERSION => return Err(ConfigError::UnsupportedVersion(v)),
            Some(v) => cfg.schema_version = v,
        }
        cfg.buyer_agent = policy(agents[0]);
        cfg.seller_agent = policy(agents[1]);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.conditions.is_empty() {
            return fail("no conditions");
        }
        if self.n_trials == 0 {
            return fail("n_trials must be at least 1");
        }
        if self.turn_cap < 2 {
            return fail("turn_cap must be at least 2");
        }
        if self.top_k == 0 {
            return fail("K must be at least 1");
        }
        if self.concurrency == 0 {
            return fail("concurrency must be at least 1");
        }
        if !self.llm.temperature.is_finite() || self.llm.temperature < 0.0 {
            return fail("temperature must be a non-negative number");
        }
        for p in [&self.buyer_agent, &self.seller_agent] {
            if let AgentPolicy::Conceder { exponent, floor } | AgentPolicy::Accommodator { exponent, floor } = *p {
                if !(exponent > 0.0 && exponent.is_finite()) {
                    return fail("concession exponent must be positive");
                }
                if !(0.0..1.0).contains(&floor) {
                    return fail("floor must lie in [0, 1)");
                }
            }
        }
        Ok(())
    }

    pub fn agent(&self, role: Role) -> &AgentPolicy {
        match role {
            Role::Buyer => &self.buyer_agent,
            Role::Seller => &self.seller_agent,
        }
    }

    /// Whether any part of a run talks to the chat backend.
    pub fn needs_chat(&self) -> bool {
        self.buyer_agent.needs_backend()
            || self.seller_agent.needs_backend()
            || self.extractor_backend == ExtractorBackend::Extractor
    }

    pub fn uses_stub(&self) -> bool {
        self.llm.endpoint_url == STUB_ENDPOINT
    }

    /// Canonical text form; parses back to the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "schema_version = {}", self.schema_version);
        let _ = writeln!(s, "endpoint_url = {}", self.llm.endpoint_url);
        let _ = writeln!(s, "model_name = {}", self.llm.model_name);
        let _ = writeln!(s, "temperature = {}", self.llm.temperature);
        let names: Vec<&str> = self.conditions.iter().map(|c| c.as_str()).collect();
        let _ = writeln!(s, "condition = {}", names.join(", "));
        let _ = writeln!(s, "n_trials = {}", self.n_trials);
        let _ = writeln!(s, "master_seed = {}", self.master_seed);
        let _ = writeln!(s, "turn_cap = {}", self.turn_cap);
        let _ = writeln!(s, "K = {}", self.top_k);
        let _ = writeln!(s, "extractor_backend = {}", self.extractor_backend.as_str());
        let _ = writeln!(s, "concurrency = {}", self.concurrency);
        for (role, p) in [("buyer", &self.buyer_agent), ("seller", &self.seller_agent)] {
            let (kind, params) = agent_fields(p);
            let _ = writeln!(s, "{role}_agent = {kind}");
            if let Some((e, f)) = params {
                let _ = writeln!(s, "{role}_exponent = {e}");
                let _ = writeln!(s, "{role}_floor = {f}");
            }
        }
        s
    }
}

/// Help text listing every key.
pub fn schema_help() -> String {
    let mut s = format!("configuration file: one `key = value` per line, schema_version = {CONFIG_SCHEMA_VERSION}\n");
    for (k, d) in CONFIG_KEYS {
        let _ = writeln!(s, "  {k:<18} {d}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = "schema_version = 1\ncondition = exp_trade_plan\nn_trials = 5 # few\nbuyer_agent = conceder\nbuyer_exponent = 4\nseller_agent = accommodator\nK = 3\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.conditions.len(), 4);
        assert_eq!(cfg.buyer_agent, AgentPolicy::Conceder { exponent: 4.0, floor: 0.1 });
        assert_eq!(cfg.seller_agent, AgentPolicy::Accommodator { exponent: 0.5, floor: 0.1 });
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(ExperimentConfig::parse("n_trials = 3"), Err(ConfigError::MissingVersion));
        assert!(matches!(
            ExperimentConfig::parse("schema_version = 1\nfoo = 1"),
            Err(ConfigError::UnknownKey { line: 2, .. })
        ));
        assert!(matches!(ExperimentConfig::parse("schema_version = 1\njunk"), Err(ConfigError::Syntax { line: 2 })));
        assert!(matches!(
            ExperimentConfig::parse("schema_version = 1\ncondition = nobody"),
            Err(ConfigError::BadValue { .. })
        ));
        assert_eq!(ExperimentConfig::parse("schema_version = 2"), Err(ConfigError::UnsupportedVersion(2)));
    }
}
