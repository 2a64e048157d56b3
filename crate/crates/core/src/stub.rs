//! Offline chat backend. Plays a linear concession persona that reads
//! everything it knows from the prompt text: its role, its own tier block,
//! the opponent intelligence block when present, the turn number and the
//! offer on the table. Belief extraction prompts are answered with a
//! keyword reading of the reasoning trace.

use serde_json::json;

use crate::agents::scripted::{decide, render_decision, render_reply, terms_json, tier_weights, OpponentModel, Schedule, LINEAR};
use crate::backend::{BackendError, ChatBackend, Completion};
use crate::beliefs::keyword_beliefs;
use crate::domain::{Component, Contract, PartialOffer, Role, Term, TermKind, TermValue};
use crate::prompts::ChatMessage;
use crate::protocol::DEFAULT_TURN_CAP;
use crate::utility::{Direction, Tier, TierEntry, UtilityProfile};

#[derive(Debug, Clone, Copy, Default)]
pub struct StubBackend {
    /// Turn cap assumed when computing the concession target.
    pub turn_cap: Option<usize>,
}

impl StubBackend {
    pub fn new() -> Self {
        Self::default()
    }
}

impl ChatBackend for StubBackend {
    fn complete(&self, messages: &[ChatMessage]) -> Result<Completion, BackendError> {
        let last = messages.last().ok_or_else(|| BackendError::Malformed("no messages".into()))?;
        if last.content.starts_with("BELIEF EXTRACTOR") {
            return Ok(Completion { content: answer_extraction(&last.content)?, reasoning: None });
        }
        let system = messages.iter().find(|m| m.role == "system").map(|m| m.content.as_str()).unwrap_or("");
        let content = answer_turn(system, &last.content, self.turn_cap.unwrap_or(DEFAULT_TURN_CAP))?;
        Ok(Completion { content, reasoning: None })
    }
}

fn answer_extraction(prompt: &str) -> Result<String, BackendError> {
    let role = if prompt.contains("reasoning of the SELLER") { Role::Seller } else { Role::Buyer };
    let think = prompt
        .split_once("REASONING:\n")
        .map(|(_, t)| t)
        .ok_or_else(|| BackendError::Malformed("extraction prompt without reasoning".into()))?;
    let items: Vec<_> = keyword_beliefs(think, role)
        .into_iter()
        .map(|(c, d)| json!({"feature": c.id(), "direction": d}))
        .collect();
    Ok(serde_json::Value::Array(items).to_string())
}

fn answer_turn(system: &str, turn: &str, cap: usize) -> Result<String, BackendError> {
    let role = if system.contains("You are a SELLER") {
        Role::Seller
    } else if system.contains("You are a BUYER") {
        Role::Buyer
    } else {
        return Err(BackendError::Malformed("prompt names no role".into()));
    };
    let own_tiers = section(system, "## YOUR PREFERENCES").map(parse_tiers).unwrap_or_default();
    if own_tiers.is_empty() {
        return Err(BackendError::Malformed("prompt has no preference block".into()));
    }
    let intel = section(turn, "INTELLIGENCE ON OPPONENT'S PREFERENCES").map(parse_tiers);
    let turn_index: usize = turn
        .split_once("(Turn ")
        .and_then(|(_, r)| r.split(')').next())
        .and_then(|n| n.trim().parse().ok())
        .unwrap_or(1);
    let table = turn
        .lines()
        .find_map(|l| l.strip_prefix("## CURRENT OFFER ON TABLE: "))
        .unwrap_or("")
        .trim();
    let current = if table.ends_with("(partial)") { None } else { parse_description(table) };
    let current = current.and_then(|o| Contract::from_offer(&o).ok());

    let own = UtilityProfile::from_weights(role, tier_weights(&own_tiers));
    let intel_beliefs: Vec<(Component, i8)> = intel
        .as_deref()
        .unwrap_or_default()
        .iter()
        .filter(|e| e.tier != Tier::Flexible)
        .filter_map(belief_from_entry)
        .collect();

    if current.is_none() && turn_index <= 2 {
        // open by naming the model only
        let model = own.preferred_options.get(&Term::Model).cloned().unwrap_or_default();
        let idx = Term::Model.option_index(&model).unwrap_or(0) as u8;
        let offer = PartialOffer::new().with(Term::Model, TermValue::Choice(idx));
        return Ok(render_reply(
            &["Start by naming the car I want.".to_string()],
            &intel_beliefs,
            &format!("Hello! I'd like to talk about the {model}."),
            &json!({"action": "COUNTER", "terms": terms_json(&offer), "notes": "opening"}),
        ));
    }

    let opp = match &intel {
        Some(tiers) if !tiers.is_empty() => OpponentModel::from_tiers(tiers),
        _ => {
            let mut seen = [None; 5];
            if let Some(c) = &current {
                seen = c.choices.map(Some);
            }
            OpponentModel::uniform(role.opponent(), &seen)
        }
    };
    let t = if cap <= 1 { 1.0 } else { ((turn_index - 1) as f64 / (cap - 1) as f64).clamp(0.0, 1.0) };
    let target = Schedule::new(LINEAR).target(t);
    let decision = decide(&own, &opp, target, target, current.as_ref());
    Ok(render_decision(&decision, &intel_beliefs))
}

/// Text from the line containing `marker` to the end.
fn section<'a>(text: &'a str, marker: &str) -> Option<&'a str> {
    text.find(marker).map(|i| &text[i..])
}

/// Reads `**TIER** (...)` headers and `  - label: direction` lines up to
/// the first line that is neither.
fn parse_tiers(text: &str) -> Vec<TierEntry> {
    let mut tier = None;
    let mut out = Vec::new();
    for line in text.lines().skip(1) {
        let l = line.trim_end();
        if let Some(t) = [Tier::Critical, Tier::Important, Tier::Flexible]
            .into_iter()
            .find(|t| l.starts_with(&format!("**{}**", t.label())))
        {
            tier = Some(t);
        } else if let (Some(t), Some(item)) = (tier, l.strip_prefix("  - ")) {
            if let Some(e) = parse_entry(t, item) {
                out.push(e);
            }
        } else if !l.is_empty() && !l.starts_with("Role:") && tier.is_some() {
            break;
        }
    }
    out
}

fn parse_entry(tier: Tier, item: &str) -> Option<TierEntry> {
    let (label, dir) = item.split_once(": ")?;
    let group = match label {
        "Price" => Term::Price,
        "Delivery Day" => Term::Delivery,
        "Down Payment" => Term::DownPayment,
        "Trade In" => Term::TradeIn,
        "Has Accessories" => Term::Accessories,
        l if l == "Model" || l.starts_with("Is ") => Term::Model,
        l if l.starts_with("Color") => Term::Color,
        l if l.starts_with("Interior") => Term::Interior,
        l if l.starts_with("Warranty") => Term::Warranty,
        l if l.starts_with("Service") => Term::Service,
        _ => return None,
    };
    let mut words = dir.split_whitespace();
    let direction = match words.next()? {
        "increase" => Direction::Increase,
        "decrease" => Direction::Decrease,
        "include" => Direction::Include,
        "exclude" => Direction::Exclude,
        "choose" => {
            let o = words.next()?;
            let i = group.option_index_loose(o)?;
            Direction::Choose(group.options()[i].to_string())
        }
        _ => return None,
    };
    Some(TierEntry { group, tier, direction, relative: 0.0 })
}

fn belief_from_entry(e: &TierEntry) -> Option<(Component, i8)> {
    let c = |option| Component { term: e.group, option };
    Some(match &e.direction {
        Direction::Increase | Direction::Include => (c(None), 1),
        Direction::Decrease | Direction::Exclude => (c(None), -1),
        Direction::Choose(o) => (c(Some(e.group.option_index(o)? as u8)), 1),
    })
}

/// Inverse of the one-line offer description.
pub fn parse_description(text: &str) -> Option<PartialOffer> {
    let mut offer = PartialOffer::new();
    for item in text.split(", ") {
        let num = |s: &str| s.trim_matches(|c: char| !c.is_ascii_digit() && c != '.').parse::<f64>().ok();
        let (term, value) = if let Some(v) = item.strip_prefix("price ") {
            (Term::Price, TermValue::Number(num(v)?))
        } else if let Some(v) = item.strip_prefix("trade-in ") {
            (Term::TradeIn, TermValue::Number(num(v)?))
        } else if let Some(v) = item.strip_prefix("delivery ") {
            (Term::Delivery, TermValue::Number(num(v)?))
        } else if let Some(v) = item.strip_prefix("down payment ") {
            (Term::DownPayment, TermValue::Number(num(v)?))
        } else if item == "accessories included" {
            (Term::Accessories, TermValue::Flag(true))
        } else if item == "no accessories" {
            (Term::Accessories, TermValue::Flag(false))
        } else {
            let (name, opt) = item.split_once(' ')?;
            let term = Term::from_name(name).filter(|t| t.kind() == TermKind::Categorical)?;
            (term, TermValue::Choice(term.option_index(opt)? as u8))
        };
        offer.set(term, value);
    }
    (!offer.is_empty()).then_some(offer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompts::system_prompt;
    use crate::utility::sample_profile;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn description_round_trip() {
        let c = Contract { continuous: [37.3, 14.0, 20.5, 8.0], choices: [1, 4, 2, 0, 1], accessories: true };
        assert_eq!(parse_description(&c.describe()), Some(c.to_offer()));
        assert_eq!(parse_description("None (you go first)"), None);
    }

    #[test]
    fn own_tiers_read_back_from_system_prompt() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for role in [Role::Buyer, Role::Seller] {
            let p = sample_profile(role, &mut rng);
            let parsed = parse_tiers(section(&system_prompt(role, &p), "## YOUR PREFERENCES").unwrap());
            let strip = |v: &[TierEntry]| v.iter().map(|e| (e.group, e.tier, e.direction.clone())).collect::<Vec<_>>();
            assert_eq!(strip(&parsed), strip(&p.tiers));
        }
    }
}
