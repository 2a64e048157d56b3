//! Deterministic time-dependent concession agents.
//!
//! The target own normalized utility at progress `t ∈ [0, 1]` is
//! `1 − (1 − floor)·tᵉ`. An offer on the table is accepted when it meets
//! the target; otherwise the agent proposes the contract that reaches the
//! target while giving the most to the opponent under its opponent model,
//! conceding the features that are cheapest for itself first.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::beliefs::{belief_phrase, format_sidecar};
use crate::domain::{joint_bounds, Component, Contract, PartialOffer, Role, Term, TermKind, TermValue, DIM};
use crate::protocol::{ActionKind, NegotiationState};
use crate::utility::{best_joint_contract, normalized_utility, sign_for, Direction, Tier, TierEntry, UtilityProfile};

pub const TOUGH: f64 = 4.0;
pub const LINEAR: f64 = 1.0;
pub const EAGER: f64 = 0.5;
pub const DEFAULT_FLOOR: f64 = 0.1;

/// Continuous proposals are rounded to this step, in the proposer's
/// favour.
const ROUND_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub exponent: f64,
    pub floor: f64,
}

impl Schedule {
    pub fn new(exponent: f64) -> Self {
        Self { exponent, floor: DEFAULT_FLOOR }
    }

    pub fn target(&self, t: f64) -> f64 {
        1.0 - (1.0 - self.floor) * t.clamp(0.0, 1.0).powf(self.exponent)
    }
}

/// Estimated opponent weights in the opponent's own normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct OpponentModel {
    pub weights: [f64; DIM],
}

impl OpponentModel {
    /// Equal magnitudes for every group; continuous and accessories signs
    /// from the role sign table; categorical preferences only where an
    /// option has been observed in the opponent's offers.
    pub fn uniform(opponent: Role, observed: &[Option<u8>; 5]) -> Self {
        let mut w = [0.0; DIM];
        for term in Term::ALL {
            let off = term.schema().offset;
            match term.kind() {
                TermKind::Categorical => {
                    if let Some(o) = observed[term.choice_slot().expect("categorical")] {
                        set_categorical(&mut w, term, o as usize, 1.0);
                    }
                }
                _ => w[off] = sign_for(opponent, term).expect("signed"),
            }
        }
        Self { weights: w }
    }

    /// Weights implied by a tier listing: magnitude by tier, sign by
    /// direction.
    pub fn from_tiers(tiers: &[TierEntry]) -> Self {
        Self { weights: tier_weights(tiers) }
    }

    fn gain(&self, i: usize) -> f64 {
        self.weights[i]
    }
}

fn set_categorical(w: &mut [f64; DIM], term: Term, preferred: usize, magnitude: f64) {
    let off = term.schema().offset;
    let m = term.width();
    for i in 0..m {
        w[off + i] = if i == preferred { magnitude } else { -magnitude / (m - 1) as f64 };
    }
}

/// Proxy weight vector for a tier listing (CRITICAL 1, IMPORTANT 0.6,
/// FLEXIBLE 0.25).
pub fn tier_weights(tiers: &[TierEntry]) -> [f64; DIM] {
    let mut w = [0.0; DIM];
    for e in tiers {
        let m = match e.tier {
            Tier::Critical => 1.0,
            Tier::Important => 0.6,
            Tier::Flexible => 0.25,
        };
        let off = e.group.schema().offset;
        match &e.direction {
            Direction::Increase | Direction::Include => w[off] = m,
            Direction::Decrease | Direction::Exclude => w[off] = -m,
            Direction::Choose(o) => {
                if let Some(i) = e.group.option_index_loose(o) {
                    set_categorical(&mut w, e.group, i, m);
                }
            }
        }
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Accept,
    Propose { contract: Contract, conceded: Vec<(Component, i8)> },
}

#[derive(Debug, Clone, Copy)]
struct Move {
    term: Term,
    cost: f64,
    gain: f64,
    /// Target categorical option.
    option: Option<u8>,
}

/// Contract reaching `target` own normalized utility that concedes the
/// features with the best opponent-gain per own-cost ratio first.
pub fn propose(own: &UtilityProfile, opp: &OpponentModel, target: f64) -> (Contract, Vec<(Component, i8)>) {
    let start = best_joint_contract(own);
    let scale = own.scale();
    let u0 = normalized_utility(own, &start).unwrap_or(1.0);
    let mut budget = u0 - target;
    let mut contract = start;
    let mut conceded = Vec::new();
    if budget <= 0.0 {
        return (contract, conceded);
    }

    let mut moves = Vec::new();
    for term in Term::CONTINUOUS {
        let i = term.index();
        let (w, g) = (own.weights[i], opp.gain(i));
        // only features the opponent wants moved away from our end
        if w == 0.0 || g == 0.0 || (w > 0.0) == (g > 0.0) {
            continue;
        }
        let j = joint_bounds(term).expect("continuous");
        let own_w = term.range(own.role).expect("range").width();
        let opp_w = term.range(own.role.opponent()).expect("range").width();
        moves.push(Move {
            term,
            cost: w.abs() * j.width() / own_w / scale,
            gain: g.abs() * j.width() / opp_w,
            option: None,
        });
    }
    for term in Term::CATEGORICAL {
        let off = term.schema().offset;
        let slot = term.choice_slot().expect("categorical");
        let cur = start.choices[slot] as usize;
        let Some(best) = (0..term.width()).max_by(|a, b| opp.gain(off + a).total_cmp(&opp.gain(off + b)).then(b.cmp(a)))
        else {
            continue;
        };
        let gain = opp.gain(off + best) - opp.gain(off + cur);
        if best != cur && gain > 0.0 {
            let cost = (own.weights[off + cur] - own.weights[off + best]) / scale;
            moves.push(Move { term, cost: cost.max(0.0), gain, option: Some(best as u8) });
        }
    }
    let ai = Term::Accessories.schema().offset;
    let (wa, ga) = (own.weights[ai], opp.gain(ai));
    if ga != 0.0 && (wa > 0.0) != (ga > 0.0) {
        moves.push(Move { term: Term::Accessories, cost: wa.abs() / scale, gain: ga.abs(), option: None });
    }

    let ratio = |m: &Move| if m.cost <= 0.0 { f64::INFINITY } else { m.gain / m.cost };
    moves.sort_by(|a, b| ratio(b).total_cmp(&ratio(a)).then(a.term.cmp(&b.term)));

    for m in moves {
        match m.term.kind() {
            TermKind::Continuous => {
                if budget <= 0.0 {
                    continue;
                }
                let frac = if m.cost <= 0.0 { 1.0 } else { (budget / m.cost).min(1.0) };
                let j = joint_bounds(m.term).expect("continuous");
                let i = m.term.index();
                let wants_high = own.weights[i] > 0.0;
                let raw = if wants_high { j.hi - frac * j.width() } else { j.lo + frac * j.width() };
                let v = j.clamp(round_in_favour(raw, wants_high));
                if v != start.continuous[i] {
                    contract.continuous[i] = v;
                    budget -= m.cost * frac;
                    conceded.push((Component { term: m.term, option: None }, if wants_high { -1 } else { 1 }));
                }
            }
            TermKind::Categorical => {
                if m.cost <= budget + 1e-12 {
                    let slot = m.term.choice_slot().expect("categorical");
                    contract.choices[slot] = m.option.expect("option");
                    budget -= m.cost;
                    conceded.push((Component { term: m.term, option: m.option }, 1));
                }
            }
            TermKind::Binary => {
                if m.cost <= budget + 1e-12 {
                    contract.accessories = !contract.accessories;
                    budget -= m.cost;
                    conceded.push((Component { term: m.term, option: None }, if contract.accessories { 1 } else { -1 }));
                }
            }
        }
    }
    (contract, conceded)
}

fn round_in_favour(v: f64, wants_high: bool) -> f64 {
    let steps = v / ROUND_STEP;
    let r = if wants_high { (steps - 1e-9).ceil() } else { (steps + 1e-9).floor() };
    // one decimal keeps the JSON rendering short and exact on re-parse
    (r * ROUND_STEP * 10.0).round() / 10.0
}

/// Accept-or-propose rule shared by the scripted agents and the stub.
pub fn decide(
    own: &UtilityProfile,
    opp: &OpponentModel,
    target: f64,
    accept_threshold: f64,
    offer_on_table: Option<&Contract>,
) -> Decision {
    if let Some(offer) = offer_on_table {
        if offer.within_joint_bounds() {
            if let Ok(u) = normalized_utility(own, offer) {
                if u > 0.0 && u >= accept_threshold {
                    return Decision::Accept;
                }
            }
        }
    }
    let (contract, conceded) = propose(own, opp, target);
    Decision::Propose { contract, conceded }
}

/// Categorical options the opponent put forward first, per slot.
pub fn observed_choices(state: &NegotiationState, opponent: Role) -> [Option<u8>; 5] {
    let mut seen = [None; 5];
    for turn in state.transcript.iter().filter(|t| t.role == opponent && t.action.kind == ActionKind::Counter) {
        for (slot, term) in Term::CATEGORICAL.iter().enumerate() {
            if seen[slot].is_none() {
                if let Some(TermValue::Choice(c)) = turn.action.terms.get(*term) {
                    seen[slot] = Some(c);
                }
            }
        }
    }
    seen
}

pub fn terms_json(offer: &PartialOffer) -> Value {
    Value::Array(
        offer
            .iter()
            .map(|(t, v)| {
                let (ty, value) = match (t.kind(), v) {
                    (TermKind::Continuous, TermValue::Number(x)) => {
                        (if matches!(t, Term::Price | Term::TradeIn) { "money" } else { "number" }, json!(x))
                    }
                    (TermKind::Categorical, TermValue::Choice(c)) => ("categorical", json!(t.options()[c as usize])),
                    (_, TermValue::Flag(b)) => ("boolean", json!(b)),
                    _ => ("unknown", Value::Null),
                };
                json!({"name": t.name(), "type": ty, "value": value})
            })
            .collect(),
    )
}

/// Raw reply text: reasoning trace with belief phrases and the sidecar,
/// one line of dialogue, then the JSON action.
pub fn render_reply(think_lines: &[String], beliefs: &[(Component, i8)], dialogue: &str, action: &Value) -> String {
    let mut think: Vec<String> = think_lines.to_vec();
    think.extend(beliefs.iter().map(|(c, d)| belief_phrase(*c, *d)));
    think.push(format_sidecar(beliefs));
    format!("<think>\n{}\n</think>\n{}\n{}", think.join("\n"), dialogue, action)
}

pub fn render_decision(decision: &Decision, extra_beliefs: &[(Component, i8)]) -> String {
    match decision {
        Decision::Accept => render_reply(
            &["Their offer meets what I need now.".to_string()],
            extra_beliefs,
            "That works for me. Let's close the deal.",
            &json!({"action": "ACCEPT"}),
        ),
        Decision::Propose { contract, conceded } => {
            let mut beliefs: Vec<(Component, i8)> = extra_beliefs.to_vec();
            for c in conceded {
                beliefs.retain(|(x, _)| x != &c.0);
                beliefs.push(*c);
            }
            let offer = contract.to_offer();
            render_reply(
                &["I will move on what costs me least.".to_string()],
                &beliefs,
                &format!("How about {}?", contract.describe()),
                &json!({"action": "COUNTER", "terms": terms_json(&offer), "notes": "complete proposal"}),
            )
        }
    }
}
